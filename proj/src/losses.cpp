// SPDX-License-Identifier: Apache-2.0
#include <hdrsplat/error.h>
#include <hdrsplat/losses.h>

#include <cmath>

namespace hdrsplat {

void LossWeights::validate() const {
    if (!(lambdaD >= 0.0 && lambdaD <= 1.0)) {
        throw InvalidArgument("lambda_d must lie in [0, 1]");
    }
    if (!(lambdaU >= 0.0) || !(lambdaE >= 0.0)) {
        throw InvalidArgument("lambda_u and lambda_e must be non-negative");
    }
    if (beta && !(*beta >= 0.0 && *beta <= 1.0)) {
        throw InvalidArgument("beta must lie in [0, 1]");
    }
}

namespace {

void requireMap(const Image &m, const Image &ref, const char *what) {
    if (m.width != ref.width || m.height != ref.height || m.channels != 1) {
        throw InvalidArgument(std::string(what) + ": per-pixel map shape mismatch");
    }
}

double mean(const Image &m) {
    double s = 0.0;
    for (double v : m.data) {
        s += v;
    }
    return m.data.empty() ? 0.0 : s / static_cast<double>(m.data.size());
}

} // namespace

ReconLoss reconLoss(const Image &img, const Image &gt, double wD) {
    requireSameShape(img, gt, "reconLoss");
    ReconLoss out;
    const Image ssim = ssimMap(img, gt);
    out.dssim = Image(img.width, img.height, 1);
    out.map = Image(img.width, img.height, 1);
    const std::size_t n = img.pixelCount();
    const auto C = static_cast<std::size_t>(img.channels);
    for (std::size_t p = 0; p < n; ++p) {
        double l1 = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            l1 += std::abs(img.data[p * C + c] - gt.data[p * C + c]);
        }
        l1 /= static_cast<double>(C);
        out.dssim.data[p] = 0.5 * (1.0 - ssim.data[p]);
        out.map.data[p] = wD * out.dssim.data[p] + (1.0 - wD) * l1;
    }
    out.value = mean(out.map);
    return out;
}

Image reconLossBackward(const Image &img, const Image &gt, double wD, const Image &pixelWeights) {
    requireSameShape(img, gt, "reconLossBackward");
    requireMap(pixelWeights, img, "reconLossBackward");
    Image gradSsim(img.width, img.height, 1);
    for (std::size_t p = 0; p < gradSsim.data.size(); ++p) {
        gradSsim.data[p] = -0.5 * wD * pixelWeights.data[p];
    }
    Image out = wD != 0.0 ? ssimMapBackward(img, gt, gradSsim) : Image(img.width, img.height, img.channels);
    const auto C = static_cast<std::size_t>(img.channels);
    const double l1Scale = (1.0 - wD) / static_cast<double>(C);
    for (std::size_t p = 0; p < img.pixelCount(); ++p) {
        for (std::size_t c = 0; c < C; ++c) {
            const double diff = img.data[p * C + c] - gt.data[p * C + c];
            const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
            out.data[p * C + c] += pixelWeights.data[p] * l1Scale * sign;
        }
    }
    return out;
}

double uncertaintyLoss(const Image &dssim, const Image &unc, double lambdaU) {
    requireMap(dssim, unc, "uncertaintyLoss");
    requireMap(unc, dssim, "uncertaintyLoss");
    double s = 0.0;
    for (std::size_t p = 0; p < unc.data.size(); ++p) {
        const double u = unc.data[p];
        s += dssim.data[p] / (2.0 * u * u) + lambdaU * std::log(u);
    }
    return unc.data.empty() ? 0.0 : s / static_cast<double>(unc.data.size());
}

Image uncertaintyLossBackward(const Image &dssim, const Image &unc, double lambdaU) {
    requireMap(dssim, unc, "uncertaintyLossBackward");
    Image g(unc.width, unc.height, 1);
    const double inv = unc.data.empty() ? 0.0 : 1.0 / static_cast<double>(unc.data.size());
    for (std::size_t p = 0; p < unc.data.size(); ++p) {
        const double u = unc.data[p];
        g.data[p] = inv * (-dssim.data[p] / (u * u * u) + lambdaU / u);
    }
    return g;
}

Image modulationWeights(const Image &unc3d, const Image &unc2d, ModulationMode mode) {
    requireMap(unc3d, unc2d, "modulationWeights");
    requireMap(unc2d, unc3d, "modulationWeights");
    Image w(unc3d.width, unc3d.height, 1);
    if (mode == ModulationMode::PerImage) {
        const double u3 = mean(unc3d), u2 = mean(unc2d);
        const double v = (u2 * u2) / (u3 * u3 + u2 * u2);
        std::fill(w.data.begin(), w.data.end(), v);
        return w;
    }
    for (std::size_t p = 0; p < w.data.size(); ++p) {
        const double a = unc3d.data[p] * unc3d.data[p];
        const double b = unc2d.data[p] * unc2d.data[p];
        w.data[p] = b / (a + b);
    }
    return w;
}

double jointModulatedLoss(const Image &map3d, const Image &map2d, const Image &unc3d, const Image &unc2d,
                          ModulationMode mode) {
    requireMap(map3d, unc3d, "jointModulatedLoss");
    requireMap(map2d, unc3d, "jointModulatedLoss");
    const Image w = modulationWeights(unc3d, unc2d, mode);
    double s = 0.0;
    for (std::size_t p = 0; p < w.data.size(); ++p) {
        s += w.data[p] * map3d.data[p] + (1.0 - w.data[p]) * map2d.data[p];
    }
    return w.data.empty() ? 0.0 : s / static_cast<double>(w.data.size());
}

Image mergeLdr(const Image &ldr3d, const Image &ldr2d, const Image &unc3d, const Image &unc2d) {
    requireSameShape(ldr3d, ldr2d, "mergeLdr");
    requireMap(unc3d, ldr3d, "mergeLdr");
    requireMap(unc2d, ldr3d, "mergeLdr");
    Image out(ldr3d.width, ldr3d.height, ldr3d.channels);
    const auto C = static_cast<std::size_t>(ldr3d.channels);
    for (std::size_t p = 0; p < ldr3d.pixelCount(); ++p) {
        const double a = unc3d.data[p] * unc3d.data[p];
        const double b = unc2d.data[p] * unc2d.data[p];
        const double w = b / (a + b);
        // interpolation form: identical inputs come back unchanged
        for (std::size_t c = 0; c < C; ++c) {
            const double i2 = ldr2d.data[p * C + c];
            out.data[p * C + c] = i2 + w * (ldr3d.data[p * C + c] - i2);
        }
    }
    return out;
}

LossReport totalLoss(const LossComponents &parts, const LossWeights &weights) {
    LossReport r;
    r.l3d = parts.l3d;
    r.l2d = parts.l2d;
    r.l3dUnc = parts.l3dUnc;
    r.l2dUnc = parts.l2dUnc;
    r.le = parts.le;
    r.lgs = weights.beta ? (*weights.beta * parts.l3d + (1.0 - *weights.beta) * parts.l2d) : parts.lgs;
    r.lunc = weights.uncertaintyLoss ? parts.l3dUnc + parts.l2dUnc : 0.0;
    r.total = r.lgs + r.lunc + (weights.unitExposureLoss ? weights.lambdaE * parts.le : 0.0);
    return r;
}

LossEvaluation evaluateLosses(const RenderOutput &render, const Image &gt, const ToneMapperBank &bank,
                              const LossWeights &weights) {
    weights.validate();
    requireSameShape(render.ldr3d, gt, "evaluateLosses");
    const ReconLoss r3 = reconLoss(render.ldr3d, gt, weights.lambdaD);
    const ReconLoss r2 = reconLoss(render.ldr2d, gt, weights.lambdaD);

    LossComponents parts;
    parts.l3d = r3.value;
    parts.l2d = r2.value;
    const Image w = modulationWeights(render.unc3d, render.unc2d, weights.modulation);
    parts.lgs = jointModulatedLoss(r3.map, r2.map, render.unc3d, render.unc2d, weights.modulation);
    parts.l3dUnc = uncertaintyLoss(r3.dssim, render.unc3d, weights.lambdaU);
    parts.l2dUnc = uncertaintyLoss(r2.dssim, render.unc2d, weights.lambdaU);
    parts.le = unitExposureLoss(bank);

    LossEvaluation ev;
    ev.report = totalLoss(parts, weights);
    ev.report.dssim3d = r3.dssim;
    ev.report.dssim2d = r2.dssim;
    ev.report.weight3d = w;

    const double inv = 1.0 / static_cast<double>(gt.pixelCount());
    Image w3(gt.width, gt.height, 1), w2(gt.width, gt.height, 1);
    for (std::size_t p = 0; p < w.data.size(); ++p) {
        if (weights.beta) {
            w3.data[p] = *weights.beta * inv;
            w2.data[p] = (1.0 - *weights.beta) * inv;
        } else {
            w3.data[p] = w.data[p] * inv;
            w2.data[p] = (1.0 - w.data[p]) * inv;
        }
    }
    ev.grads.ldr3d = reconLossBackward(render.ldr3d, gt, weights.lambdaD, w3);
    ev.grads.ldr2d = reconLossBackward(render.ldr2d, gt, weights.lambdaD, w2);
    if (weights.uncertaintyLoss) {
        ev.grads.unc3d = uncertaintyLossBackward(r3.dssim, render.unc3d, weights.lambdaU);
        ev.grads.unc2d = uncertaintyLossBackward(r2.dssim, render.unc2d, weights.lambdaU);
    } else {
        ev.grads.unc3d = Image(gt.width, gt.height, 1);
        ev.grads.unc2d = Image(gt.width, gt.height, 1);
    }
    return ev;
}

} // namespace hdrsplat
