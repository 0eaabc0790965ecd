// SPDX-License-Identifier: Apache-2.0
#include <hdrsplat/error.h>
#include <hdrsplat/parallel.h>
#include <hdrsplat/pipeline.h>

#include <algorithm>
#include <cmath>
#include <memory>

namespace hdrsplat {

ExposureContext ExposureContext::fromTime(double t) {
    if (!(t > 0.0) || !std::isfinite(t)) {
        throw InvalidArgument("exposure time must be positive and finite");
    }
    return {t, std::log(t)};
}

namespace {

constexpr int kBandRows = 16;

std::size_t bands(int height) { return static_cast<std::size_t>((height + kBandRows - 1) / kBandRows); }

void checkWhiteBalance(const std::array<double, 3> &f) {
    for (double v : f) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw InvalidArgument("white-balance factors must be positive and finite");
        }
    }
}

std::array<double, 3> pixelLnEt(const Image &hdr, std::size_t p, double lnT, double guard) {
    std::array<double, 3> ln{};
    for (std::size_t k = 0; k < 3; ++k) {
        ln[k] = std::log(std::max(hdr.data[p * 3 + k], guard)) + lnT;
    }
    return ln;
}

} // namespace

RenderOutput renderView(const GaussianCloud &cloud, const ToneMapperBank &bank, const Camera &cam,
                        const ExposureContext &exposure, const RenderOptions &options) {
    if (cloud.featureDim() != bank.featureDim) {
        throw InvalidArgument("renderView: cloud and tone-mapper feature widths differ");
    }
    if (!(exposure.t > 0.0)) {
        throw InvalidArgument("renderView: exposure time must be positive");
    }
    cam.validate();
    checkWhiteBalance(options.whiteBalance);

    const std::size_t n = cloud.size();
    const int d = cloud.featureDim();
    const int P = 3 + 3 + d + 1;
    const auto uP = static_cast<std::size_t>(P);
    const auto ud = static_cast<std::size_t>(d);

    RenderOutput out;
    RenderCache &cache = out.cache;
    cache.exposure = exposure;
    cache.options = options;
    cache.featureDim = d;
    cache.payloadWidth = P;
    cache.residualEnabled = bank.residualEnabled;
    cache.gaussianCount = n;
    cache.camera = cam;
    cache.opacity.resize(n);
    cache.payload.assign(n * uP, 0.0);
    cache.gaussianLnEt.resize(n);

    const CloudParams &prm = cloud.params();
    std::vector<Splat2D> projected;
    projected.reserve(n);
    const std::array<double, 3> lnWb{std::log(options.whiteBalance[0]), std::log(options.whiteBalance[1]),
                                     std::log(options.whiteBalance[2])};
    LocalToneTape toneTape;
    UncertaintyTape uncTape;
    for (std::size_t i = 0; i < n; ++i) {
        cache.opacity[i] = sigmoid(prm.opacityLogit[i]);
        double *pl = &cache.payload[i * uP];
        std::array<double, 3> lnEt{};
        for (std::size_t k = 0; k < 3; ++k) {
            const double lnE = prm.logIrradiance[i * 3 + k] + lnWb[k];
            pl[k] = std::exp(lnE);
            lnEt[k] = lnE + exposure.lnT;
        }
        cache.gaussianLnEt[i] = lnEt;
        const auto f = cloud.feature(i);
        const std::array<double, 3> c = options.toneMapOverride ? options.toneMapOverride(lnEt, f)
                                                                : toneMapLocal(bank, lnEt, f, toneTape);
        for (std::size_t k = 0; k < 3; ++k) {
            pl[3 + k] = c[k];
        }
        std::copy(f.begin(), f.end(), pl + 6);
        pl[6 + ud] = predictUncertainty(bank, lnEt, f, uncTape);

        const Vec3 scale(std::exp(prm.logScale[i * 3]), std::exp(prm.logScale[i * 3 + 1]),
                         std::exp(prm.logScale[i * 3 + 2]));
        const Covariance3 cov = covarianceFromRotationScale(cloud.rotationRaw(i), scale);
        if (auto s = projectGaussian(cloud.position(i), cov, cam, options.projection)) {
            s->gaussianIndex = static_cast<int>(i);
            projected.push_back(*s);
        }
    }
    const auto order = sortSplats(projected);
    cache.splats.reserve(order.size());
    for (const std::size_t o : order) {
        cache.splats.push_back(projected[o]);
    }
    cache.background.assign(uP, 0.0);
    cache.background[6 + ud] = options.uncertaintyBackground;

    RasterInputs in{cache.splats, cache.opacity, cache.payload, P, cache.background, cam.width, cam.height};
    RasterOutput raster = rasterizeForward(in, options.raster);
    cache.record = std::move(raster.record);
    out.alpha = std::move(raster.alpha);
    out.hdr = sliceChannels(raster.color, 0, 3);
    out.ldr3d = sliceChannels(raster.color, 3, 3);
    out.feature = sliceChannels(raster.color, 6, d);
    out.unc3d = sliceChannels(raster.color, 6 + d, 1);

    // 2D path
    const int w = cam.width, h = cam.height;
    out.ldr2d = Image(w, h, 3);
    out.unc2d = Image(w, h, 1);
    parallelForChunks(bands(h), [&](std::size_t band) {
        LocalToneTape tt;
        UncertaintyTape ut;
        const int y0 = static_cast<int>(band) * kBandRows;
        const int y1 = std::min(h, y0 + kBandRows);
        for (int y = y0; y < y1; ++y) {
            for (int x = 0; x < w; ++x) {
                const std::size_t p = static_cast<std::size_t>(y) * static_cast<std::size_t>(w) +
                                      static_cast<std::size_t>(x);
                const auto lnEt = pixelLnEt(out.hdr, p, exposure.lnT, options.logGuard);
                const auto f = out.feature.pixel(p);
                const auto c = options.toneMapOverride ? options.toneMapOverride(lnEt, f)
                                                       : toneMapLocal(bank, lnEt, f, tt);
                for (std::size_t k = 0; k < 3; ++k) {
                    out.ldr2d.data[p * 3 + k] = c[k];
                }
                out.unc2d.data[p] = predictUncertainty(bank, lnEt, f, ut);
            }
        }
    });
    return out;
}

namespace {

void checkGrad(const Image *g, const Image &ref, const char *name) {
    if (g && !g->sameShape(ref)) {
        throw InvalidArgument(std::string("renderViewBackward: gradient for ") + name + " has the wrong shape");
    }
}

} // namespace

void renderViewBackward(const RenderOutput &out, const RenderGradInputs &grads, GaussianCloud &cloud,
                        ToneMapperBank &bank, const BackwardOptions &options) {
    const RenderCache &cache = out.cache;
    if (cache.gaussianCount != cloud.size() || cache.featureDim != cloud.featureDim() ||
        cache.featureDim != bank.featureDim || cache.residualEnabled != bank.residualEnabled ||
        cache.record.pixelStart.size() != out.alpha.pixelCount() + 1) {
        throw InvalidArgument("renderViewBackward: render output does not match the cloud or tone mappers");
    }
    if (cache.options.toneMapOverride) {
        throw InvalidArgument("renderViewBackward: tone-map overrides are forward-only");
    }
    checkGrad(grads.ldr3d, out.ldr3d, "I3d");
    checkGrad(grads.ldr2d, out.ldr2d, "I2d");
    checkGrad(grads.unc3d, out.unc3d, "U3d");
    checkGrad(grads.unc2d, out.unc2d, "U2d");
    checkGrad(grads.hdr, out.hdr, "E");
    checkGrad(grads.feature, out.feature, "F");
    if (options.uncertaintyOnly && (grads.ldr3d || grads.ldr2d || grads.hdr || grads.feature)) {
        throw InvalidArgument("renderViewBackward: uncertainty-only pass accepts only U3d/U2d gradients");
    }

    const int w = out.alpha.width, h = out.alpha.height;
    const int d = cache.featureDim;
    const auto ud = static_cast<std::size_t>(d);
    const int P = cache.payloadWidth;
    const auto uP = static_cast<std::size_t>(P);
    const double lnT = cache.exposure.lnT;
    const double guard = cache.options.logGuard;
    const bool uncInputs = !options.uncertaintyOnly;
    const bool uncFeatures = !options.uncertaintyOnly || options.uncertaintyFeatureGrad;

    // Per-pixel gradient on the blended payload [E, I3d, F, U3d].
    Image gradPayload(w, h, P);
    const std::size_t nb = bands(h);
    std::vector<BankGrads> bandGrads(nb, BankGrads(bank));
    parallelForChunks(nb, [&](std::size_t band) {
        BankGrads &bg = bandGrads[band];
        LocalToneTape tt;
        UncertaintyTape ut;
        std::vector<double> gF(ud), gFu(ud);
        const int y0 = static_cast<int>(band) * kBandRows;
        const int y1 = std::min(h, y0 + kBandRows);
        for (int y = y0; y < y1; ++y) {
            for (int x = 0; x < w; ++x) {
                const std::size_t p = static_cast<std::size_t>(y) * static_cast<std::size_t>(w) +
                                      static_cast<std::size_t>(x);
                double *gp = &gradPayload.data[p * uP];
                if (grads.hdr) {
                    for (std::size_t k = 0; k < 3; ++k) {
                        gp[k] += grads.hdr->data[p * 3 + k];
                    }
                }
                if (grads.ldr3d) {
                    for (std::size_t k = 0; k < 3; ++k) {
                        gp[3 + k] += grads.ldr3d->data[p * 3 + k];
                    }
                }
                if (grads.feature) {
                    for (std::size_t j = 0; j < ud; ++j) {
                        gp[6 + j] += grads.feature->data[p * ud + j];
                    }
                }
                if (grads.unc3d) {
                    gp[6 + ud] += grads.unc3d->data[p];
                }

                const bool has2d = grads.ldr2d != nullptr;
                const bool hasU2 = grads.unc2d != nullptr && grads.unc2d->data[p] != 0.0;
                if (!has2d && !hasU2) {
                    continue;
                }
                const auto lnEt = pixelLnEt(out.hdr, p, lnT, guard);
                const auto f = out.feature.pixel(p);
                std::array<double, 3> gLn{0.0, 0.0, 0.0};
                std::fill(gF.begin(), gF.end(), 0.0);
                if (has2d) {
                    const std::array<double, 3> gy{grads.ldr2d->data[p * 3], grads.ldr2d->data[p * 3 + 1],
                                                   grads.ldr2d->data[p * 3 + 2]};
                    toneMapLocal(bank, lnEt, f, tt);
                    toneMapLocalBackward(bank, tt, gy, bg, gLn, gF);
                }
                if (hasU2) {
                    predictUncertainty(bank, lnEt, f, ut);
                    std::array<double, 3> gLnU{0.0, 0.0, 0.0};
                    predictUncertaintyBackward(bank, ut, grads.unc2d->data[p], bg, uncInputs ? &gLnU : nullptr,
                                               uncFeatures ? std::span<double>(gFu) : std::span<double>());
                    for (std::size_t k = 0; k < 3; ++k) {
                        gLn[k] += gLnU[k];
                    }
                    if (uncFeatures) {
                        for (std::size_t j = 0; j < ud; ++j) {
                            gF[j] += gFu[j];
                        }
                    }
                }
                for (std::size_t k = 0; k < 3; ++k) {
                    const double e = out.hdr.data[p * 3 + k];
                    if (e > guard) {
                        gp[k] += gLn[k] / e;
                    }
                }
                for (std::size_t j = 0; j < ud; ++j) {
                    gp[6 + j] += gF[j];
                }
            }
        }
    });
    BankGrads total(bank);
    for (const BankGrads &bg : bandGrads) {
        total.add(bg);
    }

    RasterInputs in{cache.splats, cache.opacity, cache.payload, P, cache.background, w, h};
    const std::unique_ptr<bool[]> mask(new bool[uP]);
    std::fill(mask.get(), mask.get() + uP, !options.uncertaintyOnly);
    const RasterGrads rg =
        rasterizeBackward(gradPayload, cache.record, in, std::span<const bool>(mask.get(), uP));

    CloudParams &cg = cloud.grads();
    const CloudParams &prm = cloud.params();
    LocalToneTape tt;
    UncertaintyTape ut;
    std::vector<double> gF(ud), gFu(ud);
    for (std::size_t i = 0; i < cache.gaussianCount; ++i) {
        const double *g = &rg.payload[i * uP];
        const double *pl = &cache.payload[i * uP];
        const auto f = cloud.feature(i);
        const auto &lnEt = cache.gaussianLnEt[i];
        std::array<double, 3> gLn{0.0, 0.0, 0.0};
        // e = exp(log_irradiance + ln wb)
        for (std::size_t k = 0; k < 3; ++k) {
            gLn[k] += g[k] * pl[k];
        }
        const std::array<double, 3> gc{g[3], g[4], g[5]};
        if (gc[0] != 0.0 || gc[1] != 0.0 || gc[2] != 0.0) {
            toneMapLocal(bank, lnEt, f, tt);
            std::array<double, 3> gLnC{};
            toneMapLocalBackward(bank, tt, gc, total, gLnC, gF);
            for (std::size_t k = 0; k < 3; ++k) {
                gLn[k] += gLnC[k];
            }
            for (std::size_t j = 0; j < ud; ++j) {
                cg.feature[i * ud + j] += gF[j];
            }
        }
        for (std::size_t j = 0; j < ud; ++j) {
            cg.feature[i * ud + j] += g[6 + j];
        }
        const double gu = g[6 + ud];
        if (gu != 0.0) {
            predictUncertainty(bank, lnEt, f, ut);
            std::array<double, 3> gLnU{0.0, 0.0, 0.0};
            predictUncertaintyBackward(bank, ut, gu, total, uncInputs ? &gLnU : nullptr,
                                       uncFeatures ? std::span<double>(gFu) : std::span<double>());
            for (std::size_t k = 0; k < 3; ++k) {
                gLn[k] += gLnU[k];
            }
            if (uncFeatures) {
                for (std::size_t j = 0; j < ud; ++j) {
                    cg.feature[i * ud + j] += gFu[j];
                }
            }
        }
        for (std::size_t k = 0; k < 3; ++k) {
            cg.logIrradiance[i * 3 + k] += gLn[k];
        }
        const double a = cache.opacity[i];
        cg.opacityLogit[i] += rg.opacity[i] * a * (1.0 - a);
    }

    for (std::size_t s = 0; s < cache.splats.size(); ++s) {
        const Vec2 &gm = rg.mean2d[s];
        const Mat2 &gc = rg.cov2d[s];
        if (gm.isZero(0.0) && gc.isZero(0.0)) {
            continue;
        }
        const auto i = static_cast<std::size_t>(cache.splats[s].gaussianIndex);
        const Vec3 scale(std::exp(prm.logScale[i * 3]), std::exp(prm.logScale[i * 3 + 1]),
                         std::exp(prm.logScale[i * 3 + 2]));
        const Quaternion q = cloud.rotationRaw(i);
        const Covariance3 cov = covarianceFromRotationScale(q, scale);
        const ProjectionGrad pg = projectGaussianBackward(cloud.position(i), cov, cache.camera, gm, gc);
        const CovarianceGrad cvg = covarianceFromRotationScaleBackward(q, scale, pg.cov);
        for (std::size_t k = 0; k < 3; ++k) {
            cg.position[i * 3 + k] += pg.mean[static_cast<Eigen::Index>(k)];
            cg.logScale[i * 3 + k] += cvg.scale[static_cast<Eigen::Index>(k)] * scale[static_cast<Eigen::Index>(k)];
        }
        cg.rotation[i * 4] += cvg.rotation.w;
        cg.rotation[i * 4 + 1] += cvg.rotation.x;
        cg.rotation[i * 4 + 2] += cvg.rotation.y;
        cg.rotation[i * 4 + 3] += cvg.rotation.z;
    }
    total.addInto(bank);
}

Image applyWhiteBalance(const Image &hdr, const std::array<double, 3> &factors) {
    checkWhiteBalance(factors);
    if (hdr.channels != 3) {
        throw InvalidArgument("applyWhiteBalance: expected a 3-channel image");
    }
    Image out = hdr;
    for (std::size_t p = 0; p < out.pixelCount(); ++p) {
        for (std::size_t k = 0; k < 3; ++k) {
            out.data[p * 3 + k] *= factors[k];
        }
    }
    return out;
}

Image applyWhiteBalanceLdr(const Image &ldr, const std::array<double, 3> &factors) {
    Image out = applyWhiteBalance(ldr, factors);
    for (double &v : out.data) {
        v = std::clamp(v, 0.0, 1.0);
    }
    return out;
}

} // namespace hdrsplat
