// SPDX-License-Identifier: Apache-2.0
#include <hdrsplat/error.h>
#include <hdrsplat/gradcheck.h>
#include <hdrsplat/losses.h>
#include <hdrsplat/pipeline.h>
#include <hdrsplat/scenegen.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>

namespace hdrsplat {

namespace {

struct Probe {
    Camera camera;
    ExposureContext exposure;
    Image gt;
    // random weights on each raw output
    Image wHdr, wFeature, w3d, w2d, wU3d, wU2d;
    Image lgsWeight; // per-pixel 3D modulation weight, frozen at the base point
};

double dot(const Image &a, const Image &b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        s += a.data[i] * b.data[i];
    }
    return s;
}

double objective(const RenderOutput &out, const Probe &pr, double lambdaD) {
    const ReconLoss r3 = reconLoss(out.ldr3d, pr.gt, lambdaD);
    const ReconLoss r2 = reconLoss(out.ldr2d, pr.gt, lambdaD);
    double lgs = 0.0;
    for (std::size_t p = 0; p < r3.map.data.size(); ++p) {
        lgs += pr.lgsWeight.data[p] * r3.map.data[p] + (1.0 - pr.lgsWeight.data[p]) * r2.map.data[p];
    }
    lgs /= static_cast<double>(r3.map.data.size());
    return lgs + dot(out.hdr, pr.wHdr) + dot(out.feature, pr.wFeature) + dot(out.ldr3d, pr.w3d) +
           dot(out.ldr2d, pr.w2d) + dot(out.unc3d, pr.wU3d) + dot(out.unc2d, pr.wU2d);
}

void pushMlpState(std::vector<std::uint8_t> &sig, const Mlp::Tape &t) {
    for (double z : t.hiddenPre) {
        sig.push_back(z > 0.0 ? 1 : 0);
    }
}

std::uint8_t clipState(double v) { return v <= 0.0 ? 0 : (v >= 1.0 ? 2 : 1); }

void pushToneState(std::vector<std::uint8_t> &sig, const ToneMapperBank &bank, const std::array<double, 3> &lnEt,
                   std::span<const double> f) {
    LocalToneTape tt;
    toneMapLocal(bank, lnEt, f, tt);
    for (std::size_t k = 0; k < 3; ++k) {
        pushMlpState(sig, tt.global[k]);
        if (tt.residualUsed) {
            pushMlpState(sig, tt.residual[k]);
        }
        sig.push_back(clipState(tt.preClip[k]));
    }
    UncertaintyTape ut;
    predictUncertainty(bank, lnEt, f, ut);
    pushMlpState(sig, ut.mlp);
    sig.push_back(ut.preClip > kUncertaintyFloor ? 1 : 0);
}

// Every discrete decision taken by a forward pass and the loss: L1 signs, depth order, blend lists and clamps, ReLU
// patterns, clip and floor states, and the log guard on the 2D path.
std::vector<std::uint8_t> signature(const RenderOutput &out, const GaussianCloud &cloud, const ToneMapperBank &bank,
                                    const Image &gt) {
    std::vector<std::uint8_t> sig;
    // sign of the L1 residual on both paths
    for (std::size_t i = 0; i < gt.data.size(); ++i) {
        sig.push_back(out.ldr3d.data[i] > gt.data[i] ? 1 : 0);
        sig.push_back(out.ldr2d.data[i] > gt.data[i] ? 1 : 0);
    }
    const RenderCache &c = out.cache;
    auto push32 = [&](std::uint32_t v) {
        for (int b = 0; b < 4; ++b) {
            sig.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
        }
    };
    for (const Splat2D &s : c.splats) {
        push32(static_cast<std::uint32_t>(s.gaussianIndex));
    }
    for (std::size_t p = 0; p + 1 < c.record.pixelStart.size(); ++p) {
        push32(0xffffffffu);
        for (const BlendEntry &e : c.record.pixelEntries(p)) {
            push32(e.splat);
            sig.push_back(e.clamped ? 1 : 0);
        }
    }
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        pushToneState(sig, bank, c.gaussianLnEt[i], cloud.feature(i));
    }
    for (std::size_t p = 0; p < out.hdr.pixelCount(); ++p) {
        std::array<double, 3> lnEt{};
        for (std::size_t k = 0; k < 3; ++k) {
            const double e = out.hdr.data[p * 3 + k];
            sig.push_back(e > c.options.logGuard ? 1 : 0);
            lnEt[k] = std::log(std::max(e, c.options.logGuard)) + c.exposure.lnT;
        }
        pushToneState(sig, bank, lnEt, out.feature.pixel(p));
    }
    return sig;
}

Image randomImage(int w, int h, int c, std::mt19937_64 &rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Image img(w, h, c);
    for (double &v : img.data) {
        v = u(rng);
    }
    return img;
}

struct Entry {
    std::string group;
    double *value;
    double analytic;
};

} // namespace

bool GradcheckReport::passes(double medianTol, double p99Tol) const {
    return std::all_of(groups.begin(), groups.end(), [&](const GroupErrors &g) {
        return g.checked > 0 && g.median < medianTol && g.p99 < p99Tol;
    });
}

std::string GradcheckReport::table() const {
    std::string s = "group            checked  small  kink   median       p99          max\n";
    for (const GroupErrors &g : groups) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-16s %7zu %6zu %5zu   %.3e   %.3e   %.3e\n", g.name.c_str(), g.checked,
                      g.skippedSmall, g.skippedKink, g.median, g.p99, g.max);
        s += buf;
    }
    return s;
}

GradcheckReport runGradcheck(const GradcheckOptions &opts) {
    if (!(opts.step > 0.0) || opts.gaussians < 1 || opts.size < 1) {
        throw InvalidArgument("gradcheck: invalid options");
    }
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    SceneSpec spec;
    spec.gaussianCount = opts.gaussians;
    spec.width = opts.size;
    spec.height = opts.size;
    spec.focal = 1.6 * opts.size;
    spec.extent = Vec3(0.8, 0.8, 0.3);
    spec.scaleRange = {0.1, 0.3};
    spec.cameraCount = 1;
    const SyntheticScene scene = generateScene(spec, opts.seed);

    GaussianCloud cloud(scene.cloud.size(), opts.featureDim);
    {
        CloudParams &p = cloud.params();
        const CloudParams &q = scene.cloud.params();
        p.position = q.position;
        p.rotation = q.rotation;
        p.logScale = q.logScale;
        p.opacityLogit = q.opacityLogit;
        p.logIrradiance = q.logIrradiance;
        // push rotations off the unit sphere so the normalisation path is exercised
        for (double &r : p.rotation) {
            r *= 1.3;
        }
        for (double &f : p.feature) {
            f = 0.5 * normal(rng);
        }
    }
    ToneMapperBank bank = ToneMapperBank::xavier(opts.featureDim, opts.seed + 11);

    Probe pr;
    pr.camera = scene.cameras.front();
    pr.exposure = ExposureContext::fromTime(0.7);
    const int w = opts.size, h = opts.size, d = opts.featureDim;
    pr.gt = randomImage(w, h, 3, rng, 0.0, 1.0);
    const double scale = 1.0 / (w * h);
    pr.wHdr = randomImage(w, h, 3, rng, -scale, scale);
    pr.wFeature = randomImage(w, h, d, rng, -scale, scale);
    pr.w3d = randomImage(w, h, 3, rng, -scale, scale);
    pr.w2d = randomImage(w, h, 3, rng, -scale, scale);
    pr.wU3d = randomImage(w, h, 1, rng, -scale, scale);
    pr.wU2d = randomImage(w, h, 1, rng, -scale, scale);
    LossWeights lw;

    std::map<std::string, std::vector<double>> errors;
    std::map<std::string, std::size_t> small, kink;
    const std::vector<std::string> order = {"position", "rotation", "scale", "opacity", "log_irradiance",
                                            "feature",  "g",        "dg",    "rho"};

    for (const bool stage2 : {false, true}) {
        bank.residualEnabled = stage2;
        const RenderOutput base = renderView(cloud, bank, pr.camera, pr.exposure);
        pr.lgsWeight = modulationWeights(base.unc3d, base.unc2d, lw.modulation);
        const LossEvaluation ev = evaluateLosses(base, pr.gt, bank, lw);

        Image g3 = ev.grads.ldr3d, g2 = ev.grads.ldr2d;
        for (std::size_t i = 0; i < g3.data.size(); ++i) {
            g3.data[i] += pr.w3d.data[i];
            g2.data[i] += pr.w2d.data[i];
        }
        RenderGradInputs gi;
        gi.ldr3d = &g3;
        gi.ldr2d = &g2;
        gi.unc3d = &pr.wU3d;
        gi.unc2d = &pr.wU2d;
        gi.hdr = &pr.wHdr;
        gi.feature = &pr.wFeature;
        cloud.zeroGrad();
        bank.zeroGrad();
        renderViewBackward(base, gi, cloud, bank);

        std::vector<Entry> entries;
        for (auto &g : cloud.groups()) {
            for (std::size_t i = 0; i < g.values.size(); ++i) {
                entries.push_back({g.name, &g.values[i], g.grads[i]});
            }
        }
        bank.forEachMlp([&](const char *name, Mlp &m) {
            std::string group = name;
            group = group == "rho" ? "rho" : (group.rfind("dg", 0) == 0 ? "dg" : "g");
            for (std::size_t i = 0; i < m.params().size(); ++i) {
                entries.push_back({group, &m.params()[i], m.grads()[i]});
            }
        });

        const auto sig0 = signature(base, cloud, bank, pr.gt);
        for (const Entry &e : entries) {
            const double orig = *e.value;
            *e.value = orig + opts.step;
            const RenderOutput plus = renderView(cloud, bank, pr.camera, pr.exposure);
            const double fp = objective(plus, pr, lw.lambdaD);
            const bool kinkPlus = signature(plus, cloud, bank, pr.gt) != sig0;
            *e.value = orig - opts.step;
            const RenderOutput minus = renderView(cloud, bank, pr.camera, pr.exposure);
            const double fm = objective(minus, pr, lw.lambdaD);
            const bool kinkMinus = signature(minus, cloud, bank, pr.gt) != sig0;
            *e.value = orig;

            const double numeric = (fp - fm) / (2.0 * opts.step);
            const double mag = std::max(std::abs(numeric), std::abs(e.analytic));
            if (mag < opts.minMagnitude) {
                ++small[e.group];
                continue;
            }
            if (kinkPlus || kinkMinus) {
                ++kink[e.group];
                continue;
            }
            errors[e.group].push_back(std::abs(numeric - e.analytic) / mag);
        }
    }

    GradcheckReport rep;
    for (const std::string &name : order) {
        GroupErrors g;
        g.name = name;
        g.skippedSmall = small[name];
        g.skippedKink = kink[name];
        std::vector<double> v = errors[name];
        g.checked = v.size();
        if (!v.empty()) {
            std::sort(v.begin(), v.end());
            const auto at = [&](double q) {
                const double pos = q * static_cast<double>(v.size() - 1);
                const auto lo = static_cast<std::size_t>(std::floor(pos));
                const auto hi = std::min(lo + 1, v.size() - 1);
                return v[lo] + (v[hi] - v[lo]) * (pos - static_cast<double>(lo));
            };
            g.median = at(0.5);
            g.p99 = at(0.99);
            g.max = v.back();
        }
        rep.groups.push_back(g);
    }
    return rep;
}

} // namespace hdrsplat
