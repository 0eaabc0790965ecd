// SPDX-License-Identifier: Apache-2.0
#include "test_util.h"

#include <hdrsplat/error.h>
#include <hdrsplat/pipeline.h>

#include <gtest/gtest.h>

using namespace hdrsplat;
using testutil::relErr;

namespace {

ToneMapperBank randomBank(int d, std::uint64_t seed) {
    ToneMapperBank bank = ToneMapperBank::xavier(d, seed);
    std::mt19937_64 rng(seed + 1000);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    bank.forEachMlp([&](const char *, Mlp &m) {
        for (double &p : m.params()) {
            p += u(rng);
        }
    });
    return bank;
}

double dot(const Image &a, const Image &b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        s += a.data[i] * b.data[i];
    }
    return s;
}

struct Probe {
    Image ldr3d, ldr2d, unc3d, unc2d, hdr, feature;
    double operator()(const RenderOutput &o) const {
        return dot(o.ldr3d, ldr3d) + dot(o.ldr2d, ldr2d) + dot(o.unc3d, unc3d) + dot(o.unc2d, unc2d) +
               dot(o.hdr, hdr) + dot(o.feature, feature);
    }
};

Probe randomProbe(int w, int h, int d, std::uint64_t seed) {
    return {testutil::randomImage(w, h, 3, seed, -1, 1),     testutil::randomImage(w, h, 3, seed + 1, -1, 1),
            testutil::randomImage(w, h, 1, seed + 2, -1, 1), testutil::randomImage(w, h, 1, seed + 3, -1, 1),
            testutil::randomImage(w, h, 3, seed + 4, -0.1, 0.1), testutil::randomImage(w, h, d, seed + 5, -1, 1)};
}

// Every discrete decision of a forward pass: blend lists, clamps, ReLU patterns, clips, floors.
std::vector<std::uint8_t> signature(const RenderOutput &o, const GaussianCloud &cloud, const ToneMapperBank &bank) {
    std::vector<std::uint8_t> sig;
    for (const Splat2D &s : o.cache.splats) {
        sig.push_back(static_cast<std::uint8_t>(s.gaussianIndex));
    }
    for (std::size_t p = 0; p + 1 < o.cache.record.pixelStart.size(); ++p) {
        sig.push_back(255);
        for (const BlendEntry &e : o.cache.record.pixelEntries(p)) {
            sig.push_back(static_cast<std::uint8_t>(e.splat * 2 + (e.clamped ? 1 : 0)));
        }
    }
    auto addTapes = [&](const std::array<double, 3> &lnEt, std::span<const double> f) {
        LocalToneTape lt;
        toneMapLocal(bank, lnEt, f, lt);
        UncertaintyTape ut;
        const double u = predictUncertainty(bank, lnEt, f, ut);
        for (std::size_t k = 0; k < 3; ++k) {
            for (double v : lt.global[k].hiddenPre) sig.push_back(v > 0.0);
            for (double v : lt.residual[k].hiddenPre) sig.push_back(v > 0.0);
            sig.push_back(lt.preClip[k] <= 0.0 ? 0 : (lt.preClip[k] >= 1.0 ? 2 : 1));
        }
        for (double v : ut.mlp.hiddenPre) sig.push_back(v > 0.0);
        sig.push_back(u <= kUncertaintyFloor);
    };
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        addTapes(o.cache.gaussianLnEt[i], cloud.feature(i));
    }
    for (std::size_t p = 0; p < o.hdr.pixelCount(); ++p) {
        std::array<double, 3> lnEt{};
        for (std::size_t k = 0; k < 3; ++k) {
            const double e = o.hdr.data[p * 3 + k];
            sig.push_back(e < 1e-6);
            lnEt[k] = std::log(std::max(e, 1e-6)) + o.cache.exposure.lnT;
        }
        addTapes(lnEt, o.feature.pixel(p));
    }
    return sig;
}

} // namespace

TEST(Exposure, FromTime) {
    EXPECT_EQ(ExposureContext::fromTime(1.0).lnT, 0.0);
    EXPECT_NEAR(ExposureContext::fromTime(0.25).lnT, std::log(0.25), 1e-15);
    EXPECT_THROW(ExposureContext::fromTime(0.0), InvalidArgument);
    EXPECT_THROW(ExposureContext::fromTime(-1.0), InvalidArgument);
    EXPECT_THROW(ExposureContext::fromTime(std::nan("")), InvalidArgument);
}

TEST(RenderView, EmptySceneIsConstant) {
    const int d = 3;
    const GaussianCloud cloud(0, d);
    const ToneMapperBank bank = randomBank(d, 1);
    const Camera cam = testutil::frontCamera(6, 5, 10.0);
    const auto ex = ExposureContext::fromTime(0.5);
    const RenderOutput o = renderView(cloud, bank, cam, ex);
    const std::vector<double> zeroF(d, 0.0);
    const double lg = std::log(1e-6) + ex.lnT;
    const auto c = toneMapLocal(bank, {lg, lg, lg}, zeroF);
    const double u = predictUncertainty(bank, {lg, lg, lg}, zeroF);
    for (std::size_t p = 0; p < o.hdr.pixelCount(); ++p) {
        for (std::size_t k = 0; k < 3; ++k) {
            EXPECT_EQ(o.hdr.data[p * 3 + k], 0.0);
            EXPECT_EQ(o.ldr2d.data[p * 3 + k], c[k]);
            EXPECT_EQ(o.ldr3d.data[p * 3 + k], 0.0);
        }
        EXPECT_EQ(o.unc2d.data[p], u);
        EXPECT_EQ(o.unc3d.data[p], kUncertaintyFloor);
        EXPECT_EQ(o.alpha.data[p], 0.0);
    }
}

TEST(RenderView, UnitExposureFeedsStoredLogIrradiance) {
    const GaussianCloud cloud = testutil::randomCloud(5, 2, 3);
    const ToneMapperBank bank = randomBank(2, 2);
    const RenderOutput o = renderView(cloud, bank, testutil::frontCamera(8, 8, 10.0), ExposureContext::fromTime(1.0));
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        for (std::size_t k = 0; k < 3; ++k) {
            EXPECT_EQ(o.cache.gaussianLnEt[i][k], cloud.params().logIrradiance[i * 3 + k]);
        }
    }
}

TEST(RenderView, LinearToneMapCommutesWithBlend) {
    // One large, nearly opaque Gaussian straight ahead.
    GaussianCloud cloud(1, 2);
    CloudParams &p = cloud.params();
    p.position = {0.0, 0.0, 3.0};
    p.rotation = {1.0, 0.0, 0.0, 0.0};
    p.logScale = {std::log(5.0), std::log(5.0), std::log(5.0)};
    p.opacityLogit = {logit(0.999999)};
    p.logIrradiance = {std::log(0.8), std::log(1.7), std::log(0.3)};
    const ToneMapperBank bank(2);
    const double a = 0.2, t = 0.5;
    RenderOptions opts;
    opts.toneMapOverride = [&](const std::array<double, 3> &lnEt, std::span<const double>) {
        return std::array<double, 3>{a * std::exp(lnEt[0]), a * std::exp(lnEt[1]), a * std::exp(lnEt[2])};
    };
    const Camera cam = testutil::frontCamera(5, 5, 10.0);
    const RenderOutput o = renderView(cloud, bank, cam, ExposureContext::fromTime(t), opts);
    const std::size_t centre = 2 * 5 + 2;
    ASSERT_GE(o.alpha.data[centre], 0.98);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_LT(std::abs(o.ldr3d.data[centre * 3 + k] - o.ldr2d.data[centre * 3 + k]), 1e-5);
    }
}

TEST(RenderView, RangesAndFloor) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const GaussianCloud cloud = testutil::randomCloud(30, 3, seed);
        const ToneMapperBank bank = randomBank(3, seed);
        const RenderOutput o =
            renderView(cloud, bank, testutil::frontCamera(24, 24, 20.0), ExposureContext::fromTime(0.3));
        for (double v : o.ldr3d.data) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
        for (double v : o.ldr2d.data) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
        for (double v : o.unc2d.data) {
            EXPECT_GE(v, 0.1);
        }
        for (std::size_t p = 0; p < o.unc3d.data.size(); ++p) {
            EXPECT_TRUE(std::isfinite(o.unc3d.data[p]));
            if (o.alpha.data[p] >= 0.999) {
                EXPECT_GE(o.unc3d.data[p], 0.0999);
            }
            // with background u = 0.1 the blend never drops below the floor
            EXPECT_GE(o.unc3d.data[p], 0.1 - 1e-12);
        }
    }
}

TEST(RenderView, Deterministic) {
    const GaussianCloud cloud = testutil::randomCloud(40, 4, 9);
    const ToneMapperBank bank = randomBank(4, 9);
    const Camera cam = testutil::frontCamera(32, 32, 30.0);
    const RenderOutput a = renderView(cloud, bank, cam, ExposureContext::fromTime(0.7));
    const RenderOutput b = renderView(cloud, bank, cam, ExposureContext::fromTime(0.7));
    EXPECT_EQ(a.hdr.data, b.hdr.data);
    EXPECT_EQ(a.ldr3d.data, b.ldr3d.data);
    EXPECT_EQ(a.ldr2d.data, b.ldr2d.data);
    EXPECT_EQ(a.unc3d.data, b.unc3d.data);
    EXPECT_EQ(a.unc2d.data, b.unc2d.data);
    EXPECT_EQ(a.feature.data, b.feature.data);
}

TEST(RenderView, FeatureWidthMismatchRejected) {
    const GaussianCloud cloud = testutil::randomCloud(3, 4, 1);
    EXPECT_THROW(renderView(cloud, ToneMapperBank(3), testutil::frontCamera(8, 8, 8.0), ExposureContext::fromTime(1.0)),
                 InvalidArgument);
}

TEST(RenderViewBackward, ZeroUpstreamGivesZeroGradients) {
    GaussianCloud cloud = testutil::randomCloud(6, 2, 4);
    ToneMapperBank bank = randomBank(2, 4);
    const RenderOutput o = renderView(cloud, bank, testutil::frontCamera(8, 8, 10.0), ExposureContext::fromTime(1.0));
    cloud.zeroGrad();
    bank.zeroGrad();
    const Image z3(8, 8, 3), z1(8, 8, 1), zf(8, 8, 2);
    RenderGradInputs g{&z3, &z3, &z1, &z1, &z3, &zf};
    renderViewBackward(o, g, cloud, bank);
    for (auto &grp : cloud.groups()) {
        for (double v : grp.grads) {
            EXPECT_EQ(v, 0.0) << grp.name;
        }
    }
    bank.forEachMlp([](const char *name, const Mlp &m) {
        for (double v : m.grads()) {
            EXPECT_EQ(v, 0.0) << name;
        }
    });
}

TEST(RenderViewBackward, U3dGradientReachability) {
    GaussianCloud cloud = testutil::randomCloud(6, 2, 5);
    ToneMapperBank bank = randomBank(2, 5);
    const RenderOutput o = renderView(cloud, bank, testutil::frontCamera(8, 8, 10.0), ExposureContext::fromTime(1.0));
    cloud.zeroGrad();
    bank.zeroGrad();
    const Image gu = testutil::randomImage(8, 8, 1, 6, -1, 1);
    RenderGradInputs g;
    g.unc3d = &gu;
    renderViewBackward(o, g, cloud, bank);
    bank.forEachMlp([](const char *name, const Mlp &m) {
        double s = 0.0;
        for (double v : m.grads()) {
            s += std::abs(v);
        }
        if (std::string(name) == "rho") {
            EXPECT_GT(s, 0.0);
        } else {
            EXPECT_EQ(s, 0.0) << name;
        }
    });
    auto total = [&](const std::vector<double> &v) {
        double s = 0.0;
        for (double x : v) s += std::abs(x);
        return s;
    };
    EXPECT_GT(total(cloud.grads().feature), 0.0);
    EXPECT_GT(total(cloud.grads().logIrradiance), 0.0);
    EXPECT_GT(total(cloud.grads().opacityLogit), 0.0);
    EXPECT_GT(total(cloud.grads().position), 0.0);
}

TEST(RenderViewBackward, MatchesFiniteDifferences) {
    const int w = 8, h = 8, d = 3;
    GaussianCloud cloud = testutil::randomCloud(10, d, 31, 0.5);
    ToneMapperBank bank = randomBank(d, 32);
    const Camera cam = testutil::frontCamera(w, h, 12.0);
    const auto ex = ExposureContext::fromTime(0.6);
    const Probe probe = randomProbe(w, h, d, 33);
    const RenderOutput base = renderView(cloud, bank, cam, ex);
    cloud.zeroGrad();
    bank.zeroGrad();
    RenderGradInputs g{&probe.ldr3d, &probe.ldr2d, &probe.unc3d, &probe.unc2d, &probe.hdr, &probe.feature};
    renderViewBackward(base, g, cloud, bank);
    const auto sig0 = signature(base, cloud, bank);

    const double step = 1e-4;
    int checked = 0, failed = 0;
    auto fd = [&](double &v, double analytic, const std::string &what) {
        const double o = v;
        v = o + step;
        const RenderOutput fp = renderView(cloud, bank, cam, ex);
        const bool kp = signature(fp, cloud, bank) != sig0;
        v = o - step;
        const RenderOutput fm = renderView(cloud, bank, cam, ex);
        const bool km = signature(fm, cloud, bank) != sig0;
        v = o;
        if (kp || km) {
            return;
        }
        const double num = (probe(fp) - probe(fm)) / (2 * step);
        if (std::max(std::abs(num), std::abs(analytic)) < 1e-8) {
            return;
        }
        ++checked;
        if (relErr(num, analytic) >= 1e-4) {
            ++failed;
            ADD_FAILURE() << what << " numeric " << num << " analytic " << analytic;
        }
    };
    for (auto &grp : cloud.groups()) {
        for (std::size_t i = 0; i < grp.values.size(); ++i) {
            fd(grp.values[i], grp.grads[i], grp.name);
        }
    }
    bank.forEachMlp([&](const char *name, Mlp &m) {
        for (std::size_t i = 0; i < m.parameterCount(); i += 3) {
            fd(m.params()[i], m.grads()[i], name);
        }
    });
    EXPECT_GT(checked, 300);
    EXPECT_EQ(failed, 0);
}

TEST(WhiteBalance, Identity) {
    const Image e = testutil::randomImage(4, 3, 3, 1, 0, 5);
    EXPECT_EQ(applyWhiteBalance(e, {1, 1, 1}).data, e.data);
}

TEST(WhiteBalance, RedDoubled) {
    const Image e = testutil::randomImage(4, 3, 3, 2, 0, 5);
    const Image o = applyWhiteBalance(e, {2, 1, 1});
    for (std::size_t p = 0; p < e.pixelCount(); ++p) {
        EXPECT_EQ(o.data[p * 3], 2.0 * e.data[p * 3]);
        EXPECT_EQ(o.data[p * 3 + 1], e.data[p * 3 + 1]);
        EXPECT_EQ(o.data[p * 3 + 2], e.data[p * 3 + 2]);
    }
}

TEST(WhiteBalance, LdrVariantClips) {
    Image l(1, 1, 3);
    l.data = {0.6, 0.3, 0.2};
    const Image o = applyWhiteBalanceLdr(l, {2, 1, 0.5});
    EXPECT_EQ(o.data, (std::vector<double>{1.0, 0.3, 0.1}));
}

TEST(WhiteBalance, NonPositiveFactorRejected) {
    const Image e(2, 2, 3, 1.0);
    EXPECT_THROW(applyWhiteBalance(e, {0, 1, 1}), InvalidArgument);
    EXPECT_THROW(applyWhiteBalance(e, {1, -1, 1}), InvalidArgument);
    RenderOptions opts;
    opts.whiteBalance = {1, 1, 0};
    EXPECT_THROW(renderView(GaussianCloud(1, 2), ToneMapperBank(2), testutil::frontCamera(4, 4, 4), ExposureContext::fromTime(1), opts),
                 InvalidArgument);
}

TEST(WhiteBalance, PreToneMapDiffersFromPost) {
    const GaussianCloud cloud = testutil::randomCloud(20, 2, 40);
    const ToneMapperBank bank = randomBank(2, 41);
    const Camera cam = testutil::frontCamera(16, 16, 16.0);
    const std::array<double, 3> wb{1.8, 1.0, 0.6};
    RenderOptions opts;
    opts.whiteBalance = wb;
    const RenderOutput pre = renderView(cloud, bank, cam, ExposureContext::fromTime(1.0), opts);
    const RenderOutput plain = renderView(cloud, bank, cam, ExposureContext::fromTime(1.0));
    const Image post = applyWhiteBalanceLdr(plain.ldr2d, wb);
    double diff = 0.0;
    for (std::size_t i = 0; i < post.data.size(); ++i) {
        diff = std::max(diff, std::abs(post.data[i] - pre.ldr2d.data[i]));
    }
    EXPECT_GT(diff, 1e-3);
    // the HDR image itself is exactly scaled
    const Image scaled = applyWhiteBalance(plain.hdr, wb);
    for (std::size_t i = 0; i < scaled.data.size(); ++i) {
        EXPECT_NEAR(pre.hdr.data[i], scaled.data[i], 1e-12 * std::max(1.0, scaled.data[i]));
    }
}
