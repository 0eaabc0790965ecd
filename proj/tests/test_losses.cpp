// SPDX-License-Identifier: Apache-2.0
#include "test_util.h"

#include <hdrsplat/error.h>
#include <hdrsplat/losses.h>

#include <gtest/gtest.h>

using namespace hdrsplat;
using testutil::relErr;

namespace {

double mean(const Image &m) {
    double s = 0.0;
    for (double v : m.data) s += v;
    return s / static_cast<double>(m.data.size());
}

Image constant(int w, int h, int c, double v) { return Image(w, h, c, v); }

double total(const std::vector<double> &v) {
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s;
}

} // namespace

TEST(Ssim, SelfSimilarityIsOne) {
    const Image a = testutil::randomImage(20, 17, 3, 1);
    for (double v : ssimMap(a, a).data) {
        EXPECT_NEAR(v, 1.0, 1e-12);
    }
}

TEST(Ssim, ConstantImagesClosedForm) {
    const double c1 = 1e-4;
    const Image m = ssimMap(constant(16, 16, 3, 0.0), constant(16, 16, 3, 1.0));
    for (double v : m.data) {
        EXPECT_NEAR(v, c1 / (1.0 + c1), 1e-12);
    }
    EXPECT_NEAR(c1 / (1.0 + c1), 9.999e-5, 1e-8);
}

TEST(Ssim, Symmetric) {
    const Image a = testutil::randomImage(15, 13, 3, 2);
    const Image b = testutil::randomImage(15, 13, 3, 3);
    const Image ab = ssimMap(a, b), ba = ssimMap(b, a);
    for (std::size_t i = 0; i < ab.data.size(); ++i) {
        EXPECT_NEAR(ab.data[i], ba.data[i], 1e-14);
        EXPECT_GE(ab.data[i], -1.0);
        EXPECT_LE(ab.data[i], 1.0);
    }
}

TEST(Ssim, ShapeMismatchRejected) {
    EXPECT_THROW(ssimMap(Image(4, 4, 3), Image(4, 5, 3)), InvalidArgument);
}

TEST(Ssim, ReflectIndex) {
    EXPECT_EQ(reflectIndex(-1, 10), 1);
    EXPECT_EQ(reflectIndex(-3, 10), 3);
    EXPECT_EQ(reflectIndex(10, 10), 8);
    EXPECT_EQ(reflectIndex(4, 10), 4);
}

// Brute-force SSIM at a single pixel with an explicit Gaussian window and reflect padding.
TEST(Ssim, MatchesDirectWindowedEvaluation) {
    const int w = 14, h = 12;
    const Image a = testutil::randomImage(w, h, 1, 4);
    const Image b = testutil::randomImage(w, h, 1, 5);
    const Image m = ssimMap(a, b);
    std::vector<double> g(11);
    double gs = 0.0;
    for (int i = 0; i < 11; ++i) {
        g[static_cast<std::size_t>(i)] = std::exp(-(i - 5) * (i - 5) / (2 * 1.5 * 1.5));
        gs += g[static_cast<std::size_t>(i)];
    }
    for (double &v : g) v /= gs;
    auto refl = [](int i, int n) { return i < 0 ? -i : (i >= n ? 2 * n - 2 - i : i); };
    for (int y : {0, 5, 11}) {
        for (int x : {0, 7, 13}) {
            double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
            for (int dy = -5; dy <= 5; ++dy) {
                for (int dx = -5; dx <= 5; ++dx) {
                    const double wt = g[static_cast<std::size_t>(dx + 5)] * g[static_cast<std::size_t>(dy + 5)];
                    const double va = a.at(refl(x + dx, w), refl(y + dy, h));
                    const double vb = b.at(refl(x + dx, w), refl(y + dy, h));
                    ma += wt * va;
                    mb += wt * vb;
                    saa += wt * va * va;
                    sbb += wt * vb * vb;
                    sab += wt * va * vb;
                }
            }
            const double va = saa - ma * ma, vb = sbb - mb * mb, cab = sab - ma * mb;
            const double c1 = 1e-4, c2 = 9e-4;
            const double s = (2 * ma * mb + c1) * (2 * cab + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            EXPECT_NEAR(m.at(x, y), s, 1e-12);
        }
    }
}

TEST(Ssim, BackwardMatchesFiniteDifferences) {
    Image a = testutil::randomImage(12, 11, 2, 6);
    const Image b = testutil::randomImage(12, 11, 2, 7);
    const Image gm = testutil::randomImage(12, 11, 1, 8, -1, 1);
    const Image ga = ssimMapBackward(a, b, gm);
    auto f = [&] {
        const Image m = ssimMap(a, b);
        double s = 0.0;
        for (std::size_t i = 0; i < m.data.size(); ++i) s += m.data[i] * gm.data[i];
        return s;
    };
    const double hstep = 1e-6;
    for (std::size_t i = 0; i < a.data.size(); i += 5) {
        const double o = a.data[i];
        a.data[i] = o + hstep;
        const double fp = f();
        a.data[i] = o - hstep;
        const double fm = f();
        a.data[i] = o;
        EXPECT_LT(relErr((fp - fm) / (2 * hstep), ga.data[i]), 1e-5) << i;
    }
}

TEST(ReconLoss, ZeroOnEquality) {
    const Image a = testutil::randomImage(16, 16, 3, 9);
    EXPECT_NEAR(reconLoss(a, a, 0.2).value, 0.0, 1e-14);
}

TEST(ReconLoss, PerturbationIsPositive) {
    const Image a = testutil::randomImage(16, 16, 3, 9);
    Image b = a;
    b.data[100] += 0.01;
    EXPECT_GT(reconLoss(b, a, 0.2).value, 0.0);
}

TEST(ReconLoss, PureL1WhenWeightZero) {
    const Image a = testutil::randomImage(10, 9, 3, 10);
    const Image b = testutil::randomImage(10, 9, 3, 11);
    double mae = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) mae += std::abs(a.data[i] - b.data[i]);
    mae /= static_cast<double>(a.data.size());
    EXPECT_NEAR(reconLoss(a, b, 0.0).value, mae, 1e-14);
}

TEST(ReconLoss, ConstantImagesExample) {
    const double c1 = 1e-4;
    const ReconLoss r = reconLoss(constant(16, 16, 3, 0.0), constant(16, 16, 3, 1.0), 0.2);
    EXPECT_NEAR(r.value, 0.2 * (1.0 - c1 / (1.0 + c1)) / 2.0 + 0.8, 1e-12);
    EXPECT_NEAR(r.value, 0.89999, 1e-5);
    EXPECT_NEAR(r.dssim.data[0], (1.0 - c1 / (1.0 + c1)) / 2.0, 1e-12);
}

TEST(ReconLoss, BackwardMatchesFiniteDifferences) {
    Image a = testutil::randomImage(12, 10, 3, 12, 0.05, 0.95);
    const Image gt = testutil::randomImage(12, 10, 3, 13);
    const Image pw = testutil::randomImage(12, 10, 1, 14, 0.0, 1.0);
    const Image ga = reconLossBackward(a, gt, 0.2, pw);
    auto f = [&] {
        const ReconLoss r = reconLoss(a, gt, 0.2);
        double s = 0.0;
        for (std::size_t i = 0; i < r.map.data.size(); ++i) s += r.map.data[i] * pw.data[i];
        return s;
    };
    const double hstep = 1e-5;
    for (std::size_t i = 0; i < a.data.size(); i += 7) {
        if (std::abs(a.data[i] - gt.data[i]) < 1e-4) continue;
        const double o = a.data[i];
        a.data[i] = o + hstep;
        const double fp = f();
        a.data[i] = o - hstep;
        const double fm = f();
        a.data[i] = o;
        EXPECT_LT(relErr((fp - fm) / (2 * hstep), ga.data[i]), 1e-5) << i;
    }
}

TEST(UncertaintyLoss, ZeroExample) {
    EXPECT_EQ(uncertaintyLoss(constant(4, 4, 1, 0.0), constant(4, 4, 1, 1.0), 0.5), 0.0);
}

TEST(UncertaintyLoss, GradientDescentReachesStationaryPoint) {
    const double d0 = 0.08, lu = 0.5;
    const Image dssim = constant(3, 3, 1, d0);
    Image u = constant(3, 3, 1, 1.0);
    for (int it = 0; it < 20000; ++it) {
        const Image g = uncertaintyLossBackward(dssim, u, lu);
        for (std::size_t i = 0; i < u.data.size(); ++i) {
            // the backward is a per-pixel mean, so undo the 1/N
            u.data[i] -= 0.05 * g.data[i] * static_cast<double>(u.data.size());
        }
    }
    const double expected = std::sqrt(d0 / lu);
    for (double v : u.data) {
        EXPECT_NEAR(v, expected, 1e-3);
    }
}

TEST(UncertaintyLoss, BackwardMatchesFiniteDifferences) {
    const Image dssim = testutil::randomImage(5, 4, 1, 15, 0.0, 0.3);
    Image u = testutil::randomImage(5, 4, 1, 16, 0.1, 2.0);
    const Image g = uncertaintyLossBackward(dssim, u, 0.5);
    for (std::size_t i = 0; i < u.data.size(); ++i) {
        const double o = u.data[i], h = 1e-6;
        u.data[i] = o + h;
        const double fp = uncertaintyLoss(dssim, u, 0.5);
        u.data[i] = o - h;
        const double fm = uncertaintyLoss(dssim, u, 0.5);
        u.data[i] = o;
        EXPECT_LT(relErr((fp - fm) / (2 * h), g.data[i]), 1e-5);
    }
}

TEST(JointLoss, EqualUncertaintyAverages) {
    const Image m3 = testutil::randomImage(8, 8, 1, 17), m2 = testutil::randomImage(8, 8, 1, 18);
    const Image u = testutil::randomImage(8, 8, 1, 19, 0.1, 2.0);
    EXPECT_NEAR(jointModulatedLoss(m3, m2, u, u), 0.5 * (mean(m3) + mean(m2)), 1e-15);
}

TEST(JointLoss, LargeU3dLimit) {
    const Image m3 = testutil::randomImage(8, 8, 1, 20), m2 = testutil::randomImage(8, 8, 1, 21);
    const Image w = modulationWeights(constant(8, 8, 1, 1e6), constant(8, 8, 1, 1.0));
    EXPECT_NEAR(w.data[0], 1e-12, 1e-18);
    EXPECT_NEAR(jointModulatedLoss(m3, m2, constant(8, 8, 1, 1e6), constant(8, 8, 1, 1.0)), mean(m2), 1e-11);
}

TEST(JointLoss, ScaleInvariant) {
    const Image m3 = testutil::randomImage(8, 8, 1, 22), m2 = testutil::randomImage(8, 8, 1, 23);
    Image u3 = testutil::randomImage(8, 8, 1, 24, 0.1, 2.0), u2 = testutil::randomImage(8, 8, 1, 25, 0.1, 2.0);
    const double base = jointModulatedLoss(m3, m2, u3, u2);
    for (double &v : u3.data) v *= 10.0;
    for (double &v : u2.data) v *= 10.0;
    EXPECT_NEAR(jointModulatedLoss(m3, m2, u3, u2), base, 1e-14);
}

TEST(JointLoss, PerImageModeUsesScalarWeight) {
    const Image u3 = testutil::randomImage(8, 8, 1, 26, 0.1, 2.0), u2 = testutil::randomImage(8, 8, 1, 27, 0.1, 2.0);
    const Image w = modulationWeights(u3, u2, ModulationMode::PerImage);
    for (double v : w.data) {
        EXPECT_EQ(v, w.data[0]);
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(Merge, Example) {
    const Image m = mergeLdr(constant(1, 1, 3, 1.0), constant(1, 1, 3, 0.0), constant(1, 1, 1, 0.1),
                             constant(1, 1, 1, 0.3));
    for (double v : m.data) {
        EXPECT_NEAR(v, 0.9, 1e-15);
    }
}

TEST(Merge, EqualUncertaintyAndIdempotence) {
    const Image a = testutil::randomImage(6, 6, 3, 28), b = testutil::randomImage(6, 6, 3, 29);
    const Image u = testutil::randomImage(6, 6, 1, 30, 0.1, 1.0);
    const Image avg = mergeLdr(a, b, u, u);
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        EXPECT_NEAR(avg.data[i], 0.5 * (a.data[i] + b.data[i]), 1e-15);
    }
    const Image same = mergeLdr(a, a, u, testutil::randomImage(6, 6, 1, 31, 0.1, 1.0));
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        EXPECT_NEAR(same.data[i], a.data[i], 1e-15);
    }
}

TEST(Merge, ConvexCombination) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        const Image a = testutil::randomImage(7, 5, 3, 100 + s), b = testutil::randomImage(7, 5, 3, 200 + s);
        const Image u3 = testutil::randomImage(7, 5, 1, 300 + s, 0.1, 3.0);
        const Image u2 = testutil::randomImage(7, 5, 1, 400 + s, 0.1, 3.0);
        const Image m = mergeLdr(a, b, u3, u2);
        const Image w = modulationWeights(u3, u2);
        for (std::size_t i = 0; i < m.data.size(); ++i) {
            EXPECT_GE(m.data[i], std::min(a.data[i], b.data[i]) - 1e-15);
            EXPECT_LE(m.data[i], std::max(a.data[i], b.data[i]) + 1e-15);
        }
        for (double v : w.data) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
}

TEST(Merge, ShapeMismatchRejected) {
    EXPECT_THROW(mergeLdr(Image(2, 2, 3), Image(2, 3, 3), Image(2, 2, 1), Image(2, 2, 1)), InvalidArgument);
}

TEST(TotalLoss, Examples) {
    EXPECT_EQ(totalLoss({}, {}).total, 0.0);
    LossComponents p;
    p.le = 0.1587;
    EXPECT_NEAR(totalLoss(p, {}).total, 0.07935, 1e-15);
    LossComponents q;
    q.l3d = 0.3;
    q.l2d = 0.7;
    q.lgs = 0.5;
    LossWeights w;
    w.beta = 1.0;
    w.uncertaintyLoss = false;
    EXPECT_EQ(totalLoss(q, w).lgs, 0.3);
    w.beta = 0.25;
    EXPECT_NEAR(totalLoss(q, w).lgs, 0.25 * 0.3 + 0.75 * 0.7, 1e-15);
}

TEST(TotalLoss, WeightValidation) {
    LossWeights w;
    w.lambdaD = 1.5;
    EXPECT_THROW(w.validate(), InvalidArgument);
    w = {};
    w.beta = -0.1;
    EXPECT_THROW(w.validate(), InvalidArgument);
    w = {};
    w.lambdaU = -1.0;
    EXPECT_THROW(w.validate(), InvalidArgument);
}

namespace {

struct ContractFixture {
    GaussianCloud cloud = testutil::randomCloud(12, 3, 50);
    ToneMapperBank bank = ToneMapperBank::xavier(3, 51);
    RenderOutput out;
    LossEvaluation ev;

    ContractFixture() {
        out = renderView(cloud, bank, testutil::frontCamera(16, 16, 16.0), ExposureContext::fromTime(0.8));
        ev = evaluateLosses(out, testutil::randomImage(16, 16, 3, 52), bank, LossWeights{});
        cloud.zeroGrad();
        bank.zeroGrad();
    }
};

} // namespace

TEST(StopGradient, UncertaintyLossOnlyReachesRho) {
    ContractFixture f;
    RenderGradInputs g;
    g.unc3d = &f.ev.grads.unc3d;
    g.unc2d = &f.ev.grads.unc2d;
    BackwardOptions bo;
    bo.uncertaintyOnly = true;
    renderViewBackward(f.out, g, f.cloud, f.bank, bo);
    for (auto &grp : f.cloud.groups()) {
        for (double v : grp.grads) {
            ASSERT_EQ(v, 0.0) << grp.name;
        }
    }
    f.bank.forEachMlp([](const char *name, const Mlp &m) {
        if (std::string(name) == "rho") {
            EXPECT_GT(total(m.grads()), 0.0);
        } else {
            EXPECT_EQ(total(m.grads()), 0.0) << name;
        }
    });
}

TEST(StopGradient, FeatureSwitchOnlyAddsFeatureGradients) {
    ContractFixture f;
    RenderGradInputs g;
    g.unc3d = &f.ev.grads.unc3d;
    g.unc2d = &f.ev.grads.unc2d;
    BackwardOptions bo;
    bo.uncertaintyOnly = true;
    bo.uncertaintyFeatureGrad = true;
    renderViewBackward(f.out, g, f.cloud, f.bank, bo);
    for (auto &grp : f.cloud.groups()) {
        if (grp.name == "feature") {
            EXPECT_GT(total({grp.grads.begin(), grp.grads.end()}), 0.0);
        } else {
            EXPECT_EQ(total({grp.grads.begin(), grp.grads.end()}), 0.0) << grp.name;
        }
    }
}

TEST(StopGradient, JointLossNeverReachesRho) {
    ContractFixture f;
    RenderGradInputs g;
    g.ldr3d = &f.ev.grads.ldr3d;
    g.ldr2d = &f.ev.grads.ldr2d;
    renderViewBackward(f.out, g, f.cloud, f.bank);
    EXPECT_EQ(total(f.bank.uncertainty.grads()), 0.0);
    EXPECT_GT(total(f.cloud.grads().position), 0.0);
    EXPECT_GT(total(f.bank.global[0].grads()), 0.0);
}

TEST(StopGradient, UncertaintyOnlyRejectsImageGradients) {
    ContractFixture f;
    RenderGradInputs g;
    g.ldr3d = &f.ev.grads.ldr3d;
    BackwardOptions bo;
    bo.uncertaintyOnly = true;
    EXPECT_THROW(renderViewBackward(f.out, g, f.cloud, f.bank, bo), InvalidArgument);
}

TEST(EvaluateLosses, ReportConsistency) {
    ContractFixture f;
    const LossReport &r = f.ev.report;
    EXPECT_NEAR(r.total, r.lgs + r.lunc + 0.5 * r.le, 1e-14);
    EXPECT_NEAR(r.lunc, r.l3dUnc + r.l2dUnc, 1e-14);
    EXPECT_NEAR(r.le, unitExposureLoss(f.bank), 1e-15);
    for (double v : r.weight3d.data) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}
