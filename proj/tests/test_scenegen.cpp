// SPDX-License-Identifier: Apache-2.0
#include "test_util.h"

#include <hdrsplat/error.h>
#include <hdrsplat/scenegen.h>

#include <gtest/gtest.h>

using namespace hdrsplat;

namespace {

GroundTruthCrf gammaCrf(double gamma, double gain) {
    GroundTruthCrf c;
    c.kind = CrfKind::Gamma;
    c.gamma = gamma;
    c.gain = gain;
    return c;
}

SceneSpec smallSpec() {
    SceneSpec s;
    s.gaussianCount = 40;
    s.width = s.height = 24;
    s.focal = 36.0;
    s.cameraCount = 4;
    return s;
}

} // namespace

TEST(Crf, LinearIdentity) {
    GroundTruthCrf c;
    c.kind = CrfKind::Linear;
    c.gain = 1.0;
    EXPECT_EQ(crfApply(c, 0.25, 1.0), 0.25);
}

TEST(Crf, GammaEndpointsAndMidpoint) {
    const GroundTruthCrf c = gammaCrf(2.2, 1.0);
    EXPECT_EQ(crfApply(c, 1.0, 1.0), 1.0);
    EXPECT_EQ(crfApply(c, 0.0, 1.0), 0.0);
    EXPECT_NEAR(crfApply(c, 0.5, 1.0), std::pow(0.5, 1.0 / 2.2), 1e-15);
    EXPECT_NEAR(crfApply(c, 0.5, 1.0), 0.7297, 1e-4);
    EXPECT_EQ(crfApply(c, 100.0, 1.0), 1.0);
}

TEST(Crf, OriginMonotoneAndProductOnly) {
    GroundTruthCrf sig;
    sig.kind = CrfKind::SigmoidLog;
    sig.center = -1.0;
    sig.slope = 1.5;
    GroundTruthCrf lin;
    lin.kind = CrfKind::Linear;
    lin.gain = 0.8;
    GroundTruthCrf sv;
    sv.kind = CrfKind::SpatiallyVaryingGamma;
    sv.gain = 0.9;
    sv.gammaField = {testutil::randomImage(3, 3, 1, 1, 1.5, 3.0)};
    for (const GroundTruthCrf &c : {gammaCrf(2.2, 0.73), sig, lin, sv}) {
        const CrfPixel px{0, 1, 2};
        EXPECT_EQ(crfApply(c, 0.0, 0.3, px), 0.0) << toString(c.kind);
        double prev = 0.0;
        for (double e = 1e-3; e < 100.0; e *= 1.3) {
            const double v = crfApply(c, e, 0.5, px);
            EXPECT_GE(v, prev);
            EXPECT_LE(v, 1.0);
            prev = v;
            EXPECT_EQ(crfApply(c, e, 1.0, px), crfApply(c, 2.0 * e, 0.5, px));
        }
    }
}

TEST(Crf, ConstantSpatialFieldEqualsGlobalGammaBitExact) {
    GroundTruthCrf sv;
    sv.kind = CrfKind::SpatiallyVaryingGamma;
    sv.gain = 0.73;
    sv.gammaField = {Image(5, 4, 1, 2.2)};
    const GroundTruthCrf g = gammaCrf(2.2, 0.73);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (int i = 0; i < 1000; ++i) {
        const double e = u(rng);
        EXPECT_EQ(crfApply(sv, e, 0.7, {0, i % 5, i % 4}), crfApply(g, e, 0.7));
    }
}

TEST(Crf, KindNamesAndValidation) {
    for (CrfKind k : {CrfKind::Gamma, CrfKind::SigmoidLog, CrfKind::Linear, CrfKind::SpatiallyVaryingGamma}) {
        EXPECT_EQ(crfKindFromString(toString(k)), k);
    }
    EXPECT_THROW(crfKindFromString("log"), InvalidArgument);
    EXPECT_THROW(gammaCrf(0.0, 1.0).validate(), InvalidArgument);
    GroundTruthCrf sv;
    sv.kind = CrfKind::SpatiallyVaryingGamma;
    EXPECT_THROW(crfApply(sv, 0.5, 1.0, {3, 0, 0}), InvalidArgument);
}

TEST(SceneSpec, ExposureLadder) {
    SceneSpec s;
    s.exposureT1 = 0.01;
    const auto t = s.exposures();
    for (std::size_t k = 0; k < 5; ++k) {
        EXPECT_NEAR(t[k], 0.01 * std::pow(4.0, static_cast<double>(k)), 1e-15);
    }
    s.exposureRatio = 1.0;
    EXPECT_THROW(s.validate(), InvalidArgument);
}

TEST(GenerateScene, Deterministic) {
    const SceneSpec s = smallSpec();
    const SyntheticScene a = generateScene(s, 9), b = generateScene(s, 9), c = generateScene(s, 10);
    EXPECT_EQ(a.cloud.params().position, b.cloud.params().position);
    EXPECT_EQ(a.cloud.params().logIrradiance, b.cloud.params().logIrradiance);
    EXPECT_EQ(a.cloud.params().rotation, b.cloud.params().rotation);
    EXPECT_NE(a.cloud.params().position, c.cloud.params().position);
}

TEST(GenerateScene, ZeroCountRejected) {
    SceneSpec s = smallSpec();
    s.gaussianCount = 0;
    EXPECT_THROW(generateScene(s, 1), InvalidArgument);
}

TEST(GenerateScene, DegenerateIrradianceRange) {
    SceneSpec s = smallSpec();
    s.irradianceRange = {1.0, 1.0};
    const SyntheticScene sc = generateScene(s, 1);
    for (double v : sc.cloud.params().logIrradiance) {
        EXPECT_EQ(v, 0.0);
    }
}

TEST(GenerateScene, AttributeBounds) {
    SceneSpec s = smallSpec();
    s.gaussianCount = 500;
    const SyntheticScene sc = generateScene(s, 4);
    ASSERT_EQ(sc.cloud.size(), 500u);
    ASSERT_EQ(sc.cameras.size(), 4u);
    for (std::size_t i = 0; i < sc.cloud.size(); ++i) {
        const ActivatedGaussian a = activate(sc.cloud, i);
        EXPECT_GE(a.opacity, 0.5 - 1e-12);
        EXPECT_LE(a.opacity, 0.99 + 1e-12);
        EXPECT_LE(a.scale.maxCoeff() / a.scale.minCoeff(), 5.0 + 1e-9);
        for (int k = 0; k < 3; ++k) {
            EXPECT_GE(a.irradiance[k], 0.01 * (1 - 1e-12));
            EXPECT_LE(a.irradiance[k], 50.0 * (1 + 1e-12));
            EXPECT_LE(std::abs(sc.cloud.position(i)[k]), s.extent[k] + 1e-12);
        }
    }
    for (const Camera &c : sc.cameras) {
        EXPECT_NO_THROW(c.validate());
    }
}

TEST(Dataset, SplitAndExposureOrdering) {
    const SceneSpec s = smallSpec();
    const Dataset d = synthesizeDataset(generateScene(s, 2), gammaCrf(2.2, 0.73), s, 2);
    EXPECT_EQ(d.trainViews, (std::vector<int>{0, 2}));
    EXPECT_EQ(d.testViews, (std::vector<int>{1, 3}));
    EXPECT_TRUE(d.hasHdr());
    EXPECT_EQ(d.points.size(), d.pointColors.size());
    for (std::size_t v = 0; v < d.viewCount(); ++v) {
        for (std::size_t k = 0; k + 1 < 5; ++k) {
            const Image &lo = d.ldr[v][k], &hi = d.ldr[v][k + 1];
            for (std::size_t i = 0; i < lo.data.size(); ++i) {
                ASSERT_LE(lo.data[i], hi.data[i]);
            }
        }
    }
}

TEST(Dataset, LdrIsCrfOfGroundTruthHdr) {
    const SceneSpec s = smallSpec();
    const GroundTruthCrf crf = gammaCrf(2.2, 0.73);
    const Dataset d = synthesizeDataset(generateScene(s, 3), crf, s, 3);
    for (std::size_t k = 0; k < 5; ++k) {
        const Image &l = d.ldr[1][k];
        for (std::size_t i = 0; i < l.data.size(); ++i) {
            EXPECT_EQ(l.data[i], crfApply(crf, d.hdr[1].data[i], d.exposures[k]));
        }
    }
}

TEST(Dataset, LinearRoundTripRecoversIrradiance) {
    SceneSpec s = smallSpec();
    s.irradianceRange = {0.1, 0.9};
    s.exposureT1 = 1.0 / 256.0; // t5 = 1, and coverage keeps E below 1
    GroundTruthCrf lin;
    lin.kind = CrfKind::Linear;
    lin.gain = 1.0;
    const Dataset d = synthesizeDataset(generateScene(s, 5), lin, s, 5);
    double maxE = 0.0;
    for (double e : d.hdr[0].data) maxE = std::max(maxE, e);
    ASSERT_LE(maxE * d.exposures[4], 1.0);
    for (std::size_t k = 0; k < 5; ++k) {
        for (std::size_t i = 0; i < d.hdr[0].data.size(); ++i) {
            EXPECT_NEAR(d.ldr[0][k].data[i] / d.exposures[k], d.hdr[0].data[i], 1e-12 * std::max(1.0, d.hdr[0].data[i]));
        }
    }
}

TEST(Dataset, NoiseIsClampedAndSeeded) {
    SceneSpec s = smallSpec();
    s.noiseStd = 0.05;
    const SyntheticScene sc = generateScene(s, 6);
    const Dataset a = synthesizeDataset(sc, gammaCrf(2.2, 0.73), s, 6);
    const Dataset b = synthesizeDataset(sc, gammaCrf(2.2, 0.73), s, 6);
    EXPECT_EQ(a.ldr[0][2].data, b.ldr[0][2].data);
    for (double v : a.ldr[0][4].data) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(GroundTruth, FastRenderMatchesReferenceBlend) {
    const SceneSpec s = smallSpec();
    const SyntheticScene sc = generateScene(s, 7);
    for (const Camera &cam : sc.cameras) {
        const Image fast = renderGroundTruthHdr(sc.cloud, cam);
        // rebuild the splats and compare against the exhaustive blend
        std::vector<Splat2D> splats;
        std::vector<double> opacity(sc.cloud.size()), payload(sc.cloud.size() * 3);
        for (std::size_t i = 0; i < sc.cloud.size(); ++i) {
            const ActivatedGaussian a = activate(sc.cloud, i);
            opacity[i] = a.opacity;
            for (int k = 0; k < 3; ++k) payload[i * 3 + static_cast<std::size_t>(k)] = a.irradiance[k];
            if (auto sp = projectGaussian(sc.cloud.position(i), covarianceFromRotationScale(a.rotation, a.scale), cam)) {
                sp->gaussianIndex = static_cast<int>(i);
                splats.push_back(*sp);
            }
        }
        std::vector<Splat2D> sorted;
        for (std::size_t o : sortSplats(splats)) sorted.push_back(splats[o]);
        const std::vector<double> bg(3, 0.0);
        const Image ref = referenceBlend(sorted, opacity, payload, 3, bg, cam.width, cam.height);
        for (std::size_t i = 0; i < ref.data.size(); ++i) {
            EXPECT_NEAR(fast.data[i], ref.data[i], 1e-10);
        }
    }
}

TEST(SpatiallyVaryingGamma, FieldShapeAndRange) {
    const SceneSpec s = smallSpec();
    const SyntheticScene sc = generateScene(s, 8);
    const GroundTruthCrf crf = makeSpatiallyVaryingGamma(sc.cloud, sc.cameras, s, 0.73);
    EXPECT_EQ(crf.kind, CrfKind::SpatiallyVaryingGamma);
    ASSERT_EQ(crf.gammaField.size(), sc.cameras.size());
    double lo = 1e9, hi = -1e9;
    for (const Image &f : crf.gammaField) {
        EXPECT_EQ(f.width, s.width);
        EXPECT_EQ(f.channels, 1);
        for (double g : f.data) {
            lo = std::min(lo, g);
            hi = std::max(hi, g);
        }
    }
    EXPECT_GE(lo, 2.2 - s.gammaAmplitude - 1e-9);
    EXPECT_LE(hi, 2.2 + s.gammaAmplitude + 1e-9);
    EXPECT_GT(hi - lo, 0.1); // the field actually varies
}

TEST(SpatiallyVaryingGamma, ZeroAmplitudeDatasetEqualsGammaDataset) {
    SceneSpec s = smallSpec();
    s.gammaAmplitude = 0.0;
    const SyntheticScene sc = generateScene(s, 9);
    const GroundTruthCrf sv = makeSpatiallyVaryingGamma(sc.cloud, sc.cameras, s, 0.73);
    const Dataset a = synthesizeDataset(sc, sv, s, 9);
    const Dataset b = synthesizeDataset(sc, gammaCrf(2.2, 0.73), s, 9);
    for (std::size_t v = 0; v < a.viewCount(); ++v) {
        for (std::size_t k = 0; k < 5; ++k) {
            for (std::size_t i = 0; i < a.ldr[v][k].data.size(); ++i) {
                // the blended field equals 2.2 up to rounding of the blend weights
                EXPECT_NEAR(a.ldr[v][k].data[i], b.ldr[v][k].data[i], 1e-12);
            }
        }
    }
}
