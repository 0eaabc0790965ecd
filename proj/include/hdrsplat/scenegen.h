// SPDX-License-Identifier: Apache-2.0
//
// Synthetic ground truth: random HDR Gaussian scenes, a forward-facing camera ring, known
// camera response functions and a geometric exposure ladder.
#pragma once

#include <hdrsplat/core_math.h>
#include <hdrsplat/image.h>
#include <hdrsplat/radiance_field.h>
#include <hdrsplat/rasterizer.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hdrsplat {

enum class CrfKind { Gamma, SigmoidLog, Linear, SpatiallyVaryingGamma };

const char *toString(CrfKind kind);
CrfKind crfKindFromString(const std::string &s);

// Ground-truth response c = clip(crf(e * t), 0, 1), applied per channel.
//   Gamma / SpatiallyVaryingGamma: gain * x^(1 / gamma)
//   SigmoidLog:                    sigmoid(slope * (ln x - center))
//   Linear:                        gain * x
struct GroundTruthCrf {
    CrfKind kind = CrfKind::Gamma;
    double gamma = 2.2;
    double gain = 1.0;
    double center = 0.0;
    double slope = 1.0;
    // SpatiallyVaryingGamma: one gamma field per view (width x height x 1).
    std::vector<Image> gammaField;

    void validate() const;
};

struct CrfPixel {
    int view = 0;
    int x = 0;
    int y = 0;
};

// Monotone in hdr * t; 0 maps to 0 for every kind.
double crfApply(const GroundTruthCrf &crf, double hdr, double t, const CrfPixel &pixel = {});

struct SceneSpec {
    int gaussianCount = 300;
    Vec3 extent{1.2, 1.2, 0.4};            // half-size of the box holding Gaussian centres
    std::array<double, 2> irradianceRange{0.01, 50.0};
    std::array<double, 2> scaleRange{0.04, 0.16}; // world units, before anisotropy
    double maxAspect = 5.0;
    std::array<double, 2> opacityRange{0.5, 0.99};
    int cameraCount = 16;
    double ringRadius = 0.6;
    double cameraDistance = 3.0;
    Vec3 lookAt = Vec3::Zero();
    double focal = 100.0;
    int width = 64;
    int height = 64;
    double exposureT1 = 1.0 / 128.0;
    double exposureRatio = 4.0;
    double noiseStd = 0.0;
    // Initial-point jitter (world units) for the point cloud handed to the trainer.
    double pointJitter = 0.02;
    // SpatiallyVaryingGamma: gamma(x) = gamma + amplitude * sin(frequency * x) * cos(frequency * y).
    double gammaAmplitude = 0.8;
    double gammaFrequency = 2.0;

    void validate() const;
    std::array<double, 5> exposures() const;
};

struct SyntheticScene {
    GaussianCloud cloud; // ground truth, feature width 1 (unused)
    std::vector<Camera> cameras;
};

// Deterministic for a given seed. Throws InvalidArgument for a zero Gaussian count.
SyntheticScene generateScene(const SceneSpec &spec, std::uint64_t seed);

// HDR ground truth for one camera (background 0).
Image renderGroundTruthHdr(const GaussianCloud &cloud, const Camera &cam);

// Independent per-pixel blend (exhaustive, extended-precision accumulation) of an arbitrary payload.
Image referenceBlend(std::span<const Splat2D> sortedSplats, std::span<const double> opacity,
                     std::span<const double> payload, int channels, std::span<const double> background,
                     int width, int height);

struct Dataset {
    std::vector<Camera> cameras;
    std::array<double, 5> exposures{};
    GroundTruthCrf crf;
    std::vector<int> trainViews;
    std::vector<int> testViews;
    // ldr[view][k] for k in 0..4 (exposure t_{k+1}); empty images mark absent files.
    std::vector<std::array<Image, 5>> ldr;
    std::vector<Image> hdr; // empty when not available
    std::vector<Vec3> points;
    std::vector<Vec3> pointColors;

    std::size_t viewCount() const { return cameras.size(); }
    bool hasHdr() const;
};

// Builds the spatially varying gamma field for every camera from a smooth 3D gamma function.
GroundTruthCrf makeSpatiallyVaryingGamma(const GaussianCloud &cloud, const std::vector<Camera> &cameras,
                                         const SceneSpec &spec, double gain);

// Renders HDR GT and all LDR exposures. Alternate views go to train / test.
Dataset synthesizeDataset(const SyntheticScene &scene, const GroundTruthCrf &crf, const SceneSpec &spec,
                          std::uint64_t seed);

// synthesizeDataset followed by writeDataset.
Dataset emitDataset(const SyntheticScene &scene, const GroundTruthCrf &crf, const SceneSpec &spec,
                    std::uint64_t seed, const std::filesystem::path &outDir);

} // namespace hdrsplat
