// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <hdrsplat/core_math.h>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hdrsplat {

struct CloudConfig {
    int featureDim = 4;
    double initFeatureStd = 0.1;
    double initScale = 0.05;
    double initOpacity = 0.5;
};

// Raw (unconstrained) per-Gaussian parameters, stored structure-of-arrays.
struct CloudParams {
    std::vector<double> position;      // N*3, world units
    std::vector<double> rotation;      // N*4, unnormalized (w, x, y, z)
    std::vector<double> logScale;      // N*3
    std::vector<double> opacityLogit;  // N
    std::vector<double> logIrradiance; // N*3, natural log of per-channel irradiance
    std::vector<double> feature;       // N*d context features

    void resize(std::size_t n, int featureDim);
    void setZero();
};

// Views one parameter group together with its gradient buffer.
struct ParamGroupView {
    std::string name;
    std::span<double> values;
    std::span<double> grads;
};

class GaussianCloud {
public:
    GaussianCloud() = default;
    GaussianCloud(std::size_t count, int featureDim);

    std::size_t size() const { return mCount; }
    int featureDim() const { return mFeatureDim; }

    CloudParams &params() { return mParams; }
    const CloudParams &params() const { return mParams; }
    CloudParams &grads() { return mGrads; }
    const CloudParams &grads() const { return mGrads; }

    void zeroGrad() { mGrads.setZero(); }

    // Groups in a fixed order: position, rotation, scale, opacity, log_irradiance, feature.
    std::vector<ParamGroupView> groups();

    Vec3 position(std::size_t i) const;
    Quaternion rotationRaw(std::size_t i) const;
    Vec3 logIrradiance(std::size_t i) const;
    std::span<const double> feature(std::size_t i) const;

private:
    std::size_t mCount = 0;
    int mFeatureDim = 0;
    CloudParams mParams;
    CloudParams mGrads;
};

struct ActivatedGaussian {
    double opacity = 0.0;
    Vec3 irradiance = Vec3::Zero();
    Vec3 scale = Vec3::Zero();
    Quaternion rotation;
    std::vector<double> feature;
};

double sigmoid(double x);
double logit(double p);

// Throws InvalidArgument for an out-of-range index.
ActivatedGaussian activate(const GaussianCloud &cloud, std::size_t index);

// Throws InvalidArgument for an empty point list or mismatched colour hints.
GaussianCloud initFromPoints(std::span<const Vec3> points, std::optional<std::span<const Vec3>> colorHints,
                             const CloudConfig &cfg, std::uint64_t seed);

} // namespace hdrsplat
