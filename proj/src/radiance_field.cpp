// SPDX-License-Identifier: Apache-2.0
#include <hdrsplat/error.h>
#include <hdrsplat/radiance_field.h>

#include <algorithm>
#include <cmath>
#include <random>

namespace hdrsplat {

void CloudParams::resize(std::size_t n, int featureDim) {
    position.assign(n * 3, 0.0);
    rotation.assign(n * 4, 0.0);
    logScale.assign(n * 3, 0.0);
    opacityLogit.assign(n, 0.0);
    logIrradiance.assign(n * 3, 0.0);
    feature.assign(n * static_cast<std::size_t>(featureDim), 0.0);
}

void CloudParams::setZero() {
    for (auto *v : {&position, &rotation, &logScale, &opacityLogit, &logIrradiance, &feature}) {
        std::fill(v->begin(), v->end(), 0.0);
    }
}

GaussianCloud::GaussianCloud(std::size_t count, int featureDim) : mCount(count), mFeatureDim(featureDim) {
    if (featureDim < 1) {
        throw InvalidArgument("feature dimension must be >= 1");
    }
    mParams.resize(count, featureDim);
    mGrads.resize(count, featureDim);
    for (std::size_t i = 0; i < count; ++i) {
        mParams.rotation[i * 4] = 1.0;
    }
}

std::vector<ParamGroupView> GaussianCloud::groups() {
    return {
        {"position", mParams.position, mGrads.position},
        {"rotation", mParams.rotation, mGrads.rotation},
        {"scale", mParams.logScale, mGrads.logScale},
        {"opacity", mParams.opacityLogit, mGrads.opacityLogit},
        {"log_irradiance", mParams.logIrradiance, mGrads.logIrradiance},
        {"feature", mParams.feature, mGrads.feature},
    };
}

Vec3 GaussianCloud::position(std::size_t i) const {
    return {mParams.position[i * 3], mParams.position[i * 3 + 1], mParams.position[i * 3 + 2]};
}

Quaternion GaussianCloud::rotationRaw(std::size_t i) const {
    return {mParams.rotation[i * 4], mParams.rotation[i * 4 + 1], mParams.rotation[i * 4 + 2],
            mParams.rotation[i * 4 + 3]};
}

Vec3 GaussianCloud::logIrradiance(std::size_t i) const {
    return {mParams.logIrradiance[i * 3], mParams.logIrradiance[i * 3 + 1], mParams.logIrradiance[i * 3 + 2]};
}

std::span<const double> GaussianCloud::feature(std::size_t i) const {
    const auto d = static_cast<std::size_t>(mFeatureDim);
    return {mParams.feature.data() + i * d, d};
}

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

ActivatedGaussian activate(const GaussianCloud &cloud, std::size_t index) {
    if (index >= cloud.size()) {
        throw InvalidArgument("activate: Gaussian index " + std::to_string(index) + " out of range (size " +
                              std::to_string(cloud.size()) + ")");
    }
    const CloudParams &p = cloud.params();
    ActivatedGaussian a;
    a.opacity = sigmoid(p.opacityLogit[index]);
    for (int k = 0; k < 3; ++k) {
        a.irradiance[k] = std::exp(p.logIrradiance[index * 3 + k]);
        a.scale[k] = std::exp(p.logScale[index * 3 + k]);
    }
    a.rotation = cloud.rotationRaw(index).normalized();
    const auto f = cloud.feature(index);
    a.feature.assign(f.begin(), f.end());
    return a;
}

GaussianCloud initFromPoints(std::span<const Vec3> points, std::optional<std::span<const Vec3>> colorHints,
                             const CloudConfig &cfg, std::uint64_t seed) {
    if (points.empty()) {
        throw InvalidArgument("initFromPoints: empty point list");
    }
    if (colorHints && colorHints->size() != points.size()) {
        throw InvalidArgument("initFromPoints: colour hint count does not match point count");
    }
    if (!(cfg.initScale > 0.0) || !(cfg.initOpacity > 0.0 && cfg.initOpacity < 1.0) || cfg.initFeatureStd < 0.0) {
        throw InvalidArgument("initFromPoints: invalid cloud config");
    }
    GaussianCloud cloud(points.size(), cfg.featureDim);
    CloudParams &p = cloud.params();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double logScale = std::log(cfg.initScale);
    const double opacityLogit = logit(cfg.initOpacity);
    const auto d = static_cast<std::size_t>(cfg.featureDim);
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (int k = 0; k < 3; ++k) {
            p.position[i * 3 + k] = points[i][k];
            p.logScale[i * 3 + k] = logScale;
            p.logIrradiance[i * 3 + k] =
                colorHints ? std::log(std::max((*colorHints)[i][k], 0.01)) : std::log(0.5);
        }
        p.opacityLogit[i] = opacityLogit;
        for (std::size_t j = 0; j < d; ++j) {
            p.feature[i * d + j] = cfg.initFeatureStd == 0.0 ? 0.0 : cfg.initFeatureStd * normal(rng);
        }
    }
    return cloud;
}

} // namespace hdrsplat
