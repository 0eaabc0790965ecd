// SPDX-License-Identifier: Apache-2.0
#include <hdrsplat/dataset_io.h>
#include <hdrsplat/error.h>
#include <hdrsplat/scenegen.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace hdrsplat {

const char *toString(CrfKind kind) {
    switch (kind) {
    case CrfKind::Gamma:
        return "gamma";
    case CrfKind::SigmoidLog:
        return "sigmoid_log";
    case CrfKind::Linear:
        return "linear";
    case CrfKind::SpatiallyVaryingGamma:
        return "sv_gamma";
    }
    return "unknown";
}

CrfKind crfKindFromString(const std::string &s) {
    if (s == "gamma") {
        return CrfKind::Gamma;
    }
    if (s == "sigmoid_log") {
        return CrfKind::SigmoidLog;
    }
    if (s == "linear") {
        return CrfKind::Linear;
    }
    if (s == "sv_gamma") {
        return CrfKind::SpatiallyVaryingGamma;
    }
    throw InvalidArgument("unknown CRF kind '" + s + "' (expected gamma, sigmoid_log, linear or sv_gamma)");
}

void GroundTruthCrf::validate() const {
    switch (kind) {
    case CrfKind::Gamma:
        if (!(gamma > 0.0) || !(gain > 0.0)) {
            throw InvalidArgument("gamma CRF needs gamma > 0 and gain > 0");
        }
        break;
    case CrfKind::SigmoidLog:
        if (!(slope > 0.0) || !std::isfinite(center)) {
            throw InvalidArgument("sigmoid-log CRF needs slope > 0");
        }
        break;
    case CrfKind::Linear:
        if (!(gain > 0.0)) {
            throw InvalidArgument("linear CRF needs gain > 0");
        }
        break;
    case CrfKind::SpatiallyVaryingGamma:
        if (!(gain > 0.0)) {
            throw InvalidArgument("spatially varying gamma CRF needs gain > 0");
        }
        for (const Image &f : gammaField) {
            for (double g : f.data) {
                if (!(g > 0.0)) {
                    throw InvalidArgument("spatially varying gamma field must be positive");
                }
            }
        }
        break;
    }
}

double crfApply(const GroundTruthCrf &crf, double hdr, double t, const CrfPixel &pixel) {
    const double x = std::max(hdr, 0.0) * t;
    double c = 0.0;
    switch (crf.kind) {
    case CrfKind::Gamma:
        c = crf.gain * std::pow(x, 1.0 / crf.gamma);
        break;
    case CrfKind::SigmoidLog:
        c = x > 0.0 ? sigmoid(crf.slope * (std::log(x) - crf.center)) : 0.0;
        break;
    case CrfKind::Linear:
        c = crf.gain * x;
        break;
    case CrfKind::SpatiallyVaryingGamma: {
        if (pixel.view < 0 || static_cast<std::size_t>(pixel.view) >= crf.gammaField.size()) {
            throw InvalidArgument("crfApply: no gamma field for view " + std::to_string(pixel.view));
        }
        const Image &field = crf.gammaField[static_cast<std::size_t>(pixel.view)];
        c = crf.gain * std::pow(x, 1.0 / field.at(pixel.x, pixel.y));
        break;
    }
    }
    return std::clamp(c, 0.0, 1.0);
}

void SceneSpec::validate() const {
    if (gaussianCount < 1) {
        throw InvalidArgument("scene needs at least one Gaussian");
    }
    if (!(irradianceRange[0] > 0.0) || irradianceRange[1] < irradianceRange[0]) {
        throw InvalidArgument("irradiance range must be positive and ordered");
    }
    if (!(scaleRange[0] > 0.0) || scaleRange[1] < scaleRange[0] || maxAspect < 1.0) {
        throw InvalidArgument("scale range must be positive and ordered, aspect >= 1");
    }
    if (!(opacityRange[0] > 0.0) || opacityRange[1] >= 1.0 || opacityRange[1] < opacityRange[0]) {
        throw InvalidArgument("opacity range must lie in (0, 1)");
    }
    if (cameraCount < 1 || width < 1 || height < 1 || !(focal > 0.0) || !(cameraDistance > 0.0)) {
        throw InvalidArgument("camera ring parameters must be positive");
    }
    if (!(exposureT1 > 0.0) || !(exposureRatio > 1.0)) {
        throw InvalidArgument("exposures must be positive and strictly increasing");
    }
    if (noiseStd < 0.0 || pointJitter < 0.0) {
        throw InvalidArgument("noise and jitter must be non-negative");
    }
}

std::array<double, 5> SceneSpec::exposures() const {
    std::array<double, 5> t{};
    for (std::size_t k = 0; k < 5; ++k) {
        t[k] = exposureT1 * std::pow(exposureRatio, static_cast<double>(k));
    }
    return t;
}

SyntheticScene generateScene(const SceneSpec &spec, std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto n = static_cast<std::size_t>(spec.gaussianCount);

    SyntheticScene scene;
    scene.cloud = GaussianCloud(n, 1);
    CloudParams &p = scene.cloud.params();
    const double lnLo = std::log(spec.irradianceRange[0]);
    const double lnHi = std::log(spec.irradianceRange[1]);
    const double lnSLo = std::log(spec.scaleRange[0]);
    const double lnSHi = std::log(spec.scaleRange[1]);
    const double halfAspect = 0.5 * std::log(spec.maxAspect);
    for (std::size_t i = 0; i < n; ++i) {
        for (int k = 0; k < 3; ++k) {
            p.position[i * 3 + k] = spec.lookAt[k] + spec.extent[k] * (2.0 * unit(rng) - 1.0);
        }
        for (int k = 0; k < 3; ++k) {
            p.logIrradiance[i * 3 + k] = lnLo + (lnHi - lnLo) * unit(rng);
        }
        const double base = lnSLo + (lnSHi - lnSLo) * unit(rng);
        for (int k = 0; k < 3; ++k) {
            // per-axis log ratio in [-ln(a)/2, ln(a)/2] keeps max/min <= maxAspect
            p.logScale[i * 3 + k] = base + halfAspect * (2.0 * unit(rng) - 1.0);
        }
        Quaternion q{normal(rng), normal(rng), normal(rng), normal(rng)};
        if (q.norm() < 1e-12) {
            q = Quaternion{};
        }
        q = q.normalized();
        p.rotation[i * 4] = q.w;
        p.rotation[i * 4 + 1] = q.x;
        p.rotation[i * 4 + 2] = q.y;
        p.rotation[i * 4 + 3] = q.z;
        const double a = spec.opacityRange[0] + (spec.opacityRange[1] - spec.opacityRange[0]) * unit(rng);
        p.opacityLogit[i] = logit(a);
    }

    for (int c = 0; c < spec.cameraCount; ++c) {
        const double ang = 2.0 * std::numbers::pi * c / spec.cameraCount;
        const Vec3 eye = spec.lookAt + Vec3(spec.ringRadius * std::cos(ang), spec.ringRadius * std::sin(ang),
                                            -spec.cameraDistance);
        scene.cameras.push_back(Camera::lookAt(eye, spec.lookAt, Vec3(0.0, -1.0, 0.0), spec.focal, spec.width,
                                               spec.height));
    }
    return scene;
}

namespace {

struct ProjectedScene {
    std::vector<Splat2D> splats;
    std::vector<double> opacity;
};

ProjectedScene projectCloud(const GaussianCloud &cloud, const Camera &cam) {
    ProjectedScene ps;
    const CloudParams &p = cloud.params();
    std::vector<Splat2D> raw;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3 scale(std::exp(p.logScale[i * 3]), std::exp(p.logScale[i * 3 + 1]), std::exp(p.logScale[i * 3 + 2]));
        const Covariance3 cov = covarianceFromRotationScale(cloud.rotationRaw(i), scale);
        if (auto s = projectGaussian(cloud.position(i), cov, cam)) {
            s->gaussianIndex = static_cast<int>(i);
            raw.push_back(*s);
        }
        ps.opacity.push_back(sigmoid(p.opacityLogit[i]));
    }
    for (const std::size_t o : sortSplats(raw)) {
        ps.splats.push_back(raw[o]);
    }
    return ps;
}

Image blendPayload(const GaussianCloud &cloud, const Camera &cam, const std::vector<double> &payload, int channels,
                   const std::vector<double> &background, bool crossCheck) {
    const ProjectedScene ps = projectCloud(cloud, cam);
    RasterInputs in{ps.splats, ps.opacity, payload, channels, background, cam.width, cam.height};
    RasterOutput out = rasterizeForward(in);
    if (crossCheck) {
        const Image ref = referenceBlend(ps.splats, ps.opacity, payload, channels, background, cam.width, cam.height);
        for (std::size_t i = 0; i < ref.data.size(); ++i) {
            if (std::abs(ref.data[i] - out.color.data[i]) > 1e-10) {
                throw NumericalError("ground-truth render disagrees with the reference blend");
            }
        }
    }
    return std::move(out.color);
}

} // namespace

Image renderGroundTruthHdr(const GaussianCloud &cloud, const Camera &cam) {
    std::vector<double> payload(cloud.size() * 3);
    for (std::size_t i = 0; i < payload.size(); ++i) {
        payload[i] = std::exp(cloud.params().logIrradiance[i]);
    }
    return blendPayload(cloud, cam, payload, 3, {0.0, 0.0, 0.0}, true);
}

Image referenceBlend(std::span<const Splat2D> sortedSplats, std::span<const double> opacity,
                     std::span<const double> payload, int channels, std::span<const double> background, int width,
                     int height) {
    Image out(width, height, channels);
    const auto C = static_cast<std::size_t>(channels);
    std::vector<long double> acc(C);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            std::fill(acc.begin(), acc.end(), 0.0L);
            long double T = 1.0L;
            const double px = x + 0.5, py = y + 0.5;
            for (const Splat2D &s : sortedSplats) {
                const double det = s.cov(0, 0) * s.cov(1, 1) - s.cov(0, 1) * s.cov(1, 0);
                if (!(det > 0.0) || !(s.cov(0, 0) > 0.0)) {
                    continue;
                }
                const double dx = px - s.mean.x(), dy = py - s.mean.y();
                const double qa = s.cov(1, 1) / det, qb = -s.cov(0, 1) / det, qc = -s.cov(1, 0) / det,
                             qd = s.cov(0, 0) / det;
                const double m2 = dx * (qa * dx + qb * dy) + dy * (qc * dx + qd * dy);
                if (m2 > raster::kCutoffMahalanobis2) {
                    continue;
                }
                const auto g = static_cast<std::size_t>(s.gaussianIndex);
                double sigma = opacity[g] * std::exp(-0.5 * m2);
                if (sigma < raster::kMinSigma) {
                    continue;
                }
                sigma = std::min(sigma, raster::kMaxSigma);
                const long double next = T * (1.0L - sigma);
                if (next < raster::kMinTransmittance) {
                    break;
                }
                for (std::size_t c = 0; c < C; ++c) {
                    acc[c] += static_cast<long double>(payload[g * C + c]) * sigma * T;
                }
                T = next;
            }
            for (std::size_t c = 0; c < C; ++c) {
                out.at(x, y, static_cast<int>(c)) = static_cast<double>(acc[c] + T * background[c]);
            }
        }
    }
    return out;
}

bool Dataset::hasHdr() const {
    if (hdr.size() != cameras.size()) {
        return false;
    }
    return std::none_of(hdr.begin(), hdr.end(), [](const Image &i) { return i.empty(); });
}

GroundTruthCrf makeSpatiallyVaryingGamma(const GaussianCloud &cloud, const std::vector<Camera> &cameras,
                                         const SceneSpec &spec, double gain) {
    GroundTruthCrf crf;
    crf.kind = CrfKind::SpatiallyVaryingGamma;
    crf.gamma = 2.2;
    crf.gain = gain;
    std::vector<double> payload(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3 x = cloud.position(i) - spec.lookAt;
        payload[i] = crf.gamma + spec.gammaAmplitude * std::sin(spec.gammaFrequency * x.x()) *
                                     std::cos(spec.gammaFrequency * x.y());
    }
    for (const Camera &cam : cameras) {
        crf.gammaField.push_back(blendPayload(cloud, cam, payload, 1, {crf.gamma}, false));
    }
    crf.validate();
    return crf;
}

Dataset synthesizeDataset(const SyntheticScene &scene, const GroundTruthCrf &crf, const SceneSpec &spec,
                          std::uint64_t seed) {
    spec.validate();
    crf.validate();
    if (crf.kind == CrfKind::SpatiallyVaryingGamma && crf.gammaField.size() != scene.cameras.size()) {
        throw InvalidArgument("spatially varying gamma needs one field per camera");
    }
    Dataset ds;
    ds.cameras = scene.cameras;
    ds.exposures = spec.exposures();
    ds.crf = crf;
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t v = 0; v < scene.cameras.size(); ++v) {
        const Camera &cam = scene.cameras[v];
        Image hdr = renderGroundTruthHdr(scene.cloud, cam);
        std::array<Image, 5> ldr;
        for (std::size_t k = 0; k < 5; ++k) {
            ldr[k] = Image(cam.width, cam.height, 3);
            for (int y = 0; y < cam.height; ++y) {
                for (int x = 0; x < cam.width; ++x) {
                    for (int c = 0; c < 3; ++c) {
                        double val = crfApply(crf, hdr.at(x, y, c), ds.exposures[k], {static_cast<int>(v), x, y});
                        if (spec.noiseStd > 0.0) {
                            val = std::clamp(val + spec.noiseStd * noise(rng), 0.0, 1.0);
                        }
                        ldr[k].at(x, y, c) = val;
                    }
                }
            }
        }
        ds.ldr.push_back(std::move(ldr));
        ds.hdr.push_back(std::move(hdr));
        (v % 2 == 0 ? ds.trainViews : ds.testViews).push_back(static_cast<int>(v));
    }

    // Stand-in for an SfM point cloud: jittered centres coloured by the middle exposure.
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    GroundTruthCrf nominal = crf;
    if (nominal.kind == CrfKind::SpatiallyVaryingGamma) {
        nominal.kind = CrfKind::Gamma;
    }
    for (std::size_t i = 0; i < scene.cloud.size(); ++i) {
        Vec3 pt = scene.cloud.position(i);
        for (int k = 0; k < 3; ++k) {
            pt[k] += spec.pointJitter * noise(rng);
        }
        ds.points.push_back(pt);
        Vec3 col;
        for (int k = 0; k < 3; ++k) {
            col[k] = crfApply(nominal, std::exp(scene.cloud.params().logIrradiance[i * 3 + static_cast<std::size_t>(k)]),
                              ds.exposures[2]);
        }
        ds.pointColors.push_back(col);
    }
    return ds;
}

Dataset emitDataset(const SyntheticScene &scene, const GroundTruthCrf &crf, const SceneSpec &spec,
                    std::uint64_t seed, const std::filesystem::path &outDir) {
    Dataset ds = synthesizeDataset(scene, crf, spec, seed);
    writeDataset(ds, outDir);
    return ds;
}

} // namespace hdrsplat
