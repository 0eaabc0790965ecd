// SPDX-License-Identifier: Apache-2.0
#include <hdrsplat/config.h>
#include <hdrsplat/error.h>
#include <hdrsplat/image_io.h>

#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace hdrsplat {

GroundTruthCrf AppConfig::defaultCrf() {
    GroundTruthCrf crf;
    crf.kind = CrfKind::Gamma;
    crf.gamma = 2.2;
    crf.gain = kUnitExposureTarget;
    return crf;
}

void AppConfig::validate() const {
    train.validate();
    scene.validate();
    if (crf.kind != CrfKind::SpatiallyVaryingGamma) {
        crf.validate();
    } else if (!(crf.gain > 0.0)) {
        throw InvalidArgument("crf_gain must be positive");
    }
    if (!(mu > 0.0)) {
        throw InvalidArgument("mu must be positive");
    }
    if (threads < 0) {
        throw InvalidArgument("threads must be >= 0");
    }
}

namespace {

struct LineError {
    std::string message;
};

std::string trim(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double toReal(const std::string &s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception &) {
        throw LineError{"expected a number, got '" + s + "'"};
    }
    if (used != s.size()) {
        throw LineError{"expected a number, got '" + s + "'"};
    }
    return v;
}

long long toInt(const std::string &s) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(s, &used);
    } catch (const std::exception &) {
        throw LineError{"expected an integer, got '" + s + "'"};
    }
    if (used != s.size()) {
        throw LineError{"expected an integer, got '" + s + "'"};
    }
    return v;
}

int toInt32(const std::string &s) {
    const long long v = toInt(s);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
        throw LineError{"integer out of range: '" + s + "'"};
    }
    return static_cast<int>(v);
}

std::uint64_t toU64(const std::string &s) {
    if (s.empty() || s[0] == '-') {
        throw LineError{"expected a non-negative integer, got '" + s + "'"};
    }
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
        v = std::stoull(s, &used);
    } catch (const std::exception &) {
        throw LineError{"expected a non-negative integer, got '" + s + "'"};
    }
    if (used != s.size()) {
        throw LineError{"expected a non-negative integer, got '" + s + "'"};
    }
    return v;
}

bool toBool(const std::string &s) {
    if (s == "true") {
        return true;
    }
    if (s == "false") {
        return false;
    }
    throw LineError{"expected true or false, got '" + s + "'"};
}

std::vector<double> toList(const std::string &s, std::size_t n) {
    std::vector<double> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        out.push_back(toReal(trim(item)));
    }
    if (out.size() != n) {
        throw LineError{"expected " + std::to_string(n) + " comma-separated numbers, got '" + s + "'"};
    }
    return out;
}

template <typename E, typename F> E toEnum(const std::string &s, F &&fromString) {
    try {
        return fromString(s);
    } catch (const InvalidArgument &e) {
        throw LineError{e.what()};
    }
}

struct Field {
    std::function<void(AppConfig &, const std::string &)> set;
    std::function<std::string(const AppConfig &)> get;
};


#define HS_REAL(expr)                                                                                           \
    Field {                                                                                                     \
        [](AppConfig &c, const std::string &v) { c.expr = toReal(v); }, [](const AppConfig &c) { return fmt(c.expr); } \
    }
#define HS_INT(expr)                                                                                            \
    Field {                                                                                                     \
        [](AppConfig &c, const std::string &v) { c.expr = toInt32(v); },                                        \
            [](const AppConfig &c) { return std::to_string(c.expr); }                                           \
    }
#define HS_BOOL(expr)                                                                                           \
    Field {                                                                                                     \
        [](AppConfig &c, const std::string &v) { c.expr = toBool(v); },                                         \
            [](const AppConfig &c) { return std::string(c.expr ? "true" : "false"); }                           \
    }
#define HS_PAIR(expr)                                                                                           \
    Field {                                                                                                     \
        [](AppConfig &c, const std::string &v) {                                                                \
            const auto l = toList(v, 2);                                                                        \
            c.expr = {l[0], l[1]};                                                                              \
        },                                                                                                      \
            [](const AppConfig &c) { return fmt(c.expr[0]) + ", " + fmt(c.expr[1]); }                           \
    }
#define HS_VEC3(expr)                                                                                           \
    Field {                                                                                                     \
        [](AppConfig &c, const std::string &v) {                                                                \
            const auto l = toList(v, 3);                                                                        \
            c.expr = Vec3(l[0], l[1], l[2]);                                                                    \
        },                                                                                                      \
            [](const AppConfig &c) { return fmt(c.expr[0]) + ", " + fmt(c.expr[1]) + ", " + fmt(c.expr[2]); }   \
    }

const std::vector<std::pair<std::string, Field>> &fields() {
    static const std::vector<std::pair<std::string, Field>> table = {
        // training
        {"total_iters", HS_INT(train.totalIters)},
        {"residual_enable_iter",
         {[](AppConfig &c, const std::string &v) {
              if (v == "auto") {
                  c.train.residualEnableIter.reset();
              } else {
                  c.train.residualEnableIter = toInt32(v);
              }
          },
          [](const AppConfig &c) {
              return c.train.residualEnableIter ? std::to_string(*c.train.residualEnableIter) : std::string("auto");
          }}},
        {"exposure_mode",
         {[](AppConfig &c, const std::string &v) {
              c.train.exposureMode = toEnum<ExposureMode>(v, exposureModeFromString);
          },
          [](const AppConfig &c) { return std::string(toString(c.train.exposureMode)); }}},
        {"seed",
         {[](AppConfig &c, const std::string &v) { c.train.seed = toU64(v); },
          [](const AppConfig &c) { return std::to_string(c.train.seed); }}},
        {"eval_every", HS_INT(train.evalEvery)},
        {"checkpoint_every", HS_INT(train.checkpointEvery)},
        {"log_every", HS_INT(train.logEvery)},
        {"local_tone_mapping", HS_BOOL(train.localToneMapping)},
        {"uncertainty_in_stage1", HS_BOOL(train.uncertaintyInStage1)},
        {"uncertainty_feature_grad", HS_BOOL(train.uncertaintyFeatureGrad)},
        {"grad_clip", HS_REAL(train.gradClip)},
        {"threads", HS_INT(threads)},
        // losses
        {"lambda_d", HS_REAL(train.weights.lambdaD)},
        {"lambda_u", HS_REAL(train.weights.lambdaU)},
        {"lambda_e", HS_REAL(train.weights.lambdaE)},
        {"beta",
         {[](AppConfig &c, const std::string &v) {
              if (v == "none") {
                  c.train.weights.beta.reset();
              } else {
                  c.train.weights.beta = toReal(v);
              }
          },
          [](const AppConfig &c) {
              return c.train.weights.beta ? fmt(*c.train.weights.beta) : std::string("none");
          }}},
        {"uncertainty_loss", HS_BOOL(train.weights.uncertaintyLoss)},
        {"unit_exposure_loss", HS_BOOL(train.weights.unitExposureLoss)},
        {"modulation",
         {[](AppConfig &c, const std::string &v) {
              if (v == "per_pixel") {
                  c.train.weights.modulation = ModulationMode::PerPixel;
              } else if (v == "per_image") {
                  c.train.weights.modulation = ModulationMode::PerImage;
              } else {
                  throw LineError{"expected per_pixel or per_image, got '" + v + "'"};
              }
          },
          [](const AppConfig &c) {
              return std::string(c.train.weights.modulation == ModulationMode::PerPixel ? "per_pixel" : "per_image");
          }}},
        // learning rates
        {"lr_position_init", HS_REAL(train.lr.positionInit)},
        {"lr_position_final", HS_REAL(train.lr.positionFinal)},
        {"lr_rotation", HS_REAL(train.lr.rotation)},
        {"lr_scale", HS_REAL(train.lr.scale)},
        {"lr_opacity", HS_REAL(train.lr.opacity)},
        {"lr_log_irradiance", HS_REAL(train.lr.logIrradiance)},
        {"lr_feature", HS_REAL(train.lr.feature)},
        {"lr_tonemap_init", HS_REAL(train.lr.toneMapperInit)},
        {"lr_tonemap_final", HS_REAL(train.lr.toneMapperFinal)},
        {"lr_uncertainty_init", HS_REAL(train.lr.uncertaintyInit)},
        {"lr_uncertainty_final", HS_REAL(train.lr.uncertaintyFinal)},
        // cloud initialisation
        {"feature_dim", HS_INT(train.cloud.featureDim)},
        {"init_feature_std", HS_REAL(train.cloud.initFeatureStd)},
        {"init_scale", HS_REAL(train.cloud.initScale)},
        {"init_opacity", HS_REAL(train.cloud.initOpacity)},
        // rendering
        {"lowpass", HS_REAL(train.render.projection.lowpass)},
        {"near_plane", HS_REAL(train.render.projection.nearPlane)},
        {"tiled", HS_BOOL(train.render.raster.tiled)},
        {"log_guard", HS_REAL(train.render.logGuard)},
        {"uncertainty_background", HS_REAL(train.render.uncertaintyBackground)},
        // synthetic scene
        {"scene_seed",
         {[](AppConfig &c, const std::string &v) { c.sceneSeed = toU64(v); },
          [](const AppConfig &c) { return std::to_string(c.sceneSeed); }}},
        {"gaussian_count", HS_INT(scene.gaussianCount)},
        {"extent", HS_VEC3(scene.extent)},
        {"irradiance_range", HS_PAIR(scene.irradianceRange)},
        {"scale_range", HS_PAIR(scene.scaleRange)},
        {"max_aspect", HS_REAL(scene.maxAspect)},
        {"opacity_range", HS_PAIR(scene.opacityRange)},
        {"camera_count", HS_INT(scene.cameraCount)},
        {"ring_radius", HS_REAL(scene.ringRadius)},
        {"camera_distance", HS_REAL(scene.cameraDistance)},
        {"look_at", HS_VEC3(scene.lookAt)},
        {"focal", HS_REAL(scene.focal)},
        {"width", HS_INT(scene.width)},
        {"height", HS_INT(scene.height)},
        {"exposure_t1", HS_REAL(scene.exposureT1)},
        {"exposure_ratio", HS_REAL(scene.exposureRatio)},
        {"noise_std", HS_REAL(scene.noiseStd)},
        {"point_jitter", HS_REAL(scene.pointJitter)},
        {"gamma_amplitude", HS_REAL(scene.gammaAmplitude)},
        {"gamma_frequency", HS_REAL(scene.gammaFrequency)},
        // ground-truth response
        {"crf_kind",
         {[](AppConfig &c, const std::string &v) { c.crf.kind = toEnum<CrfKind>(v, crfKindFromString); },
          [](const AppConfig &c) { return std::string(toString(c.crf.kind)); }}},
        {"crf_gamma", HS_REAL(crf.gamma)},
        {"crf_gain", HS_REAL(crf.gain)},
        {"crf_center", HS_REAL(crf.center)},
        {"crf_slope", HS_REAL(crf.slope)},
        // evaluation and data
        {"mu", HS_REAL(mu)},
        {"data_dir",
         {[](AppConfig &c, const std::string &v) { c.dataDir = v; },
          [](const AppConfig &c) { return c.dataDir; }}},
    };
    return table;
}

#undef HS_REAL
#undef HS_INT
#undef HS_BOOL
#undef HS_PAIR
#undef HS_VEC3

const Field *findField(const std::string &key) {
    for (const auto &[k, f] : fields()) {
        if (k == key) {
            return &f;
        }
    }
    return nullptr;
}

} // namespace

AppConfig parseConfig(const std::string &text) {
    AppConfig cfg;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::string l = trim(raw.substr(0, raw.find('#')));
        if (l.empty()) {
            continue;
        }
        const std::string where = "config line " + std::to_string(line) + ": ";
        const auto eq = l.find('=');
        if (eq == std::string::npos) {
            throw InvalidArgument(where + "expected key = value");
        }
        const std::string key = trim(l.substr(0, eq));
        const std::string value = trim(l.substr(eq + 1));
        const Field *f = findField(key);
        if (!f) {
            throw InvalidArgument(where + "unknown key '" + key + "'");
        }
        if (!seen.insert(key).second) {
            throw InvalidArgument(where + "duplicate key '" + key + "'");
        }
        try {
            f->set(cfg, value);
        } catch (const LineError &e) {
            throw InvalidArgument(where + key + ": " + e.message);
        }
    }
    return cfg;
}

AppConfig readConfig(const std::filesystem::path &path) { return parseConfig(readFileBytes(path)); }

std::string formatConfig(const AppConfig &cfg) {
    std::string s;
    for (const auto &[k, f] : fields()) {
        s += k + " = " + f.get(cfg) + "\n";
    }
    return s;
}

std::vector<std::string> configKeys() {
    std::vector<std::string> keys;
    for (const auto &[k, f] : fields()) {
        keys.push_back(k);
    }
    return keys;
}

} // namespace hdrsplat
