// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <hdrsplat/core_math.h>
#include <hdrsplat/image.h>
#include <hdrsplat/radiance_field.h>
#include <hdrsplat/scenegen.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

namespace testutil {

using namespace hdrsplat;

inline double relErr(double a, double b) {
    const double m = std::max(std::abs(a), std::abs(b));
    return m == 0.0 ? 0.0 : std::abs(a - b) / m;
}

inline Image randomImage(int w, int h, int c, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Image img(w, h, c);
    for (double &v : img.data) {
        v = u(rng);
    }
    return img;
}

// Camera at the origin looking down +z with the principal point in the image centre.
inline Camera frontCamera(int w, int h, double focal) {
    Camera c;
    c.fx = c.fy = focal;
    c.cx = w / 2.0;
    c.cy = h / 2.0;
    c.width = w;
    c.height = h;
    return c;
}

// Small random cloud in front of frontCamera with random features.
inline GaussianCloud randomCloud(std::size_t n, int d, std::uint64_t seed, double spread = 0.6) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    GaussianCloud c(n, d);
    CloudParams &p = c.params();
    for (std::size_t i = 0; i < n; ++i) {
        p.position[i * 3] = spread * u(rng);
        p.position[i * 3 + 1] = spread * u(rng);
        p.position[i * 3 + 2] = 3.0 + 0.5 * u(rng);
        for (int k = 0; k < 4; ++k) {
            p.rotation[i * 4 + k] = g(rng);
        }
        for (int k = 0; k < 3; ++k) {
            p.logScale[i * 3 + k] = std::log(0.25) + 0.3 * u(rng);
            p.logIrradiance[i * 3 + k] = 1.5 * u(rng);
        }
        p.opacityLogit[i] = 1.5 * u(rng);
        for (int k = 0; k < d; ++k) {
            p.feature[i * static_cast<std::size_t>(d) + k] = 0.5 * g(rng);
        }
    }
    return c;
}

inline std::filesystem::path tempDir(const std::string &name) {
    const auto p = std::filesystem::temp_directory_path() / ("hdrsplat_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace testutil
