// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference audit of the full render + loss backward pass on a small seeded scene.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hdrsplat {

struct GradcheckOptions {
    std::uint64_t seed = 7;
    double step = 1e-3; // central difference half-width
    int gaussians = 20;
    int size = 16;      // square image side
    int featureDim = 4;
    double minMagnitude = 1e-8; // entries with both |analytic| and |numeric| below are skipped
};

struct GroupErrors {
    std::string name;
    std::size_t checked = 0;
    std::size_t skippedSmall = 0;
    std::size_t skippedKink = 0; // perturbation crossed a non-differentiable point
    double median = 0.0;
    double p99 = 0.0;
    double max = 0.0;
};

struct GradcheckReport {
    // position rotation scale opacity log_irradiance feature g dg rho, pooled over both stages
    std::vector<GroupErrors> groups;

    bool passes(double medianTol, double p99Tol) const;
    std::string table() const;
};

GradcheckReport runGradcheck(const GradcheckOptions &opts = {});

} // namespace hdrsplat
