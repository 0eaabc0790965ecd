// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace hdrsplat {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Moment accumulators for one parameter group.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;
};

// Bias-corrected Adam update in place. Throws NumericalError naming `group` if any gradient is
// non-finite, InvalidArgument on shape mismatch.
void adamStep(std::span<double> params, std::span<const double> grads, AdamState &state, double lr,
              const std::string &group, const AdamConfig &cfg = {});

// Rescales `grads` so its L2 norm is at most maxNorm; returns the norm before clipping.
double clipGradNorm(std::span<double> grads, double maxNorm);

struct LrRange {
    double initial = 1e-3;
    double final = 1e-3;
    std::uint64_t totalSteps = 1;
};

// lr(k) = initial * (final / initial)^(min(k, total) / total)
class LrSchedule {
public:
    void set(const std::string &group, const LrRange &range);
    bool has(const std::string &group) const { return mGroups.count(group) != 0; }
    // Throws InvalidArgument for an unknown group.
    double lr(const std::string &group, std::uint64_t step) const;
    const std::map<std::string, LrRange> &groups() const { return mGroups; }

private:
    std::map<std::string, LrRange> mGroups;
};

} // namespace hdrsplat
