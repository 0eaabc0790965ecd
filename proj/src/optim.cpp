// SPDX-License-Identifier: Apache-2.0
#include <hdrsplat/error.h>
#include <hdrsplat/optim.h>

#include <algorithm>
#include <cmath>

namespace hdrsplat {

void adamStep(std::span<double> params, std::span<const double> grads, AdamState &state, double lr,
              const std::string &group, const AdamConfig &cfg) {
    if (params.size() != grads.size()) {
        throw InvalidArgument("adamStep: parameter and gradient sizes differ for group " + group);
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i])) {
            throw NumericalError("adamStep: non-finite gradient in group '" + group + "' at index " +
                                 std::to_string(i));
        }
    }
    if (state.m.size() != params.size()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        const double mh = state.m[i] / bc1;
        const double vh = state.v[i] / bc2;
        params[i] -= lr * mh / (std::sqrt(vh) + cfg.epsilon);
    }
}

void LrSchedule::set(const std::string &group, const LrRange &range) {
    if (!(range.initial > 0.0) || !(range.final > 0.0) || range.totalSteps == 0) {
        throw InvalidArgument("learning-rate range for group '" + group + "' must be positive");
    }
    mGroups[group] = range;
}

double LrSchedule::lr(const std::string &group, std::uint64_t step) const {
    const auto it = mGroups.find(group);
    if (it == mGroups.end()) {
        throw InvalidArgument("unknown learning-rate group '" + group + "'");
    }
    const LrRange &r = it->second;
    if (r.initial == r.final || step >= r.totalSteps) {
        return step >= r.totalSteps ? r.final : r.initial;
    }
    const double frac = static_cast<double>(std::min(step, r.totalSteps)) / static_cast<double>(r.totalSteps);
    return r.initial * std::pow(r.final / r.initial, frac);
}

double clipGradNorm(std::span<double> grads, double maxNorm) {
    if (!(maxNorm > 0.0)) {
        throw InvalidArgument("clipGradNorm: maximum norm must be positive");
    }
    double sq = 0.0;
    for (double g : grads) {
        sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > maxNorm) {
        const double s = maxNorm / norm;
        for (double &g : grads) {
            g *= s;
        }
    }
    return norm;
}

} // namespace hdrsplat
