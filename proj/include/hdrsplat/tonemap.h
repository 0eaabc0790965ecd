// SPDX-License-Identifier: Apache-2.0
//
// Learned tone mappers operating on log exposure ln(e * t):
//   global    c_k  = g_k(ln(e t)_k)                                  one MLP per RGB channel
//   local     c*_k = clip(g_k(ln(e t)_k) + dg_k([ln(e t)_k, f]), 0, 1) residual MLP per channel
//   uncertainty u  = max(softplus(rho([ln(e t), f])), 0.1)          shared across channels
#pragma once

#include <hdrsplat/mlp.h>

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace hdrsplat {

inline constexpr double kUncertaintyFloor = 0.1;
inline constexpr double kUnitExposureTarget = 0.73;
inline constexpr int kToneMapperHidden = 64;

struct ToneMapperBank {
    int featureDim = 4;
    std::array<Mlp, 3> global;   // 1 -> 64 -> 1, sigmoid
    std::array<Mlp, 3> residual; // 1 + d -> 64 -> 1, identity
    Mlp uncertainty;             // 3 + d -> 64 -> 1, softplus
    bool residualEnabled = true;

    ToneMapperBank() = default;
    explicit ToneMapperBank(int featureDim);

    static ToneMapperBank xavier(int featureDim, std::uint64_t seed);

    void zeroGrad();
    // Visits (name, params, grads) in a fixed order: g0 g1 g2 dg0 dg1 dg2 rho.
    template <typename Fn> void forEachMlp(Fn &&fn) {
        const char *gNames[3] = {"g0", "g1", "g2"};
        const char *dNames[3] = {"dg0", "dg1", "dg2"};
        for (int k = 0; k < 3; ++k) {
            fn(gNames[k], global[static_cast<std::size_t>(k)]);
        }
        for (int k = 0; k < 3; ++k) {
            fn(dNames[k], residual[static_cast<std::size_t>(k)]);
        }
        fn("rho", uncertainty);
    }
    template <typename Fn> void forEachMlp(Fn &&fn) const {
        const_cast<ToneMapperBank *>(this)->forEachMlp(
            [&](const char *name, const Mlp &m) { fn(name, m); });
    }
};

// Gradient accumulator shaped like a bank's parameters.
struct BankGrads {
    std::array<std::vector<double>, 3> global;
    std::array<std::vector<double>, 3> residual;
    std::vector<double> uncertainty;

    BankGrads() = default;
    explicit BankGrads(const ToneMapperBank &bank);
    void add(const BankGrads &other);
    void addInto(ToneMapperBank &bank) const;
};

struct LocalToneTape {
    std::array<Mlp::Tape, 3> global;
    std::array<Mlp::Tape, 3> residual;
    std::array<double, 3> preClip{};
    bool residualUsed = false;
};

struct UncertaintyTape {
    Mlp::Tape mlp;
    double preClip = 0.0;
};

std::array<double, 3> toneMapGlobal(const ToneMapperBank &bank, const std::array<double, 3> &lnEt);

// When bank.residualEnabled is false this equals toneMapGlobal bit-for-bit.
std::array<double, 3> toneMapLocal(const ToneMapperBank &bank, const std::array<double, 3> &lnEt,
                                   std::span<const double> feature, LocalToneTape &tape);
std::array<double, 3> toneMapLocal(const ToneMapperBank &bank, const std::array<double, 3> &lnEt,
                                   std::span<const double> feature);

// Accumulates parameter gradients into `grads`; writes input gradients into gradLnEt / gradFeature
// (gradFeature may be empty to skip it). Clip passes gradient only strictly inside (0, 1).
void toneMapLocalBackward(const ToneMapperBank &bank, const LocalToneTape &tape,
                          const std::array<double, 3> &gradLdr, BankGrads &grads,
                          std::array<double, 3> &gradLnEt, std::span<double> gradFeature);

double predictUncertainty(const ToneMapperBank &bank, const std::array<double, 3> &lnEt,
                          std::span<const double> feature, UncertaintyTape &tape);
double predictUncertainty(const ToneMapperBank &bank, const std::array<double, 3> &lnEt,
                          std::span<const double> feature);

// Zero gradient when the floor is active. gradLnEt / gradFeature may be null / empty to detach
// the inputs.
void predictUncertaintyBackward(const ToneMapperBank &bank, const UncertaintyTape &tape, double gradU,
                                BankGrads &grads, std::array<double, 3> *gradLnEt,
                                std::span<double> gradFeature);

// sum_k (g_k(0) - 0.73)^2
double unitExposureLoss(const ToneMapperBank &bank);
// Adds d(weight * unitExposureLoss)/d(params) into grads; returns the unweighted loss.
double unitExposureLossBackward(const ToneMapperBank &bank, double weight, BankGrads &grads);

} // namespace hdrsplat
