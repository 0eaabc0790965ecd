// SPDX-License-Identifier: Apache-2.0
#include <hdrsplat/error.h>
#include <hdrsplat/tonemap.h>

#include <algorithm>
#include <random>

namespace hdrsplat {

ToneMapperBank::ToneMapperBank(int d) : featureDim(d) {
    if (d < 1 || d > 60) {
        throw InvalidArgument("ToneMapperBank: feature dimension must be in [1, 60]");
    }
    for (int k = 0; k < 3; ++k) {
        global[static_cast<std::size_t>(k)] = Mlp(1, kToneMapperHidden, 1, OutputActivation::Sigmoid);
        residual[static_cast<std::size_t>(k)] = Mlp(1 + d, kToneMapperHidden, 1, OutputActivation::Identity);
    }
    uncertainty = Mlp(3 + d, kToneMapperHidden, 1, OutputActivation::Softplus);
}

ToneMapperBank ToneMapperBank::xavier(int d, std::uint64_t seed) {
    ToneMapperBank bank(d);
    std::mt19937_64 rng(seed);
    bank.forEachMlp([&](const char *, Mlp &m) { m.initXavier(rng); });
    return bank;
}

void ToneMapperBank::zeroGrad() {
    forEachMlp([](const char *, Mlp &m) { m.zeroGrad(); });
}

BankGrads::BankGrads(const ToneMapperBank &bank) {
    for (std::size_t k = 0; k < 3; ++k) {
        global[k].assign(bank.global[k].parameterCount(), 0.0);
        residual[k].assign(bank.residual[k].parameterCount(), 0.0);
    }
    uncertainty.assign(bank.uncertainty.parameterCount(), 0.0);
}

namespace {
void addVec(std::vector<double> &dst, const std::vector<double> &src) {
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] += src[i];
    }
}
} // namespace

void BankGrads::add(const BankGrads &o) {
    for (std::size_t k = 0; k < 3; ++k) {
        addVec(global[k], o.global[k]);
        addVec(residual[k], o.residual[k]);
    }
    addVec(uncertainty, o.uncertainty);
}

void BankGrads::addInto(ToneMapperBank &bank) const {
    for (std::size_t k = 0; k < 3; ++k) {
        addVec(bank.global[k].grads(), global[k]);
        addVec(bank.residual[k].grads(), residual[k]);
    }
    addVec(bank.uncertainty.grads(), uncertainty);
}

std::array<double, 3> toneMapGlobal(const ToneMapperBank &bank, const std::array<double, 3> &lnEt) {
    std::array<double, 3> out{};
    Mlp::Tape tape;
    for (std::size_t k = 0; k < 3; ++k) {
        bank.global[k].forward(std::span<const double>(&lnEt[k], 1), std::span<double>(&out[k], 1), tape);
    }
    return out;
}

std::array<double, 3> toneMapLocal(const ToneMapperBank &bank, const std::array<double, 3> &lnEt,
                                   std::span<const double> feature, LocalToneTape &tape) {
    if (feature.size() != static_cast<std::size_t>(bank.featureDim)) {
        throw InvalidArgument("toneMapLocal: feature width does not match the bank");
    }
    std::array<double, 3> out{};
    tape.residualUsed = bank.residualEnabled;
    double input[64];
    const std::size_t d = feature.size();
    for (std::size_t k = 0; k < 3; ++k) {
        double c = 0.0;
        bank.global[k].forward(std::span<const double>(&lnEt[k], 1), std::span<double>(&c, 1), tape.global[k]);
        if (bank.residualEnabled) {
            input[0] = lnEt[k];
            std::copy(feature.begin(), feature.end(), input + 1);
            double r = 0.0;
            bank.residual[k].forward(std::span<const double>(input, d + 1), std::span<double>(&r, 1),
                                     tape.residual[k]);
            c += r;
        }
        tape.preClip[k] = c;
        out[k] = std::clamp(c, 0.0, 1.0);
    }
    return out;
}

std::array<double, 3> toneMapLocal(const ToneMapperBank &bank, const std::array<double, 3> &lnEt,
                                   std::span<const double> feature) {
    LocalToneTape tape;
    return toneMapLocal(bank, lnEt, feature, tape);
}

void toneMapLocalBackward(const ToneMapperBank &bank, const LocalToneTape &tape,
                          const std::array<double, 3> &gradLdr, BankGrads &grads,
                          std::array<double, 3> &gradLnEt, std::span<double> gradFeature) {
    const std::size_t d = static_cast<std::size_t>(bank.featureDim);
    if (!gradFeature.empty() && gradFeature.size() != d) {
        throw InvalidArgument("toneMapLocalBackward: feature gradient width mismatch");
    }
    if (tape.residualUsed && tape.residual[0].input.size() != d + 1) {
        throw InvalidArgument("toneMapLocalBackward: tape does not match the bank");
    }
    std::fill(gradFeature.begin(), gradFeature.end(), 0.0);
    gradLnEt = {0.0, 0.0, 0.0};
    double gx[64];
    for (std::size_t k = 0; k < 3; ++k) {
        const double pre = tape.preClip[k];
        if (!(pre > 0.0 && pre < 1.0) || gradLdr[k] == 0.0) {
            continue;
        }
        const double gy = gradLdr[k];
        double g1 = 0.0;
        bank.global[k].backward(tape.global[k], std::span<const double>(&gy, 1), grads.global[k],
                                std::span<double>(&g1, 1));
        gradLnEt[k] += g1;
        if (tape.residualUsed) {
            bank.residual[k].backward(tape.residual[k], std::span<const double>(&gy, 1), grads.residual[k],
                                      std::span<double>(gx, d + 1));
            gradLnEt[k] += gx[0];
            if (!gradFeature.empty()) {
                for (std::size_t j = 0; j < d; ++j) {
                    gradFeature[j] += gx[j + 1];
                }
            }
        }
    }
}

double predictUncertainty(const ToneMapperBank &bank, const std::array<double, 3> &lnEt,
                          std::span<const double> feature, UncertaintyTape &tape) {
    if (feature.size() != static_cast<std::size_t>(bank.featureDim)) {
        throw InvalidArgument("predictUncertainty: feature width does not match the bank");
    }
    double input[64];
    std::copy(lnEt.begin(), lnEt.end(), input);
    std::copy(feature.begin(), feature.end(), input + 3);
    double u = 0.0;
    bank.uncertainty.forward(std::span<const double>(input, 3 + feature.size()), std::span<double>(&u, 1),
                             tape.mlp);
    tape.preClip = u;
    return std::max(u, kUncertaintyFloor);
}

double predictUncertainty(const ToneMapperBank &bank, const std::array<double, 3> &lnEt,
                          std::span<const double> feature) {
    UncertaintyTape tape;
    return predictUncertainty(bank, lnEt, feature, tape);
}

void predictUncertaintyBackward(const ToneMapperBank &bank, const UncertaintyTape &tape, double gradU,
                                BankGrads &grads, std::array<double, 3> *gradLnEt,
                                std::span<double> gradFeature) {
    const std::size_t d = static_cast<std::size_t>(bank.featureDim);
    if (gradLnEt) {
        *gradLnEt = {0.0, 0.0, 0.0};
    }
    std::fill(gradFeature.begin(), gradFeature.end(), 0.0);
    if (!(tape.preClip > kUncertaintyFloor) || gradU == 0.0) {
        return;
    }
    const bool wantInputs = gradLnEt != nullptr || !gradFeature.empty();
    double gx[64];
    bank.uncertainty.backward(tape.mlp, std::span<const double>(&gradU, 1), grads.uncertainty,
                              wantInputs ? std::span<double>(gx, 3 + d) : std::span<double>());
    if (gradLnEt) {
        for (std::size_t k = 0; k < 3; ++k) {
            (*gradLnEt)[k] = gx[k];
        }
    }
    for (std::size_t j = 0; j < gradFeature.size(); ++j) {
        gradFeature[j] = gx[3 + j];
    }
}

double unitExposureLoss(const ToneMapperBank &bank) {
    const auto c = toneMapGlobal(bank, {0.0, 0.0, 0.0});
    double loss = 0.0;
    for (double v : c) {
        loss += (v - kUnitExposureTarget) * (v - kUnitExposureTarget);
    }
    return loss;
}

double unitExposureLossBackward(const ToneMapperBank &bank, double weight, BankGrads &grads) {
    double loss = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
        Mlp::Tape tape;
        const double zero = 0.0;
        double c = 0.0;
        bank.global[k].forward(std::span<const double>(&zero, 1), std::span<double>(&c, 1), tape);
        loss += (c - kUnitExposureTarget) * (c - kUnitExposureTarget);
        const double gy = weight * 2.0 * (c - kUnitExposureTarget);
        bank.global[k].backward(tape, std::span<const double>(&gy, 1), grads.global[k], {});
    }
    return loss;
}

} // namespace hdrsplat
