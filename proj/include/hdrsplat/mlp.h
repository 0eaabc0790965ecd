// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace hdrsplat {

enum class OutputActivation { Sigmoid, Identity, Softplus };

const char *toString(OutputActivation act);

// in -> hidden (ReLU) -> out (OutputActivation). Parameters are stored flat as
// [W1 (hidden x in, row-major), b1 (hidden), W2 (out x hidden, row-major), b2 (out)].
class Mlp {
public:
    struct Tape {
        std::vector<double> input;
        std::vector<double> hiddenPre;
        std::vector<double> outputPre;
    };

    Mlp() = default;
    Mlp(int inputs, int hidden, int outputs, OutputActivation act);

    int inputs() const { return mIn; }
    int hidden() const { return mHidden; }
    int outputs() const { return mOut; }
    OutputActivation activation() const { return mAct; }
    std::size_t parameterCount() const { return mParams.size(); }

    std::vector<double> &params() { return mParams; }
    const std::vector<double> &params() const { return mParams; }
    std::vector<double> &grads() { return mGrads; }
    const std::vector<double> &grads() const { return mGrads; }

    // Uniform +-sqrt(6 / (fan_in + fan_out)) weights, zero biases.
    void initXavier(std::mt19937_64 &rng);
    void zeroGrad();

    // Throws InvalidArgument when x.size() != inputs() or y.size() != outputs().
    void forward(std::span<const double> x, std::span<double> y, Tape &tape) const;
    // Accumulates parameter gradients into gradParams (parameterCount() long) and, when gradX is
    // non-empty, writes (not accumulates) the input gradient.
    void backward(const Tape &tape, std::span<const double> gradY, std::span<double> gradParams,
                  std::span<double> gradX) const;

private:
    int mIn = 0;
    int mHidden = 0;
    int mOut = 0;
    OutputActivation mAct = OutputActivation::Identity;
    std::vector<double> mParams;
    std::vector<double> mGrads;
};

double softplus(double x);

} // namespace hdrsplat
