// SPDX-License-Identifier: Apache-2.0
#include <hdrsplat/error.h>
#include <hdrsplat/mlp.h>
#include <hdrsplat/radiance_field.h>

#include <algorithm>
#include <cmath>

namespace hdrsplat {

const char *toString(OutputActivation act) {
    switch (act) {
    case OutputActivation::Sigmoid:
        return "sigmoid";
    case OutputActivation::Identity:
        return "identity";
    case OutputActivation::Softplus:
        return "softplus";
    }
    return "unknown";
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

Mlp::Mlp(int inputs, int hidden, int outputs, OutputActivation act)
    : mIn(inputs), mHidden(hidden), mOut(outputs), mAct(act) {
    if (inputs < 1 || hidden < 1 || outputs < 1) {
        throw InvalidArgument("Mlp: layer sizes must be positive");
    }
    const auto n = static_cast<std::size_t>(hidden * inputs + hidden + outputs * hidden + outputs);
    mParams.assign(n, 0.0);
    mGrads.assign(n, 0.0);
}

void Mlp::initXavier(std::mt19937_64 &rng) {
    std::fill(mParams.begin(), mParams.end(), 0.0);
    const double a1 = std::sqrt(6.0 / (mIn + mHidden));
    const double a2 = std::sqrt(6.0 / (mHidden + mOut));
    std::uniform_real_distribution<double> u1(-a1, a1), u2(-a2, a2);
    double *w1 = mParams.data();
    for (int i = 0; i < mHidden * mIn; ++i) {
        w1[i] = u1(rng);
    }
    double *w2 = mParams.data() + mHidden * mIn + mHidden;
    for (int i = 0; i < mOut * mHidden; ++i) {
        w2[i] = u2(rng);
    }
}

void Mlp::zeroGrad() { std::fill(mGrads.begin(), mGrads.end(), 0.0); }

void Mlp::forward(std::span<const double> x, std::span<double> y, Tape &tape) const {
    if (x.size() != static_cast<std::size_t>(mIn) || y.size() != static_cast<std::size_t>(mOut)) {
        throw InvalidArgument("Mlp::forward: expected " + std::to_string(mIn) + " inputs and " +
                              std::to_string(mOut) + " outputs");
    }
    tape.input.assign(x.begin(), x.end());
    tape.hiddenPre.resize(static_cast<std::size_t>(mHidden));
    tape.outputPre.resize(static_cast<std::size_t>(mOut));
    const double *w1 = mParams.data();
    const double *b1 = w1 + mHidden * mIn;
    const double *w2 = b1 + mHidden;
    const double *b2 = w2 + mOut * mHidden;
    for (int j = 0; j < mHidden; ++j) {
        double s = b1[j];
        const double *row = w1 + j * mIn;
        for (int i = 0; i < mIn; ++i) {
            s += row[i] * x[static_cast<std::size_t>(i)];
        }
        tape.hiddenPre[static_cast<std::size_t>(j)] = s;
    }
    for (int o = 0; o < mOut; ++o) {
        double s = b2[o];
        const double *row = w2 + o * mHidden;
        for (int j = 0; j < mHidden; ++j) {
            const double hj = tape.hiddenPre[static_cast<std::size_t>(j)];
            s += row[j] * (hj > 0.0 ? hj : 0.0);
        }
        tape.outputPre[static_cast<std::size_t>(o)] = s;
        switch (mAct) {
        case OutputActivation::Sigmoid:
            y[static_cast<std::size_t>(o)] = sigmoid(s);
            break;
        case OutputActivation::Identity:
            y[static_cast<std::size_t>(o)] = s;
            break;
        case OutputActivation::Softplus:
            y[static_cast<std::size_t>(o)] = softplus(s);
            break;
        }
    }
}

void Mlp::backward(const Tape &tape, std::span<const double> gradY, std::span<double> gradParams,
                   std::span<double> gradX) const {
    if (gradY.size() != static_cast<std::size_t>(mOut) || gradParams.size() != mParams.size() ||
        (!gradX.empty() && gradX.size() != static_cast<std::size_t>(mIn)) ||
        tape.input.size() != static_cast<std::size_t>(mIn) ||
        tape.hiddenPre.size() != static_cast<std::size_t>(mHidden)) {
        throw InvalidArgument("Mlp::backward: tape or gradient shape mismatch");
    }
    const double *w1 = mParams.data();
    const double *w2 = w1 + mHidden * mIn + mHidden;
    double *gw1 = gradParams.data();
    double *gb1 = gw1 + mHidden * mIn;
    double *gw2 = gb1 + mHidden;
    double *gb2 = gw2 + mOut * mHidden;

    // Gradient w.r.t. the hidden activations, summed over outputs.
    double gHidden[512];
    std::vector<double> gHiddenHeap;
    double *gh = gHidden;
    if (mHidden > 512) {
        gHiddenHeap.assign(static_cast<std::size_t>(mHidden), 0.0);
        gh = gHiddenHeap.data();
    } else {
        std::fill(gh, gh + mHidden, 0.0);
    }
    bool anyOut = false;
    for (int o = 0; o < mOut; ++o) {
        const double s = tape.outputPre[static_cast<std::size_t>(o)];
        double d = gradY[static_cast<std::size_t>(o)];
        switch (mAct) {
        case OutputActivation::Sigmoid: {
            const double sg = sigmoid(s);
            d *= sg * (1.0 - sg);
            break;
        }
        case OutputActivation::Identity:
            break;
        case OutputActivation::Softplus:
            d *= sigmoid(s);
            break;
        }
        if (d == 0.0) {
            continue;
        }
        anyOut = true;
        gb2[o] += d;
        const double *row = w2 + o * mHidden;
        double *grow = gw2 + o * mHidden;
        for (int j = 0; j < mHidden; ++j) {
            const double hj = tape.hiddenPre[static_cast<std::size_t>(j)];
            if (hj > 0.0) {
                grow[j] += d * hj;
                gh[j] += d * row[j];
            }
        }
    }
    if (!gradX.empty()) {
        std::fill(gradX.begin(), gradX.end(), 0.0);
    }
    if (!anyOut) {
        return;
    }
    for (int j = 0; j < mHidden; ++j) {
        const double d = gh[j];
        if (d == 0.0) {
            continue;
        }
        gb1[j] += d;
        double *grow = gw1 + j * mIn;
        const double *row = w1 + j * mIn;
        for (int i = 0; i < mIn; ++i) {
            grow[i] += d * tape.input[static_cast<std::size_t>(i)];
        }
        if (!gradX.empty()) {
            for (int i = 0; i < mIn; ++i) {
                gradX[static_cast<std::size_t>(i)] += d * row[i];
            }
        }
    }
}

} // namespace hdrsplat
