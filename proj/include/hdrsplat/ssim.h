// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <hdrsplat/image.h>

namespace hdrsplat {

struct SsimParams {
    int radius = 5; // 11x11 window
    double sigma = 1.5;
    double c1 = 0.01 * 0.01;
    double c2 = 0.03 * 0.03;
};

// Per-pixel SSIM averaged over channels (1-channel result). Gaussian window, reflection padding.
Image ssimMap(const Image &a, const Image &b, const SsimParams &params = {});

// Gradient of sum_p gradMap(p) * ssimMap(a, b)(p) with respect to a.
Image ssimMapBackward(const Image &a, const Image &b, const Image &gradMap, const SsimParams &params = {});

// Mirror padding without edge repeat: -1 -> 1, n -> n - 2.
int reflectIndex(int i, int n);

} // namespace hdrsplat
