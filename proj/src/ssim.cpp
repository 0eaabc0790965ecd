// SPDX-License-Identifier: Apache-2.0
#include <hdrsplat/error.h>
#include <hdrsplat/ssim.h>

#include <cmath>
#include <vector>

namespace hdrsplat {

int reflectIndex(int i, int n) {
    if (n == 1) {
        return 0;
    }
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) {
        i += period;
    }
    return i >= n ? period - i : i;
}

namespace {

std::vector<double> gaussianWindow(const SsimParams &p) {
    std::vector<double> w(static_cast<std::size_t>(2 * p.radius + 1));
    double sum = 0.0;
    for (int k = -p.radius; k <= p.radius; ++k) {
        const double v = std::exp(-0.5 * k * k / (p.sigma * p.sigma));
        w[static_cast<std::size_t>(k + p.radius)] = v;
        sum += v;
    }
    for (double &v : w) {
        v /= sum;
    }
    return w;
}

using Plane = std::vector<double>;

Plane blur(const Plane &in, int w, int h, const std::vector<double> &win, int r) {
    Plane tmp(in.size(), 0.0), out(in.size(), 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int k = -r; k <= r; ++k) {
                s += win[static_cast<std::size_t>(k + r)] * in[static_cast<std::size_t>(y * w + reflectIndex(x + k, w))];
            }
            tmp[static_cast<std::size_t>(y * w + x)] = s;
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int k = -r; k <= r; ++k) {
                s += win[static_cast<std::size_t>(k + r)] * tmp[static_cast<std::size_t>(reflectIndex(y + k, h) * w + x)];
            }
            out[static_cast<std::size_t>(y * w + x)] = s;
        }
    }
    return out;
}

// Adjoint of blur.
Plane blurAdjoint(const Plane &g, int w, int h, const std::vector<double> &win, int r) {
    Plane tmp(g.size(), 0.0), out(g.size(), 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double v = g[static_cast<std::size_t>(y * w + x)];
            for (int k = -r; k <= r; ++k) {
                tmp[static_cast<std::size_t>(reflectIndex(y + k, h) * w + x)] += win[static_cast<std::size_t>(k + r)] * v;
            }
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double v = tmp[static_cast<std::size_t>(y * w + x)];
            for (int k = -r; k <= r; ++k) {
                out[static_cast<std::size_t>(y * w + reflectIndex(x + k, w))] += win[static_cast<std::size_t>(k + r)] * v;
            }
        }
    }
    return out;
}

struct ChannelStats {
    Plane a, b, mu_a, mu_b, aa, bb, ab;
};

ChannelStats stats(const Image &a, const Image &b, int c, const std::vector<double> &win, int r) {
    const std::size_t n = a.pixelCount();
    ChannelStats s;
    s.a.resize(n);
    s.b.resize(n);
    Plane aa(n), bb(n), ab(n);
    for (std::size_t p = 0; p < n; ++p) {
        const double va = a.data[p * static_cast<std::size_t>(a.channels) + static_cast<std::size_t>(c)];
        const double vb = b.data[p * static_cast<std::size_t>(b.channels) + static_cast<std::size_t>(c)];
        s.a[p] = va;
        s.b[p] = vb;
        aa[p] = va * va;
        bb[p] = vb * vb;
        ab[p] = va * vb;
    }
    s.mu_a = blur(s.a, a.width, a.height, win, r);
    s.mu_b = blur(s.b, a.width, a.height, win, r);
    s.aa = blur(aa, a.width, a.height, win, r);
    s.bb = blur(bb, a.width, a.height, win, r);
    s.ab = blur(ab, a.width, a.height, win, r);
    return s;
}

} // namespace

Image ssimMap(const Image &a, const Image &b, const SsimParams &params) {
    requireSameShape(a, b, "ssimMap");
    const auto win = gaussianWindow(params);
    Image out(a.width, a.height, 1);
    const std::size_t n = a.pixelCount();
    for (int c = 0; c < a.channels; ++c) {
        const ChannelStats s = stats(a, b, c, win, params.radius);
        for (std::size_t p = 0; p < n; ++p) {
            const double x = s.mu_a[p], y = s.mu_b[p];
            const double num1 = 2.0 * x * y + params.c1;
            const double num2 = 2.0 * (s.ab[p] - x * y) + params.c2;
            const double den1 = x * x + y * y + params.c1;
            const double den2 = (s.aa[p] - x * x) + (s.bb[p] - y * y) + params.c2;
            out.data[p] += num1 * num2 / (den1 * den2);
        }
    }
    for (double &v : out.data) {
        v /= a.channels;
    }
    return out;
}

Image ssimMapBackward(const Image &a, const Image &b, const Image &gradMap, const SsimParams &params) {
    requireSameShape(a, b, "ssimMapBackward");
    if (gradMap.width != a.width || gradMap.height != a.height || gradMap.channels != 1) {
        throw InvalidArgument("ssimMapBackward: gradient map shape mismatch");
    }
    const auto win = gaussianWindow(params);
    const int r = params.radius;
    Image out(a.width, a.height, a.channels);
    const std::size_t n = a.pixelCount();
    const double inv = 1.0 / a.channels;
    for (int c = 0; c < a.channels; ++c) {
        const ChannelStats s = stats(a, b, c, win, r);
        Plane gx(n), gaa(n), gab(n);
        for (std::size_t p = 0; p < n; ++p) {
            const double g = gradMap.data[p] * inv;
            const double x = s.mu_a[p], y = s.mu_b[p];
            const double num1 = 2.0 * x * y + params.c1;
            const double num2 = 2.0 * (s.ab[p] - x * y) + params.c2;
            const double den1 = x * x + y * y + params.c1;
            const double den2 = (s.aa[p] - x * x) + (s.bb[p] - y * y) + params.c2;
            const double ssim = num1 * num2 / (den1 * den2);
            const double dX = (2.0 * y * num2 - 2.0 * y * num1) / (den1 * den2) - ssim * 2.0 * x / den1 +
                              ssim * 2.0 * x / den2;
            gx[p] = g * dX;
            gaa[p] = g * (-ssim / den2);
            gab[p] = g * (2.0 * num1 / (den1 * den2));
        }
        const Plane ax = blurAdjoint(gx, a.width, a.height, win, r);
        const Plane aaa = blurAdjoint(gaa, a.width, a.height, win, r);
        const Plane aab = blurAdjoint(gab, a.width, a.height, win, r);
        for (std::size_t p = 0; p < n; ++p) {
            out.data[p * static_cast<std::size_t>(a.channels) + static_cast<std::size_t>(c)] =
                ax[p] + 2.0 * s.a[p] * aaa[p] + s.b[p] * aab[p];
        }
    }
    return out;
}

} // namespace hdrsplat
