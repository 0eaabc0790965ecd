// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <hdrsplat/error.h>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace hdrsplat {

// Interleaved row-major image: pixel (x, y) channel c lives at ((y * width + x) * channels + c).
// Row 0 is the top of the image.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c),
          data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * static_cast<std::size_t>(c), fill) {}

    std::size_t pixelCount() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
    std::size_t index(int x, int y, int c = 0) const {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) *
                   static_cast<std::size_t>(channels) +
               static_cast<std::size_t>(c);
    }
    double &at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
    double at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }

    std::span<double> pixel(std::size_t p) {
        return {data.data() + p * static_cast<std::size_t>(channels), static_cast<std::size_t>(channels)};
    }
    std::span<const double> pixel(std::size_t p) const {
        return {data.data() + p * static_cast<std::size_t>(channels), static_cast<std::size_t>(channels)};
    }

    bool sameShape(const Image &o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
    bool empty() const { return data.empty(); }
};

inline void requireSameShape(const Image &a, const Image &b, const std::string &what) {
    if (!a.sameShape(b)) {
        throw InvalidArgument(what + ": image shape mismatch (" + std::to_string(a.width) + "x" +
                              std::to_string(a.height) + "x" + std::to_string(a.channels) + " vs " +
                              std::to_string(b.width) + "x" + std::to_string(b.height) + "x" +
                              std::to_string(b.channels) + ")");
    }
}

// Copies channels [first, first + count) into a new image.
Image sliceChannels(const Image &src, int first, int count);

} // namespace hdrsplat
