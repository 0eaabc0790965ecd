// SPDX-License-Identifier: Apache-2.0
//
// Front-to-back alpha blending of depth-sorted 2D splats carrying an arbitrary-width payload,
// plus the exact reverse-mode pass over the recorded blend.
#pragma once

#include <hdrsplat/core_math.h>
#include <hdrsplat/image.h>

#include <cstdint>
#include <span>
#include <vector>

namespace hdrsplat {

namespace raster {
inline constexpr double kMaxSigma = 0.99;
inline constexpr double kMinSigma = 1.0 / 255.0;
inline constexpr double kMinTransmittance = 1e-4;
// A splat reaches a pixel only inside its 3-sigma ellipse (squared Mahalanobis distance <= 9).
inline constexpr double kCutoffMahalanobis2 = 9.0;
inline constexpr int kTileSize = 16;
} // namespace raster

// Stable ascending-depth ordering (indices into `splats`).
std::vector<std::size_t> sortSplats(std::span<const Splat2D> splats);

struct RasterInputs {
    std::span<const Splat2D> splats;  // already depth-sorted
    std::span<const double> opacity;  // indexed by Splat2D::gaussianIndex
    std::span<const double> payload;  // gaussianCount * channels, indexed by Splat2D::gaussianIndex
    int channels = 0;
    std::span<const double> background; // channels
    int width = 0;
    int height = 0;
};

struct BlendEntry {
    std::uint32_t splat = 0; // position in the sorted splat list
    double sigma = 0.0;      // alpha * G'(p) after clamping
    double transmittance = 0.0;
    bool clamped = false;
};

// Per-pixel list of blended terms in front-to-back order (CSR layout).
struct BlendRecord {
    int width = 0;
    int height = 0;
    std::size_t splatCount = 0;
    std::vector<std::size_t> pixelStart; // pixelCount + 1 offsets into entries
    std::vector<BlendEntry> entries;
    std::vector<double> finalTransmittance;

    std::span<const BlendEntry> pixelEntries(std::size_t p) const {
        return {entries.data() + pixelStart[p], pixelStart[p + 1] - pixelStart[p]};
    }
};

struct RasterOutput {
    Image color; // channels = inputs.channels
    Image alpha; // 1 - final transmittance
    BlendRecord record;
    std::size_t degenerateSplats = 0; // splats skipped for a non-positive-definite covariance
};

struct RasterOptions {
    // Coarse 16x16 tile culling; must produce results identical to the exhaustive path.
    bool tiled = true;
};

RasterOutput rasterizeForward(const RasterInputs &in, const RasterOptions &opts = {});

struct RasterGrads {
    std::vector<double> payload; // gaussianCount * channels
    std::vector<double> opacity; // gaussianCount
    std::vector<Vec2> mean2d;    // per sorted splat
    std::vector<Mat2> cov2d;     // per sorted splat
};

// `gradOut` has the forward's shape. Channels with geometryMask[c] == false still receive payload
// gradients but do not push gradients into opacity or splat geometry (empty mask = all true).
RasterGrads rasterizeBackward(const Image &gradOut, const BlendRecord &record, const RasterInputs &in,
                              std::span<const bool> geometryMask = {});

} // namespace hdrsplat
