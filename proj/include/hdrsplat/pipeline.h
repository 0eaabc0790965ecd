// SPDX-License-Identifier: Apache-2.0
//
// Dual-path rendering. One blend pass carries [e, c*, f, u] per Gaussian and yields the HDR
// image E, the 3D-tone-mapped image I3d, the feature map F and the uncertainty map U3d; the 2D
// path then tone-maps every pixel of (E, F) into I2d and U2d.
#pragma once

#include <hdrsplat/core_math.h>
#include <hdrsplat/image.h>
#include <hdrsplat/radiance_field.h>
#include <hdrsplat/rasterizer.h>
#include <hdrsplat/tonemap.h>

#include <array>
#include <functional>
#include <optional>
#include <vector>

namespace hdrsplat {

struct ExposureContext {
    double t = 1.0;
    double lnT = 0.0;

    // Throws InvalidArgument unless t > 0 and finite.
    static ExposureContext fromTime(double t);
};

// Forward-only replacement for the local tone mapper on both paths (test hook).
using ToneMapOverride =
    std::function<std::array<double, 3>(const std::array<double, 3> &lnEt, std::span<const double> feature)>;

struct RenderOptions {
    ProjectionConfig projection;
    RasterOptions raster;
    double logGuard = 1e-6;           // ln(max(E, guard)) on the 2D path
    double uncertaintyBackground = kUncertaintyFloor;
    std::array<double, 3> whiteBalance{1.0, 1.0, 1.0}; // multiplies irradiance before tone mapping
    ToneMapOverride toneMapOverride;
};

// Everything the backward pass needs from a forward call.
struct RenderCache {
    ExposureContext exposure;
    RenderOptions options;
    int featureDim = 0;
    int payloadWidth = 0;
    bool residualEnabled = false;
    std::size_t gaussianCount = 0;
    std::vector<Splat2D> splats; // depth-sorted, visible only
    std::vector<double> opacity;
    std::vector<double> payload;
    std::vector<double> background;
    std::vector<std::array<double, 3>> gaussianLnEt;
    BlendRecord record;
    Camera camera;
};

struct RenderOutput {
    Image hdr;   // E, 3 channels
    Image feature; // F, d channels
    Image ldr3d; // I3d
    Image ldr2d; // I2d
    Image unc3d; // U3d, 1 channel
    Image unc2d; // U2d, 1 channel
    Image alpha;
    RenderCache cache;
};

RenderOutput renderView(const GaussianCloud &cloud, const ToneMapperBank &bank, const Camera &cam,
                        const ExposureContext &exposure, const RenderOptions &options = {});

// Upstream gradients; any subset may be absent.
struct RenderGradInputs {
    const Image *ldr3d = nullptr;
    const Image *ldr2d = nullptr;
    const Image *unc3d = nullptr;
    const Image *unc2d = nullptr;
    const Image *hdr = nullptr;
    const Image *feature = nullptr;
};

struct BackwardOptions {
    // Stop-gradient for the uncertainty loss: U maps reach only rho's parameters; blend weights,
    // ln(e t) and features receive nothing. Only unc3d / unc2d gradients are accepted.
    bool uncertaintyOnly = false;
    // With uncertaintyOnly, still let rho's feature input train the context features.
    bool uncertaintyFeatureGrad = false;
};

// Accumulates into cloud.grads() and bank's gradient buffers.
void renderViewBackward(const RenderOutput &out, const RenderGradInputs &grads, GaussianCloud &cloud,
                        ToneMapperBank &bank, const BackwardOptions &options = {});

// Channelwise scaling of an HDR image (no clipping). Throws unless every factor is > 0.
Image applyWhiteBalance(const Image &hdr, const std::array<double, 3> &factors);
// Display variant: multiply then clip to [0, 1].
Image applyWhiteBalanceLdr(const Image &ldr, const std::array<double, 3> &factors);

} // namespace hdrsplat
