// SPDX-License-Identifier: Apache-2.0
//
// Reconstruction, uncertainty and joint losses. All terms are formed per pixel and averaged
// last, so the uncertainty modulation stays spatially adaptive.
#pragma once

#include <hdrsplat/image.h>
#include <hdrsplat/pipeline.h>
#include <hdrsplat/ssim.h>
#include <hdrsplat/tonemap.h>

#include <optional>

namespace hdrsplat {

enum class ModulationMode { PerPixel, PerImage };

struct LossWeights {
    double lambdaD = 0.2;
    double lambdaU = 0.5;
    double lambdaE = 0.5;
    // When set, the modulated loss is replaced by beta * L3d + (1 - beta) * L2d.
    std::optional<double> beta;
    bool uncertaintyLoss = true;
    bool unitExposureLoss = true;
    ModulationMode modulation = ModulationMode::PerPixel;

    // Throws InvalidArgument on out-of-range weights.
    void validate() const;
};

struct ReconLoss {
    double value = 0.0;
    Image map;   // 1 channel
    Image dssim; // 1 channel, (1 - SSIM) / 2
};

// map = wD * DSSIM + (1 - wD) * channel-mean |img - gt|; value = mean(map).
ReconLoss reconLoss(const Image &img, const Image &gt, double wD);

// Gradient of sum_p pixelWeights(p) * map(p) with respect to img.
Image reconLossBackward(const Image &img, const Image &gt, double wD, const Image &pixelWeights);

// mean_p dssim / (2 U^2) + lambdaU * ln U. dssim is a constant here.
double uncertaintyLoss(const Image &dssim, const Image &unc, double lambdaU);
// d(uncertaintyLoss)/dU
Image uncertaintyLossBackward(const Image &dssim, const Image &unc, double lambdaU);

// Weight on the 3D-path loss: U2d^2 / (U3d^2 + U2d^2). The 2D weight is one minus this.
Image modulationWeights(const Image &unc3d, const Image &unc2d, ModulationMode mode = ModulationMode::PerPixel);

// mean_p (U2d^2 * map3d + U3d^2 * map2d) / (U3d^2 + U2d^2), with U treated as constant.
double jointModulatedLoss(const Image &map3d, const Image &map2d, const Image &unc3d, const Image &unc2d,
                          ModulationMode mode = ModulationMode::PerPixel);

// Pixelwise (U2d^2 * I3d + U3d^2 * I2d) / (U3d^2 + U2d^2).
Image mergeLdr(const Image &ldr3d, const Image &ldr2d, const Image &unc3d, const Image &unc2d);

struct LossReport {
    double l3d = 0.0;
    double l2d = 0.0;
    double l3dUnc = 0.0;
    double l2dUnc = 0.0;
    double lgs = 0.0;
    double lunc = 0.0;
    double le = 0.0;
    double total = 0.0;
    Image dssim3d;
    Image dssim2d;
    Image weight3d; // modulation weight w; the 2D path gets 1 - w
};

struct LossComponents {
    double l3d = 0.0;
    double l2d = 0.0;
    double lgs = 0.0;
    double l3dUnc = 0.0;
    double l2dUnc = 0.0;
    double le = 0.0;
};

// total = Lgs + Lunc + lambdaE * Le, with Lgs replaced by the beta mix in ablation mode.
LossReport totalLoss(const LossComponents &parts, const LossWeights &weights);

// Upstream gradients for one training view, split by stop-gradient group.
struct LossGradients {
    Image ldr3d; // from Lgs
    Image ldr2d; // from Lgs
    Image unc3d; // from Lunc
    Image unc2d; // from Lunc
};

struct LossEvaluation {
    LossReport report;
    LossGradients grads;
};

// Evaluates every term for a rendered view against the LDR ground truth and the image-space
// gradients of the objective. The unit-exposure term is included in the report; its parameter
// gradient is applied separately via unitExposureLossBackward.
LossEvaluation evaluateLosses(const RenderOutput &render, const Image &gt, const ToneMapperBank &bank,
                              const LossWeights &weights);

} // namespace hdrsplat
