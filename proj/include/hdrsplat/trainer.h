// SPDX-License-Identifier: Apache-2.0
//
// Two-stage training loop. Stage 1 trains with the residual tone mappers disabled; stage 2
// switches them on. One view per iteration.
#pragma once

#include <hdrsplat/losses.h>
#include <hdrsplat/optim.h>
#include <hdrsplat/pipeline.h>
#include <hdrsplat/radiance_field.h>
#include <hdrsplat/scenegen.h>
#include <hdrsplat/tonemap.h>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace hdrsplat {

// Exp1: one fixed exposure per training view. Exp3: any of t1, t3, t5 per draw.
enum class ExposureMode { Exp1, Exp3 };

const char *toString(ExposureMode mode);
ExposureMode exposureModeFromString(const std::string &s);

// Training exposures are t1, t3, t5 (indices 0, 2, 4).
inline constexpr std::array<int, 3> kTrainExposures{0, 2, 4};

struct LearningRates {
    double positionInit = 1.6e-4;
    double positionFinal = 1.6e-6;
    double rotation = 1e-3;
    double scale = 5e-3;
    double opacity = 5e-2;
    double logIrradiance = 2.5e-3;
    double feature = 2.5e-3;
    double toneMapperInit = 5e-4; // g, dg
    double toneMapperFinal = 5e-5;
    double uncertaintyInit = 5e-4; // rho
    double uncertaintyFinal = 5e-5;

    // Groups: position rotation scale opacity log_irradiance feature tonemap uncertainty.
    LrSchedule schedule(std::uint64_t totalSteps) const;
};

struct TrainConfig {
    int totalIters = 3000;
    // Defaults to 20% of totalIters.
    std::optional<int> residualEnableIter;
    ExposureMode exposureMode = ExposureMode::Exp3;
    LossWeights weights;
    std::uint64_t seed = 0;
    int evalEvery = 0;       // probe PSNR cadence, 0 = never
    int checkpointEvery = 0; // 0 = final checkpoint only
    int logEvery = 1;
    // false: residual tone mappers stay off for the whole run (global-only ablation).
    bool localToneMapping = true;
    // false: uncertainty losses only start with stage 2.
    bool uncertaintyInStage1 = true;
    bool uncertaintyFeatureGrad = false;
    // Per-group gradient L2-norm ceiling applied before Adam; 0 disables clipping.
    double gradClip = 0.0;
    LearningRates lr;
    CloudConfig cloud;
    RenderOptions render;

    int residualStart() const;
    void validate() const;
};

// Draws (view, exposure index) pairs for a fixed list of training views.
class ExposureSampler {
public:
    // Exp1 assigns each view one of {t1, t3, t5} by a seeded permutation.
    ExposureSampler(std::vector<int> trainViews, ExposureMode mode, std::uint64_t seed);

    struct Example {
        int view = 0;
        int exposure = 0; // index into Dataset::exposures
    };

    Example sample(std::mt19937_64 &rng) const;
    // Exp1 only: the fixed exposure index for a view; throws for Exp3 or an unknown view.
    int assignedExposure(int view) const;
    ExposureMode mode() const { return mMode; }

private:
    std::vector<int> mViews;
    std::vector<int> mAssigned;
    ExposureMode mMode;
};

struct TrainState {
    GaussianCloud cloud;
    ToneMapperBank bank;
    std::map<std::string, AdamState> adam;
    std::uint64_t iteration = 0;
    std::mt19937_64 rng;
};

// Builds the initial state from the dataset's point cloud.
TrainState initialState(const TrainConfig &config, const Dataset &data);

struct StepReport {
    int view = 0;
    int exposure = 0;
    bool residualEnabled = false;
    LossReport loss;
    double meanUnc3d = 0.0;
    double meanUnc2d = 0.0;
};

// One optimisation step on the given example. Throws NumericalError with a diagnostic on a
// non-finite loss; parameters are left untouched in that case.
StepReport trainStep(TrainState &state, const TrainConfig &config, const Dataset &data,
                     const ExposureSampler::Example &example);

// PSNR of the merged LDR output against ground truth for one view and exposure index.
double probePsnr(const TrainState &state, const TrainConfig &config, const Dataset &data, int view, int exposure);

struct TrainCallbacks {
    std::function<void(const StepReport &, std::uint64_t iteration)> onStep;
};

struct TrainResult {
    TrainState state;
    std::filesystem::path finalCheckpoint;
    std::vector<std::string> log; // one JSON object per line
};

// Runs config.totalIters steps from the initial state. Writes <out>/final.ghdr, periodic
// <out>/checkpoint_NNNNNN.ghdr and <out>/train_log.jsonl. configEcho is stored verbatim in
// every checkpoint.
TrainResult train(const TrainConfig &config, const Dataset &data, const std::filesystem::path &outDir,
                  const std::string &configEcho = {}, const TrainCallbacks &callbacks = {});

// Training without any file output (used by experiments and tests).
TrainState trainInMemory(const TrainConfig &config, const Dataset &data, const TrainCallbacks &callbacks = {});

} // namespace hdrsplat
