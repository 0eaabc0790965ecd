// SPDX-License-Identifier: Apache-2.0
#include <hdrsplat/checkpoint.h>
#include <hdrsplat/error.h>
#include <hdrsplat/image_io.h>
#include <hdrsplat/metrics.h>
#include <hdrsplat/trainer.h>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace hdrsplat {

const char *toString(ExposureMode mode) { return mode == ExposureMode::Exp1 ? "exp1" : "exp3"; }

ExposureMode exposureModeFromString(const std::string &s) {
    if (s == "exp1") {
        return ExposureMode::Exp1;
    }
    if (s == "exp3") {
        return ExposureMode::Exp3;
    }
    throw InvalidArgument("unknown exposure mode '" + s + "' (expected exp1 or exp3)");
}

LrSchedule LearningRates::schedule(std::uint64_t totalSteps) const {
    const std::uint64_t total = std::max<std::uint64_t>(totalSteps, 1);
    LrSchedule s;
    s.set("position", {positionInit, positionFinal, total});
    s.set("rotation", {rotation, rotation, total});
    s.set("scale", {scale, scale, total});
    s.set("opacity", {opacity, opacity, total});
    s.set("log_irradiance", {logIrradiance, logIrradiance, total});
    s.set("feature", {feature, feature, total});
    s.set("tonemap", {toneMapperInit, toneMapperFinal, total});
    s.set("uncertainty", {uncertaintyInit, uncertaintyFinal, total});
    return s;
}

int TrainConfig::residualStart() const {
    if (residualEnableIter) {
        return *residualEnableIter;
    }
    return totalIters / 5;
}

void TrainConfig::validate() const {
    if (totalIters < 0) {
        throw InvalidArgument("total_iters must be >= 0");
    }
    const int rs = residualStart();
    if (rs < 0 || rs > totalIters) {
        throw InvalidArgument("residual_enable_iter must lie in [0, total_iters]");
    }
    if (evalEvery < 0 || checkpointEvery < 0 || logEvery < 0) {
        throw InvalidArgument("eval_every, checkpoint_every and log_every must be >= 0");
    }
    if (!(gradClip >= 0.0) || !std::isfinite(gradClip)) {
        throw InvalidArgument("grad_clip must be >= 0 (0 disables clipping)");
    }
    weights.validate();
    for (double v : {lr.positionInit, lr.positionFinal, lr.rotation, lr.scale, lr.opacity, lr.logIrradiance,
                     lr.feature, lr.toneMapperInit, lr.toneMapperFinal, lr.uncertaintyInit, lr.uncertaintyFinal}) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw InvalidArgument("learning rates must be positive and finite");
        }
    }
    if (cloud.featureDim < 1 || cloud.featureDim > 60) {
        throw InvalidArgument("feature_dim must lie in [1, 60]");
    }
}

ExposureSampler::ExposureSampler(std::vector<int> trainViews, ExposureMode mode, std::uint64_t seed)
    : mViews(std::move(trainViews)), mMode(mode) {
    if (mViews.empty()) {
        throw InvalidArgument("exposure sampler needs at least one training view");
    }
    if (mMode == ExposureMode::Exp1) {
        // balanced assignment, then a seeded shuffle
        mAssigned.resize(mViews.size());
        for (std::size_t i = 0; i < mViews.size(); ++i) {
            mAssigned[i] = kTrainExposures[i % 3];
        }
        std::mt19937_64 rng(seed ^ 0x5851f42d4c957f2dULL);
        for (std::size_t i = mAssigned.size(); i > 1; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i - 1);
            std::swap(mAssigned[i - 1], mAssigned[pick(rng)]);
        }
    }
}

ExposureSampler::Example ExposureSampler::sample(std::mt19937_64 &rng) const {
    std::uniform_int_distribution<std::size_t> pickView(0, mViews.size() - 1);
    const std::size_t i = pickView(rng);
    Example ex;
    ex.view = mViews[i];
    if (mMode == ExposureMode::Exp1) {
        ex.exposure = mAssigned[i];
    } else {
        std::uniform_int_distribution<std::size_t> pickExp(0, 2);
        ex.exposure = kTrainExposures[pickExp(rng)];
    }
    return ex;
}

int ExposureSampler::assignedExposure(int view) const {
    if (mMode != ExposureMode::Exp1) {
        throw InvalidArgument("assignedExposure is defined for Exp1 only");
    }
    const auto it = std::find(mViews.begin(), mViews.end(), view);
    if (it == mViews.end()) {
        throw InvalidArgument("view " + std::to_string(view) + " is not a training view");
    }
    return mAssigned[static_cast<std::size_t>(it - mViews.begin())];
}

TrainState initialState(const TrainConfig &config, const Dataset &data) {
    config.validate();
    if (data.points.empty()) {
        throw InvalidArgument("dataset has no initial points (points.txt)");
    }
    // Hints are LDR colours at t3; dividing by t3 gives a first irradiance guess.
    std::vector<Vec3> hints;
    const double t3 = data.exposures[2];
    for (const Vec3 &c : data.pointColors) {
        hints.push_back(c / t3);
    }
    TrainState st;
    st.cloud = initFromPoints(data.points,
                              hints.empty() ? std::nullopt : std::optional<std::span<const Vec3>>(hints),
                              config.cloud, config.seed);
    st.bank = ToneMapperBank::xavier(config.cloud.featureDim, config.seed + 1);
    st.bank.residualEnabled = false;
    st.rng.seed(config.seed + 2);
    return st;
}

namespace {

double meanOf(const Image &img) {
    if (img.data.empty()) {
        return 0.0;
    }
    return std::accumulate(img.data.begin(), img.data.end(), 0.0) / static_cast<double>(img.data.size());
}

const Image &groundTruth(const Dataset &data, int view, int exposure) {
    if (view < 0 || static_cast<std::size_t>(view) >= data.ldr.size() || exposure < 0 || exposure > 4) {
        throw InvalidArgument("no LDR image for view " + std::to_string(view) + " exposure " +
                              std::to_string(exposure + 1));
    }
    const Image &gt = data.ldr[static_cast<std::size_t>(view)][static_cast<std::size_t>(exposure)];
    if (gt.empty()) {
        throw InvalidArgument("LDR image for view " + std::to_string(view) + " exposure " +
                              std::to_string(exposure + 1) + " is missing");
    }
    return gt;
}

std::string diagnostic(std::uint64_t iter, int view, int exposure, const LossReport &r) {
    std::ostringstream os;
    os << "non-finite loss at iteration " << iter << " (view " << view << ", exposure t" << exposure + 1
       << "): l3d=" << r.l3d << " l2d=" << r.l2d << " lgs=" << r.lgs << " l3d_unc=" << r.l3dUnc
       << " l2d_unc=" << r.l2dUnc << " le=" << r.le << " total=" << r.total;
    return os.str();
}

void checkFiniteGrads(std::span<const double> g, const std::string &group, const std::string &where) {
    for (double v : g) {
        if (!std::isfinite(v)) {
            throw NumericalError("non-finite gradient in group '" + group + "' at " + where);
        }
    }
}

} // namespace

StepReport trainStep(TrainState &state, const TrainConfig &config, const Dataset &data,
                     const ExposureSampler::Example &example) {
    const Image &gt = groundTruth(data, example.view, example.exposure);
    const auto iter = state.iteration;
    const bool stage2 = static_cast<std::int64_t>(iter) >= config.residualStart();
    state.bank.residualEnabled = config.localToneMapping && stage2;

    LossWeights weights = config.weights;
    if (!config.uncertaintyInStage1 && !stage2) {
        weights.uncertaintyLoss = false;
    }

    const Camera &cam = data.cameras[static_cast<std::size_t>(example.view)];
    const RenderOutput out = renderView(state.cloud, state.bank, cam,
                                        ExposureContext::fromTime(data.exposures[static_cast<std::size_t>(example.exposure)]),
                                        config.render);
    const LossEvaluation ev = evaluateLosses(out, gt, state.bank, weights);
    if (!std::isfinite(ev.report.total)) {
        throw NumericalError(diagnostic(iter, example.view, example.exposure, ev.report));
    }

    state.cloud.zeroGrad();
    state.bank.zeroGrad();
    RenderGradInputs gs;
    gs.ldr3d = &ev.grads.ldr3d;
    gs.ldr2d = &ev.grads.ldr2d;
    renderViewBackward(out, gs, state.cloud, state.bank);
    if (weights.uncertaintyLoss) {
        RenderGradInputs gu;
        gu.unc3d = &ev.grads.unc3d;
        gu.unc2d = &ev.grads.unc2d;
        BackwardOptions bo;
        bo.uncertaintyOnly = true;
        bo.uncertaintyFeatureGrad = config.uncertaintyFeatureGrad;
        renderViewBackward(out, gu, state.cloud, state.bank, bo);
    }
    if (weights.unitExposureLoss) {
        BankGrads bg(state.bank);
        unitExposureLossBackward(state.bank, weights.lambdaE, bg);
        bg.addInto(state.bank);
    }

    // Validate everything before touching any parameter.
    const std::string where = "iteration " + std::to_string(iter) + " (view " + std::to_string(example.view) +
                              ", exposure t" + std::to_string(example.exposure + 1) + ")";
    for (auto &g : state.cloud.groups()) {
        checkFiniteGrads(g.grads, g.name, where);
    }
    state.bank.forEachMlp([&](const char *name, Mlp &m) { checkFiniteGrads(m.grads(), name, where); });

    const LrSchedule sched = config.lr.schedule(static_cast<std::uint64_t>(config.totalIters));
    if (config.gradClip > 0.0) {
        for (auto &g : state.cloud.groups()) {
            clipGradNorm(g.grads, config.gradClip);
        }
        state.bank.forEachMlp([&](const char *, Mlp &m) { clipGradNorm(m.grads(), config.gradClip); });
    }
    for (auto &g : state.cloud.groups()) {
        adamStep(g.values, g.grads, state.adam[g.name], sched.lr(g.name, iter), g.name);
    }
    state.bank.forEachMlp([&](const char *name, Mlp &m) {
        const std::string n = name;
        if (n.rfind("dg", 0) == 0 && !state.bank.residualEnabled) {
            return; // residual parameters stay untouched in stage 1
        }
        const double lr = sched.lr(n == "rho" ? "uncertainty" : "tonemap", iter);
        adamStep(m.params(), m.grads(), state.adam[n], lr, n);
    });
    ++state.iteration;

    StepReport rep;
    rep.view = example.view;
    rep.exposure = example.exposure;
    rep.residualEnabled = state.bank.residualEnabled;
    rep.loss = ev.report;
    rep.meanUnc3d = meanOf(out.unc3d);
    rep.meanUnc2d = meanOf(out.unc2d);
    return rep;
}

double probePsnr(const TrainState &state, const TrainConfig &config, const Dataset &data, int view, int exposure) {
    const Image &gt = groundTruth(data, view, exposure);
    const RenderOutput out =
        renderView(state.cloud, state.bank, data.cameras[static_cast<std::size_t>(view)],
                   ExposureContext::fromTime(data.exposures[static_cast<std::size_t>(exposure)]), config.render);
    return psnr(mergeLdr(out.ldr3d, out.ldr2d, out.unc3d, out.unc2d), gt);
}

namespace {

std::string logLine(const StepReport &r, std::uint64_t iter, const LrSchedule &sched, std::optional<double> probe) {
    nlohmann::ordered_json j;
    j["iter"] = iter;
    j["view"] = r.view;
    j["exposure"] = r.exposure + 1;
    j["stage"] = r.residualEnabled ? 2 : 1;
    j["l3d"] = r.loss.l3d;
    j["l2d"] = r.loss.l2d;
    j["lgs"] = r.loss.lgs;
    j["lunc"] = r.loss.lunc;
    j["le"] = r.loss.le;
    j["total"] = r.loss.total;
    nlohmann::ordered_json lrs;
    for (const auto &[name, range] : sched.groups()) {
        lrs[name] = sched.lr(name, iter);
    }
    j["lr"] = lrs;
    j["mean_u3d"] = r.meanUnc3d;
    j["mean_u2d"] = r.meanUnc2d;
    if (probe) {
        j["probe_psnr"] = std::isfinite(*probe) ? nlohmann::ordered_json(*probe) : nlohmann::ordered_json("inf");
    }
    return j.dump();
}

TrainResult runTraining(const TrainConfig &config, const Dataset &data, const std::filesystem::path *outDir,
                        const std::string &echo, const TrainCallbacks &cb) {
    TrainResult res;
    res.state = initialState(config, data);
    const ExposureSampler sampler(data.trainViews, config.exposureMode, config.seed);
    const LrSchedule sched = config.lr.schedule(static_cast<std::uint64_t>(config.totalIters));
    const int probeView = data.testViews.empty() ? data.trainViews.front() : data.testViews.front();
    std::string logText;
    for (int it = 0; it < config.totalIters; ++it) {
        const auto example = sampler.sample(res.state.rng);
        const std::uint64_t iter = res.state.iteration;
        const StepReport rep = trainStep(res.state, config, data, example);
        if (cb.onStep) {
            cb.onStep(rep, iter);
        }
        const bool last = it + 1 == config.totalIters;
        std::optional<double> probe;
        if (config.evalEvery > 0 && ((it + 1) % config.evalEvery == 0 || last)) {
            probe = probePsnr(res.state, config, data, probeView, 2);
        }
        if (config.logEvery > 0 && (iter % static_cast<std::uint64_t>(config.logEvery) == 0 || last || probe)) {
            res.log.push_back(logLine(rep, iter, sched, probe));
            logText += res.log.back() + "\n";
        }
        if (outDir && config.checkpointEvery > 0 && (it + 1) % config.checkpointEvery == 0 && !last) {
            char name[64];
            std::snprintf(name, sizeof name, "checkpoint_%06d.ghdr", it + 1);
            saveCheckpoint(*outDir / name, checkpointFromState(res.state, echo));
        }
    }
    if (outDir) {
        res.finalCheckpoint = *outDir / "final.ghdr";
        saveCheckpoint(res.finalCheckpoint, checkpointFromState(res.state, echo));
        writeFileAtomic(*outDir / "train_log.jsonl", logText);
    }
    return res;
}

} // namespace

TrainResult train(const TrainConfig &config, const Dataset &data, const std::filesystem::path &outDir,
                  const std::string &configEcho, const TrainCallbacks &callbacks) {
    return runTraining(config, data, &outDir, configEcho, callbacks);
}

TrainState trainInMemory(const TrainConfig &config, const Dataset &data, const TrainCallbacks &callbacks) {
    return runTraining(config, data, nullptr, {}, callbacks).state;
}

} // namespace hdrsplat
