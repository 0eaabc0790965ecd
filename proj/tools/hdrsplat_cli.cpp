// SPDX-License-Identifier: Apache-2.0
#include <hdrsplat/checkpoint.h>
#include <hdrsplat/config.h>
#include <hdrsplat/dataset_io.h>
#include <hdrsplat/error.h>
#include <hdrsplat/gradcheck.h>
#include <hdrsplat/image_io.h>
#include <hdrsplat/metrics.h>
#include <hdrsplat/parallel.h>

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

using namespace hdrsplat;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

std::array<double, 3> parseTriple(const std::string &s) {
    std::array<double, 3> v{};
    std::stringstream in(s);
    std::string item;
    std::size_t k = 0;
    while (std::getline(in, item, ',')) {
        if (k >= 3) {
            throw InvalidArgument("expected three comma-separated numbers, got '" + s + "'");
        }
        std::size_t used = 0;
        try {
            v[k] = std::stod(item, &used);
        } catch (const std::exception &) {
            used = 0;
        }
        if (used == 0 || used != item.size()) {
            throw InvalidArgument("expected a number, got '" + item + "'");
        }
        ++k;
    }
    if (k != 3) {
        throw InvalidArgument("expected three comma-separated numbers, got '" + s + "'");
    }
    return v;
}

int cmdGenerate(const std::string &configPath, const std::string &outDir) {
    AppConfig cfg = readConfig(configPath);
    cfg.validate();
    setThreadCount(cfg.threads);
    const SyntheticScene scene = generateScene(cfg.scene, cfg.sceneSeed);
    GroundTruthCrf crf = cfg.crf;
    if (crf.kind == CrfKind::SpatiallyVaryingGamma) {
        crf = makeSpatiallyVaryingGamma(scene.cloud, scene.cameras, cfg.scene, cfg.crf.gain);
    }
    const Dataset ds = emitDataset(scene, crf, cfg.scene, cfg.sceneSeed, outDir);
    std::printf("wrote %zu views (%zu train, %zu test) to %s\n", ds.viewCount(), ds.trainViews.size(),
                ds.testViews.size(), outDir.c_str());
    return 0;
}

int cmdTrain(const std::string &configPath, const std::string &dataDir, const std::string &outDir) {
    AppConfig cfg = readConfig(configPath);
    cfg.dataDir = std::filesystem::absolute(dataDir).string();
    cfg.validate();
    setThreadCount(cfg.threads);
    const Dataset ds = loadDataset(dataDir, {false});
    TrainCallbacks cb;
    const int every = std::max(1, cfg.train.totalIters / 20);
    cb.onStep = [&](const StepReport &r, std::uint64_t iter) {
        if (iter % static_cast<std::uint64_t>(every) == 0) {
            std::printf("iter %6llu  stage %d  total %.6f  lgs %.6f  lunc %.6f  le %.6f\n",
                        static_cast<unsigned long long>(iter), r.residualEnabled ? 2 : 1, r.loss.total, r.loss.lgs,
                        r.loss.lunc, r.loss.le);
            std::fflush(stdout);
        }
    };
    const TrainResult res = train(cfg.train, ds, outDir, formatConfig(cfg), cb);
    std::printf("final checkpoint: %s\n", res.finalCheckpoint.string().c_str());
    return 0;
}

int cmdRender(const std::string &ckptPath, int view, double exposure, const std::string &source,
              const std::string &whiteBalance, const std::string &dataOverride, const std::string &outPath) {
    const Checkpoint ck = loadCheckpoint(ckptPath);
    const AppConfig cfg = parseConfig(ck.configEcho);
    const std::string dataDir = dataOverride.empty() ? cfg.dataDir : dataOverride;
    if (dataDir.empty()) {
        throw InvalidArgument("checkpoint does not record a data directory; pass --data");
    }
    const auto cameras = parseCameras(readFileBytes(std::filesystem::path(dataDir) / "cameras.txt"));
    if (view < 0 || static_cast<std::size_t>(view) >= cameras.size()) {
        throw InvalidArgument("view " + std::to_string(view) + " out of range (dataset has " +
                              std::to_string(cameras.size()) + " cameras)");
    }
    RenderOptions opts = cfg.train.render;
    if (!whiteBalance.empty()) {
        opts.whiteBalance = parseTriple(whiteBalance);
    }
    const RenderOutput out = renderView(ck.cloud, ck.bank, cameras[static_cast<std::size_t>(view)],
                                        ExposureContext::fromTime(exposure), opts);
    if (source == "hdr") {
        writePfm(outPath, out.hdr);
    } else if (source == "3d") {
        writePpm(outPath, out.ldr3d);
    } else if (source == "2d") {
        writePpm(outPath, out.ldr2d);
    } else if (source == "merged") {
        writePpm(outPath, mergeLdr(out.ldr3d, out.ldr2d, out.unc3d, out.unc2d));
    } else {
        throw InvalidArgument("unknown source '" + source + "' (expected 3d, 2d, merged or hdr)");
    }
    return 0;
}

int cmdEval(const std::string &ckptPath, const std::string &dataDir, const std::string &tracks,
            const std::string &source, const std::string &outPath) {
    const Checkpoint ck = loadCheckpoint(ckptPath);
    const AppConfig cfg = parseConfig(ck.configEcho);
    setThreadCount(cfg.threads);
    const auto trackList = parseTracks(tracks);
    const LdrSource src = ldrSourceFromString(source);
    const Dataset ds = loadDataset(dataDir);
    EvalOptions eo;
    eo.mu = cfg.mu;
    const EvalReport rep = evaluate(ck.cloud, ck.bank, ds, trackList, src, cfg.train.render, eo);
    writeFileAtomic(outPath, formatReportJsonl(rep));
    std::cout << formatReportTable(rep);
    return 0;
}

int cmdGradcheck(std::uint64_t seed, double tolerance) {
    GradcheckOptions opts;
    opts.seed = seed;
    const GradcheckReport rep = runGradcheck(opts);
    std::cout << rep.table();
    const bool ok = rep.passes(tolerance, 10.0 * tolerance);
    std::printf("%s (median < %.1e, p99 < %.1e)\n", ok ? "PASS" : "FAIL", tolerance, 10.0 * tolerance);
    return ok ? 0 : kExitValidation;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Differentiable Gaussian splatting HDR engine"};
    app.require_subcommand(1);

    std::string config, out, data, checkpoint, source = "merged", whiteBalance, tracks = "ldr-oe,ldr-ne,hdr";
    int view = 0;
    double exposure = 1.0;
    std::uint64_t seed = 7;
    double tolerance = 1e-4;

    auto *gen = app.add_subcommand("generate", "Synthesize a multi-exposure dataset");
    gen->add_option("--config", config, "Config file")->required();
    gen->add_option("--out", out, "Output dataset directory")->required();

    auto *tr = app.add_subcommand("train", "Train on a dataset");
    tr->add_option("--config", config, "Config file")->required();
    tr->add_option("--data", data, "Dataset directory")->required();
    tr->add_option("--out", out, "Output directory for checkpoints and log")->required();

    auto *rd = app.add_subcommand("render", "Render one view from a checkpoint");
    rd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    rd->add_option("--view", view, "Camera index")->required();
    rd->add_option("--exposure", exposure, "Exposure time in seconds")->required();
    rd->add_option("--source", source, "3d | 2d | merged | hdr");
    rd->add_option("--white-balance", whiteBalance, "r,g,b irradiance factors");
    rd->add_option("--data", data, "Dataset directory (defaults to the one recorded in the checkpoint)");
    rd->add_option("--out", out, "Output image (PPM, or PFM for hdr)")->required();

    auto *ev = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
    ev->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    ev->add_option("--data", data, "Dataset directory")->required();
    ev->add_option("--tracks", tracks, "Comma-separated: ldr-oe, ldr-ne, hdr");
    ev->add_option("--source", source, "3d | 2d | merged");
    ev->add_option("--out", out, "Line-delimited metrics file")->required();

    auto *gc = app.add_subcommand("gradcheck", "Finite-difference audit of every gradient");
    gc->add_option("--seed", seed, "Scene seed")->required();
    gc->add_option("--tolerance", tolerance, "Median relative error bound (p99 bound is 10x)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        if (*gen) {
            return cmdGenerate(config, out);
        }
        if (*tr) {
            return cmdTrain(config, data, out);
        }
        if (*rd) {
            return cmdRender(checkpoint, view, exposure, source, whiteBalance, data, out);
        }
        if (*ev) {
            return cmdEval(checkpoint, data, tracks, source, out);
        }
        if (*gc) {
            return cmdGradcheck(seed, tolerance);
        }
    } catch (const InvalidArgument &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const NumericalError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const IoError &e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kExitIo;
    } catch (const ParseError &e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitValidation;
}
