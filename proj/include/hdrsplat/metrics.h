// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <hdrsplat/image.h>
#include <hdrsplat/pipeline.h>
#include <hdrsplat/scenegen.h>

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace hdrsplat {

inline constexpr double kDefaultMu = 5000.0;

// 10 log10(peak^2 / MSE); identical images give +infinity.
double psnr(const Image &a, const Image &b, double peak = 1.0);

double muLaw(double x, double mu = kDefaultMu);
Image muLaw(const Image &x, double mu = kDefaultMu);

// Both images divided by max(gt), clipped to [0, 1], mu-law compressed, then PSNR.
// Throws InvalidArgument when gt has no positive value.
double hdrPsnr(const Image &pred, const Image &gt, double mu = kDefaultMu);

// Mean of the SSIM map.
double ssimScore(const Image &a, const Image &b);

enum class Track { LdrOe, LdrNe, Hdr };
enum class LdrSource { I3d, I2d, Merged };

const char *toString(Track t);
Track trackFromString(const std::string &s);
const char *toString(LdrSource s);
LdrSource ldrSourceFromString(const std::string &s);
// Comma-separated list such as "ldr-oe,ldr-ne,hdr".
std::vector<Track> parseTracks(const std::string &list);

struct ViewScore {
    int view = 0;
    int exposure = 0; // 1..5, 0 for the HDR track
    double psnr = 0.0;
    double ssim = 0.0;
};

struct TrackReport {
    double meanPsnr = 0.0;
    double meanSsim = 0.0;
    std::vector<ViewScore> views;
};

struct EvalReport {
    LdrSource source = LdrSource::Merged;
    std::map<Track, TrackReport> tracks;
};

// What the evaluator needs from one rendered view.
struct EvalRender {
    Image ldr3d;
    Image ldr2d;
    Image unc3d;
    Image unc2d;
    Image hdr;
};

using EvalRenderer = std::function<EvalRender(int view, double exposureTime)>;

struct EvalOptions {
    double mu = kDefaultMu;
};

// Exposure indices (0-based) scored by an LDR track.
std::vector<int> trackExposures(Track t);

// Throws InvalidArgument listing every missing ground-truth file before rendering anything.
EvalReport evaluate(const EvalRenderer &render, const Dataset &data, const std::vector<Track> &tracks,
                    LdrSource source, const EvalOptions &opts = {});

EvalReport evaluate(const GaussianCloud &cloud, const ToneMapperBank &bank, const Dataset &data,
                    const std::vector<Track> &tracks, LdrSource source, const RenderOptions &render = {},
                    const EvalOptions &opts = {});

// One JSON object per line (per view, then one summary line per track).
std::string formatReportJsonl(const EvalReport &report);
std::string formatReportTable(const EvalReport &report);

} // namespace hdrsplat
