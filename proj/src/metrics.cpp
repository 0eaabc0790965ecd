// SPDX-License-Identifier: Apache-2.0
#include <hdrsplat/dataset_io.h>
#include <hdrsplat/error.h>
#include <hdrsplat/losses.h>
#include <hdrsplat/metrics.h>
#include <hdrsplat/ssim.h>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace hdrsplat {

double psnr(const Image &a, const Image &b, double peak) {
    requireSameShape(a, b, "psnr");
    if (a.data.empty()) {
        throw InvalidArgument("psnr: empty images");
    }
    double mse = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.data.size());
    if (mse == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return 10.0 * std::log10(peak * peak / mse);
}

double muLaw(double x, double mu) { return std::log1p(mu * x) / std::log1p(mu); }

Image muLaw(const Image &x, double mu) {
    Image out = x;
    for (double &v : out.data) {
        v = muLaw(v, mu);
    }
    return out;
}

namespace {

Image normalizeForMuLaw(const Image &img, double scale, double mu) {
    Image out = img;
    for (double &v : out.data) {
        v = muLaw(std::clamp(v / scale, 0.0, 1.0), mu);
    }
    return out;
}

double gtMax(const Image &gt) {
    const double m = gt.data.empty() ? 0.0 : *std::max_element(gt.data.begin(), gt.data.end());
    if (!(m > 0.0)) {
        throw InvalidArgument("hdr_psnr: ground truth has no positive value");
    }
    return m;
}

} // namespace

double hdrPsnr(const Image &pred, const Image &gt, double mu) {
    requireSameShape(pred, gt, "hdr_psnr");
    const double m = gtMax(gt);
    return psnr(normalizeForMuLaw(pred, m, mu), normalizeForMuLaw(gt, m, mu));
}

double ssimScore(const Image &a, const Image &b) {
    const Image m = ssimMap(a, b);
    double s = 0.0;
    for (double v : m.data) {
        s += v;
    }
    return s / static_cast<double>(m.data.size());
}

const char *toString(Track t) {
    switch (t) {
    case Track::LdrOe:
        return "ldr-oe";
    case Track::LdrNe:
        return "ldr-ne";
    case Track::Hdr:
        return "hdr";
    }
    return "unknown";
}

Track trackFromString(const std::string &s) {
    if (s == "ldr-oe") {
        return Track::LdrOe;
    }
    if (s == "ldr-ne") {
        return Track::LdrNe;
    }
    if (s == "hdr") {
        return Track::Hdr;
    }
    throw InvalidArgument("unknown track '" + s + "' (expected ldr-oe, ldr-ne or hdr)");
}

const char *toString(LdrSource s) {
    switch (s) {
    case LdrSource::I3d:
        return "3d";
    case LdrSource::I2d:
        return "2d";
    case LdrSource::Merged:
        return "merged";
    }
    return "unknown";
}

LdrSource ldrSourceFromString(const std::string &s) {
    if (s == "3d") {
        return LdrSource::I3d;
    }
    if (s == "2d") {
        return LdrSource::I2d;
    }
    if (s == "merged") {
        return LdrSource::Merged;
    }
    throw InvalidArgument("unknown LDR source '" + s + "' (expected 3d, 2d or merged)");
}

std::vector<Track> parseTracks(const std::string &list) {
    std::vector<Track> out;
    std::stringstream in(list);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.empty()) {
            continue;
        }
        const Track t = trackFromString(item);
        if (std::find(out.begin(), out.end(), t) == out.end()) {
            out.push_back(t);
        }
    }
    if (out.empty()) {
        throw InvalidArgument("no evaluation track given");
    }
    return out;
}

std::vector<int> trackExposures(Track t) {
    switch (t) {
    case Track::LdrOe:
        return {0, 2, 4};
    case Track::LdrNe:
        return {1, 3};
    case Track::Hdr:
        return {};
    }
    return {};
}

EvalReport evaluate(const EvalRenderer &render, const Dataset &data, const std::vector<Track> &tracks,
                    LdrSource source, const EvalOptions &opts) {
    if (data.testViews.empty()) {
        throw InvalidArgument("evaluate: dataset has no test views");
    }
    std::vector<std::string> missing;
    for (Track t : tracks) {
        for (int v : data.testViews) {
            const auto vi = static_cast<std::size_t>(v);
            if (t == Track::Hdr) {
                if (vi >= data.hdr.size() || data.hdr[vi].empty()) {
                    missing.push_back(hdrFileName(v));
                }
                continue;
            }
            for (int k : trackExposures(t)) {
                if (vi >= data.ldr.size() || data.ldr[vi][static_cast<std::size_t>(k)].empty()) {
                    missing.push_back(ldrFileName(v, k + 1));
                }
            }
        }
    }
    if (!missing.empty()) {
        std::string msg = "evaluation ground truth missing:";
        for (const auto &m : missing) {
            msg += " " + m;
        }
        throw InvalidArgument(msg);
    }

    EvalReport rep;
    rep.source = source;
    for (Track t : tracks) {
        rep.tracks[t];
    }
    for (int v : data.testViews) {
        const auto vi = static_cast<std::size_t>(v);
        std::vector<int> needed;
        for (Track t : tracks) {
            for (int k : trackExposures(t)) {
                needed.push_back(k);
            }
        }
        std::sort(needed.begin(), needed.end());
        needed.erase(std::unique(needed.begin(), needed.end()), needed.end());
        const bool wantHdr = std::find(tracks.begin(), tracks.end(), Track::Hdr) != tracks.end();
        if (needed.empty() && wantHdr) {
            needed.push_back(2); // HDR irradiance does not depend on the exposure
        }
        Image hdr;
        for (int k : needed) {
            const EvalRender r = render(v, data.exposures[static_cast<std::size_t>(k)]);
            if (hdr.empty()) {
                hdr = r.hdr;
            }
            Image ldr;
            switch (source) {
            case LdrSource::I3d:
                ldr = r.ldr3d;
                break;
            case LdrSource::I2d:
                ldr = r.ldr2d;
                break;
            case LdrSource::Merged:
                ldr = mergeLdr(r.ldr3d, r.ldr2d, r.unc3d, r.unc2d);
                break;
            }
            const Image &gt = data.ldr[vi][static_cast<std::size_t>(k)];
            for (Track t : tracks) {
                const auto ex = trackExposures(t);
                if (std::find(ex.begin(), ex.end(), k) != ex.end()) {
                    rep.tracks[t].views.push_back({v, k + 1, psnr(ldr, gt), ssimScore(ldr, gt)});
                }
            }
        }
        if (wantHdr) {
            const Image &gt = data.hdr[vi];
            const double m = gtMax(gt);
            const double p = hdrPsnr(hdr, gt, opts.mu);
            const double s = ssimScore(normalizeForMuLaw(hdr, m, opts.mu), normalizeForMuLaw(gt, m, opts.mu));
            rep.tracks[Track::Hdr].views.push_back({v, 0, p, s});
        }
    }
    for (auto &[t, tr] : rep.tracks) {
        double ps = 0.0, ss = 0.0;
        for (const ViewScore &s : tr.views) {
            ps += s.psnr;
            ss += s.ssim;
        }
        tr.meanPsnr = ps / static_cast<double>(tr.views.size());
        tr.meanSsim = ss / static_cast<double>(tr.views.size());
    }
    return rep;
}

EvalReport evaluate(const GaussianCloud &cloud, const ToneMapperBank &bank, const Dataset &data,
                    const std::vector<Track> &tracks, LdrSource source, const RenderOptions &render,
                    const EvalOptions &opts) {
    const EvalRenderer fn = [&](int view, double t) {
        RenderOutput out = renderView(cloud, bank, data.cameras[static_cast<std::size_t>(view)],
                                      ExposureContext::fromTime(t), render);
        return EvalRender{std::move(out.ldr3d), std::move(out.ldr2d), std::move(out.unc3d), std::move(out.unc2d),
                          std::move(out.hdr)};
    };
    return evaluate(fn, data, tracks, source, opts);
}

namespace {

nlohmann::ordered_json number(double v) {
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    return v;
}

std::string fmtDb(double v) {
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

} // namespace

std::string formatReportJsonl(const EvalReport &report) {
    std::string s;
    for (const auto &[t, tr] : report.tracks) {
        for (const ViewScore &v : tr.views) {
            nlohmann::ordered_json j;
            j["track"] = toString(t);
            j["source"] = t == Track::Hdr ? "hdr" : toString(report.source);
            j["view"] = v.view;
            j["exposure"] = v.exposure;
            j["psnr"] = number(v.psnr);
            j["ssim"] = v.ssim;
            s += j.dump() + "\n";
        }
    }
    for (const auto &[t, tr] : report.tracks) {
        nlohmann::ordered_json j;
        j["track"] = toString(t);
        j["source"] = t == Track::Hdr ? "hdr" : toString(report.source);
        j["mean_psnr"] = number(tr.meanPsnr);
        j["mean_ssim"] = tr.meanSsim;
        j["count"] = tr.views.size();
        s += j.dump() + "\n";
    }
    return s;
}

std::string formatReportTable(const EvalReport &report) {
    std::string s = "track    source  psnr_db   ssim    n\n";
    for (const auto &[t, tr] : report.tracks) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%-8s %-7s %-9s %.4f %zu\n", toString(t),
                      t == Track::Hdr ? "hdr" : toString(report.source), fmtDb(tr.meanPsnr).c_str(), tr.meanSsim,
                      tr.views.size());
        s += buf;
    }
    return s;
}

} // namespace hdrsplat
