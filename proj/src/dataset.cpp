// SPDX-License-Identifier: Apache-2.0
#include <hdrsplat/dataset_io.h>
#include <hdrsplat/error.h>
#include <hdrsplat/image_io.h>

#include <cstdio>
#include <sstream>

namespace hdrsplat {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string pad3(int v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%03d", v);
    return buf;
}

std::string trim(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parseReal(const std::string &tok, const std::string &file, int line) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(tok, &used);
    } catch (const std::exception &) {
        used = 0;
    }
    if (used != tok.size() || tok.empty()) {
        throw InvalidArgument(file + " line " + std::to_string(line) + ": expected a number, got '" + tok + "'");
    }
    return v;
}

std::string gammaFieldName(int view) { return "crf/gamma_" + pad3(view) + ".pfm"; }

std::string formatCrf(const GroundTruthCrf &crf) {
    std::string s = "kind = " + std::string(toString(crf.kind)) + "\n";
    s += "gamma = " + fmt(crf.gamma) + "\n";
    s += "gain = " + fmt(crf.gain) + "\n";
    s += "center = " + fmt(crf.center) + "\n";
    s += "slope = " + fmt(crf.slope) + "\n";
    return s;
}

GroundTruthCrf parseCrf(const std::string &text) {
    GroundTruthCrf crf;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::string l = trim(raw.substr(0, raw.find('#')));
        if (l.empty()) {
            continue;
        }
        const auto eq = l.find('=');
        if (eq == std::string::npos) {
            throw InvalidArgument("crf.txt line " + std::to_string(line) + ": expected key = value");
        }
        const std::string key = trim(l.substr(0, eq));
        const std::string value = trim(l.substr(eq + 1));
        if (key == "kind") {
            crf.kind = crfKindFromString(value);
        } else if (key == "gamma") {
            crf.gamma = parseReal(value, "crf.txt", line);
        } else if (key == "gain") {
            crf.gain = parseReal(value, "crf.txt", line);
        } else if (key == "center") {
            crf.center = parseReal(value, "crf.txt", line);
        } else if (key == "slope") {
            crf.slope = parseReal(value, "crf.txt", line);
        } else {
            throw InvalidArgument("crf.txt line " + std::to_string(line) + ": unknown key '" + key + "'");
        }
    }
    return crf;
}

std::vector<std::string> tokens(const std::string &line) {
    std::istringstream in(line);
    std::vector<std::string> out;
    std::string t;
    while (in >> t) {
        out.push_back(t);
    }
    return out;
}

} // namespace

std::string ldrFileName(int view, int k) { return "ldr/view_" + pad3(view) + "_exp_" + std::to_string(k) + ".ppm"; }

std::string hdrFileName(int view) { return "hdr/view_" + pad3(view) + ".pfm"; }

std::string formatCameras(const std::vector<Camera> &cameras) {
    std::string s;
    for (std::size_t i = 0; i < cameras.size(); ++i) {
        const Camera &c = cameras[i];
        s += std::to_string(i) + " " + fmt(c.fx) + " " + fmt(c.fy) + " " + fmt(c.cx) + " " + fmt(c.cy) + " " +
             std::to_string(c.width) + " " + std::to_string(c.height);
        for (int r = 0; r < 3; ++r) {
            for (int k = 0; k < 3; ++k) {
                s += " " + fmt(c.rotation(r, k));
            }
            s += " " + fmt(c.translation[r]);
        }
        s += "\n";
    }
    return s;
}

std::vector<Camera> parseCameras(const std::string &text) {
    std::vector<Camera> cams;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::string l = trim(raw.substr(0, raw.find('#')));
        if (l.empty()) {
            continue;
        }
        const auto tok = tokens(l);
        if (tok.size() != 19) {
            throw InvalidArgument("cameras.txt line " + std::to_string(line) + ": expected 19 fields, got " +
                                 std::to_string(tok.size()));
        }
        const int id = static_cast<int>(parseReal(tok[0], "cameras.txt", line));
        if (id != static_cast<int>(cams.size())) {
            throw InvalidArgument("cameras.txt line " + std::to_string(line) + ": camera ids must be 0, 1, 2, ...");
        }
        Camera c;
        c.fx = parseReal(tok[1], "cameras.txt", line);
        c.fy = parseReal(tok[2], "cameras.txt", line);
        c.cx = parseReal(tok[3], "cameras.txt", line);
        c.cy = parseReal(tok[4], "cameras.txt", line);
        c.width = static_cast<int>(parseReal(tok[5], "cameras.txt", line));
        c.height = static_cast<int>(parseReal(tok[6], "cameras.txt", line));
        for (int r = 0; r < 3; ++r) {
            for (int k = 0; k < 3; ++k) {
                c.rotation(r, k) = parseReal(tok[static_cast<std::size_t>(7 + r * 4 + k)], "cameras.txt", line);
            }
            c.translation[r] = parseReal(tok[static_cast<std::size_t>(7 + r * 4 + 3)], "cameras.txt", line);
        }
        c.validate();
        cams.push_back(c);
    }
    return cams;
}

void writeDataset(const Dataset &data, const std::filesystem::path &root) {
    writeFileAtomic(root / "cameras.txt", formatCameras(data.cameras));
    std::string ex;
    for (double t : data.exposures) {
        ex += fmt(t) + "\n";
    }
    writeFileAtomic(root / "exposures.txt", ex);
    writeFileAtomic(root / "crf.txt", formatCrf(data.crf));
    std::string split;
    for (int v : data.trainViews) {
        split += "train " + std::to_string(v) + "\n";
    }
    for (int v : data.testViews) {
        split += "test " + std::to_string(v) + "\n";
    }
    writeFileAtomic(root / "split.txt", split);
    std::string pts;
    for (std::size_t i = 0; i < data.points.size(); ++i) {
        const Vec3 &p = data.points[i];
        const Vec3 c = i < data.pointColors.size() ? data.pointColors[i] : Vec3(0.5, 0.5, 0.5);
        pts += fmt(p.x()) + " " + fmt(p.y()) + " " + fmt(p.z()) + " " + fmt(c.x()) + " " + fmt(c.y()) + " " +
               fmt(c.z()) + "\n";
    }
    writeFileAtomic(root / "points.txt", pts);
    for (std::size_t v = 0; v < data.ldr.size(); ++v) {
        for (int k = 0; k < 5; ++k) {
            const Image &img = data.ldr[v][static_cast<std::size_t>(k)];
            if (!img.empty()) {
                writePpm(root / ldrFileName(static_cast<int>(v), k + 1), img);
            }
        }
    }
    for (std::size_t v = 0; v < data.hdr.size(); ++v) {
        if (!data.hdr[v].empty()) {
            writePfm(root / hdrFileName(static_cast<int>(v)), data.hdr[v]);
        }
    }
    if (data.crf.kind == CrfKind::SpatiallyVaryingGamma) {
        for (std::size_t v = 0; v < data.crf.gammaField.size(); ++v) {
            // single-channel field stored replicated in a colour PFM
            const Image &f = data.crf.gammaField[v];
            Image rgb(f.width, f.height, 3);
            for (std::size_t p = 0; p < f.pixelCount(); ++p) {
                for (int c = 0; c < 3; ++c) {
                    rgb.data[p * 3 + static_cast<std::size_t>(c)] = f.data[p];
                }
            }
            writePfm(root / gammaFieldName(static_cast<int>(v)), rgb);
        }
    }
}

Dataset loadDataset(const std::filesystem::path &root, const DatasetLoadOptions &opts) {
    namespace fs = std::filesystem;
    std::vector<std::string> missing;
    for (const char *name : {"cameras.txt", "exposures.txt", "split.txt"}) {
        if (!fs::exists(root / name)) {
            missing.push_back((root / name).string());
        }
    }
    if (!missing.empty()) {
        std::string msg = "dataset incomplete, missing:";
        for (const auto &m : missing) {
            msg += " " + m;
        }
        throw IoError(msg);
    }

    Dataset ds;
    ds.cameras = parseCameras(readFileBytes(root / "cameras.txt"));
    {
        std::istringstream in(readFileBytes(root / "exposures.txt"));
        std::string raw;
        int line = 0;
        std::size_t k = 0;
        while (std::getline(in, raw)) {
            ++line;
            const std::string l = trim(raw.substr(0, raw.find('#')));
            if (l.empty()) {
                continue;
            }
            if (k >= 5) {
                throw InvalidArgument("exposures.txt: more than 5 exposures");
            }
            ds.exposures[k++] = parseReal(l, "exposures.txt", line);
        }
        if (k != 5) {
            throw InvalidArgument("exposures.txt: expected 5 exposures, got " + std::to_string(k));
        }
        for (std::size_t i = 0; i < 5; ++i) {
            if (!(ds.exposures[i] > 0.0) || (i > 0 && !(ds.exposures[i] > ds.exposures[i - 1]))) {
                throw InvalidArgument("exposures.txt: exposures must be positive and strictly increasing");
            }
        }
    }
    if (fs::exists(root / "crf.txt")) {
        ds.crf = parseCrf(readFileBytes(root / "crf.txt"));
    }
    {
        std::istringstream in(readFileBytes(root / "split.txt"));
        std::string raw;
        int line = 0;
        while (std::getline(in, raw)) {
            ++line;
            const std::string l = trim(raw.substr(0, raw.find('#')));
            if (l.empty()) {
                continue;
            }
            const auto tok = tokens(l);
            if (tok.size() != 2 || (tok[0] != "train" && tok[0] != "test")) {
                throw InvalidArgument("split.txt line " + std::to_string(line) + ": expected 'train <view>' or 'test <view>'");
            }
            const int v = static_cast<int>(parseReal(tok[1], "split.txt", line));
            if (v < 0 || static_cast<std::size_t>(v) >= ds.cameras.size()) {
                throw InvalidArgument("split.txt line " + std::to_string(line) + ": view " + std::to_string(v) +
                                      " has no camera");
            }
            (tok[0] == "train" ? ds.trainViews : ds.testViews).push_back(v);
        }
    }
    if (fs::exists(root / "points.txt")) {
        std::istringstream in(readFileBytes(root / "points.txt"));
        std::string raw;
        int line = 0;
        while (std::getline(in, raw)) {
            ++line;
            const auto tok = tokens(trim(raw.substr(0, raw.find('#'))));
            if (tok.empty()) {
                continue;
            }
            if (tok.size() != 6 && tok.size() != 3) {
                throw InvalidArgument("points.txt line " + std::to_string(line) + ": expected x y z [r g b]");
            }
            ds.points.emplace_back(parseReal(tok[0], "points.txt", line), parseReal(tok[1], "points.txt", line),
                                   parseReal(tok[2], "points.txt", line));
            if (tok.size() == 6) {
                ds.pointColors.emplace_back(parseReal(tok[3], "points.txt", line),
                                            parseReal(tok[4], "points.txt", line),
                                            parseReal(tok[5], "points.txt", line));
            }
        }
        if (!ds.pointColors.empty() && ds.pointColors.size() != ds.points.size()) {
            throw InvalidArgument("points.txt: colours given for some points only");
        }
    }

    const std::size_t n = ds.cameras.size();
    ds.ldr.resize(n);
    std::vector<bool> referenced(n, false);
    for (int v : ds.trainViews) {
        referenced[static_cast<std::size_t>(v)] = true;
    }
    for (int v : ds.testViews) {
        referenced[static_cast<std::size_t>(v)] = true;
    }
    for (std::size_t v = 0; v < n; ++v) {
        for (int k = 0; k < 5; ++k) {
            const fs::path p = root / ldrFileName(static_cast<int>(v), k + 1);
            if (fs::exists(p)) {
                ds.ldr[v][static_cast<std::size_t>(k)] = readPpm(p);
            } else if (referenced[v] && (k % 2 == 0)) {
                // t1, t3, t5 are required for every split view; t2, t4 are optional
                missing.push_back(p.string());
            }
        }
    }
    if (!missing.empty()) {
        std::string msg = "dataset incomplete, missing:";
        for (const auto &m : missing) {
            msg += " " + m;
        }
        throw IoError(msg);
    }
    if (opts.loadHdr) {
        ds.hdr.resize(n);
        for (std::size_t v = 0; v < n; ++v) {
            const fs::path p = root / hdrFileName(static_cast<int>(v));
            if (fs::exists(p)) {
                ds.hdr[v] = readPfm(p);
            }
        }
    }
    if (ds.crf.kind == CrfKind::SpatiallyVaryingGamma) {
        for (std::size_t v = 0; v < n; ++v) {
            const fs::path p = root / gammaFieldName(static_cast<int>(v));
            if (!fs::exists(p)) {
                break;
            }
            ds.crf.gammaField.push_back(sliceChannels(readPfm(p), 0, 1));
        }
    }
    return ds;
}

} // namespace hdrsplat
