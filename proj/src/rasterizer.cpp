// SPDX-License-Identifier: Apache-2.0
#include <hdrsplat/error.h>
#include <hdrsplat/parallel.h>
#include <hdrsplat/rasterizer.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hdrsplat {

std::vector<std::size_t> sortSplats(std::span<const Splat2D> splats) {
    std::vector<std::size_t> order(splats.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return splats[a].depth < splats[b].depth; });
    return order;
}

namespace {

struct PreparedSplat {
    bool valid = false;
    Vec2 mean = Vec2::Zero();
    Mat2 conic = Mat2::Zero();
    double xmin = 0.0, xmax = 0.0, ymin = 0.0, ymax = 0.0;
    double opacity = 0.0;
    const double *payload = nullptr;
};

std::size_t gaussianCount(const RasterInputs &in) {
    if (in.channels < 1) {
        throw InvalidArgument("rasterize: payload width must be >= 1");
    }
    if (in.payload.size() % static_cast<std::size_t>(in.channels) != 0) {
        throw InvalidArgument("rasterize: payload size is not a multiple of the channel count");
    }
    const std::size_t n = in.payload.size() / static_cast<std::size_t>(in.channels);
    if (in.opacity.size() != n) {
        throw InvalidArgument("rasterize: opacity count does not match payload");
    }
    if (in.background.size() != static_cast<std::size_t>(in.channels)) {
        throw InvalidArgument("rasterize: background width does not match payload width");
    }
    if (in.width < 1 || in.height < 1) {
        throw InvalidArgument("rasterize: image size must be positive");
    }
    for (std::size_t s = 0; s < in.splats.size(); ++s) {
        const int g = in.splats[s].gaussianIndex;
        if (g < 0 || static_cast<std::size_t>(g) >= n) {
            throw InvalidArgument("rasterize: splat references Gaussian " + std::to_string(g) + " out of range");
        }
    }
    return n;
}

std::vector<PreparedSplat> prepare(const RasterInputs &in, std::size_t &degenerate) {
    std::vector<PreparedSplat> out(in.splats.size());
    degenerate = 0;
    const auto c = static_cast<std::size_t>(in.channels);
    for (std::size_t s = 0; s < in.splats.size(); ++s) {
        const Splat2D &sp = in.splats[s];
        PreparedSplat &p = out[s];
        const double det = sp.cov.determinant();
        if (!(det > 0.0) || !(sp.cov(0, 0) > 0.0) || !sp.cov.allFinite() || !sp.mean.allFinite()) {
            ++degenerate;
            continue;
        }
        p.valid = true;
        p.mean = sp.mean;
        p.conic << sp.cov(1, 1) / det, -sp.cov(0, 1) / det, -sp.cov(1, 0) / det, sp.cov(0, 0) / det;
        const double rx = std::sqrt(raster::kCutoffMahalanobis2 * sp.cov(0, 0)) * (1.0 + 1e-9) + 1e-9;
        const double ry = std::sqrt(raster::kCutoffMahalanobis2 * sp.cov(1, 1)) * (1.0 + 1e-9) + 1e-9;
        p.xmin = sp.mean.x() - rx;
        p.xmax = sp.mean.x() + rx;
        p.ymin = sp.mean.y() - ry;
        p.ymax = sp.mean.y() + ry;
        const auto g = static_cast<std::size_t>(sp.gaussianIndex);
        p.opacity = in.opacity[g];
        p.payload = in.payload.data() + g * c;
    }
    return out;
}

// Pixel (x, y) samples the image plane at its centre.
inline Vec2 pixelCenter(int x, int y) { return {x + 0.5, y + 0.5}; }

std::size_t bandCount(int height) {
    return static_cast<std::size_t>((height + raster::kTileSize - 1) / raster::kTileSize);
}

// Candidate splats for the pixel-centre rectangle [x0, x1) x [y0, y1), in sorted order.
void gatherCandidates(const std::vector<PreparedSplat> &prepared, int x0, int x1, int y0, int y1,
                      std::vector<std::uint32_t> &out) {
    out.clear();
    const double cx0 = x0 + 0.5, cx1 = x1 - 0.5, cy0 = y0 + 0.5, cy1 = y1 - 0.5;
    for (std::size_t s = 0; s < prepared.size(); ++s) {
        const PreparedSplat &p = prepared[s];
        if (p.valid && p.xmax >= cx0 && p.xmin <= cx1 && p.ymax >= cy0 && p.ymin <= cy1) {
            out.push_back(static_cast<std::uint32_t>(s));
        }
    }
}

struct BandResult {
    std::vector<BlendEntry> entries;
    std::vector<std::size_t> counts; // per pixel in band order
};

} // namespace

RasterOutput rasterizeForward(const RasterInputs &in, const RasterOptions &opts) {
    gaussianCount(in);
    RasterOutput out;
    const std::vector<PreparedSplat> prepared = prepare(in, out.degenerateSplats);
    const int w = in.width, h = in.height, C = in.channels;
    out.color = Image(w, h, C);
    out.alpha = Image(w, h, 1);
    BlendRecord &rec = out.record;
    rec.width = w;
    rec.height = h;
    rec.splatCount = in.splats.size();
    rec.finalTransmittance.assign(out.alpha.pixelCount(), 1.0);

    std::vector<std::uint32_t> allSplats;
    if (!opts.tiled) {
        // The exhaustive path visits every valid splat for every pixel.
        for (std::size_t s = 0; s < prepared.size(); ++s) {
            if (prepared[s].valid) {
                allSplats.push_back(static_cast<std::uint32_t>(s));
            }
        }
    }

    const std::size_t bands = bandCount(h);
    std::vector<BandResult> results(bands);
    parallelForChunks(bands, [&](std::size_t band) {
        const int y0 = static_cast<int>(band) * raster::kTileSize;
        const int y1 = std::min(h, y0 + raster::kTileSize);
        BandResult &br = results[band];
        br.counts.assign(static_cast<std::size_t>((y1 - y0) * w), 0);
        std::vector<std::uint32_t> tileCandidates;
        std::vector<std::vector<BlendEntry>> rowEntries; // per pixel of the band, flattened later
        rowEntries.resize(br.counts.size());

        for (int tx0 = 0; tx0 < w; tx0 += raster::kTileSize) {
            const int tx1 = std::min(w, tx0 + raster::kTileSize);
            if (opts.tiled) {
                gatherCandidates(prepared, tx0, tx1, y0, y1, tileCandidates);
            }
            const std::vector<std::uint32_t> &candidates = opts.tiled ? tileCandidates : allSplats;
            for (int y = y0; y < y1; ++y) {
                for (int x = tx0; x < tx1; ++x) {
                    const Vec2 pc = pixelCenter(x, y);
                    double *px = &out.color.at(x, y, 0);
                    auto &entries = rowEntries[static_cast<std::size_t>((y - y0) * w + x)];
                    double T = 1.0;
                    for (const std::uint32_t s : candidates) {
                        const PreparedSplat &p = prepared[s];
                        const Vec2 d = pc - p.mean;
                        const double m2 = d.dot(p.conic * d);
                        if (m2 > raster::kCutoffMahalanobis2) {
                            continue;
                        }
                        const double raw = p.opacity * std::exp(-0.5 * m2);
                        if (raw < raster::kMinSigma) {
                            continue;
                        }
                        const bool clamped = raw > raster::kMaxSigma;
                        const double sigma = clamped ? raster::kMaxSigma : raw;
                        const double next = T * (1.0 - sigma);
                        if (next < raster::kMinTransmittance) {
                            break;
                        }
                        const double wgt = sigma * T;
                        for (int c = 0; c < C; ++c) {
                            px[c] += p.payload[c] * wgt;
                        }
                        entries.push_back({s, sigma, T, clamped});
                        T = next;
                    }
                    for (int c = 0; c < C; ++c) {
                        px[c] += T * in.background[static_cast<std::size_t>(c)];
                    }
                    const std::size_t pi = static_cast<std::size_t>(y) * static_cast<std::size_t>(w) +
                                           static_cast<std::size_t>(x);
                    rec.finalTransmittance[pi] = T;
                    out.alpha.data[pi] = 1.0 - T;
                }
            }
        }
        std::size_t total = 0;
        for (const auto &e : rowEntries) {
            total += e.size();
        }
        br.entries.reserve(total);
        for (std::size_t i = 0; i < rowEntries.size(); ++i) {
            br.counts[i] = rowEntries[i].size();
            br.entries.insert(br.entries.end(), rowEntries[i].begin(), rowEntries[i].end());
        }
    });

    rec.pixelStart.assign(out.alpha.pixelCount() + 1, 0);
    std::size_t total = 0;
    for (const auto &br : results) {
        total += br.entries.size();
    }
    rec.entries.reserve(total);
    std::size_t p = 0;
    for (const auto &br : results) {
        std::size_t offset = 0;
        for (const std::size_t count : br.counts) {
            rec.pixelStart[p] = rec.entries.size();
            rec.entries.insert(rec.entries.end(), br.entries.begin() + static_cast<std::ptrdiff_t>(offset),
                               br.entries.begin() + static_cast<std::ptrdiff_t>(offset + count));
            offset += count;
            ++p;
        }
    }
    rec.pixelStart[p] = rec.entries.size();
    return out;
}

RasterGrads rasterizeBackward(const Image &gradOut, const BlendRecord &record, const RasterInputs &in,
                              std::span<const bool> geometryMask) {
    const std::size_t n = gaussianCount(in);
    const int C = in.channels;
    if (gradOut.width != in.width || gradOut.height != in.height || gradOut.channels != C ||
        record.width != in.width || record.height != in.height || record.splatCount != in.splats.size() ||
        record.pixelStart.size() != gradOut.pixelCount() + 1) {
        throw InvalidArgument("rasterizeBackward: record or gradient does not match the inputs");
    }
    if (!geometryMask.empty() && geometryMask.size() != static_cast<std::size_t>(C)) {
        throw InvalidArgument("rasterizeBackward: geometry mask width does not match payload width");
    }
    std::size_t degenerate = 0;
    const std::vector<PreparedSplat> prepared = prepare(in, degenerate);
    const std::size_t S = in.splats.size();
    const auto uc = static_cast<std::size_t>(C);
    std::vector<double> geo(uc, 1.0);
    for (std::size_t c = 0; c < geometryMask.size(); ++c) {
        geo[c] = geometryMask[c] ? 1.0 : 0.0;
    }

    struct Partial {
        std::vector<double> payload;
        std::vector<double> opacity;
        std::vector<Vec2> mean;
        std::vector<Mat2> conic;
    };
    const int w = in.width, h = in.height;
    const std::size_t bands = bandCount(h);
    std::vector<Partial> partials(bands);

    parallelForChunks(bands, [&](std::size_t band) {
        Partial &pt = partials[band];
        pt.payload.assign(n * uc, 0.0);
        pt.opacity.assign(n, 0.0);
        pt.mean.assign(S, Vec2::Zero());
        pt.conic.assign(S, Mat2::Zero());
        const int y0 = static_cast<int>(band) * raster::kTileSize;
        const int y1 = std::min(h, y0 + raster::kTileSize);
        for (int y = y0; y < y1; ++y) {
            for (int x = 0; x < w; ++x) {
                const std::size_t pi =
                    static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x);
                const auto entries = record.pixelEntries(pi);
                const double *g = &gradOut.data[pi * uc];
                bool any = false;
                for (std::size_t c = 0; c < uc; ++c) {
                    any = any || g[c] != 0.0;
                }
                if (!any || entries.empty()) {
                    continue;
                }
                // after = sum over later terms (payload . g, geometry channels only) + T_final * bg . g
                double after = 0.0;
                const double Tf = record.finalTransmittance[pi];
                for (std::size_t c = 0; c < uc; ++c) {
                    after += geo[c] * g[c] * in.background[c] * Tf;
                }
                const Vec2 pc = pixelCenter(x, y);
                for (std::size_t k = entries.size(); k-- > 0;) {
                    const BlendEntry &e = entries[k];
                    const PreparedSplat &p = prepared[e.splat];
                    const auto gi = static_cast<std::size_t>(in.splats[e.splat].gaussianIndex);
                    const double wgt = e.sigma * e.transmittance;
                    double dotGeo = 0.0;
                    for (std::size_t c = 0; c < uc; ++c) {
                        pt.payload[gi * uc + c] += g[c] * wgt;
                        dotGeo += geo[c] * g[c] * p.payload[c];
                    }
                    const double gradSigma = e.transmittance * dotGeo - after / (1.0 - e.sigma);
                    after += dotGeo * wgt;
                    if (e.clamped || gradSigma == 0.0) {
                        continue;
                    }
                    const Vec2 d = pc - p.mean;
                    const double gauss = e.sigma / p.opacity;
                    pt.opacity[gi] += gradSigma * gauss;
                    // sigma = a exp(-m2/2), m2 = d^T Q d, d = pc - mean
                    const double gradM2 = -0.5 * e.sigma * gradSigma;
                    pt.mean[e.splat] += -2.0 * gradM2 * (p.conic * d);
                    pt.conic[e.splat] += gradM2 * (d * d.transpose());
                }
            }
        }
    });

    RasterGrads out;
    out.payload.assign(n * uc, 0.0);
    out.opacity.assign(n, 0.0);
    out.mean2d.assign(S, Vec2::Zero());
    out.cov2d.assign(S, Mat2::Zero());
    std::vector<Mat2> conicGrad(S, Mat2::Zero());
    for (const Partial &pt : partials) {
        for (std::size_t i = 0; i < pt.payload.size(); ++i) {
            out.payload[i] += pt.payload[i];
        }
        for (std::size_t i = 0; i < n; ++i) {
            out.opacity[i] += pt.opacity[i];
        }
        for (std::size_t s = 0; s < S; ++s) {
            out.mean2d[s] += pt.mean[s];
            conicGrad[s] += pt.conic[s];
        }
    }
    for (std::size_t s = 0; s < S; ++s) {
        if (prepared[s].valid) {
            const Mat2 &q = prepared[s].conic;
            out.cov2d[s] = -q.transpose() * conicGrad[s] * q.transpose();
        }
    }
    return out;
}

} // namespace hdrsplat
