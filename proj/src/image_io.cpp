// SPDX-License-Identifier: Apache-2.0
#include <hdrsplat/error.h>
#include <hdrsplat/image_io.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace hdrsplat {

static_assert(std::endian::native == std::endian::little, "PFM/checkpoint I/O assumes a little-endian host");

std::string readFileBytes(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "' for reading");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void writeFileAtomic(const std::filesystem::path &path, const std::string &bytes) {
    std::error_code ec;
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) {
            throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
        }
    }
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot open '" + tmp.string() + "' for writing");
        }
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw IoError("write failed for '" + tmp.string() + "'");
        }
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        throw IoError("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
    }
}

namespace {

// Reads one whitespace-delimited header token; a single whitespace byte after it is consumed.
class HeaderReader {
public:
    explicit HeaderReader(const std::string &b) : mBytes(b) {}

    std::string token(const char *what) {
        while (mPos < mBytes.size() && std::isspace(static_cast<unsigned char>(mBytes[mPos]))) {
            ++mPos;
        }
        // PPM comments
        while (mPos < mBytes.size() && mBytes[mPos] == '#') {
            while (mPos < mBytes.size() && mBytes[mPos] != '\n') {
                ++mPos;
            }
            while (mPos < mBytes.size() && std::isspace(static_cast<unsigned char>(mBytes[mPos]))) {
                ++mPos;
            }
        }
        const std::size_t start = mPos;
        while (mPos < mBytes.size() && !std::isspace(static_cast<unsigned char>(mBytes[mPos]))) {
            ++mPos;
        }
        if (start == mPos) {
            throw ParseError(std::string("missing ") + what, start);
        }
        return mBytes.substr(start, mPos - start);
    }

    int positiveInt(const char *what) {
        const std::size_t at = mPos;
        const std::string t = token(what);
        int v = 0;
        try {
            std::size_t used = 0;
            v = std::stoi(t, &used);
            if (used != t.size()) {
                throw std::invalid_argument(t);
            }
        } catch (const std::exception &) {
            throw ParseError(std::string("malformed ") + what + " '" + t + "'", at);
        }
        if (v < 1) {
            throw ParseError(std::string(what) + " must be positive", at);
        }
        return v;
    }

    // Consumes exactly one whitespace byte terminating the header.
    std::size_t endHeader() {
        if (mPos >= mBytes.size() || !std::isspace(static_cast<unsigned char>(mBytes[mPos]))) {
            throw ParseError("header not terminated by whitespace", mPos);
        }
        return ++mPos;
    }

    std::size_t pos() const { return mPos; }

private:
    const std::string &mBytes;
    std::size_t mPos = 0;
};

} // namespace

std::string encodePfm(const Image &image) {
    if (image.channels != 3) {
        throw InvalidArgument("PFM writer expects a 3-channel image");
    }
    for (double v : image.data) {
        if (!std::isfinite(v)) {
            throw InvalidArgument("PFM writer: non-finite pixel");
        }
    }
    std::string out = "PF\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n-1.0\n";
    const std::size_t header = out.size();
    out.resize(header + image.data.size() * 4);
    char *dst = out.data() + header;
    for (int y = image.height - 1; y >= 0; --y) {
        for (int x = 0; x < image.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                const float f = static_cast<float>(image.at(x, y, c));
                std::memcpy(dst, &f, 4);
                dst += 4;
            }
        }
    }
    return out;
}

Image decodePfm(const std::string &bytes) {
    HeaderReader hr(bytes);
    const std::string magic = hr.token("PFM magic");
    if (magic != "PF") {
        throw ParseError(magic == "Pf" ? "greyscale PFM is not supported" : "not a colour PFM file", 0);
    }
    const int w = hr.positiveInt("width");
    const int h = hr.positiveInt("height");
    const std::size_t scaleAt = hr.pos();
    const std::string scaleTok = hr.token("scale");
    double scale = 0.0;
    try {
        scale = std::stod(scaleTok);
    } catch (const std::exception &) {
        throw ParseError("malformed scale '" + scaleTok + "'", scaleAt);
    }
    if (scale > 0.0) {
        throw ParseError("unsupported endianness: big-endian PFM (positive scale)", scaleAt);
    }
    if (scale == 0.0 || !std::isfinite(scale)) {
        throw ParseError("invalid PFM scale", scaleAt);
    }
    const std::size_t offset = hr.endHeader();
    const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 12;
    if (bytes.size() - offset < need) {
        throw ParseError("truncated PFM payload: expected " + std::to_string(need) + " bytes, found " +
                             std::to_string(bytes.size() - offset),
                         bytes.size());
    }
    Image img(w, h, 3);
    const char *src = bytes.data() + offset;
    for (int y = h - 1; y >= 0; --y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                float f = 0.0F;
                std::memcpy(&f, src, 4);
                src += 4;
                img.at(x, y, c) = static_cast<double>(f);
            }
        }
    }
    return img;
}

void writePfm(const std::filesystem::path &path, const Image &image) { writeFileAtomic(path, encodePfm(image)); }

Image readPfm(const std::filesystem::path &path) {
    try {
        return decodePfm(readFileBytes(path));
    } catch (const ParseError &e) {
        throw ParseError(path.string() + ": " + e.what(), e.offset());
    }
}

std::string encodePpm(const Image &image) {
    if (image.channels != 3) {
        throw InvalidArgument("PPM writer expects a 3-channel image");
    }
    std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
    const std::size_t header = out.size();
    out.resize(header + image.data.size());
    for (std::size_t i = 0; i < image.data.size(); ++i) {
        const double v = std::clamp(std::isfinite(image.data[i]) ? image.data[i] : 0.0, 0.0, 1.0);
        out[header + i] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
    }
    return out;
}

Image decodePpm(const std::string &bytes) {
    HeaderReader hr(bytes);
    const std::string magic = hr.token("PPM magic");
    if (magic != "P6") {
        throw ParseError("not a binary PPM (P6) file", 0);
    }
    const int w = hr.positiveInt("width");
    const int h = hr.positiveInt("height");
    const std::size_t maxAt = hr.pos();
    const int maxval = hr.positiveInt("maxval");
    if (maxval != 255) {
        throw ParseError("unsupported PPM maxval " + std::to_string(maxval), maxAt);
    }
    const std::size_t offset = hr.endHeader();
    const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3;
    if (bytes.size() - offset < need) {
        throw ParseError("truncated PPM payload: expected " + std::to_string(need) + " bytes, found " +
                             std::to_string(bytes.size() - offset),
                         bytes.size());
    }
    Image img(w, h, 3);
    for (std::size_t i = 0; i < need; ++i) {
        img.data[i] = static_cast<double>(static_cast<unsigned char>(bytes[offset + i])) / 255.0;
    }
    return img;
}

void writePpm(const std::filesystem::path &path, const Image &image) { writeFileAtomic(path, encodePpm(image)); }

Image readPpm(const std::filesystem::path &path) {
    try {
        return decodePpm(readFileBytes(path));
    } catch (const ParseError &e) {
        throw ParseError(path.string() + ": " + e.what(), e.offset());
    }
}

} // namespace hdrsplat
