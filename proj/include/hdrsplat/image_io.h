// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <hdrsplat/image.h>

#include <filesystem>
#include <string>

namespace hdrsplat {

// Colour PFM: "PF\n<w> <h>\n-1.0\n", little-endian 32-bit floats, rows stored bottom-to-top.
// Parent directories are created on write.
void writePfm(const std::filesystem::path &path, const Image &image);
Image readPfm(const std::filesystem::path &path);
std::string encodePfm(const Image &image);
Image decodePfm(const std::string &bytes);

// Binary P6 with maxval 255; values are clamped to [0, 1] and quantized with round(x * 255).
void writePpm(const std::filesystem::path &path, const Image &image);
Image readPpm(const std::filesystem::path &path);
std::string encodePpm(const Image &image);
Image decodePpm(const std::string &bytes);

// Helpers shared by the text/binary formats.
std::string readFileBytes(const std::filesystem::path &path);
// Writes to a temporary sibling, then renames over the destination.
void writeFileAtomic(const std::filesystem::path &path, const std::string &bytes);

} // namespace hdrsplat
