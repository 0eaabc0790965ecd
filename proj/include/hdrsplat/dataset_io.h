// SPDX-License-Identifier: Apache-2.0
//
// Dataset directory layout:
//   cameras.txt   id fx fy cx cy width height r11 r12 r13 tx r21 r22 r23 ty r31 r32 r33 tz
//   exposures.txt t1..t5, one per line, strictly increasing
//   crf.txt       key = value descriptor of the ground-truth response
//   split.txt     "train <view>" / "test <view>" lines
//   points.txt    x y z r g b initial point cloud
//   ldr/view_VVV_exp_K.ppm, hdr/view_VVV.pfm, crf/gamma_VVV.pfm (spatially varying gamma only)
#pragma once

#include <hdrsplat/scenegen.h>

#include <filesystem>
#include <string>
#include <vector>

namespace hdrsplat {

std::string ldrFileName(int view, int k); // k in 1..5
std::string hdrFileName(int view);

void writeDataset(const Dataset &data, const std::filesystem::path &root);

struct DatasetLoadOptions {
    bool loadHdr = true; // hdr/ is optional; missing files leave empty images
};

// Loads metadata plus every LDR image referenced by the split. Throws IoError listing missing files.
Dataset loadDataset(const std::filesystem::path &root, const DatasetLoadOptions &opts = {});

std::string formatCameras(const std::vector<Camera> &cameras);
std::vector<Camera> parseCameras(const std::string &text);

} // namespace hdrsplat
