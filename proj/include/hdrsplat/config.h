// SPDX-License-Identifier: Apache-2.0
//
// Line-oriented `key = value` configuration. '#' starts a comment, booleans are true/false,
// lists are comma-separated. Unknown keys, duplicates and malformed values are rejected with the
// offending line number. See README.md for the full key table.
#pragma once

#include <hdrsplat/scenegen.h>
#include <hdrsplat/trainer.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hdrsplat {

struct AppConfig {
    TrainConfig train;
    SceneSpec scene;
    std::uint64_t sceneSeed = 1;
    GroundTruthCrf crf = defaultCrf();
    double mu = 5000.0;
    int threads = 0; // 0 = hardware concurrency
    std::string dataDir;

    // Gamma 2.2 scaled so that unit exposure maps to the tone mapper's 0.73 anchor.
    static GroundTruthCrf defaultCrf();
    void validate() const;
};

// Throws InvalidArgument naming the line for unknown keys, duplicates and type errors.
AppConfig parseConfig(const std::string &text);
AppConfig readConfig(const std::filesystem::path &path);

// Every key, one per line; parseConfig(formatConfig(c)) reproduces c.
std::string formatConfig(const AppConfig &cfg);

std::vector<std::string> configKeys();

} // namespace hdrsplat
