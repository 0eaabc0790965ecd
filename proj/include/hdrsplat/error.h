// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hdrsplat {

// Validation failures: bad arguments, shape mismatches, malformed configs.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// File-format violations. Carries the byte offset where parsing stopped.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string &what, std::size_t offset)
        : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), mOffset(offset) {}

    std::size_t offset() const { return mOffset; }

private:
    std::size_t mOffset;
};

// Filesystem failures (missing files, unwritable paths).
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Training produced a NaN/Inf.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace hdrsplat
