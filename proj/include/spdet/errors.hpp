// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <stdexcept>
#include <string>

namespace spdet {

/// Operand extents do not line up (matmul inner dims, projection widths, ...).
class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid hyperparameter or configuration value.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A value went NaN/Inf inside an operation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// API misuse, e.g. calling backward on a non-scalar.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data or geometry.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file. Carries the 1-based line and the byte offset of the failure.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t offset)
      : std::runtime_error(what + " (line " + std::to_string(line) + ", offset " +
                           std::to_string(offset) + ")"),
        line_(line),
        offset_(offset) {}

  std::size_t line() const { return line_; }
  std::size_t offset() const { return offset_; }

 private:
  std::size_t line_;
  std::size_t offset_;
};

/// Checkpoint produced by an incompatible format version or model configuration.
class VersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Evaluation protocol violated, e.g. an incomplete IoU threshold set.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace spdet
