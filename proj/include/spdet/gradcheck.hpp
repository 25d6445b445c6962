// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spdet/model.hpp"

namespace spdet::gradcheck {

struct Options {
  double eps = 1e-6;
  double tol = 1e-4;
  std::uint64_t seed = 7;
  double gate_value = 0.5;  // opens every γ so the cross-modal paths carry gradient
  /// Test hook: flips the sign of this parameter's analytic gradient.
  std::optional<std::string> inject_wrong_sign;
};

struct ParamResult {
  std::string name;
  std::size_t size = 0;
  double rel_error = 0.0;  // ‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖)
};

struct Report {
  std::vector<ParamResult> params;  // worst first
  double seconds = 0.0;
  bool passed = false;
  double tol = 0.0;
};

/// The tiny model used by the suite: 16×16 image, 2 classes, depth 2.
model::ModelConfig tiny_config();

/// Central differences against the analytic gradient of the total loss for
/// every parameter of a tiny model on one generated sample.
Report run(const Options& options);

}  // namespace spdet::gradcheck
