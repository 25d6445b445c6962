// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "spdet/dtpg.hpp"
#include "spdet/model.hpp"
#include "spdet/train.hpp"

namespace spdet::config {

inline constexpr const char* kSeedEnv = "SPDET_SEED";

struct RunConfig {
  model::ModelConfig model;
  train::TrainConfig train;
  double match_threshold = dtpg::kDefaultMatchThreshold;
  double score_threshold = detect::kDefaultScoreThreshold;
  double iou_threshold = detect::kDefaultIouThreshold;

  /// Sets one key from its text value. Throws ConfigError on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  /// Throws ConfigError on any invalid combination.
  void validate() const;
  /// Fully resolved `key = value` lines, sorted by key.
  std::string to_text() const;
};

/// Flat `key = value` lines; `#` starts a comment. Errors name the line.
RunConfig parse(std::string_view text, RunConfig base = {});
RunConfig load(const std::filesystem::path& path, RunConfig base = {});

/// Applies SPDET_SEED when set.
void apply_environment(RunConfig& config);

}  // namespace spdet::config
