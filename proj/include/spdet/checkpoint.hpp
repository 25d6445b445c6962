// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>

#include "json.hpp"
#include "spdet/model.hpp"

namespace spdet::checkpoint {

inline constexpr char kMagic[8] = {'S', 'P', 'D', 'E', 'T', 'C', 'K', 'P'};
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::uint8_t kFloat64Tag = 1;

/// Layout: magic, u32 version, u64 header length, JSON header (model config,
/// class names, vocabulary, `meta`), u32 tensor count, then per tensor: u32 name
/// length, name, u8 dtype tag, u32 rank, u64 extents, little-endian float64 payload.
void save(const std::filesystem::path& path, const model::Model& model, const nlohmann::json& meta = nlohmann::json::object());

struct Loaded {
  std::unique_ptr<model::Model> model;
  nlohmann::json meta;
};

/// Throws VersionError on a bad magic or version, on tensors that do not match
/// the stored configuration, or when `expected` differs from the stored config.
/// Throws InputError when the file cannot be read.
Loaded load(const std::filesystem::path& path, const std::optional<model::ModelConfig>& expected = std::nullopt);

}  // namespace spdet::checkpoint
