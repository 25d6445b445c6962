// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spdet/bfe.hpp"
#include "spdet/detect.hpp"
#include "spdet/nn.hpp"
#include "spdet/tensor.hpp"

namespace spdet::data {

inline constexpr std::size_t kMaxClasses = 14;
inline constexpr std::size_t kDefaultImageSize = 64;
inline constexpr double kNegationProbability = 0.3;
inline constexpr int kFormatVersion = 1;

/// All lowercase class names; a dataset with n classes uses the first n.
const std::vector<std::string>& all_class_names();
std::vector<std::string> class_names(std::size_t n_classes);

struct DatasetRecord {
  std::string image_id;
  Tensor image;  // [H × W × 1], values in [0, 1]
  std::vector<detect::GroundTruth> gt;
  std::string report;

  bool operator==(const DatasetRecord& other) const;
};

struct Dataset {
  std::vector<std::string> class_names;
  std::vector<DatasetRecord> records;
};

struct GeneratorOptions {
  std::size_t image_size = kDefaultImageSize;
  double negation_probability = kNegationProbability;
};

/// Pure function of (n, n_classes, seed, options). Record i draws from its own
/// stream seeded by (seed, i). Throws ConfigError on invalid counts.
Dataset generate_synthetic_dataset(std::size_t n, std::size_t n_classes, std::uint64_t seed,
                                   const GeneratorOptions& options = {});

/// Layout: annotations.jsonl (header line, then one record per line),
/// images.bin (one line of hex-encoded little-endian float64 pixels per record),
/// reports/<image_id>.txt.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

/// Throws ParseError with line and offset on malformed files, InputError when a
/// file is missing. With `missing_reports` set, an absent report file yields an
/// empty report and its image id is appended there instead.
Dataset load_dataset(const std::filesystem::path& dir, std::vector<std::string>* missing_reports = nullptr);

struct StubConfig {
  std::size_t d_low = 32;   // X_l channels
  std::size_t d_high = 32;  // X_h channels
};

/// Two strided convolution stacks: three stride-2 convolutions to X_l (stride 8),
/// one more to X_h (stride 16).
struct ImageStub {
  nn::Conv2d conv1;
  nn::Conv2d conv2;
  nn::Conv2d conv3;
  nn::Conv2d conv4;

  static ImageStub create(nn::ParamStore& store, const std::string& prefix, const StubConfig& config, Rng& rng);
};

/// Throws ConfigError unless both image dims are divisible by 16.
bfe::FeaturePyramid image_stub_encoder(const Tensor& image, const ImageStub& stub);

}  // namespace spdet::data
