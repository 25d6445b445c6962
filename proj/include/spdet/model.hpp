// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "spdet/bfe.hpp"
#include "spdet/data.hpp"
#include "spdet/detect.hpp"
#include "spdet/dtpg.hpp"
#include "spdet/encoders.hpp"
#include "spdet/nn.hpp"

namespace spdet::model {

inline constexpr const char* kBackgroundPrompt = "no finding";

struct ModelConfig {
  std::size_t image_size = data::kDefaultImageSize;
  std::size_t d_low = 32;
  std::size_t d_high = 32;
  std::size_t d_shared = 32;
  std::size_t d_scp = 32;    // SCP token width
  std::size_t d_word = 32;   // DBP word width
  std::size_t d_embed = 32;  // DBP output width = region embedding width
  std::size_t heads = 4;
  std::size_t depth = 2;
  std::size_t max_bin = detect::kDefaultMaxBin;
  std::size_t max_length = enc::kDefaultMaxLength;
  double temperature = loss::kDefaultTemperature;
  bool background_prompt = true;

  /// Throws ConfigError on inconsistent values.
  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  bool operator==(const ModelConfig&) const = default;
};

/// One training or evaluation example with its prompts resolved.
struct Sample {
  std::string image_id;
  Tensor image;
  dtpg::Report report;
  std::vector<std::string> disease_prompts;
  std::vector<std::string> negative_prompts;
  std::vector<detect::GroundTruth> gt;
};

Sample make_sample(const data::DatasetRecord& record, const dtpg::PromptRecord& prompts);

/// Runs the prompt generator over every record.
std::vector<Sample> make_samples(const data::Dataset& dataset, double threshold = dtpg::kDefaultMatchThreshold);

class Model {
 public:
  Model(const ModelConfig& config, enc::Vocabulary vocab, std::vector<std::string> class_names, std::uint64_t seed);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  ModelConfig config;
  enc::Vocabulary vocab;
  std::vector<std::string> class_names;
  nn::ParamStore store;
  data::ImageStub stub;
  enc::ScpEncoder scp;
  enc::DbpEncoder dbp;
  bfe::EnhancerWeights enhancer;
  detect::HeadWeights head;

  std::size_t n_classes() const { return class_names.size(); }
  /// Column of the background prompt in class matrices, if enabled.
  std::optional<std::size_t> background_column() const;
  /// Sets every gate of one modality to `value`.
  void set_gates(bfe::Modality modality, double value);
};

/// Vocabulary over reports, prompts, class names and the background prompt.
enc::Vocabulary build_vocabulary(const std::vector<Sample>& samples, const std::vector<std::string>& class_names,
                                 std::size_t max_length = enc::kDefaultMaxLength);

/// Unit rows for the class names, then the background prompt, then `extra` prompts.
Tensor class_matrix(const Model& model, const std::vector<std::string>& extra = {});

detect::HeadOutput forward(const Model& model, const Sample& sample, const Tensor& classes);

struct LossBreakdown {
  Tensor total;
  Tensor contrast;
  Tensor bbox;
  bool targets_clamped = false;
};

/// Contrastive loss over assigned tokens (background tokens against the
/// background prompt when enabled) plus the weighted box loss.
LossBreakdown sample_loss(const Model& model, const Sample& sample);

std::vector<detect::Detection> detect_objects(const Model& model, const Sample& sample,
                                              const detect::DecodeOptions& options);

detect::DecodeOptions default_decode_options(const Model& model);

}  // namespace spdet::model
