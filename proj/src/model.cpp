// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "spdet/model.hpp"

#include <algorithm>
#include <set>

#include "spdet/errors.hpp"
#include "spdet/losses.hpp"
#include "spdet/ops.hpp"

namespace spdet::model {

using nlohmann::json;

void ModelConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(image_size > 0 && image_size % 16 == 0, "image_size must be a positive multiple of 16");
  require(d_low > 0 && d_high > 0 && d_shared > 0 && d_scp > 0 && d_word > 0 && d_embed > 0, "widths must be positive");
  require(heads > 0, "heads must be positive");
  require(d_shared % heads == 0 && d_high % heads == 0 && d_scp % heads == 0, "widths must be divisible by heads");
  require(depth >= 1, "depth must be at least 1");
  require(max_bin >= 1, "max_bin must be at least 1");
  require(max_length >= 1, "max_length must be at least 1");
  require(temperature > 0.0, "temperature must be positive");
}

json ModelConfig::to_json() const {
  return {{"image_size", image_size}, {"d_low", d_low},     {"d_high", d_high},         {"d_shared", d_shared},
          {"d_scp", d_scp},           {"d_word", d_word},   {"d_embed", d_embed},       {"heads", heads},
          {"depth", depth},           {"max_bin", max_bin}, {"max_length", max_length}, {"temperature", temperature},
          {"background_prompt", background_prompt}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  try {
    c.image_size = j.at("image_size").get<std::size_t>();
    c.d_low = j.at("d_low").get<std::size_t>();
    c.d_high = j.at("d_high").get<std::size_t>();
    c.d_shared = j.at("d_shared").get<std::size_t>();
    c.d_scp = j.at("d_scp").get<std::size_t>();
    c.d_word = j.at("d_word").get<std::size_t>();
    c.d_embed = j.at("d_embed").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.depth = j.at("depth").get<std::size_t>();
    c.max_bin = j.at("max_bin").get<std::size_t>();
    c.max_length = j.at("max_length").get<std::size_t>();
    c.temperature = j.at("temperature").get<double>();
    c.background_prompt = j.at("background_prompt").get<bool>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

Sample make_sample(const data::DatasetRecord& record, const dtpg::PromptRecord& prompts) {
  return {record.image_id,          record.image,  dtpg::postprocess_report(record.report), prompts.disease_prompts,
          prompts.negative_prompts, record.gt};
}

std::vector<Sample> make_samples(const data::Dataset& dataset, double threshold) {
  std::vector<Sample> out;
  out.reserve(dataset.records.size());
  for (const data::DatasetRecord& rec : dataset.records) {
    std::vector<dtpg::BoxLabel> boxes;
    for (std::size_t i = 0; i < rec.gt.size(); ++i) boxes.push_back({i, dataset.class_names.at(rec.gt[i].label)});
    out.push_back(make_sample(rec, dtpg::generate_prompts(rec.image_id, rec.report, boxes, dataset.class_names, threshold)));
  }
  return out;
}

Model::Model(const ModelConfig& cfg, enc::Vocabulary vocabulary, std::vector<std::string> names, std::uint64_t seed)
    : config(cfg), vocab(std::move(vocabulary)), class_names(std::move(names)) {
  config.validate();
  if (class_names.empty()) throw ConfigError("model needs at least one class");
  Rng rng(seed);
  stub = data::ImageStub::create(store, "stub", {config.d_low, config.d_high}, rng);
  scp = enc::ScpEncoder::create(store, "scp", vocab.size(), config.max_length, config.d_scp, config.heads, rng);
  dbp = enc::DbpEncoder::create(store, "dbp", vocab.size(), config.d_word, config.d_embed, rng);
  bfe::EnhancerConfig ec;
  ec.grid_h = config.image_size / 16;
  ec.grid_w = config.image_size / 16;
  ec.d_high = config.d_high;
  ec.d_shared = config.d_shared;
  ec.d_text_scp = config.d_scp;
  ec.d_text_dbp = config.d_embed;
  ec.heads = config.heads;
  ec.depth = config.depth;
  enhancer = bfe::EnhancerWeights::create(store, "bfe", ec, rng);
  head = detect::HeadWeights::create(store, "head", config.d_low + config.d_high, config.d_embed, config.max_bin, rng);
}

std::optional<std::size_t> Model::background_column() const {
  if (!config.background_prompt) return std::nullopt;
  return class_names.size();
}

void Model::set_gates(bfe::Modality modality, double value) {
  for (Tensor gate : enhancer.gates(modality)) gate.data()[0] = value;
}

enc::Vocabulary build_vocabulary(const std::vector<Sample>& samples, const std::vector<std::string>& class_names,
                                 std::size_t max_length) {
  std::vector<std::string> texts(class_names);
  texts.emplace_back(kBackgroundPrompt);
  for (const Sample& s : samples) {
    texts.push_back(s.report.text());
    texts.insert(texts.end(), s.disease_prompts.begin(), s.disease_prompts.end());
    texts.insert(texts.end(), s.negative_prompts.begin(), s.negative_prompts.end());
  }
  return enc::Vocabulary::build(texts, max_length);
}

Tensor class_matrix(const Model& model, const std::vector<std::string>& extra) {
  std::vector<std::string> texts(model.class_names);
  if (model.config.background_prompt) texts.emplace_back(kBackgroundPrompt);
  texts.insert(texts.end(), extra.begin(), extra.end());
  return enc::encode_dbp(texts, model.vocab, model.dbp).matrix;
}

detect::HeadOutput forward(const Model& model, const Sample& sample, const Tensor& classes) {
  const bfe::FeaturePyramid pyramid = data::image_stub_encoder(sample.image, model.stub);
  const bfe::TextEmbedding scp = enc::encode_scp(sample.report, model.vocab, model.scp);
  const std::vector<std::string> beacons =
      sample.disease_prompts.empty() ? std::vector<std::string>{kBackgroundPrompt} : sample.disease_prompts;
  const bfe::TextEmbedding dbp{enc::encode_dbp(beacons, model.vocab, model.dbp).matrix, bfe::Modality::kDbp};
  const Tensor fused = bfe::enhance(pyramid, scp, dbp, model.enhancer);
  return detect::head_forward(fused, classes, model.head);
}

namespace {

/// Negative prompts that do not restate a class present in the image or the background prompt.
std::vector<std::string> usable_negatives(const Model& model, const Sample& sample) {
  std::set<std::string> blocked{kBackgroundPrompt};
  for (const auto& g : sample.gt) blocked.insert(model.class_names.at(g.label));
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const std::string& p : sample.negative_prompts) {
    if (enc::split_words(p).empty() || blocked.contains(p) || !seen.insert(p).second) continue;
    out.push_back(p);
  }
  return out;
}

}  // namespace

LossBreakdown sample_loss(const Model& model, const Sample& sample) {
  const Tensor classes = class_matrix(model, usable_negatives(model, sample));
  const detect::HeadOutput out = forward(model, sample, classes);
  const detect::AssignedTargets targets =
      detect::assign_targets(sample.gt, out.grid_h, out.grid_w, out.max_bin());
  const double tau = model.config.temperature;

  LossBreakdown result;
  result.targets_clamped = targets.clamped;
  const Tensor positives = targets.count() ? gather_rows(out.class_scores, targets.tokens) : Tensor();
  Tensor contrast = loss::contrastive_loss(positives, targets.labels, tau).value;
  if (const auto bg = model.background_column()) {
    std::vector<bool> is_positive(out.tokens(), false);
    for (std::size_t t : targets.tokens) is_positive[t] = true;
    std::vector<std::size_t> rest;
    for (std::size_t t = 0; t < out.tokens(); ++t)
      if (!is_positive[t]) rest.push_back(t);
    if (!rest.empty()) {
      const std::vector<std::size_t> labels(rest.size(), *bg);
      contrast = add(contrast, loss::contrastive_loss(gather_rows(out.class_scores, rest), labels, tau).value);
    }
  }
  result.contrast = contrast;

  if (targets.count() == 0) {
    result.bbox = Tensor::scalar(0.0);
  } else {
    std::vector<double> gt_corners;
    for (const BBox& b : targets.boxes) gt_corners.insert(gt_corners.end(), {b.x1(), b.y1(), b.x2(), b.y2()});
    const Tensor ciou = loss::ciou(detect::decode_corners(out, targets.tokens),
                                   Tensor::from({targets.count(), 4}, std::move(gt_corners)));
    std::vector<std::size_t> side_rows;
    for (std::size_t t : targets.tokens)
      for (std::size_t s = 0; s < detect::kSides; ++s) side_rows.push_back(t * detect::kSides + s);
    const Tensor sides = loss::dfl_sides(gather_rows(out.dist_logits, side_rows),
                                         loss::dfl_targets(targets.dfl_targets, out.max_bin()));
    const Tensor dfl = scale(row_sum(reshape(sides, {targets.count(), detect::kSides})), 1.0 / detect::kSides);
    const Tensor objectness =
        sigmoid(scale(row_max(slice_cols(positives, 0, model.n_classes())), 1.0 / tau));
    result.bbox = loss::bbox_loss(ciou, dfl, objectness).value;
  }
  result.total = loss::total_loss(result.contrast, result.bbox);
  return result;
}

detect::DecodeOptions default_decode_options(const Model& model) {
  detect::DecodeOptions options;
  options.temperature = model.config.temperature;
  options.background_column = model.background_column();
  return options;
}

std::vector<detect::Detection> detect_objects(const Model& model, const Sample& sample,
                                              const detect::DecodeOptions& options) {
  NoGradGuard guard;
  return detect::detections_from_head(forward(model, sample, class_matrix(model)), options);
}

}  // namespace spdet::model
