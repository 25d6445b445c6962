// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <gtest/gtest.h>

#include "spdet/errors.hpp"
#include "spdet/model.hpp"

namespace spdet::model {
namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.image_size = 32;
  c.d_low = 8;
  c.d_high = 8;
  c.d_shared = 8;
  c.d_scp = 8;
  c.d_word = 8;
  c.d_embed = 8;
  c.heads = 2;
  c.depth = 2;
  c.max_length = 32;
  return c;
}

struct Fixture {
  data::Dataset ds;
  std::vector<Sample> samples;
  std::unique_ptr<Model> model;

  explicit Fixture(std::uint64_t seed, std::size_t n = 6) {
    data::GeneratorOptions gen;
    gen.image_size = 32;
    ds = data::generate_synthetic_dataset(n, 4, seed, gen);
    samples = make_samples(ds);
    model = std::make_unique<Model>(small_config(), build_vocabulary(samples, ds.class_names, 32), ds.class_names, seed);
  }
};

TEST(ModelConfig, ValidationAndJsonRoundTrip) {
  ModelConfig c = small_config();
  EXPECT_EQ(ModelConfig::from_json(c.to_json()), c);
  c.heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.image_size = 40;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.depth = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Model, ClassMatrixLayout) {
  Fixture f(1);
  Tensor m = class_matrix(*f.model, {"left zone"});
  EXPECT_EQ(m.shape(), (Shape{6, 8}));
  EXPECT_EQ(f.model->background_column(), std::optional<std::size_t>(4));
  for (std::size_t r = 0; r < 6; ++r) {
    double n = 0.0;
    for (std::size_t c = 0; c < 8; ++c) n += m.at(r, c) * m.at(r, c);
    EXPECT_NEAR(n, 1.0, 1e-12);
  }
}

TEST(Model, ForwardShapes) {
  Fixture f(2);
  detect::HeadOutput out = forward(*f.model, f.samples[0], class_matrix(*f.model));
  EXPECT_EQ(out.grid_h, 4u);
  EXPECT_EQ(out.class_scores.shape(), (Shape{16, 5}));
  EXPECT_EQ(out.dist_logits.shape(), (Shape{64, 8}));
}

TEST(Model, LossIsFiniteAndSplitsIntoParts) {
  Fixture f(3);
  for (const Sample& s : f.samples) {
    LossBreakdown l = sample_loss(*f.model, s);
    EXPECT_TRUE(std::isfinite(l.total.item()));
    EXPECT_GT(l.contrast.item(), 0.0);
    EXPECT_GT(l.bbox.item(), 0.0);
    EXPECT_DOUBLE_EQ(l.total.item(), l.contrast.item() + l.bbox.item());
  }
}

TEST(Model, NoGroundTruthGivesZeroBoxLoss) {
  Fixture f(4);
  Sample s = f.samples[0];
  s.gt.clear();
  LossBreakdown l = sample_loss(*f.model, s);
  EXPECT_EQ(l.bbox.item(), 0.0);
  EXPECT_GT(l.contrast.item(), 0.0);
}

TEST(Model, WithoutBackgroundPromptOnlyPositivesCount) {
  Fixture f(5);
  ModelConfig c = small_config();
  c.background_prompt = false;
  Model m(c, f.model->vocab, f.ds.class_names, 5);
  EXPECT_FALSE(m.background_column());
  Sample s = f.samples[0];
  s.gt.clear();
  EXPECT_EQ(sample_loss(m, s).total.item(), 0.0);
}

TEST(Model, ClosedGatesIgnoreReportText) {
  Fixture f(6);
  f.model->set_gates(bfe::Modality::kScp, 0.0);
  f.model->set_gates(bfe::Modality::kDbp, 0.0);
  detect::DecodeOptions opts = default_decode_options(*f.model);
  opts.score_threshold = 1e-9;
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    Sample a = f.samples[trial % f.samples.size()];
    Sample b = a;
    const Sample& donor = f.samples[(trial + 1 + rng() % 4) % f.samples.size()];
    b.report = donor.report;
    b.disease_prompts = donor.disease_prompts;
    const Tensor classes = class_matrix(*f.model);
    const Tensor sa = forward(*f.model, a, classes).class_scores, sb = forward(*f.model, b, classes).class_scores;
    EXPECT_TRUE(std::ranges::equal(sa.values(), sb.values()));
    auto da = detect_objects(*f.model, a, opts), db = detect_objects(*f.model, b, opts);
    ASSERT_EQ(da.size(), db.size());
    for (std::size_t i = 0; i < da.size(); ++i) {
      EXPECT_EQ(da[i].score, db[i].score);
      EXPECT_TRUE(da[i].box == db[i].box);
    }
  }
}

TEST(Model, OpenGatesReadReportText) {
  Fixture f(7);
  f.model->set_gates(bfe::Modality::kScp, 0.5);
  f.model->set_gates(bfe::Modality::kDbp, 0.5);
  Sample a = f.samples[0], b = f.samples[0];
  b.report = dtpg::postprocess_report("There is pleural effusion in the left zone. No evidence of cardiomegaly.");
  b.disease_prompts = {"pleural effusion"};
  const Tensor classes = class_matrix(*f.model);
  EXPECT_FALSE(std::ranges::equal(forward(*f.model, a, classes).class_scores.values(),
                                  forward(*f.model, b, classes).class_scores.values()));
}

TEST(Model, SeedDeterminesWeights) {
  Fixture a(8), b(8);
  const auto& ea = a.model->store.entries();
  const auto& eb = b.model->store.entries();
  ASSERT_EQ(ea.size(), eb.size());
  for (std::size_t i = 0; i < ea.size(); ++i) {
    EXPECT_EQ(ea[i].name, eb[i].name);
    EXPECT_TRUE(std::ranges::equal(ea[i].tensor.values(), eb[i].tensor.values()));
  }
}

TEST(Samples, PromptsComeFromReports) {
  Fixture f(9);
  for (std::size_t i = 0; i < f.samples.size(); ++i) {
    EXPECT_EQ(f.samples[i].gt.size(), f.ds.records[i].gt.size());
    for (const auto& g : f.ds.records[i].gt) {
      EXPECT_NE(std::ranges::find(f.samples[i].disease_prompts, f.ds.class_names[g.label]),
                f.samples[i].disease_prompts.end());
    }
  }
}

}  // namespace
}  // namespace spdet::model
