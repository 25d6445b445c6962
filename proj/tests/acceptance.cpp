// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

// Acceptance run: one PASS/FAIL line per criterion. Optional arguments select
// criteria by key; with none, everything runs (the training criteria take about
// 35 minutes on one core).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "detection_oracles.hpp"
#include "loss_oracles.hpp"
#include "oracles.hpp"
#include "spdet/bfe.hpp"
#include "spdet/data.hpp"
#include "spdet/detect.hpp"
#include "spdet/dtpg.hpp"
#include "spdet/errors.hpp"
#include "spdet/gradcheck.hpp"
#include "spdet/losses.hpp"
#include "spdet/metrics.hpp"
#include "spdet/model.hpp"
#include "spdet/ops.hpp"
#include "spdet/train.hpp"
#include "test_support.hpp"

namespace spdet {
namespace {

using testing::Mat;
namespace oracle = testing::oracle;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

// ---------------------------------------------------------------- gradients

Outcome gradient_suite() {
  const double start = cpu_seconds();
  gradcheck::Report r = gradcheck::run({});
  const double secs = cpu_seconds() - start;
  std::size_t scalars = 0;
  for (const auto& p : r.params) scalars += p.size;
  const double worst = r.params.empty() ? 0.0 : r.params.front().rel_error;
  return {r.passed && secs < 120.0,
          std::to_string(r.params.size()) + " tensors, " + std::to_string(scalars) + " scalars, worst rel err " +
              fmt("%.2e", worst) + " (" + r.params.front().name + "), " + fmt("%.1f", secs) + " s cpu"};
}

// ---------------------------------------------------------------- oracles

double enhancer_oracle_error(std::uint64_t seed) {
  Rng rng(seed);
  bfe::EnhancerConfig c;
  c.grid_h = 2;
  c.grid_w = 2;
  c.d_high = 8;
  c.d_shared = 8;
  c.d_text_scp = 8;
  c.d_text_dbp = 8;
  c.heads = 2;
  c.depth = 2;
  nn::ParamStore store;
  bfe::EnhancerWeights w = bfe::EnhancerWeights::create(store, "e", c, rng);
  for (auto m : {bfe::Modality::kScp, bfe::Modality::kDbp})
    for (Tensor g : w.gates(m)) g.data()[0] = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
  const std::size_t d_low = 3;
  bfe::FeaturePyramid p{Tensor::randn({2, 2, 8}, rng), Tensor::randn({4, 4, d_low}, rng)};
  Tensor scp = Tensor::randn({4, 8}, rng), dbp = Tensor::randn({4, 8}, rng);
  Tensor got = bfe::enhance(p, {scp, bfe::Modality::kScp}, {dbp, bfe::Modality::kDbp}, w);

  auto f = bfe::flatten_with_pe(p.x_high, w.pos_encoding);
  Mat x = oracle::self_attend(Mat::of(f.flat), Mat::of(f.positioned), w.self);
  for (const bfe::FusionLayer& layer : w.layers) {
    x = oracle::fusion_step(x, Mat::of(scp), layer.scp);
    x = oracle::fusion_step(x, Mat::of(dbp), layer.dbp);
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      const std::size_t base = (i * 4 + j) * (d_low + 8);
      for (std::size_t k = 0; k < d_low; ++k)
        worst = std::max(worst, std::abs(got.at(base + k) - p.x_low.at((i * 4 + j) * d_low + k)));
      const std::size_t src = (i / 2) * 2 + j / 2;
      for (std::size_t k = 0; k < 8; ++k) worst = std::max(worst, std::abs(got.at(base + d_low + k) - x(src, k)));
    }
  return worst;
}

Outcome equation_oracles() {
  double enh = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) enh = std::max(enh, enhancer_oracle_error(100 + s));

  std::mt19937_64 gen(5);
  Rng rng(5);
  double con = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    Tensor s = Tensor::randn({4, 8}, rng);
    std::vector<std::size_t> y(4);
    for (auto& v : y) v = gen() % 8;
    const double want = static_cast<double>(oracle::contrastive_oracle(s, y, 0.1));
    con = std::max(con, std::abs(loss::contrastive_loss(s, y, 0.1).value.item() - want));
  }

  double ci = 0.0;
  std::uniform_real_distribution<double> c(0.0, 1.0), e(0.02, 0.6);
  for (int trial = 0; trial < 1000; ++trial) {
    BBox a{c(gen), c(gen), e(gen), e(gen)}, b{c(gen), c(gen), e(gen), e(gen)};
    ci = std::max(ci, std::abs(loss::ciou(a, b) - static_cast<double>(oracle::ciou_oracle(a, b))));
  }

  double df = 0.0;
  std::uniform_real_distribution<double> t(0.0, 7.0);
  for (int trial = 0; trial < 200; ++trial) {
    Tensor logits = Tensor::randn({4, 8}, rng);
    std::vector<double> targets(4);
    for (auto& v : targets) v = t(gen);
    long double want = 0.0L;
    for (std::size_t side = 0; side < 4; ++side) {
      std::vector<double> row(logits.values().begin() + side * 8, logits.values().begin() + (side + 1) * 8);
      want += oracle::dfl_side_oracle(row, targets[side]);
    }
    df = std::max(df, std::abs(loss::dfl(logits, targets).value.item() - static_cast<double>(want / 4)));
  }
  return {enh < 1e-10 && con < 1e-12 && ci < 1e-12 && df < 1e-12,
          "enhancer " + fmt("%.1e", enh) + ", contrastive " + fmt("%.1e", con) + ", ciou " + fmt("%.1e", ci) +
              ", dfl " + fmt("%.1e", df)};
}

// ---------------------------------------------------------------- analytic values

Outcome analytic_losses() {
  double con = 0.0;
  for (std::size_t n : {2, 4, 8}) {
    Tensor s = Tensor::full({3, n}, 0.37);
    const double got = loss::contrastive_loss(s, {0, n - 1, n / 2}, 0.1).value.item();
    con = std::max(con, std::abs(got - std::log(static_cast<double>(n))));
  }
  std::vector<double> half(4);
  for (std::size_t i = 0; i < 4; ++i) half[i] = static_cast<double>(i) + 0.5;
  const double df = std::abs(loss::dfl(Tensor::zeros({4, 8}), half).value.item() - std::log(8.0));

  std::mt19937_64 gen(77);
  std::uniform_real_distribution<double> c(0.0, 1.0), e(0.001, 1.0);
  double ci = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    BBox b{c(gen), c(gen), e(gen), e(gen)};
    ci = std::max(ci, std::abs(loss::ciou(b, b) - 1.0));
  }
  return {con < 1e-12 && df < 1e-12 && ci < 1e-12, "|L - ln N| " + fmt("%.1e", con) + ", |DFL - ln 8| " +
                                                        fmt("%.1e", df) + ", |CIoU(b,b) - 1| " + fmt("%.1e", ci)};
}

// ---------------------------------------------------------------- corpus and training

inline constexpr std::size_t kTrain = 500;
inline constexpr std::size_t kEval = 100;
inline constexpr std::size_t kVal = 100;
inline constexpr std::size_t kClasses = 4;
inline constexpr std::uint64_t kValSeedOffset = 1000;

struct Corpus {
  std::vector<std::string> classes;
  std::vector<model::Sample> train, val, eval;
};

Corpus make_corpus(std::uint64_t seed) {
  data::Dataset ds = data::generate_synthetic_dataset(kTrain + kEval, kClasses, seed);
  data::Dataset val = data::generate_synthetic_dataset(kVal, kClasses, seed + kValSeedOffset);
  data::Dataset tr{ds.class_names, {ds.records.begin(), ds.records.begin() + kTrain}};
  data::Dataset ev{ds.class_names, {ds.records.begin() + kTrain, ds.records.end()}};
  return {ds.class_names, model::make_samples(tr), model::make_samples(val), model::make_samples(ev)};
}

struct RunResult {
  double ap50 = 0.0;
  double map = 0.0;
  double cpu = 0.0;
  std::size_t epochs = 0;
  std::size_t best_epoch = 0;
};

struct RunSpec {
  std::uint64_t seed = 7;
  std::size_t depth = 2;
  bool close_scp = false;
  bool close_dbp = false;

  std::string label() const {
    std::string gates = close_scp && close_dbp ? "both closed" : close_scp ? "scp closed" : close_dbp ? "dbp closed" : "full";
    return "seed " + std::to_string(seed) + ", depth " + std::to_string(depth) + ", " + gates;
  }
};

RunResult train_and_evaluate(const RunSpec& run, const Corpus& corpus) {
  const double start = cpu_seconds();
  model::ModelConfig mc;
  mc.depth = run.depth;
  model::Model m(mc, model::build_vocabulary(corpus.train, corpus.classes, mc.max_length), corpus.classes, run.seed);
  if (run.close_scp) m.set_gates(bfe::Modality::kScp, 0.0);
  if (run.close_dbp) m.set_gates(bfe::Modality::kDbp, 0.0);
  train::TrainConfig tc;
  tc.seed = run.seed;
  tc.freeze_scp_gates = run.close_scp;
  tc.freeze_dbp_gates = run.close_dbp;
  train::TrainResult tr = train::train(m, corpus.train, corpus.val, tc, [&](const model::Model&, const train::EpochStats& st) {
    if (st.epoch % 10 == 0)
      std::printf("    [%s] epoch %zu train %.4f val %.4f\n", run.label().c_str(), st.epoch, st.train_loss, st.val_loss);
    std::fflush(stdout);
  });
  std::vector<metrics::ImageEval> images;
  const detect::DecodeOptions opts = model::default_decode_options(m);
  for (const auto& s : corpus.eval) images.push_back({model::detect_objects(m, s, opts), s.gt});
  metrics::EvalReport report = metrics::evaluate(images, corpus.classes);
  RunResult r{report.ap_at(0.50), report.map, cpu_seconds() - start, tr.history.size(), tr.best_epoch};
  std::printf("    [%s] AP50 %.3f mAP %.3f P %.2f R %.2f, %zu epochs (best %zu), %.0f s cpu\n", run.label().c_str(),
              r.ap50, r.map, report.precision, report.recall, r.epochs, r.best_epoch, r.cpu);
  std::fflush(stdout);
  return r;
}

class Runs {
 public:
  const RunResult& get(const RunSpec& run) {
    const auto key = std::tuple{run.seed, run.depth, run.close_scp, run.close_dbp};
    if (auto it = results_.find(key); it != results_.end()) return it->second;
    if (!corpora_.contains(run.seed)) corpora_.emplace(run.seed, make_corpus(run.seed));
    return results_.emplace(key, train_and_evaluate(run, corpora_.at(run.seed))).first->second;
  }

 private:
  std::map<std::uint64_t, Corpus> corpora_;
  std::map<std::tuple<std::uint64_t, std::size_t, bool, bool>, RunResult> results_;
};

// ---------------------------------------------------------------- gate invariance

bool same_detections(const std::vector<detect::Detection>& a, const std::vector<detect::Detection>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i].box == b[i].box) || a[i].score != b[i].score || a[i].class_id != b[i].class_id ||
        a[i].token_index != b[i].token_index)
      return false;
  }
  return true;
}

Outcome gate_invariance() {
  data::Dataset ds = data::generate_synthetic_dataset(40, kClasses, 7);
  std::vector<model::Sample> samples = model::make_samples(ds);
  model::Model m({}, model::build_vocabulary(samples, ds.class_names), ds.class_names, 7);
  m.set_gates(bfe::Modality::kScp, 0.0);
  m.set_gates(bfe::Modality::kDbp, 0.0);
  detect::DecodeOptions opts = model::default_decode_options(m);
  opts.score_threshold = 1e-9;
  std::mt19937_64 gen(11);
  std::size_t identical = 0, compared = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const model::Sample& a = samples[gen() % samples.size()];
    model::Sample b = a;
    std::size_t d = gen() % samples.size();
    while (samples[d].report.text() == a.report.text()) d = gen() % samples.size();
    b.report = samples[d].report;
    b.disease_prompts = samples[d].disease_prompts;
    b.negative_prompts = samples[d].negative_prompts;
    auto da = model::detect_objects(m, a, opts), db = model::detect_objects(m, b, opts);
    compared += da.size();
    identical += same_detections(da, db) ? 1 : 0;
  }
  return {identical == 10 && compared > 0,
          std::to_string(identical) + "/10 trials identical, " + std::to_string(compared) + " detections compared"};
}

// ---------------------------------------------------------------- brute force

Outcome brute_force() {
  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t nms_ok = 0;
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<detect::Detection> dets;
    const std::size_t n = 1 + gen() % 6;
    for (std::size_t i = 0; i < n; ++i) dets.push_back({oracle::random_small_box(gen), gen() % 2, u(gen), i});
    const double iou_t = 0.3 + 0.4 * u(gen);
    auto got = detect::nms(dets, iou_t, 0.25);
    auto want = oracle::nms_exhaustive(dets, iou_t, 0.25);
    bool ok = got.size() == want.size();
    for (std::size_t i = 0; ok && i < got.size(); ++i) ok = got[i].token_index == want[i].token_index;
    nms_ok += ok ? 1 : 0;
  }

  // Two images, two classes, at most six detections and six boxes in total.
  std::size_t ap_ok = 0;
  double worst = 0.0;
  const std::vector<std::string> names = {"a", "b"};
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<metrics::ImageEval> images(2);
    const std::size_t nd = gen() % 7, ng = gen() % 7;
    for (std::size_t i = 0; i < nd; ++i)
      images[gen() % 2].detections.push_back({oracle::random_small_box(gen), gen() % 2, u(gen), i});
    for (std::size_t i = 0; i < ng; ++i)
      images[gen() % 2].ground_truth.push_back({oracle::random_small_box(gen), gen() % 2});
    metrics::EvalReport report = metrics::evaluate(images, names);

    double map_sum = 0.0, trial_worst = 0.0;
    bool ok = true;
    for (std::size_t ti = 0; ti < metrics::coco_thresholds().size(); ++ti) {
      const double t = metrics::coco_thresholds()[ti];
      double cls_sum = 0.0;
      std::size_t present = 0;
      for (std::size_t c = 0; c < 2; ++c) {
        std::vector<std::pair<double, bool>> ranked;
        std::size_t n_gt = 0;
        for (const auto& img : images) {
          std::vector<std::pair<BBox, double>> dets;
          std::vector<BBox> gts;
          for (const auto& d : img.detections)
            if (d.class_id == c) dets.emplace_back(d.box, d.score);
          for (const auto& g : img.ground_truth)
            if (g.label == c) gts.push_back(g.box);
          std::vector<double> scores;
          auto flags = oracle::match_exhaustive(dets, gts, t, scores);
          for (std::size_t k = 0; k < flags.size(); ++k) ranked.emplace_back(scores[k], flags[k]);
          n_gt += gts.size();
        }
        std::ranges::stable_sort(ranked, [](const auto& x, const auto& y) { return x.first > y.first; });
        std::vector<bool> flags;
        for (const auto& r : ranked) flags.push_back(r.second);
        const auto want = oracle::ap_exhaustive(flags, n_gt);
        const auto& got = report.table[ti].per_class[c];
        if (got.has_value() != want.has_value()) {
          ok = false;
        } else if (want) {
          trial_worst = std::max(trial_worst, std::abs(*got - *want));
          cls_sum += *want;
          ++present;
        }
      }
      map_sum += present ? cls_sum / static_cast<double>(present) : 0.0;
    }
    const double map_want = map_sum / static_cast<double>(metrics::coco_thresholds().size());
    trial_worst = std::max(trial_worst, std::abs(report.map - map_want));
    worst = std::max(worst, trial_worst);
    ap_ok += ok && trial_worst < 1e-12 ? 1 : 0;
  }

  const std::vector<double> expected = {0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95};
  const bool thresholds = metrics::coco_thresholds() == expected;
  bool rejects = false;
  try {
    std::vector<metrics::ThresholdAp> short_table;
    for (std::size_t i = 0; i + 1 < expected.size(); ++i) short_table.push_back({expected[i], {1.0}});
    metrics::map_40_95(short_table);
  } catch (const ProtocolError&) {
    rejects = true;
  }
  return {nms_ok == 500 && ap_ok == 500 && thresholds && rejects,
          "nms " + std::to_string(nms_ok) + "/500, ap+map " + std::to_string(ap_ok) + "/500 (max diff " +
              fmt("%.1e", worst) + "), thresholds " + (thresholds ? "exact" : "WRONG") +
              (rejects ? ", other sets rejected" : ", other sets ACCEPTED")};
}

// ---------------------------------------------------------------- prompt generator

Outcome prompt_generator() {
  const std::size_t n_classes = data::kMaxClasses;
  data::Dataset ds = data::generate_synthetic_dataset(200, n_classes, 7);
  const double threshold = dtpg::kDefaultMatchThreshold;
  std::mt19937_64 gen(3);
  std::size_t negated_in_pairs = 0, bad_pairing = 0, order_changes = 0, negated_total = 0;
  for (const auto& rec : ds.records) {
    std::vector<dtpg::BoxLabel> boxes;
    for (std::size_t i = 0; i < rec.gt.size(); ++i) boxes.push_back({i, ds.class_names[rec.gt[i].label]});
    const dtpg::PromptRecord p = dtpg::generate_prompts(rec.image_id, rec.report, boxes, ds.class_names, threshold);

    const dtpg::Report report = dtpg::postprocess_report(rec.report);
    std::set<std::string> negated;
    for (const auto& np : dtpg::detect_negations(report, dtpg::extract_noun_phrases(report)))
      if (np.polarity == dtpg::Polarity::kNegated) negated.insert(np.text);
    negated_total += negated.size();
    for (const auto& pair : p.positive_pairs) negated_in_pairs += negated.contains(pair.matched_phrase) ? 1 : 0;

    std::vector<std::size_t> ids;
    for (const auto& pair : p.positive_pairs) ids.push_back(pair.box_id);
    std::ranges::sort(ids);
    std::vector<std::size_t> expect(rec.gt.size());
    for (std::size_t i = 0; i < expect.size(); ++i) expect[i] = i;
    bad_pairing += ids == expect ? 0 : 1;

    std::vector<dtpg::BoxLabel> shuffled_boxes = boxes;
    std::vector<std::string> shuffled_classes = ds.class_names;
    std::ranges::shuffle(shuffled_boxes, gen);
    std::ranges::shuffle(shuffled_classes, gen);
    const dtpg::PromptRecord q =
        dtpg::generate_prompts(rec.image_id, rec.report, shuffled_boxes, shuffled_classes, threshold);
    bool same = q.negative_prompts == p.negative_prompts && q.disease_prompts == p.disease_prompts &&
                q.positive_pairs.size() == p.positive_pairs.size();
    for (const auto& a : p.positive_pairs) {
      auto it = std::ranges::find_if(q.positive_pairs, [&](const auto& b) { return b.box_id == a.box_id; });
      same = same && it != q.positive_pairs.end() && it->matched_phrase == a.matched_phrase &&
             it->similarity == a.similarity && it->fallback == a.fallback;
    }
    order_changes += same ? 0 : 1;
  }
  return {negated_in_pairs == 0 && bad_pairing == 0 && order_changes == 0 && negated_total > 0,
          std::to_string(negated_total) + " negated phrases, " + std::to_string(negated_in_pairs) +
              " in positive pairs, " + std::to_string(bad_pairing) + " reports with wrong pairing, " +
              std::to_string(order_changes) + " order-dependent reports"};
}

// ---------------------------------------------------------------- learning criteria

Outcome end_to_end(Runs& runs) {
  const RunResult& r = runs.get({});
  return {r.ap50 >= 0.85 && r.cpu < 1800.0 && r.epochs <= 40,
          "AP50 " + fmt("%.3f", r.ap50) + " (need >= 0.85), mAP " + fmt("%.3f", r.map) + ", " +
              std::to_string(r.epochs) + " epochs, " + fmt("%.0f", r.cpu) + " s cpu (limit 1800)"};
}

Outcome ablation(Runs& runs) {
  bool pass = true;
  std::string detail;
  std::array<double, 4> mean{};
  for (std::uint64_t seed : {7, 8, 9}) {
    const double full = runs.get({seed, 2, false, false}).ap50;
    const double no_scp = runs.get({seed, 2, true, false}).ap50;
    const double no_dbp = runs.get({seed, 2, false, true}).ap50;
    const double none = runs.get({seed, 2, true, true}).ap50;
    const bool ok = full >= no_scp && full >= no_dbp && no_scp >= none && no_dbp >= none;
    pass = pass && ok;
    mean[0] += full / 3;
    mean[1] += no_scp / 3;
    mean[2] += no_dbp / 3;
    mean[3] += none / 3;
    detail += "seed " + std::to_string(seed) + " " + fmt("%.3f", full) + "/" + fmt("%.3f", no_scp) + "/" +
              fmt("%.3f", no_dbp) + "/" + fmt("%.3f", none) + (ok ? "" : " (order violated)") + "; ";
  }
  detail += "mean " + fmt("%.3f", mean[0]) + "/" + fmt("%.3f", mean[1]) + "/" + fmt("%.3f", mean[2]) + "/" +
            fmt("%.3f", mean[3]) + " (AP50 full/scp closed/dbp closed/both closed)";
  return {pass, detail};
}

Outcome depth_runs(Runs& runs) {
  bool pass = true;
  std::string detail;
  for (std::size_t depth : {1, 2, 3}) {
    const RunResult& r = runs.get({7, depth, false, false});
    pass = pass && std::isfinite(r.map);
    detail += "depth " + std::to_string(depth) + " mAP " + fmt("%.3f", r.map) + " AP50 " + fmt("%.3f", r.ap50) +
              (depth < 3 ? "; " : "");
  }
  return {pass, detail};
}

struct Criterion {
  std::string key;
  std::string title;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace spdet

int main(int argc, char** argv) {
  using namespace spdet;
  Runs runs;
  const std::vector<Criterion> criteria = {
      {"gradients", "gradient suite", gradient_suite},
      {"oracles", "equation oracles", equation_oracles},
      {"analytic", "analytic loss values", analytic_losses},
      {"gates", "gate invariance", gate_invariance},
      {"bruteforce", "brute-force equivalence", brute_force},
      {"prompts", "prompt generator correctness", prompt_generator},
      {"e2e", "end-to-end learning", [&] { return end_to_end(runs); }},
      {"ablation", "ablation direction", [&] { return ablation(runs); }},
      {"depth", "depth runs", [&] { return depth_runs(runs); }},
  };
  std::set<std::string> selected(argv + 1, argv + argc);
  std::size_t failed = 0, ran = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && !selected.contains(c.key)) continue;
    std::printf("... %s\n", c.title.c_str());
    std::fflush(stdout);
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    ++ran;
    failed += o.pass ? 0 : 1;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", c.title.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  if (selected.empty() || selected.contains("reference")) {
    const bool substitutes = ran == criteria.size();
    failed += substitutes ? 0 : 1;
    std::printf("%s reference-scale reproduction: not reproducible at desk scale; %s\n", substitutes ? "PASS" : "FAIL",
                substitutes ? "replaced by the substitute criteria above" : "substitute criteria were not all run");
  }
  std::printf("%zu criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
