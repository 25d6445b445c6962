// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "spdet/cli.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "spdet/checkpoint.hpp"
#include "spdet/config.hpp"
#include "spdet/data.hpp"
#include "spdet/errors.hpp"
#include "spdet/gradcheck.hpp"
#include "spdet/metrics.hpp"
#include "spdet/model.hpp"
#include "spdet/train.hpp"

namespace spdet::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonFlags {
  std::string config_file;
  std::vector<std::string> sets;
  std::map<std::string, std::string> named;  // config key -> flag value, filled after parsing
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_file, "Config file of key = value lines");
  cmd->add_option("--set", flags.sets, "Override one config key (key=value)");
}

/// Defaults, then the config file, then SPDET_SEED, then flags.
config::RunConfig resolve(const CommonFlags& flags, config::RunConfig cfg = {}) {
  if (!flags.config_file.empty()) cfg = config::load(flags.config_file, cfg);
  config::apply_environment(cfg);
  for (const std::string& kv : flags.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  for (const auto& [key, value] : flags.named) cfg.set(key, value);
  cfg.validate();
  return cfg;
}

void write_echo(const fs::path& dir, const config::RunConfig& cfg, const std::vector<std::string>& extra = {}) {
  fs::create_directories(dir);
  std::ofstream out(dir / kConfigEcho);
  if (!out) throw InputError("cannot write " + (dir / kConfigEcho).string());
  out << cfg.to_text();
  for (const std::string& line : extra) out << "# " << line << '\n';
}

fs::path parent_or_cwd(const fs::path& file) { return file.has_parent_path() ? file.parent_path() : fs::path("."); }

std::vector<dtpg::PromptRecord> read_prompts(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open prompts file " + path.string());
  std::vector<dtpg::PromptRecord> out;
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    if (line.empty()) continue;
    try {
      out.push_back(dtpg::prompt_record_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw ParseError(path.string() + ": " + e.what(), number, e.byte);
    }
  }
  return out;
}

/// Pairs records with prompts from `prompts_path`, or runs the prompt generator when it is empty.
std::vector<model::Sample> load_samples(const data::Dataset& ds, const std::string& prompts_path, double threshold) {
  if (prompts_path.empty()) return model::make_samples(ds, threshold);
  std::map<std::string, dtpg::PromptRecord> by_id;
  for (auto& p : read_prompts(prompts_path)) by_id.emplace(p.image_id, std::move(p));
  std::vector<model::Sample> out;
  for (const auto& rec : ds.records) {
    const auto it = by_id.find(rec.image_id);
    if (it == by_id.end()) throw InputError("no prompts for image " + rec.image_id + " in " + prompts_path);
    out.push_back(model::make_sample(rec, it->second));
  }
  return out;
}

int cmd_gen_data(const CommonFlags& flags, const std::string& out_dir, std::size_t n, std::size_t classes,
                 std::optional<std::uint64_t> seed, std::size_t image_size, std::ostream& out) {
  CommonFlags f = flags;
  if (seed) f.named["seed"] = std::to_string(*seed);
  const config::RunConfig cfg = resolve(f);
  data::GeneratorOptions options;
  options.image_size = image_size;
  const data::Dataset ds = data::generate_synthetic_dataset(n, classes, cfg.train.seed, options);
  data::save_dataset(ds, out_dir);
  write_echo(out_dir, cfg, {"command = gen-data", "n = " + std::to_string(n), "classes = " + std::to_string(classes),
                            "image_size = " + std::to_string(image_size)});
  std::vector<std::size_t> per_class(ds.class_names.size(), 0);
  std::size_t boxes = 0, negated = 0;
  for (const auto& rec : ds.records) {
    boxes += rec.gt.size();
    for (const auto& g : rec.gt) ++per_class[g.label];
    if (rec.report.find("No evidence of") != std::string::npos) ++negated;
  }
  out << "records " << ds.records.size() << ", boxes " << boxes << ", negated reports " << negated << '\n';
  for (std::size_t k = 0; k < per_class.size(); ++k) out << "  " << ds.class_names[k] << ": " << per_class[k] << '\n';
  out << "wrote " << out_dir << '\n';
  return kOk;
}

int cmd_extract_prompts(const CommonFlags& flags, const std::string& data_dir, std::string out_file,
                        std::optional<double> threshold, std::ostream& out, std::ostream& err) {
  CommonFlags f = flags;
  if (threshold) {
    if (!(*threshold >= 0.0 && *threshold <= 1.0)) throw ConfigError("--threshold must lie in [0, 1]");
    f.named["match_threshold"] = std::to_string(*threshold);
  }
  const config::RunConfig cfg = resolve(f);
  std::vector<std::string> missing;
  const data::Dataset ds = data::load_dataset(data_dir, &missing);
  for (const std::string& id : missing) err << "warning: missing report for " << id << ", pairing by class label\n";
  if (out_file.empty()) out_file = (fs::path(data_dir) / "prompts.jsonl").string();
  fs::create_directories(parent_or_cwd(out_file));
  std::ofstream file(out_file);
  if (!file) throw InputError("cannot write " + out_file);
  std::size_t pairs = 0, fallback = 0, negatives = 0;
  for (const auto& rec : ds.records) {
    std::vector<dtpg::BoxLabel> boxes;
    for (std::size_t i = 0; i < rec.gt.size(); ++i) boxes.push_back({i, ds.class_names.at(rec.gt[i].label)});
    const dtpg::PromptRecord p =
        dtpg::generate_prompts(rec.image_id, rec.report, boxes, ds.class_names, cfg.match_threshold);
    pairs += p.positive_pairs.size();
    for (const auto& pair : p.positive_pairs) fallback += pair.fallback ? 1 : 0;
    negatives += p.negative_prompts.size();
    file << dtpg::to_json(p).dump() << '\n';
  }
  write_echo(parent_or_cwd(out_file), cfg, {"command = extract-prompts", "data = " + data_dir});
  out << "images " << ds.records.size() << ", pairs " << pairs << " (fallback " << fallback << "), negative prompts "
      << negatives << '\n';
  out << "wrote " << out_file << '\n';
  return kOk;
}

int cmd_train(const CommonFlags& flags, const std::string& data_dir, std::string prompts, const std::string& val_dir,
              const std::string& out_dir, std::ostream& out, std::ostream& err) {
  const config::RunConfig cfg = resolve(flags);
  const data::Dataset ds = data::load_dataset(data_dir);
  if (prompts.empty()) prompts = (fs::path(data_dir) / "prompts.jsonl").string();
  if (!fs::exists(prompts)) throw InputError("prompts file " + prompts + " not found; run extract-prompts first");
  const std::vector<model::Sample> train_set = load_samples(ds, prompts, cfg.match_threshold);
  std::vector<model::Sample> val;
  if (!val_dir.empty()) {
    const data::Dataset vds = data::load_dataset(val_dir);
    const fs::path vp = fs::path(val_dir) / "prompts.jsonl";
    val = load_samples(vds, fs::exists(vp) ? vp.string() : std::string(), cfg.match_threshold);
  }
  fs::create_directories(out_dir);
  write_echo(out_dir, cfg, {"command = train", "data = " + data_dir});

  model::Model m(cfg.model, model::build_vocabulary(train_set, ds.class_names, cfg.model.max_length), ds.class_names,
                 cfg.train.seed);
  if (cfg.train.freeze_scp_gates) m.set_gates(bfe::Modality::kScp, 0.0);
  if (cfg.train.freeze_dbp_gates) m.set_gates(bfe::Modality::kDbp, 0.0);
  const fs::path ckpt = fs::path(out_dir) / "model.ckpt";
  std::ofstream history(fs::path(out_dir) / "history.jsonl");
  out << "parameters " << m.store.scalar_count() << ", train " << train_set.size() << ", val " << val.size() << '\n';
  try {
    const train::TrainResult result =
        train::train(m, train_set, val, cfg.train, [&](const model::Model& current, const train::EpochStats& s) {
          history << json{{"epoch", s.epoch}, {"train_loss", s.train_loss}, {"val_loss", s.val_loss}}.dump() << '\n';
          history.flush();
          out << "epoch " << s.epoch << " train_loss " << s.train_loss << " val_loss " << s.val_loss
              << (s.improved ? " *" : "") << '\n';
          if (s.improved) checkpoint::save(ckpt, current, {{"epoch", s.epoch}, {"val_loss", s.val_loss}});
        });
    out << "best epoch " << result.best_epoch << " val_loss " << result.best_val_loss
        << (result.stopped_early ? " (early stop)" : "") << '\n';
  } catch (const NumericError& e) {
    std::ofstream dump(fs::path(out_dir) / "nan_dump.txt");
    dump << e.what() << '\n';
    err << "error: " << e.what() << "\n  diagnostic written to " << (fs::path(out_dir) / "nan_dump.txt").string()
        << '\n';
    return kNumeric;
  }
  out << "wrote " << ckpt.string() << '\n';
  return kOk;
}

int cmd_eval(const CommonFlags& flags, const std::string& ckpt, const std::string& data_dir, const std::string& prompts,
             const std::string& out_file, const std::string& detections_file, bool ablate_scp, bool ablate_dbp,
             std::ostream& out) {
  checkpoint::Loaded loaded = checkpoint::load(ckpt);
  model::Model& m = *loaded.model;
  config::RunConfig base;
  base.model = m.config;
  const config::RunConfig cfg = resolve(flags, base);
  if (!(cfg.model == m.config)) {
    throw VersionError("checkpoint " + ckpt + " was built with " + m.config.to_json().dump() + ", config asks for " +
                       cfg.model.to_json().dump());
  }
  if (ablate_scp) m.set_gates(bfe::Modality::kScp, 0.0);
  if (ablate_dbp) m.set_gates(bfe::Modality::kDbp, 0.0);
  const data::Dataset ds = data::load_dataset(data_dir);
  if (ds.class_names != m.class_names) throw VersionError("dataset classes differ from the checkpoint's");
  const std::vector<model::Sample> samples = load_samples(ds, prompts, cfg.match_threshold);

  detect::DecodeOptions options = model::default_decode_options(m);
  options.score_threshold = cfg.score_threshold;
  options.iou_threshold = cfg.iou_threshold;
  std::vector<metrics::ImageEval> images;
  std::ofstream dets;
  if (!detections_file.empty()) {
    fs::create_directories(parent_or_cwd(detections_file));
    dets.open(detections_file);
  }
  for (const model::Sample& s : samples) {
    images.push_back({model::detect_objects(m, s, options), s.gt});
    if (dets.is_open())
      for (const auto& d : images.back().detections) dets << detect::detection_to_json(s.image_id, d, m.class_names).dump() << '\n';
  }
  const metrics::EvalReport report = metrics::evaluate(images, m.class_names);
  json j = report.to_json();
  j["images"] = samples.size();
  j["ablate_scp"] = ablate_scp;
  j["ablate_dbp"] = ablate_dbp;
  if (!out_file.empty()) {
    fs::create_directories(parent_or_cwd(out_file));
    std::ofstream(out_file) << j.dump(2) << '\n';
    write_echo(parent_or_cwd(out_file), cfg, {"command = eval", "checkpoint = " + ckpt, "data = " + data_dir});
  }
  out << report.table_text();
  if (!report.has_ground_truth) out << "no ground truth in " << data_dir << '\n';
  if (out_file.empty()) out << j.dump(2) << '\n';
  return kOk;
}

int cmd_gradcheck(const gradcheck::Options& options, std::ostream& out) {
  const gradcheck::Report r = gradcheck::run(options);
  std::size_t scalars = 0;
  for (const auto& p : r.params) scalars += p.size;
  out << (r.passed ? "PASS" : "FAIL") << ": " << r.params.size() << " parameters, " << scalars
      << " scalars, tol " << r.tol << ", " << r.seconds << " s\n";
  const std::size_t shown = r.passed ? std::min<std::size_t>(5, r.params.size()) : r.params.size();
  for (std::size_t i = 0; i < shown; ++i) {
    if (!r.passed && r.params[i].rel_error < r.tol) break;
    out << "  " << r.params[i].name << " rel_error " << r.params[i].rel_error << '\n';
  }
  return r.passed ? kOk : kCheckFailed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-prompted lesion detection toolkit", "spdet"};
  app.require_subcommand(1);

  CommonFlags gen_flags, ext_flags, train_flags, eval_flags;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  std::string gen_out;
  std::size_t gen_n = 200, gen_classes = 4, gen_size = data::kDefaultImageSize;
  std::optional<std::uint64_t> gen_seed;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--n", gen_n, "Number of images");
  gen->add_option("--classes", gen_classes, "Number of classes");
  gen->add_option("--seed", gen_seed, "Seed");
  gen->add_option("--image-size", gen_size, "Image side in pixels");
  add_common(gen, gen_flags);

  auto* ext = app.add_subcommand("extract-prompts", "Run the prompt generator over a dataset");
  std::string ext_data, ext_out;
  std::optional<double> ext_threshold;
  ext->add_option("--data", ext_data, "Dataset directory")->required();
  ext->add_option("--out", ext_out, "Output JSON lines (default <data>/prompts.jsonl)");
  ext->add_option("--threshold", ext_threshold, "Semantic match threshold");
  add_common(ext, ext_flags);

  auto* tr = app.add_subcommand("train", "Train a model");
  std::string tr_data, tr_prompts, tr_val, tr_out;
  std::optional<double> tr_lr;
  std::optional<std::size_t> tr_epochs, tr_batch, tr_depth, tr_patience;
  std::optional<std::uint64_t> tr_seed;
  bool tr_freeze_scp = false, tr_freeze_dbp = false;
  tr->add_option("--data", tr_data, "Training dataset directory")->required();
  tr->add_option("--prompts", tr_prompts, "Prompts file (default <data>/prompts.jsonl)");
  tr->add_option("--val-data", tr_val, "Validation dataset directory");
  tr->add_option("--out", tr_out, "Output directory")->required();
  tr->add_option("--lr", tr_lr, "Learning rate");
  tr->add_option("--epochs", tr_epochs, "Maximum epochs");
  tr->add_option("--batch-size", tr_batch, "Batch size");
  tr->add_option("--depth", tr_depth, "Fusion depth");
  tr->add_option("--patience", tr_patience, "Early-stop patience");
  tr->add_option("--seed", tr_seed, "Seed");
  tr->add_flag("--freeze-scp-gates", tr_freeze_scp, "Hold the SCP gates at zero");
  tr->add_flag("--freeze-dbp-gates", tr_freeze_dbp, "Hold the DBP gates at zero");
  add_common(tr, train_flags);

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string ev_ckpt, ev_data, ev_prompts, ev_out, ev_dets;
  bool ablate_scp = false, ablate_dbp = false;
  ev->add_option("--checkpoint", ev_ckpt, "Checkpoint file")->required();
  ev->add_option("--data", ev_data, "Dataset directory")->required();
  ev->add_option("--prompts", ev_prompts, "Prompts file (default: generated from the reports)");
  ev->add_option("--out", ev_out, "Report JSON path");
  ev->add_option("--detections", ev_dets, "Per-detection JSON lines path");
  ev->add_flag("--ablate-scp", ablate_scp, "Zero the SCP gates");
  ev->add_flag("--ablate-dbp", ablate_dbp, "Zero the DBP gates");
  add_common(ev, eval_flags);

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every parameter");
  gradcheck::Options gc_options;
  std::string gc_inject;
  gc->add_option("--eps", gc_options.eps, "Finite-difference step");
  gc->add_option("--tol", gc_options.tol, "Relative error tolerance");
  gc->add_option("--seed", gc_options.seed, "Seed");
  gc->add_option("--inject-wrong-sign", gc_inject, "Flip the analytic gradient of one parameter");

  std::vector<std::string> storage{"spdet"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_flags, gen_out, gen_n, gen_classes, gen_seed, gen_size, out);
    if (ext->parsed()) return cmd_extract_prompts(ext_flags, ext_data, ext_out, ext_threshold, out, err);
    if (tr->parsed()) {
      if (tr_lr) train_flags.named["learning_rate"] = std::to_string(*tr_lr);
      if (tr_epochs) train_flags.named["epochs"] = std::to_string(*tr_epochs);
      if (tr_batch) train_flags.named["batch_size"] = std::to_string(*tr_batch);
      if (tr_depth) train_flags.named["depth"] = std::to_string(*tr_depth);
      if (tr_patience) train_flags.named["patience"] = std::to_string(*tr_patience);
      if (tr_seed) train_flags.named["seed"] = std::to_string(*tr_seed);
      if (tr_freeze_scp) train_flags.named["freeze_scp_gates"] = "true";
      if (tr_freeze_dbp) train_flags.named["freeze_dbp_gates"] = "true";
      return cmd_train(train_flags, tr_data, tr_prompts, tr_val, tr_out, out, err);
    }
    if (ev->parsed()) {
      return cmd_eval(eval_flags, ev_ckpt, ev_data, ev_prompts, ev_out, ev_dets, ablate_scp, ablate_dbp, out);
    }
    if (!gc_inject.empty()) gc_options.inject_wrong_sign = gc_inject;
    return cmd_gradcheck(gc_options, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return kNumeric;
  } catch (const VersionError& e) {
    err << "error: " << e.what() << '\n';
    return kVersion;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kInput;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kInput;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kInput;
  }
}

}  // namespace spdet::cli
