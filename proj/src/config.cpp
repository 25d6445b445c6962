// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "spdet/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "spdet/errors.hpp"

namespace spdet::config {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::size_t to_count(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

double to_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used == v.size()) return out;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a number, got '" + v + "'");
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::string real_text(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

#define SPDET_COUNT(name, member)                                                                       \
  {                                                                                                     \
    name, {                                                                                             \
      [](RunConfig& c, const std::string& k, const std::string& v) { c.member = to_count(k, v); },     \
          [](const RunConfig& c) { return std::to_string(c.member); }                                  \
    }                                                                                                   \
  }
#define SPDET_REAL(name, member)                                                                        \
  {                                                                                                     \
    name, {                                                                                             \
      [](RunConfig& c, const std::string& k, const std::string& v) { c.member = to_real(k, v); },      \
          [](const RunConfig& c) { return real_text(c.member); }                                       \
    }                                                                                                   \
  }
#define SPDET_BOOL(name, member)                                                                        \
  {                                                                                                     \
    name, {                                                                                             \
      [](RunConfig& c, const std::string& k, const std::string& v) { c.member = to_bool(k, v); },      \
          [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }                  \
    }                                                                                                   \
  }

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      SPDET_COUNT("image_size", model.image_size),
      SPDET_COUNT("d_low", model.d_low),
      SPDET_COUNT("d_high", model.d_high),
      SPDET_COUNT("d_shared", model.d_shared),
      SPDET_COUNT("d_scp", model.d_scp),
      SPDET_COUNT("d_word", model.d_word),
      SPDET_COUNT("d_embed", model.d_embed),
      SPDET_COUNT("heads", model.heads),
      SPDET_COUNT("depth", model.depth),
      SPDET_COUNT("max_bin", model.max_bin),
      SPDET_COUNT("max_length", model.max_length),
      SPDET_REAL("temperature", model.temperature),
      SPDET_BOOL("background_prompt", model.background_prompt),
      SPDET_REAL("learning_rate", train.learning_rate),
      SPDET_REAL("weight_decay", train.weight_decay),
      SPDET_REAL("beta1", train.beta1),
      SPDET_REAL("beta2", train.beta2),
      SPDET_COUNT("batch_size", train.batch_size),
      SPDET_COUNT("epochs", train.epochs),
      SPDET_COUNT("patience", train.patience),
      SPDET_COUNT("seed", train.seed),
      SPDET_BOOL("freeze_scp_gates", train.freeze_scp_gates),
      SPDET_BOOL("freeze_dbp_gates", train.freeze_dbp_gates),
      SPDET_REAL("match_threshold", match_threshold),
      SPDET_REAL("score_threshold", score_threshold),
      SPDET_REAL("iou_threshold", iou_threshold),
  };
  return table;
}

#undef SPDET_COUNT
#undef SPDET_REAL
#undef SPDET_BOOL

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(*this, key, value);
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (!(match_threshold >= 0.0 && match_threshold <= 1.0)) throw ConfigError("match_threshold must lie in [0, 1]");
  if (!(score_threshold > 0.0 && score_threshold < 1.0)) throw ConfigError("score_threshold must lie in (0, 1)");
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) throw ConfigError("iou_threshold must lie in (0, 1)");
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(*this) + "\n";
  return out;
}

RunConfig parse(std::string_view text, RunConfig base) {
  std::istringstream in{std::string(text)};
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(number) + ": expected 'key = value'");
    try {
      base.set(trim(std::string_view(body).substr(0, eq)), trim(std::string_view(body).substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(number) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), std::move(base));
}

void apply_environment(RunConfig& config) {
  if (const char* seed = std::getenv(kSeedEnv); seed && *seed) config.set("seed", seed);
}

}  // namespace spdet::config
