// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "spdet/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "spdet/errors.hpp"
#include "spdet/ops.hpp"

namespace spdet::train {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be non-negative");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam eps must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (patience == 0) throw ConfigError("patience must be positive");
}

AdamW::AdamW(nn::ParamStore& store, const TrainConfig& config, std::set<std::string> frozen)
    : store_(store), config_(config), frozen_(std::move(frozen)) {
  config_.validate();
  for (const auto& e : store_.entries()) {
    m_.emplace_back(e.tensor.numel(), 0.0);
    v_.emplace_back(e.tensor.numel(), 0.0);
  }
}

void AdamW::step() {
  ++t_;
  const double lr = config_.learning_rate;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  auto& entries = store_.entries();
  for (std::size_t p = 0; p < entries.size(); ++p) {
    auto& e = entries[p];
    if (frozen_.contains(e.name)) continue;
    auto values = e.tensor.data();
    const std::vector<double> grad = e.tensor.grad();
    if (grad.empty()) continue;
    auto& m = m_[p];
    auto& v = v_[p];
    for (std::size_t i = 0; i < values.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * grad[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * grad[i] * grad[i];
      if (e.decay) values[i] -= lr * config_.weight_decay * values[i];
      values[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.adam_eps);
    }
  }
  store_.zero_grad();
}

double mean_loss(const model::Model& model, const std::vector<model::Sample>& samples) {
  if (samples.empty()) return 0.0;
  NoGradGuard guard;
  double total = 0.0;
  for (const model::Sample& s : samples) total += model::sample_loss(model, s).total.item();
  return total / static_cast<double>(samples.size());
}

std::set<std::string> frozen_parameters(const model::Model& model, const TrainConfig& config) {
  std::set<std::string> names;
  auto collect = [&](bfe::Modality modality) {
    const auto gates = model.enhancer.gates(modality);
    for (const auto& e : model.store.entries())
      for (const Tensor& g : gates)
        if (e.tensor.values().data() == g.values().data()) names.insert(e.name);
  };
  if (config.freeze_scp_gates) collect(bfe::Modality::kScp);
  if (config.freeze_dbp_gates) collect(bfe::Modality::kDbp);
  return names;
}

TrainResult train(model::Model& model, const std::vector<model::Sample>& train_set,
                  const std::vector<model::Sample>& val, const TrainConfig& config,
                  const std::function<void(const model::Model&, const EpochStats&)>& on_epoch) {
  config.validate();
  if (train_set.empty()) throw ConfigError("training set is empty");
  AdamW optimizer(model.store, config, frozen_parameters(model, config));
  Rng rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  auto snapshot = [&] {
    std::vector<std::vector<double>> values;
    for (const auto& e : model.store.entries()) values.emplace_back(e.tensor.values().begin(), e.tensor.values().end());
    return values;
  };
  TrainResult result;
  std::vector<std::vector<double>> best = snapshot();
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  model.store.zero_grad();

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_total = 0.0;
    for (std::size_t start = 0, batch = 0; start < order.size(); start += config.batch_size, ++batch) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t i = start; i < end; ++i) {
        const model::Sample& s = train_set[order[i]];
        Tensor loss;
        try {
          loss = model::sample_loss(model, s).total;
        } catch (const NumericError& e) {
          throw NumericError("non-finite loss in epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) +
                             ", image " + s.image_id + ": " + e.what());
        }
        if (!std::isfinite(loss.item())) {
          throw NumericError("non-finite loss in epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) +
                             ", image " + s.image_id);
        }
        epoch_total += loss.item();
        backward(scale(loss, inv));
      }
      optimizer.step();
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = epoch_total / static_cast<double>(order.size());
    stats.val_loss = val.empty() ? stats.train_loss : mean_loss(model, val);
    if (stats.val_loss < best_loss) {
      best_loss = stats.val_loss;
      best = snapshot();
      result.best_epoch = epoch;
      since_best = 0;
      stats.improved = true;
    } else {
      ++since_best;
    }
    result.history.push_back(stats);
    if (on_epoch) on_epoch(model, stats);
    if (since_best >= config.patience) {
      result.stopped_early = true;
      break;
    }
  }
  auto& entries = model.store.entries();
  for (std::size_t p = 0; p < entries.size(); ++p) std::ranges::copy(best[p], entries[p].tensor.data().begin());
  result.best_val_loss = best_loss;
  return result;
}

}  // namespace spdet::train
