// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "spdet/model.hpp"
#include "spdet/nn.hpp"

namespace spdet::train {

struct TrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 8;
  std::size_t epochs = 40;
  std::size_t patience = 20;
  std::uint64_t seed = 7;
  bool freeze_scp_gates = false;
  bool freeze_dbp_gates = false;

  void validate() const;
};

/// Adam with decoupled weight decay on the entries flagged for decay.
class AdamW {
 public:
  AdamW(nn::ParamStore& store, const TrainConfig& config, std::set<std::string> frozen = {});
  /// Applies one update from the accumulated gradients, then clears them.
  void step();
  std::size_t steps() const { return t_; }

 private:
  nn::ParamStore& store_;
  TrainConfig config_;
  std::set<std::string> frozen_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::size_t t_ = 0;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  bool improved = false;
};

struct TrainResult {
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  bool stopped_early = false;
};

/// Mean loss over samples without recording a graph.
double mean_loss(const model::Model& model, const std::vector<model::Sample>& samples);

/// Shuffled mini-batches, batch-mean loss, early stopping on validation loss
/// (training loss when `val` is empty). The best weights are restored at the end.
/// `on_epoch` runs after every epoch. Throws NumericError naming the epoch and
/// batch when a loss turns non-finite.
TrainResult train(model::Model& model, const std::vector<model::Sample>& train_set,
                  const std::vector<model::Sample>& val, const TrainConfig& config,
                  const std::function<void(const model::Model&, const EpochStats&)>& on_epoch = {});

/// Names of every gate tensor to hold fixed under the config's freeze flags.
std::set<std::string> frozen_parameters(const model::Model& model, const TrainConfig& config);

}  // namespace spdet::train
