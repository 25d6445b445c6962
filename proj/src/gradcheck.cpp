// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "spdet/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "spdet/errors.hpp"

namespace spdet::gradcheck {

model::ModelConfig tiny_config() {
  model::ModelConfig c;
  c.image_size = 16;
  c.d_low = 6;
  c.d_high = 8;
  c.d_shared = 8;
  c.d_scp = 8;
  c.d_word = 6;
  c.d_embed = 8;
  c.heads = 2;
  c.depth = 2;
  c.max_length = 24;
  return c;
}

Report run(const Options& options) {
  if (!(options.eps > 0.0) || !(options.tol > 0.0)) throw ConfigError("gradcheck eps and tol must be positive");
  const auto start = std::chrono::steady_clock::now();
  data::GeneratorOptions gen;
  gen.image_size = 16;
  gen.negation_probability = 1.0;
  const data::Dataset ds = data::generate_synthetic_dataset(1, 2, options.seed, gen);
  const std::vector<model::Sample> samples = model::make_samples(ds);
  model::Model m(tiny_config(), model::build_vocabulary(samples, ds.class_names, tiny_config().max_length),
                 ds.class_names, options.seed);
  m.set_gates(bfe::Modality::kScp, options.gate_value);
  m.set_gates(bfe::Modality::kDbp, options.gate_value);
  const model::Sample& sample = samples.front();

  m.store.zero_grad();
  backward(model::sample_loss(m, sample).total);

  Report report;
  report.tol = options.tol;
  for (auto& entry : m.store.entries()) {
    std::vector<double> analytic = entry.tensor.grad();
    analytic.resize(entry.tensor.numel(), 0.0);
    if (options.inject_wrong_sign && *options.inject_wrong_sign == entry.name) {
      for (double& g : analytic) g = -g;
    }
    std::vector<double> numeric(analytic.size());
    {
      NoGradGuard guard;
      auto values = entry.tensor.data();
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double saved = values[i];
        values[i] = saved + options.eps;
        const double up = model::sample_loss(m, sample).total.item();
        values[i] = saved - options.eps;
        const double down = model::sample_loss(m, sample).total.item();
        values[i] = saved;
        numeric[i] = (up - down) / (2.0 * options.eps);
      }
    }
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
      na += analytic[i] * analytic[i];
      nn += numeric[i] * numeric[i];
    }
    const double scale = std::sqrt(std::max(na, nn));
    report.params.push_back({entry.name, analytic.size(), scale < 1e-12 ? 0.0 : std::sqrt(diff) / scale});
  }
  std::ranges::stable_sort(report.params, [](const ParamResult& a, const ParamResult& b) { return a.rel_error > b.rel_error; });
  report.passed = std::ranges::all_of(report.params, [&](const ParamResult& p) { return p.rel_error < options.tol; });
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace spdet::gradcheck
