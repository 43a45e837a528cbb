#pragma once
// Run configuration: one JSON document drives data generation, all three
// training stages, and evaluation. Every key has a default, unknown keys are
// rejected with their full path, and the parsed struct can be re-emitted as a
// canonical snapshot that reproduces the run exactly.

#include <string>

#include "pointlm/data.hpp"
#include "pointlm/model.hpp"
#include "pointlm/rewards.hpp"

namespace pointlm {

struct StageParams {
  int epochs = 1;
  int batch_size = 1;
  double base_lr = 1e-3;
  double warmup_ratio = 0.03;
  // stage 1: how many leading LM layers train alongside the tokenizer
  int trainable_layers = 4;
  // stage 3: rollout sampling
  double temperature = 1.0;
  int max_new_tokens = 12;

  // uses_freeze: whether trainable_layers is meaningful for this stage
  void validate(const std::string& label, int n_layers,
                bool uses_freeze) const;
};

struct RunConfig {
  std::uint64_t seed = 7;
  ModelConfig model;
  CorpusConfig data;
  RewardConfig reward;
  StageParams stage1;
  StageParams stage2;
  StageParams stage3;

  static RunConfig defaults();
  void validate() const;
};

// Parse from JSON text; `origin` names the source in error messages. Unknown
// or ill-typed keys throw config_error with a JSON-pointer-style path.
RunConfig parse_run_config(const std::string& json_text,
                           const std::string& origin);
RunConfig load_run_config(const std::string& path);

// Canonical full-document snapshot (every key explicit, keys sorted).
// parse_run_config(run_config_snapshot(c)) reproduces c.
std::string run_config_snapshot(const RunConfig& cfg);

}  // namespace pointlm
