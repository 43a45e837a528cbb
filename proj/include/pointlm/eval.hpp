#pragma once
// Evaluation over a labelled split: greedy decoding, text-overlap metrics,
// encoder similarity, and a class accuracy that asks whether the reference's
// class word shows up in the generation. Also the resolution sweep and a
// latency harness, both built on the same inference path.

#include <string>
#include <vector>

#include "pointlm/metrics.hpp"
#include "pointlm/training.hpp"

namespace pointlm {

// The word a generation must contain to count as correct: the reference's
// shape word when it has one, its color word otherwise, "" when neither.
std::string eval_label_word(const std::vector<std::string>& ref_words);

struct EvalSampleResult {
  std::string task;
  std::string instruction;
  std::string reference;
  std::string generated;
  std::string label_word;
  bool correct = false;
  double bleu1 = 0.0;
  double rouge = 0.0;
  double similarity = 0.0;
};

struct EvalReport {
  std::vector<EvalSampleResult> samples;
  double mean_bleu1 = 0.0;
  double corpus_bleu1 = 0.0;
  double mean_rouge = 0.0;
  double mean_similarity = 0.0;
  double class_accuracy = 0.0;  // over samples with a label word
  int n_labelled = 0;
  double mean_generated_words = 0.0;
};

struct EvalOptions {
  int max_new_tokens = 12;
  int fps_start = 0;  // fixed start keeps evaluation deterministic
};

EvalReport evaluate(TrainState& st, const std::vector<TrainSample>& data,
                    const EvalOptions& opts = {});

struct SweepPoint {
  int requested = 0;  // points per cloud asked for
  int used = 0;       // after clamping up to the tokenizer group count
  double median_tokenize_ms = 0.0;
  double clouds_per_second = 0.0;
  double class_accuracy = 0.0;
};

// Regenerates `count` objects of `split` at each resolution (same objects,
// different surface sampling density) and measures tokenizer latency plus
// greedy accuracy. A resolution below the group count is clamped; the caller
// decides how loudly to warn about it.
std::vector<SweepPoint> resolution_sweep(TrainState& st,
                                         const CorpusConfig& data_cfg,
                                         const std::string& split, int count,
                                         const std::vector<int>& resolutions,
                                         const EvalOptions& opts = {});

struct BenchResult {
  int warmup = 0;
  int iters = 0;
  double median_tokenize_ms = 0.0;
  double median_generate_ms = 0.0;
  double generated_tokens_per_second = 0.0;
};

BenchResult bench_latency(TrainState& st, const TrainSample& sample,
                          int warmup, int iters, int max_new_tokens);

// Mean alpha-blended reward of generated vs reference across a report — the
// exact score the preference stage optimizes, so checkpoints from different
// stages compare on one scale.
double mean_composite_reward(const EvalReport& rep, const RewardConfig& rc);

}  // namespace pointlm
