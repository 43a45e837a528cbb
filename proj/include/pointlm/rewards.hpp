#pragma once
// Scoring machinery for preference optimization. A response earns a composite
// of two signals:
//   semantic  — cosine between fixed bag-of-embeddings sentence vectors of
//               candidate and reference (the encoder never trains, so scores
//               stay comparable across stages and runs)
//   length    — Gaussian falloff in the word-count gap to the reference
// combined as alpha * semantic + (1 - alpha) * length. Groups of scores are
// standardized into advantages (population statistics, epsilon-stabilized).

#include <map>
#include <string>
#include <vector>

#include "pointlm/common.hpp"

namespace pointlm {

class SentenceEncoder {
 public:
  static constexpr std::uint64_t kDefaultSeed = 0x9d2c5680u;
  static constexpr int kDefaultDim = 64;

  explicit SentenceEncoder(std::uint64_t seed = kDefaultSeed,
                           int dim = kDefaultDim);

  int dim() const { return dim_; }

  // L2-normalized mean of per-word vectors; all-zero for empty text.
  Vec<double> encode(const std::string& text) const;
  Vec<double> encode_words(const std::vector<std::string>& words) const;

  // Cosine similarity of encodings; 0 when either side is empty.
  double similarity(const std::string& a, const std::string& b) const;

 private:
  const Vec<double>& word_vector(const std::string& word) const;

  std::uint64_t seed_;
  int dim_;
  mutable std::map<std::string, Vec<double>> cache_;
};

struct RewardConfig {
  double alpha = 0.95;   // weight of the semantic term
  double sigma = 10.0;   // width of the length falloff, in words
  int group_size = 8;    // responses scored together per prompt
  double adv_eps = 1e-9; // variance floor inside the standardization sqrt

  void validate() const {
    require(alpha >= 0.0 && alpha <= 1.0, "reward config: alpha outside [0,1]");
    require(sigma > 0.0, "reward config: sigma must be positive");
    require(group_size >= 2, "reward config: group_size must be >= 2");
    require(adv_eps > 0.0, "reward config: adv_eps must be positive");
  }
};

// exp(-(len - ref_len)^2 / (2 sigma^2)); exactly 1 at the reference length.
double length_score(int cand_len, int ref_len, double sigma);

double semantic_score(const SentenceEncoder& enc, const std::string& cand,
                      const std::string& ref);

double composite_reward(const SentenceEncoder& enc, const RewardConfig& cfg,
                        const std::string& cand, const std::string& ref);

// (s - mean) / sqrt(pop_var + eps). Identical scores give exactly zero.
std::vector<double> advantages(const std::vector<double>& scores, double eps);

// Everything scored for one group of candidate responses to a shared
// reference; this is the unit the training log records per prompt.
struct GroupScores {
  std::vector<double> semantic;
  std::vector<double> length;
  std::vector<double> composite;
  std::vector<double> advantage;
  double mean_composite = 0.0;
};

GroupScores score_group(const SentenceEncoder& enc, const RewardConfig& cfg,
                        const std::vector<std::string>& candidates,
                        const std::string& reference);

}  // namespace pointlm
