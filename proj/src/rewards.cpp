#include "pointlm/rewards.hpp"

#include <cmath>

#include "pointlm/rng.hpp"
#include "pointlm/text.hpp"

namespace pointlm {

SentenceEncoder::SentenceEncoder(std::uint64_t seed, int dim)
    : seed_(seed), dim_(dim) {
  require(dim >= 1, "sentence encoder: dim must be >= 1");
}

const Vec<double>& SentenceEncoder::word_vector(const std::string& word) const {
  auto it = cache_.find(word);
  if (it != cache_.end()) return it->second;
  // Each word gets its own stream so vectors do not depend on lookup order.
  Rng rng(derive_seed(seed_, "word/" + word));
  Vec<double> v(dim_);
  for (int i = 0; i < dim_; ++i) v[i] = rng.normal();
  return cache_.emplace(word, std::move(v)).first->second;
}

Vec<double> SentenceEncoder::encode_words(
    const std::vector<std::string>& words) const {
  Vec<double> sum = Vec<double>::Zero(dim_);
  if (words.empty()) return sum;
  for (const auto& w : words) sum += word_vector(w);
  sum /= static_cast<double>(words.size());
  const double n = sum.norm();
  if (n > 0.0) sum /= n;
  return sum;
}

Vec<double> SentenceEncoder::encode(const std::string& text) const {
  return encode_words(split_words(text));
}

double SentenceEncoder::similarity(const std::string& a,
                                   const std::string& b) const {
  const Vec<double> va = encode(a);
  const Vec<double> vb = encode(b);
  // Encodings are unit-length or zero, so the dot product is the cosine.
  return va.dot(vb);
}

double length_score(int cand_len, int ref_len, double sigma) {
  require(sigma > 0.0, "length_score: sigma must be positive");
  require(cand_len >= 0 && ref_len >= 0,
          "length_score: lengths must be non-negative");
  const double gap = static_cast<double>(cand_len - ref_len);
  return std::exp(-(gap * gap) / (2.0 * sigma * sigma));
}

double semantic_score(const SentenceEncoder& enc, const std::string& cand,
                      const std::string& ref) {
  return enc.similarity(cand, ref);
}

double composite_reward(const SentenceEncoder& enc, const RewardConfig& cfg,
                        const std::string& cand, const std::string& ref) {
  cfg.validate();
  const double s_sem = semantic_score(enc, cand, ref);
  const double s_len =
      length_score(static_cast<int>(split_words(cand).size()),
                   static_cast<int>(split_words(ref).size()), cfg.sigma);
  return cfg.alpha * s_sem + (1.0 - cfg.alpha) * s_len;
}

GroupScores score_group(const SentenceEncoder& enc, const RewardConfig& cfg,
                        const std::vector<std::string>& candidates,
                        const std::string& reference) {
  cfg.validate();
  require(candidates.size() >= 2, "score_group: need at least 2 candidates");
  require(!split_words(reference).empty(),
          "score_group: reference has no words");
  GroupScores g;
  const int ref_len = static_cast<int>(split_words(reference).size());
  for (const auto& cand : candidates) {
    const double sem = semantic_score(enc, cand, reference);
    const double len = length_score(static_cast<int>(split_words(cand).size()),
                                    ref_len, cfg.sigma);
    g.semantic.push_back(sem);
    g.length.push_back(len);
    g.composite.push_back(cfg.alpha * sem + (1.0 - cfg.alpha) * len);
  }
  g.advantage = advantages(g.composite, cfg.adv_eps);
  for (double s : g.composite) g.mean_composite += s;
  g.mean_composite /= static_cast<double>(g.composite.size());
  return g;
}

std::vector<double> advantages(const std::vector<double>& scores, double eps) {
  require(!scores.empty(), "advantages: empty score group");
  require(eps > 0.0, "advantages: eps must be positive");
  double mean = 0.0;
  for (double s : scores) {
    require(std::isfinite(s), "advantages: non-finite score");
    mean += s;
  }
  mean /= static_cast<double>(scores.size());
  double var = 0.0;
  for (double s : scores) var += (s - mean) * (s - mean);
  var /= static_cast<double>(scores.size());
  const double denom = std::sqrt(var + eps);
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    out[i] = (scores[i] - mean) / denom;
  return out;
}

}  // namespace pointlm
