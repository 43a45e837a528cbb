#include "pointlm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace pointlm {

int lcs_length(const std::vector<std::string>& a,
               const std::vector<std::string>& b) {
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  if (n == 0 || m == 0) return 0;
  // Two rolling rows keep this O(min) memory; sentences are short anyway.
  std::vector<int> prev(m + 1, 0), cur(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      if (a[i - 1] == b[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

namespace {

// Sum over distinct candidate words of min(count in cand, count in ref).
long long clipped_matches(const std::vector<std::string>& cand,
                          const std::vector<std::string>& ref) {
  std::map<std::string, long long> ref_counts;
  for (const auto& w : ref) ++ref_counts[w];
  std::map<std::string, long long> cand_counts;
  for (const auto& w : cand) ++cand_counts[w];
  long long matches = 0;
  for (const auto& [word, count] : cand_counts) {
    auto it = ref_counts.find(word);
    if (it != ref_counts.end()) matches += std::min(count, it->second);
  }
  return matches;
}

double brevity_penalty(long long cand_len, long long ref_len) {
  if (cand_len >= ref_len) return 1.0;
  return std::exp(1.0 - static_cast<double>(ref_len) /
                            static_cast<double>(cand_len));
}

}  // namespace

double sentence_bleu1(const std::vector<std::string>& cand,
                      const std::vector<std::string>& ref) {
  if (cand.empty() || ref.empty()) return 0.0;
  const double precision =
      static_cast<double>(clipped_matches(cand, ref)) /
      static_cast<double>(cand.size());
  return brevity_penalty(static_cast<long long>(cand.size()),
                         static_cast<long long>(ref.size())) *
         precision;
}

double corpus_bleu1(const std::vector<std::vector<std::string>>& cands,
                    const std::vector<std::vector<std::string>>& refs) {
  require(cands.size() == refs.size(),
          "corpus_bleu1: candidate/reference count mismatch");
  require(!cands.empty(), "corpus_bleu1: empty corpus");
  long long matches = 0, cand_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    matches += clipped_matches(cands[i], refs[i]);
    cand_len += static_cast<long long>(cands[i].size());
    ref_len += static_cast<long long>(refs[i].size());
  }
  if (cand_len == 0) return 0.0;
  const double precision =
      static_cast<double>(matches) / static_cast<double>(cand_len);
  return brevity_penalty(cand_len, ref_len) * precision;
}

double rouge_l(const std::vector<std::string>& cand,
               const std::vector<std::string>& ref, double beta) {
  require(beta > 0.0, "rouge_l: beta must be positive");
  if (cand.empty() || ref.empty()) return 0.0;
  const int lcs = lcs_length(cand, ref);
  if (lcs == 0) return 0.0;
  const double p = static_cast<double>(lcs) / static_cast<double>(cand.size());
  const double r = static_cast<double>(lcs) / static_cast<double>(ref.size());
  const double b2 = beta * beta;
  return (1.0 + b2) * p * r / (r + b2 * p);
}

double keyword_accuracy(
    const std::vector<std::vector<std::string>>& generated,
    const std::vector<std::vector<std::string>>& expected_words) {
  require(generated.size() == expected_words.size(),
          "keyword_accuracy: generated/expected count mismatch");
  require(!generated.empty(), "keyword_accuracy: empty evaluation set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < generated.size(); ++i) {
    bool all = true;
    for (const auto& w : expected_words[i]) {
      if (std::find(generated[i].begin(), generated[i].end(), w) ==
          generated[i].end()) {
        all = false;
        break;
      }
    }
    if (all && !expected_words[i].empty()) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(generated.size());
}

}  // namespace pointlm
