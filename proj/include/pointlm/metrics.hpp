#pragma once
// Text-overlap metrics for generated responses: unigram-precision BLEU with
// brevity penalty, LCS-based ROUGE with a recall-weighted F-score, and a
// keyword accuracy that asks only whether the expected class words appear.
// All operate on the tokenized word lists produced by split_words.

#include <string>
#include <vector>

#include "pointlm/common.hpp"

namespace pointlm {

// Length of the longest common subsequence of two word lists.
int lcs_length(const std::vector<std::string>& a,
               const std::vector<std::string>& b);

// Clipped unigram precision times brevity penalty. Empty candidate scores 0.
double sentence_bleu1(const std::vector<std::string>& cand,
                      const std::vector<std::string>& ref);

// Corpus-level variant: clipped matches and lengths are pooled over all pairs
// before the ratio and the brevity penalty are taken.
double corpus_bleu1(const std::vector<std::vector<std::string>>& cands,
                    const std::vector<std::vector<std::string>>& refs);

// LCS F-score: P = lcs/|cand|, R = lcs/|ref|,
// F = (1 + beta^2) P R / (R + beta^2 P); 0 when the LCS is empty.
double rouge_l(const std::vector<std::string>& cand,
               const std::vector<std::string>& ref, double beta = 1.2);

// Fraction of examples whose generated words contain every expected word.
double keyword_accuracy(
    const std::vector<std::vector<std::string>>& generated,
    const std::vector<std::vector<std::string>>& expected_words);

}  // namespace pointlm
