#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "pointlm/metrics.hpp"
#include "pointlm/rng.hpp"
#include "pointlm/text.hpp"

using namespace pointlm;

namespace {
std::vector<std::string> w(const std::string& s) { return split_words(s); }
}  // namespace

TEST_CASE("lcs matches the exhaustive oracle on short sequences") {
  Rng rng(99);
  const std::vector<std::string> pool = {"a", "b", "c", "d"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> x, y;
    const int nx = int(rng.uniform_index(9));
    const int ny = int(rng.uniform_index(9));
    for (int i = 0; i < nx; ++i)
      x.push_back(pool[rng.uniform_index(pool.size())]);
    for (int i = 0; i < ny; ++i)
      y.push_back(pool[rng.uniform_index(pool.size())]);
    CHECK(lcs_length(x, y) == oracles::lcs_reference(x, y));
  }
}

TEST_CASE("lcs hand cases") {
  CHECK(lcs_length(w("a red cube"), w("a large red cube")) == 3);
  CHECK(lcs_length(w("x y z"), w("p q r")) == 0);
  CHECK(lcs_length({}, w("a b")) == 0);
  CHECK(lcs_length(w("a b c d"), w("a b c d")) == 4);
}

TEST_CASE("bleu1 is 1 on identical sentences") {
  CHECK(sentence_bleu1(w("this is a red sphere"), w("this is a red sphere")) ==
        1.0);
}

TEST_CASE("bleu1 is 0 on disjoint vocabularies") {
  CHECK(sentence_bleu1(w("alpha beta"), w("gamma delta")) == 0.0);
  CHECK(sentence_bleu1({}, w("gamma")) == 0.0);
}

TEST_CASE("bleu1 hand example: two of three unigrams match") {
  // same length, so no brevity penalty
  CHECK(sentence_bleu1(w("the red sphere"), w("a red sphere")) ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("bleu1 clips repeated unigrams") {
  // "the" appears once in the reference, so only one of three counts
  CHECK(sentence_bleu1(w("the the the"), w("the cat")) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("bleu1 applies the brevity penalty to short candidates") {
  // precision 1, |cand|=2, |ref|=3 -> exp(1 - 3/2)
  CHECK(sentence_bleu1(w("a red"), w("a red cube")) ==
        doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  // long candidates are not rewarded beyond precision
  CHECK(sentence_bleu1(w("a red cube cube cube"), w("a red cube")) ==
        doctest::Approx(3.0 / 5.0).epsilon(1e-12));
}

TEST_CASE("bleu1 stays in [0,1] on random word lists") {
  Rng rng(7);
  const std::vector<std::string> pool = {"a", "red", "blue", "cube", "sphere",
                                         "small"};
  for (int t = 0; t < 100; ++t) {
    std::vector<std::string> c, r;
    const int nc = int(rng.uniform_index(6));
    const int nr = 1 + int(rng.uniform_index(6));
    for (int i = 0; i < nc; ++i) c.push_back(pool[rng.uniform_index(6)]);
    for (int i = 0; i < nr; ++i) r.push_back(pool[rng.uniform_index(6)]);
    const double b = sentence_bleu1(c, r);
    CHECK(b >= 0.0);
    CHECK(b <= 1.0);
  }
}

TEST_CASE("corpus bleu1 pools counts before the ratio") {
  const std::vector<std::vector<std::string>> cands = {w("a red"),
                                                       w("blue cube here")};
  const std::vector<std::vector<std::string>> refs = {w("a red cube"),
                                                      w("blue cube")};
  // matches 2 + 2 = 4, cand len 5, ref len 5: precision 4/5, no penalty
  CHECK(corpus_bleu1(cands, refs) == doctest::Approx(0.8).epsilon(1e-12));
  // single-pair corpus equals the sentence score
  CHECK(corpus_bleu1({w("the red sphere")}, {w("a red sphere")}) ==
        doctest::Approx(sentence_bleu1(w("the red sphere"), w("a red sphere")))
            .epsilon(1e-12));
  CHECK_THROWS_AS(corpus_bleu1({}, {}), error);
  CHECK_THROWS_AS(corpus_bleu1({w("a")}, {}), error);
}

TEST_CASE("rouge_l is 1 on identical and 0 on disjoint sentences") {
  CHECK(rouge_l(w("a red cube"), w("a red cube")) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rouge_l(w("alpha beta"), w("gamma delta")) == 0.0);
  CHECK(rouge_l({}, w("gamma")) == 0.0);
}

TEST_CASE("rouge_l hand example with beta 1.2") {
  // cand "a red cube" vs ref "a large red cube": lcs 3, P=1, R=3/4
  const double p = 1.0, r = 0.75, b2 = 1.2 * 1.2;
  const double want = (1.0 + b2) * p * r / (r + b2 * p);
  CHECK(rouge_l(w("a red cube"), w("a large red cube")) ==
        doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("rouge_l is bounded and maximal on equality") {
  Rng rng(21);
  const std::vector<std::string> pool = {"a", "b", "c", "d", "e"};
  for (int t = 0; t < 100; ++t) {
    std::vector<std::string> c, r;
    const int nc = 1 + int(rng.uniform_index(6));
    const int nr = 1 + int(rng.uniform_index(6));
    for (int i = 0; i < nc; ++i) c.push_back(pool[rng.uniform_index(5)]);
    for (int i = 0; i < nr; ++i) r.push_back(pool[rng.uniform_index(5)]);
    const double f = rouge_l(c, r);
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);
    CHECK(rouge_l(c, c) == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(rouge_l(w("a"), w("a"), 0.0), error);
}

TEST_CASE("keyword accuracy checks every expected word") {
  const std::vector<std::vector<std::string>> gen = {
      w("this is a red sphere"), w("a cube"), {}, w("sphere the red")};
  const std::vector<std::vector<std::string>> expect = {
      w("sphere"), w("sphere"), w("sphere"), w("red sphere")};
  // hits: sample 0 (sphere present) and sample 3 (both words present)
  CHECK(keyword_accuracy(gen, expect) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("keyword accuracy ignores word order and position") {
  const auto a = keyword_accuracy({w("red sphere a")}, {w("sphere")});
  const auto b = keyword_accuracy({w("a sphere red")}, {w("sphere")});
  CHECK(a == 1.0);
  CHECK(b == 1.0);
}

TEST_CASE("keyword accuracy rejects mismatched sizes and empty sets") {
  CHECK_THROWS_AS(keyword_accuracy({}, {}), error);
  CHECK_THROWS_AS(keyword_accuracy({w("a")}, {}), error);
  // empty expected-word list never counts as a hit
  CHECK(keyword_accuracy({w("anything")}, {{}}) == 0.0);
}
