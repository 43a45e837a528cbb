#pragma once
// Word-level vocabulary with five reserved control tokens at fixed ids.
// Built from a corpus: control tokens first, then every distinct word in
// sorted order, so the same corpus always yields the same table.

#include <map>
#include <string>
#include <vector>

#include "pointlm/common.hpp"

namespace pointlm {

class Vocab {
 public:
  static constexpr int kBos = 0;
  static constexpr int kEos = 1;
  static constexpr int kPad = 2;
  static constexpr int kPStart = 3;
  static constexpr int kPEnd = 4;
  static constexpr int kNumSpecial = 5;

  static const std::vector<std::string>& special_tokens();

  // Collects every word (split_words) appearing in `texts`.
  static Vocab build(const std::vector<std::string>& texts);
  // Reconstructs from a saved word list (must start with the control tokens).
  static Vocab from_words(std::vector<std::string> words);

  int size() const { return int(words_.size()); }

  int id(const std::string& word) const;
  bool contains(const std::string& word) const;
  const std::string& word(int id) const;

  // normalize + split + map; unknown words throw with the word named.
  std::vector<int> encode(const std::string& text) const;
  // ids -> space-joined words; control tokens are skipped unless asked for.
  std::string decode(const std::vector<int>& ids,
                     bool keep_special = false) const;

  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::map<std::string, int> index_;
};

}  // namespace pointlm
