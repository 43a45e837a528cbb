#include "pointlm/vocab.hpp"

#include <algorithm>
#include <set>

#include "pointlm/text.hpp"

namespace pointlm {

const std::vector<std::string>& Vocab::special_tokens() {
  static const std::vector<std::string> kSpecial = {
      "<bos>", "<eos>", "<pad>", "<p_start>", "<p_end>"};
  return kSpecial;
}

Vocab Vocab::build(const std::vector<std::string>& texts) {
  std::set<std::string> distinct;
  for (const auto& t : texts)
    for (const auto& w : split_words(t)) distinct.insert(w);
  std::vector<std::string> words = special_tokens();
  words.insert(words.end(), distinct.begin(), distinct.end());
  return from_words(std::move(words));
}

Vocab Vocab::from_words(std::vector<std::string> words) {
  require(words.size() >= std::size_t(kNumSpecial),
          "Vocab: word list shorter than the control-token block");
  for (int i = 0; i < kNumSpecial; ++i)
    require(words[std::size_t(i)] == special_tokens()[std::size_t(i)],
            "Vocab: word list must start with the control tokens, found '" +
                words[std::size_t(i)] + "' at position " + std::to_string(i));
  Vocab v;
  v.words_ = std::move(words);
  for (std::size_t i = 0; i < v.words_.size(); ++i) {
    require(v.index_.emplace(v.words_[i], int(i)).second,
            "Vocab: duplicate word '" + v.words_[i] + "'");
  }
  return v;
}

int Vocab::id(const std::string& word) const {
  auto it = index_.find(word);
  if (it == index_.end())
    throw vocab_error("word '" + word + "' is not in the vocabulary");
  return it->second;
}

bool Vocab::contains(const std::string& word) const {
  return index_.find(word) != index_.end();
}

const std::string& Vocab::word(int id) const {
  if (id < 0 || id >= size())
    throw vocab_error("token id " + std::to_string(id) +
                      " outside vocabulary of " + std::to_string(size()));
  return words_[std::size_t(id)];
}

std::vector<int> Vocab::encode(const std::string& text) const {
  std::vector<int> ids;
  for (const auto& w : split_words(text)) ids.push_back(id(w));
  return ids;
}

std::string Vocab::decode(const std::vector<int>& ids,
                          bool keep_special) const {
  std::vector<std::string> out;
  for (int i : ids) {
    if (!keep_special && i < kNumSpecial) continue;
    out.push_back(word(i));
  }
  return join_words(out);
}

}  // namespace pointlm
