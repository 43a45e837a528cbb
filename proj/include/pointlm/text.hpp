#pragma once
// Word-level text handling shared by the vocabulary, the metrics, and the
// data generator: lowercase, strip punctuation, split on whitespace.

#include <string>
#include <vector>

namespace pointlm {

std::string to_lower(const std::string& s);

// Lowercased alphanumeric word runs; punctuation separates, digits count as
// word characters ("3d" stays one word).
std::vector<std::string> split_words(const std::string& text);

std::string join_words(const std::vector<std::string>& words);

}  // namespace pointlm
