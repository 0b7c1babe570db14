#pragma once

#include <cstddef>
#include <fstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "debias/errors.hpp"

namespace debias {

using TagId = std::size_t;
using TokenId = std::size_t;

// Ordered set of unique tag labels; position defines the tag index.
class TagSet {
 public:
  TagSet() = default;

  explicit TagSet(std::vector<std::string> labels) : labels_(std::move(labels)) {
    if (labels_.empty()) throw TagsetError("a tagset needs at least one label");
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (labels_[i].empty()) throw TagsetError("empty tag label at position " + std::to_string(i));
      if (!index_.emplace(labels_[i], i).second)
        throw TagsetError("duplicate tag label '" + labels_[i] + "'");
    }
  }

  std::size_t size() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }

  const std::string& label(TagId id) const { return labels_.at(id); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  bool contains(std::string_view label) const { return index_.count(std::string(label)) != 0; }

  TagId lookup(std::string_view label) const {
    auto it = index_.find(std::string(label));
    if (it == index_.end()) throw TagsetError("tag '" + std::string(label) + "' is not in the tagset");
    return it->second;
  }

  friend bool operator==(const TagSet& a, const TagSet& b) { return a.labels_ == b.labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, TagId> index_;
};

// The 12-label coarse universal POS inventory.
inline TagSet universal_tagset() {
  return TagSet({"NOUN", "VERB", "ADJ", "ADV", "PRON", "DET", "ADP", "NUM", "CONJ", "PRT", ".", "X"});
}

// One label per line; blank lines are skipped.
inline TagSet read_tagset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open tagset file '" + path + "'");
  std::vector<std::string> labels;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
      line.pop_back();
    if (!line.empty()) labels.push_back(line);
  }
  return TagSet(std::move(labels));
}

inline void write_tagset(const TagSet& tags, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write tagset file '" + path + "'");
  for (const auto& l : tags.labels()) out << l << '\n';
}

// Token -> id map. Id 0 is reserved for unknown tokens.
class Vocabulary {
 public:
  static constexpr TokenId kUnk = 0;
  static constexpr const char* kUnkToken = "<unk>";

  Vocabulary() : words_{kUnkToken} {}

  // Rebuild from the id-ordered word list (index 0 must be the UNK entry).
  explicit Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
    if (words_.empty() || words_.front() != kUnkToken)
      throw DataError("vocabulary must start with the UNK entry");
    for (std::size_t i = 1; i < words_.size(); ++i)
      if (!index_.emplace(words_[i], i).second) throw DataError("duplicate vocabulary entry '" + words_[i] + "'");
  }

  std::size_t size() const noexcept { return words_.size(); }
  const std::vector<std::string>& words() const noexcept { return words_; }
  const std::string& word(TokenId id) const { return words_.at(id); }

  TokenId lookup(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnk : it->second;
  }

  std::vector<TokenId> encode(const std::vector<std::string>& tokens) const {
    std::vector<TokenId> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(lookup(t));
    return ids;
  }

  // Appends a new token; no-op when already present.
  TokenId add(const std::string& token) {
    auto [it, inserted] = index_.emplace(token, words_.size());
    if (inserted) words_.push_back(token);
    return it->second;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.words_ == b.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> index_;
};

// Tokens reaching min_count get ids in order of first occurrence.
inline Vocabulary build_vocab(const std::vector<std::vector<std::string>>& sequences, std::size_t min_count = 1) {
  if (min_count < 1) throw DataError("min_count must be at least 1");
  std::unordered_map<std::string, std::size_t> counts;
  std::vector<std::string> order;
  for (const auto& seq : sequences)
    for (const auto& tok : seq)
      if (counts[tok]++ == 0) order.push_back(tok);
  Vocabulary vocab;
  for (const auto& tok : order)
    if (counts[tok] >= min_count && tok != Vocabulary::kUnkToken) vocab.add(tok);
  return vocab;
}

}  // namespace debias
