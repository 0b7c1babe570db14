#pragma once

#include <cstddef>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "debias/errors.hpp"
#include "debias/tagset.hpp"

namespace debias {

struct GoldSentence {
  std::vector<std::string> tokens;
  std::vector<TagId> tags;

  std::size_t size() const noexcept { return tokens.size(); }
  friend bool operator==(const GoldSentence&, const GoldSentence&) = default;
};

struct GoldCorpus {
  std::vector<GoldSentence> sentences;
  TagSet tagset;

  std::size_t size() const noexcept { return sentences.size(); }
  bool empty() const noexcept { return sentences.empty(); }

  std::size_t token_count() const noexcept {
    std::size_t n = 0;
    for (const auto& s : sentences) n += s.size();
    return n;
  }
};

namespace detail {

inline void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

inline bool is_blank(const std::string& line) {
  return line.find_first_not_of(" \t") == std::string::npos;
}

// Splits "a<TAB>b" into exactly two non-empty fields.
inline std::pair<std::string, std::string> split_tab_pair(const std::string& line, std::size_t lineno) {
  auto tab = line.find('\t');
  if (tab == std::string::npos) throw ParseError("expected 'token<TAB>tag', found no tab", lineno);
  if (line.find('\t', tab + 1) != std::string::npos)
    throw ParseError("expected exactly one tab separator", lineno);
  std::string left = line.substr(0, tab), right = line.substr(tab + 1);
  if (left.empty() || right.empty()) throw ParseError("empty field", lineno);
  return {std::move(left), std::move(right)};
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

}  // namespace detail

inline GoldCorpus read_two_column(std::istream& in, const TagSet& tagset) {
  GoldCorpus corpus{{}, tagset};
  GoldSentence current;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    detail::strip_cr(line);
    if (detail::is_blank(line)) {
      if (!current.tokens.empty()) corpus.sentences.push_back(std::move(current));
      current = {};
      continue;
    }
    auto [token, tag] = detail::split_tab_pair(line, lineno);
    if (!tagset.contains(tag))
      throw TagsetError("line " + std::to_string(lineno) + ": tag '" + tag + "' is not in the tagset");
    current.tokens.push_back(std::move(token));
    current.tags.push_back(tagset.lookup(tag));
  }
  if (!current.tokens.empty()) corpus.sentences.push_back(std::move(current));
  return corpus;
}

inline GoldCorpus read_two_column(const std::string& path, const TagSet& tagset) {
  auto in = detail::open_in(path);
  return read_two_column(in, tagset);
}

inline void write_two_column(std::ostream& out, const GoldCorpus& corpus) {
  for (const auto& s : corpus.sentences) {
    for (std::size_t t = 0; t < s.size(); ++t) out << s.tokens[t] << '\t' << corpus.tagset.label(s.tags[t]) << '\n';
    out << '\n';
  }
}

inline void write_two_column(const std::string& path, const GoldCorpus& corpus) {
  auto out = detail::open_out(path);
  write_two_column(out, corpus);
}

// Fine-grained -> universal tag table, as read from a `fine<TAB>universal` file.
struct TagMapping {
  TagSet fine;  // keys in file order
  std::unordered_map<std::string, std::string> table;
};

inline TagMapping read_mapping(std::istream& in) {
  std::vector<std::string> keys;
  std::unordered_map<std::string, std::string> table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    detail::strip_cr(line);
    if (detail::is_blank(line)) continue;
    auto [fine, coarse] = detail::split_tab_pair(line, lineno);
    if (!table.emplace(fine, coarse).second) throw ParseError("duplicate mapping for '" + fine + "'", lineno);
    keys.push_back(std::move(fine));
  }
  return {TagSet(std::move(keys)), std::move(table)};
}

inline TagMapping read_mapping(const std::string& path) {
  auto in = detail::open_in(path);
  return read_mapping(in);
}

inline GoldCorpus map_to_universal(const GoldCorpus& corpus,
                                   const std::unordered_map<std::string, std::string>& table,
                                   const TagSet& universal) {
  GoldCorpus out{{}, universal};
  out.sentences.reserve(corpus.size());
  for (const auto& s : corpus.sentences) {
    GoldSentence mapped{s.tokens, {}};
    mapped.tags.reserve(s.size());
    for (TagId fine : s.tags) {
      const auto& label = corpus.tagset.label(fine);
      auto it = table.find(label);
      if (it == table.end()) throw TagsetError("no universal mapping for tag '" + label + "'");
      mapped.tags.push_back(universal.lookup(it->second));
    }
    out.sentences.push_back(std::move(mapped));
  }
  return out;
}

// Shortest whole-sentence prefix holding at least n tokens, plus the remainder.
inline std::pair<GoldCorpus, GoldCorpus> take_first_tokens(const GoldCorpus& corpus, std::size_t n) {
  if (n < 1) throw DataError("token budget must be at least 1");
  GoldCorpus train{{}, corpus.tagset}, rest{{}, corpus.tagset};
  std::size_t taken = 0, i = 0;
  for (; i < corpus.size() && taken < n; ++i) {
    taken += corpus.sentences[i].size();
    train.sentences.push_back(corpus.sentences[i]);
  }
  if (taken < n)
    throw DataError("corpus has " + std::to_string(taken) + " tokens, fewer than the requested " + std::to_string(n));
  rest.sentences.assign(corpus.sentences.begin() + static_cast<std::ptrdiff_t>(i), corpus.sentences.end());
  return {std::move(train), std::move(rest)};
}

// First floor(n/2) sentences -> dev, the remainder -> test.
inline std::pair<GoldCorpus, GoldCorpus> split_dev_test(const GoldCorpus& rest) {
  if (rest.empty()) throw DataError("nothing left to split into dev and test");
  const auto half = static_cast<std::ptrdiff_t>(rest.size() / 2);
  GoldCorpus dev{{rest.sentences.begin(), rest.sentences.begin() + half}, rest.tagset};
  GoldCorpus test{{rest.sentences.begin() + half, rest.sentences.end()}, rest.tagset};
  return {std::move(dev), std::move(test)};
}

// Token sequences of a corpus, for vocabulary construction.
inline std::vector<std::vector<std::string>> token_sequences(const GoldCorpus& corpus) {
  std::vector<std::vector<std::string>> seqs;
  seqs.reserve(corpus.size());
  for (const auto& s : corpus.sentences) seqs.push_back(s.tokens);
  return seqs;
}

}  // namespace debias
