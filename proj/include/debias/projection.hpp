#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "debias/corpus.hpp"
#include "debias/errors.hpp"
#include "debias/tagset.hpp"

namespace debias {

struct AlignmentLink {
  std::size_t src = 0;
  std::size_t tgt = 0;

  friend auto operator<=>(const AlignmentLink&, const AlignmentLink&) = default;
};

struct ParallelSentence {
  std::vector<std::string> src_tokens;
  std::vector<TagId> src_tags;
  std::vector<std::string> tgt_tokens;
  std::vector<AlignmentLink> links;
  std::optional<double> score;
};

struct HardLabel {
  TagId tag = 0;
  friend bool operator==(const HardLabel&, const HardLabel&) = default;
};

// Distribution over the projected tagset; sums to one.
struct SoftLabel {
  std::vector<double> dist;
};

using ProjectedLabel = std::variant<HardLabel, SoftLabel>;

struct ProjectedSentence {
  std::vector<std::string> tokens;
  std::vector<ProjectedLabel> labels;

  std::size_t size() const noexcept { return tokens.size(); }
};

struct ProjectedCorpus {
  std::vector<ProjectedSentence> sentences;
  TagSet tagset;

  std::size_t size() const noexcept { return sentences.size(); }
  bool empty() const noexcept { return sentences.empty(); }

  std::size_t token_count() const noexcept {
    std::size_t n = 0;
    for (const auto& s : sentences) n += s.size();
    return n;
  }
};

inline bool is_hard(const ProjectedLabel& l) { return std::holds_alternative<HardLabel>(l); }

// Label as a dense distribution over k tags.
inline std::vector<double> label_distribution(const ProjectedLabel& label, std::size_t k) {
  if (const auto* h = std::get_if<HardLabel>(&label)) {
    std::vector<double> d(k, 0.0);
    d.at(h->tag) = 1.0;
    return d;
  }
  const auto& soft = std::get<SoftLabel>(label).dist;
  if (soft.size() != k) throw ShapeError("soft label has " + std::to_string(soft.size()) + " entries, expected " + std::to_string(k));
  return soft;
}

// Keeps a link iff its source index and its target index each occur in exactly one link.
inline std::vector<AlignmentLink> filter_one_to_one(std::vector<AlignmentLink> links) {
  std::sort(links.begin(), links.end());
  links.erase(std::unique(links.begin(), links.end()), links.end());
  std::map<std::size_t, int> src_count, tgt_count;
  for (const auto& l : links) {
    ++src_count[l.src];
    ++tgt_count[l.tgt];
  }
  std::vector<AlignmentLink> kept;
  for (const auto& l : links)
    if (src_count[l.src] == 1 && tgt_count[l.tgt] == 1) kept.push_back(l);
  return kept;
}

inline SoftLabel sentence_tag_distribution(const std::vector<TagId>& src_tags, std::size_t num_tags) {
  if (src_tags.empty()) throw DataError("cannot build a tag distribution from an empty source sentence");
  SoftLabel soft{std::vector<double>(num_tags, 0.0)};
  for (TagId t : src_tags) soft.dist.at(t) += 1.0;
  for (auto& p : soft.dist) p /= static_cast<double>(src_tags.size());
  return soft;
}

// One-to-one aligned target tokens inherit the source tag; every other token
// gets the source sentence's tag-frequency distribution.
inline ProjectedSentence project(const ParallelSentence& p, std::size_t num_src_tags) {
  if (p.src_tokens.size() != p.src_tags.size()) throw ShapeError("source tokens and tags differ in length");
  for (const auto& l : p.links)
    if (l.src >= p.src_tags.size() || l.tgt >= p.tgt_tokens.size())
      throw DataError("alignment link " + std::to_string(l.src) + "-" + std::to_string(l.tgt) + " is out of range");
  const SoftLabel fallback = sentence_tag_distribution(p.src_tags, num_src_tags);
  std::vector<std::optional<TagId>> hard(p.tgt_tokens.size());
  for (const auto& l : filter_one_to_one(p.links)) hard[l.tgt] = p.src_tags[l.src];

  ProjectedSentence out{p.tgt_tokens, {}};
  out.labels.reserve(p.tgt_tokens.size());
  for (const auto& h : hard) {
    if (h) out.labels.emplace_back(HardLabel{*h});
    else out.labels.emplace_back(fallback);
  }
  return out;
}

// Top-n sentences by descending score, returned in corpus order. Ties keep the earlier sentence.
inline std::vector<ParallelSentence> select_sentences(const std::vector<ParallelSentence>& corpus, std::size_t n) {
  if (n >= corpus.size()) return corpus;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    if (!corpus[i].score) throw DataError("sentence " + std::to_string(i + 1) + " has no alignment score");
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return *corpus[a].score > *corpus[b].score; });
  order.resize(n);
  std::sort(order.begin(), order.end());
  std::vector<ParallelSentence> out;
  out.reserve(n);
  for (auto i : order) out.push_back(corpus[i]);
  return out;
}

inline ProjectedCorpus project_corpus(const std::vector<ParallelSentence>& corpus, const TagSet& src_tagset) {
  ProjectedCorpus out{{}, src_tagset};
  out.sentences.reserve(corpus.size());
  for (const auto& p : corpus) {
    if (p.tgt_tokens.empty()) continue;
    out.sentences.push_back(project(p, src_tagset.size()));
  }
  return out;
}

struct ProjectionStats {
  std::size_t sentences = 0;
  std::size_t tokens = 0;
  std::size_t hard = 0;
  std::size_t soft = 0;
};

inline ProjectionStats projection_stats(const ProjectedCorpus& corpus) {
  ProjectionStats st;
  st.sentences = corpus.size();
  for (const auto& s : corpus.sentences)
    for (const auto& l : s.labels) {
      ++st.tokens;
      ++(is_hard(l) ? st.hard : st.soft);
    }
  return st;
}

// ---------------------------------------------------------------------------
// Parallel bundle I/O

// "0-0 1-2 3-1": space-separated src-tgt pairs, 0-based.
inline std::vector<AlignmentLink> parse_alignment_line(const std::string& line, std::size_t lineno = 0) {
  std::vector<AlignmentLink> links;
  std::istringstream ss(line);
  std::string pair;
  while (ss >> pair) {
    auto dash = pair.find('-');
    if (dash == std::string::npos || dash == 0 || dash + 1 == pair.size())
      throw ParseError("bad alignment pair '" + pair + "'", lineno);
    AlignmentLink link;
    const char* b = pair.data();
    const char* e = pair.data() + pair.size();
    auto r1 = std::from_chars(b, b + dash, link.src);
    auto r2 = std::from_chars(b + dash + 1, e, link.tgt);
    if (r1.ec != std::errc{} || r1.ptr != b + dash || r2.ec != std::errc{} || r2.ptr != e)
      throw ParseError("bad alignment pair '" + pair + "'", lineno);
    links.push_back(link);
  }
  return links;
}

// Source side in two-column format, target one sentence per line, alignments
// one line per sentence, optional scores one per line.
inline std::vector<ParallelSentence> read_parallel_bundle(const std::string& src_path, const std::string& tgt_path,
                                                          const std::string& align_path, const TagSet& src_tagset,
                                                          const std::optional<std::string>& scores_path = {}) {
  const GoldCorpus src = read_two_column(src_path, src_tagset);

  std::vector<std::vector<std::string>> tgt;
  {
    auto in = detail::open_in(tgt_path);
    std::string line;
    while (std::getline(in, line)) {
      detail::strip_cr(line);
      std::istringstream ss(line);
      std::vector<std::string> toks;
      for (std::string w; ss >> w;) toks.push_back(w);
      tgt.push_back(std::move(toks));
    }
  }
  std::vector<std::vector<AlignmentLink>> aligns;
  {
    auto in = detail::open_in(align_path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      detail::strip_cr(line);
      aligns.push_back(parse_alignment_line(line, ++lineno));
    }
  }
  std::vector<double> scores;
  if (scores_path) {
    auto in = detail::open_in(*scores_path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      detail::strip_cr(line);
      if (detail::is_blank(line)) continue;
      std::istringstream ss(line);
      double v;
      std::string rest;
      if (!(ss >> v) || (ss >> rest)) throw ParseError("bad score '" + line + "'", lineno);
      scores.push_back(v);
    }
  }

  const std::size_t n = src.size();
  if (tgt.size() != n || aligns.size() != n)
    throw DataError("parallel bundle is misaligned: " + std::to_string(n) + " source, " + std::to_string(tgt.size()) +
                    " target, " + std::to_string(aligns.size()) + " alignment sentences");
  if (scores_path && scores.size() != n)
    throw DataError("score file has " + std::to_string(scores.size()) + " entries for " + std::to_string(n) + " sentences");

  std::vector<ParallelSentence> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].src_tokens = src.sentences[i].tokens;
    out[i].src_tags = src.sentences[i].tags;
    out[i].tgt_tokens = std::move(tgt[i]);
    out[i].links = std::move(aligns[i]);
    if (scores_path) out[i].score = scores[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Projected corpus file: `token<TAB>label`, label = TAG or TAG:p|TAG:p|...

inline std::string format_label(const ProjectedLabel& label, const TagSet& tagset) {
  if (const auto* h = std::get_if<HardLabel>(&label)) return tagset.label(h->tag);
  const auto& dist = std::get<SoftLabel>(label).dist;
  std::string out;
  char buf[32];
  for (std::size_t j = 0; j < dist.size(); ++j) {
    if (dist[j] <= 0.0) continue;
    std::snprintf(buf, sizeof buf, "%.6f", dist[j]);
    if (!out.empty()) out += '|';
    out += tagset.label(j) + ':' + buf;
  }
  return out;
}

inline ProjectedLabel parse_label(const std::string& text, const TagSet& tagset, std::size_t lineno = 0) {
  if (text.find(':') == std::string::npos) {
    if (!tagset.contains(text)) throw ParseError("unknown tag '" + text + "'", lineno);
    return HardLabel{tagset.lookup(text)};
  }
  SoftLabel soft{std::vector<double>(tagset.size(), 0.0)};
  std::size_t begin = 0;
  while (begin <= text.size()) {
    auto end = text.find('|', begin);
    if (end == std::string::npos) end = text.size();
    const std::string part = text.substr(begin, end - begin);
    const auto colon = part.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == part.size())
      throw ParseError("bad distribution entry '" + part + "'", lineno);
    const std::string tag = part.substr(0, colon);
    if (!tagset.contains(tag)) throw ParseError("unknown tag '" + tag + "'", lineno);
    std::size_t used = 0;
    double p = 0.0;
    try {
      p = std::stod(part.substr(colon + 1), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != part.size() - colon - 1 || !(p >= 0.0) || !std::isfinite(p))
      throw ParseError("bad probability in '" + part + "'", lineno);
    soft.dist[tagset.lookup(tag)] += p;
    begin = end + 1;
  }
  const double total = std::accumulate(soft.dist.begin(), soft.dist.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-3) throw ParseError("distribution sums to " + std::to_string(total), lineno);
  for (auto& p : soft.dist) p /= total;
  return soft;
}

inline void write_projected(std::ostream& out, const ProjectedCorpus& corpus) {
  for (const auto& s : corpus.sentences) {
    for (std::size_t t = 0; t < s.size(); ++t) out << s.tokens[t] << '\t' << format_label(s.labels[t], corpus.tagset) << '\n';
    out << '\n';
  }
}

inline void write_projected(const std::string& path, const ProjectedCorpus& corpus) {
  auto out = detail::open_out(path);
  write_projected(out, corpus);
}

inline ProjectedCorpus read_projected(std::istream& in, const TagSet& tagset) {
  ProjectedCorpus corpus{{}, tagset};
  ProjectedSentence current;
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
    auto [token, label] = detail::split_tab_pair(line, lineno);
    current.tokens.push_back(std::move(token));
    current.labels.push_back(parse_label(label, tagset, lineno));
  }
  if (!current.tokens.empty()) corpus.sentences.push_back(std::move(current));
  return corpus;
}

inline ProjectedCorpus read_projected(const std::string& path, const TagSet& tagset) {
  auto in = detail::open_in(path);
  return read_projected(in, tagset);
}

}  // namespace debias
