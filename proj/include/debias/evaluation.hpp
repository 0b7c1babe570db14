#pragma once

#include <cstddef>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "debias/corpus.hpp"
#include "debias/errors.hpp"
#include "debias/model.hpp"
#include "debias/network.hpp"
#include "debias/tagset.hpp"

namespace debias {

using TagSequences = std::vector<std::vector<TagId>>;
using CountMatrix = std::vector<std::vector<std::size_t>>;

namespace detail {

inline std::size_t checked_token_count(const TagSequences& pred, const TagSequences& gold) {
  if (pred.size() != gold.size())
    throw ShapeError("prediction has " + std::to_string(pred.size()) + " sentences, gold has " + std::to_string(gold.size()));
  std::size_t n = 0;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    if (pred[s].size() != gold[s].size())
      throw ShapeError("sentence " + std::to_string(s + 1) + ": prediction and gold lengths differ");
    n += gold[s].size();
  }
  return n;
}

}  // namespace detail

// Fraction of tokens whose predicted tag equals the gold tag.
inline double token_accuracy(const TagSequences& pred, const TagSequences& gold) {
  const std::size_t n = detail::checked_token_count(pred, gold);
  if (n == 0) throw DataError("accuracy is undefined over zero tokens");
  std::size_t correct = 0;
  for (std::size_t s = 0; s < gold.size(); ++s)
    for (std::size_t t = 0; t < gold[s].size(); ++t) correct += pred[s][t] == gold[s][t];
  return static_cast<double>(correct) / static_cast<double>(n);
}

// cell [g][p] counts tokens with gold tag g predicted as p.
inline CountMatrix confusion(const TagSequences& pred, const TagSequences& gold, std::size_t num_tags) {
  detail::checked_token_count(pred, gold);
  CountMatrix m(num_tags, std::vector<std::size_t>(num_tags, 0));
  for (std::size_t s = 0; s < gold.size(); ++s)
    for (std::size_t t = 0; t < gold[s].size(); ++t) {
      if (gold[s][t] >= num_tags || pred[s][t] >= num_tags) throw ShapeError("tag index out of range in confusion");
      ++m[gold[s][t]][pred[s][t]];
    }
  return m;
}

inline TagSequences gold_tags(const GoldCorpus& c) {
  TagSequences out;
  out.reserve(c.size());
  for (const auto& s : c.sentences) out.push_back(s.tags);
  return out;
}

inline TagSequences predict_all(const ModelParams& p, std::span<const TaggedExample> examples) {
  TagSequences out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(predict(p, ex.ids));
  return out;
}

inline TagSequences predict_all(const Tagger& m, const GoldCorpus& c) {
  TagSequences out;
  out.reserve(c.size());
  for (const auto& s : c.sentences) out.push_back(predict(m, s.tokens));
  return out;
}

inline double accuracy_on(const ModelParams& p, std::span<const TaggedExample> examples) {
  TagSequences gold;
  gold.reserve(examples.size());
  for (const auto& ex : examples) gold.push_back(ex.tags);
  return token_accuracy(predict_all(p, examples), gold);
}

struct EvalReport {
  double accuracy = 0.0;
  std::size_t token_count = 0;
  std::vector<double> precision;  // per tag; 0 when the tag is never predicted
  std::vector<double> recall;     // per tag; 0 when the tag never occurs
  CountMatrix confusion;
  TagSet tagset;

  std::string to_text() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    os << "tokens    " << token_count << "\naccuracy  " << accuracy << "\n\n";
    os << std::left << std::setw(8) << "tag" << std::right << std::setw(10) << "precision" << std::setw(10) << "recall"
       << std::setw(10) << "support" << '\n';
    for (std::size_t k = 0; k < tagset.size(); ++k) {
      std::size_t support = 0;
      for (auto c : confusion[k]) support += c;
      os << std::left << std::setw(8) << tagset.label(k) << std::right << std::setw(10) << precision[k] << std::setw(10)
         << recall[k] << std::setw(10) << support << '\n';
    }
    return os.str();
  }

  // Two CSV blocks: summary/per-tag metrics, then the confusion matrix.
  std::string to_csv() const;
};

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t lineno) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') cur += '"', ++i;
      else if (c == '"') quoted = false;
      else cur += c;
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw ParseError("unterminated quote", lineno);
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace detail

inline std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6);
  os << "metric,value\naccuracy," << accuracy << "\ntokens," << token_count << "\n\n";
  os << "tag,precision,recall\n";
  for (std::size_t k = 0; k < tagset.size(); ++k)
    os << detail::csv_field(tagset.label(k)) << ',' << precision[k] << ',' << recall[k] << '\n';
  os << "\ngold\\predicted";
  for (const auto& l : tagset.labels()) os << ',' << detail::csv_field(l);
  os << '\n';
  for (std::size_t g = 0; g < tagset.size(); ++g) {
    os << detail::csv_field(tagset.label(g));
    for (auto c : confusion[g]) os << ',' << c;
    os << '\n';
  }
  return os.str();
}

inline EvalReport evaluate(const TagSequences& pred, const TagSequences& gold, const TagSet& tagset) {
  EvalReport r;
  r.tagset = tagset;
  r.confusion = confusion(pred, gold, tagset.size());
  r.accuracy = token_accuracy(pred, gold);
  const std::size_t K = tagset.size();
  r.precision.assign(K, 0.0);
  r.recall.assign(K, 0.0);
  std::size_t trace = 0;
  for (std::size_t k = 0; k < K; ++k) {
    std::size_t row = 0, col = 0;
    for (std::size_t j = 0; j < K; ++j) row += r.confusion[k][j], col += r.confusion[j][k], r.token_count += r.confusion[k][j];
    trace += r.confusion[k][k];
    if (col) r.precision[k] = static_cast<double>(r.confusion[k][k]) / static_cast<double>(col);
    if (row) r.recall[k] = static_cast<double>(r.confusion[k][k]) / static_cast<double>(row);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Bias matrix export: rows are gold tags, columns projected tags.

inline void export_bias(std::ostream& os, const Matrix& A, const TagSet& gold, const TagSet& proj) {
  if (static_cast<std::size_t>(A.rows()) != gold.size() || static_cast<std::size_t>(A.cols()) != proj.size())
    throw ShapeError("bias matrix shape does not match the tagsets");
  os << "gold\\projected";
  for (const auto& l : proj.labels()) os << ',' << detail::csv_field(l);
  os << '\n';
  char buf[64];
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    os << detail::csv_field(gold.label(static_cast<TagId>(i)));
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.6f", A(i, j));
      os << ',' << buf;
    }
    os << '\n';
  }
}

inline void export_bias(const Tagger& m, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write '" + path + "'");
  export_bias(os, m.params.A, m.gold_tags, m.proj_tags);
}

struct BiasTable {
  TagSet gold;
  TagSet proj;
  Matrix A;
};

inline BiasTable import_bias(std::istream& is) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  std::vector<std::string> rows;
  std::vector<std::vector<double>> values;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = detail::split_csv_line(line, lineno);
    if (header.empty()) {
      if (fields.size() < 2) throw ParseError("bias header needs at least one projected tag", lineno);
      header.assign(fields.begin() + 1, fields.end());
      continue;
    }
    if (fields.size() != header.size() + 1) throw ParseError("wrong number of fields", lineno);
    rows.push_back(fields[0]);
    std::vector<double> r;
    for (std::size_t j = 1; j < fields.size(); ++j) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(fields[j], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != fields[j].size()) throw ParseError("bad number '" + fields[j] + "'", lineno);
      r.push_back(v);
    }
    values.push_back(std::move(r));
  }
  if (header.empty() || rows.empty()) throw ParseError("empty bias matrix file");
  BiasTable t{TagSet(rows), TagSet(header), Matrix(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(header.size()))};
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < header.size(); ++j) t.A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i][j];
  return t;
}

inline BiasTable import_bias(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path + "'");
  return import_bias(is);
}

}  // namespace debias
