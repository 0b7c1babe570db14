#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <iomanip>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "debias/config.hpp"
#include "debias/corpus.hpp"
#include "debias/errors.hpp"
#include "debias/evaluation.hpp"
#include "debias/model.hpp"
#include "debias/network.hpp"
#include "debias/projection.hpp"
#include "debias/training.hpp"

namespace debias {

using Distribution = std::vector<double>;
using Stochastic = std::vector<Distribution>;  // row-stochastic matrix

namespace detail {

inline void check_simplex(const Distribution& d, const std::string& what) {
  double s = 0.0;
  for (double p : d) {
    if (!(p >= 0.0)) throw DataError(what + " has a negative or NaN entry");
    s += p;
  }
  if (std::abs(s - 1.0) > 1e-9) throw DataError(what + " sums to " + std::to_string(s) + ", not 1");
}

inline std::size_t draw(const Distribution& d, std::mt19937_64& rng) {
  std::discrete_distribution<std::size_t> dist(d.begin(), d.end());
  return dist(rng);
}

inline std::mt19937_64 derived_rng(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream, 0x0badc0deu};
  return std::mt19937_64(seq);
}

inline std::uint64_t derived_seed(std::uint64_t seed, std::uint32_t stream) {
  auto rng = derived_rng(seed, stream);
  return rng();
}

}  // namespace detail

// Tag-sequence model with uniform sentence lengths in [min_len, max_len].
struct HMMSpec {
  std::size_t K = 0;
  std::size_t V = 0;
  Distribution start;
  Stochastic trans;  // K x K
  Stochastic emit;   // K x V
  std::size_t min_len = 1;
  std::size_t max_len = 1;

  void validate() const {
    if (K == 0 || V == 0) throw DataError("HMM needs at least one tag and one word");
    if (min_len == 0 || min_len > max_len) throw DataError("bad HMM sentence length range");
    if (start.size() != K || trans.size() != K || emit.size() != K) throw DataError("HMM shapes disagree with K");
    detail::check_simplex(start, "start distribution");
    for (std::size_t k = 0; k < K; ++k) {
      if (trans[k].size() != K || emit[k].size() != V) throw DataError("HMM row shapes disagree");
      detail::check_simplex(trans[k], "transition row " + std::to_string(k));
      detail::check_simplex(emit[k], "emission row " + std::to_string(k));
    }
  }

  TagSet tagset() const {
    std::vector<std::string> labels;
    for (std::size_t k = 0; k < K; ++k) labels.push_back("T" + std::to_string(k));
    return TagSet(std::move(labels));
  }

  static std::string word(std::size_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "w%03zu", v);
    return buf;
  }
};

// Ancestral sampling; deterministic given the generator state.
inline GoldSentence sample_sentence(const HMMSpec& spec, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> len(spec.min_len, spec.max_len);
  const std::size_t n = len(rng);
  GoldSentence s;
  std::size_t tag = detail::draw(spec.start, rng);
  for (std::size_t t = 0; t < n; ++t) {
    if (t > 0) tag = detail::draw(spec.trans[tag], rng);
    s.tags.push_back(tag);
    s.tokens.push_back(HMMSpec::word(detail::draw(spec.emit[tag], rng)));
  }
  return s;
}

inline GoldCorpus sample_corpus(const HMMSpec& spec, std::size_t n_sentences, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  GoldCorpus c{{}, spec.tagset()};
  c.sentences.reserve(n_sentences);
  for (std::size_t i = 0; i < n_sentences; ++i) c.sentences.push_back(sample_sentence(spec, rng));
  return c;
}

// Samples whole sentences until at least `tokens` tokens are drawn.
inline GoldCorpus sample_tokens(const HMMSpec& spec, std::size_t tokens, std::mt19937_64& rng) {
  spec.validate();
  GoldCorpus c{{}, spec.tagset()};
  std::size_t n = 0;
  while (n < tokens) {
    c.sentences.push_back(sample_sentence(spec, rng));
    n += c.sentences.back().size();
  }
  return c;
}

// Label-corruption channel: C[gold][projected] plus the chance a token is
// treated as unaligned.
struct NoiseChannel {
  Stochastic C;  // K_gold x K_proj
  double p_unaligned = 0.0;

  std::size_t gold_tags() const noexcept { return C.size(); }
  std::size_t proj_tags() const noexcept { return C.empty() ? 0 : C.front().size(); }

  void validate() const {
    if (C.empty()) throw DataError("empty noise channel");
    for (std::size_t i = 0; i < C.size(); ++i) {
      if (C[i].size() != proj_tags()) throw DataError("ragged noise channel");
      detail::check_simplex(C[i], "channel row " + std::to_string(i));
    }
    if (!(p_unaligned >= 0.0 && p_unaligned <= 1.0)) throw DataError("p_unaligned must lie in [0, 1]");
  }
};

// Every token draws a hard label from C[y_t]. With probability p_unaligned a
// token instead gets the relative frequency of the sentence's hard draws.
inline ProjectedSentence corrupt(const GoldSentence& s, const NoiseChannel& ch, std::mt19937_64& rng) {
  std::vector<TagId> draws;
  draws.reserve(s.size());
  for (auto y : s.tags) draws.push_back(detail::draw(ch.C.at(y), rng));
  const SoftLabel soft = sentence_tag_distribution(draws, ch.proj_tags());
  std::bernoulli_distribution unaligned(ch.p_unaligned);
  ProjectedSentence out{s.tokens, {}};
  out.labels.reserve(s.size());
  for (std::size_t t = 0; t < s.size(); ++t) {
    if (unaligned(rng)) out.labels.emplace_back(soft);
    else out.labels.emplace_back(HardLabel{draws[t]});
  }
  return out;
}

inline ProjectedSentence corrupt(const GoldSentence& s, const NoiseChannel& ch, std::uint64_t seed) {
  ch.validate();
  std::mt19937_64 rng(seed);
  return corrupt(s, ch, rng);
}

inline ProjectedCorpus corrupt_corpus(const GoldCorpus& c, const NoiseChannel& ch, const TagSet& proj_tagset,
                                      std::mt19937_64& rng) {
  ch.validate();
  ProjectedCorpus out{{}, proj_tagset};
  out.sentences.reserve(c.size());
  for (const auto& s : c.sentences) out.sentences.push_back(corrupt(s, ch, rng));
  return out;
}

// Fraction of eligible gold tags i whose row argmax in A equals the row argmax in C.
inline double channel_agreement(const Matrix& A, const Stochastic& C, const std::vector<bool>& eligible) {
  if (static_cast<std::size_t>(A.rows()) != C.size() || eligible.size() != C.size())
    throw ShapeError("channel_agreement: row counts differ");
  std::size_t n = 0, agree = 0;
  for (std::size_t i = 0; i < C.size(); ++i) {
    if (C[i].size() != static_cast<std::size_t>(A.cols())) throw ShapeError("channel_agreement: column counts differ");
    if (!eligible[i]) continue;
    ++n;
    const auto c_best = static_cast<std::size_t>(std::max_element(C[i].begin(), C[i].end()) - C[i].begin());
    agree += argmax(A.row(static_cast<Eigen::Index>(i)).transpose()) == c_best;
  }
  if (n == 0) throw DataError("channel_agreement: no eligible tags");
  return static_cast<double>(agree) / static_cast<double>(n);
}

inline double channel_agreement(const Matrix& A, const Stochastic& C) {
  return channel_agreement(A, C, std::vector<bool>(C.size(), true));
}

// ---------------------------------------------------------------------------
// Default oracle construction

// Part-of-speech-like HMM: every tag owns an exclusive Zipfian lexicon and
// shares a pool of ambiguous words with the next tag (cyclically); a fraction
// `ambiguity` of each tag's emission mass goes to its two shared pools.
// Transition rows are Dirichlet(concentration) draws.
inline HMMSpec make_pos_like_hmm(std::size_t K, std::size_t V, double ambiguity, double concentration,
                                 std::size_t shared_per_pair, std::size_t min_len, std::size_t max_len,
                                 std::uint64_t seed) {
  if (K < 2) throw DataError("need at least two tags");
  if (V < K * (shared_per_pair + 1)) throw DataError("vocabulary too small for the lexicon layout");
  std::mt19937_64 rng(seed);
  HMMSpec spec;
  spec.K = K, spec.V = V, spec.min_len = min_len, spec.max_len = max_len;

  std::gamma_distribution<double> gamma(concentration, 1.0);
  auto dirichlet = [&](std::size_t n) {
    Distribution d(n);
    double s = 0.0;
    for (auto& x : d) s += (x = gamma(rng) + 1e-6);
    for (auto& x : d) x /= s;
    return d;
  };
  spec.start = dirichlet(K);
  for (std::size_t k = 0; k < K; ++k) spec.trans.push_back(dirichlet(K));

  // Word layout: K shared pools of `shared_per_pair` words, then exclusive lexicons.
  const std::size_t shared_total = K * shared_per_pair;
  const std::size_t exclusive = (V - shared_total) / K;
  std::vector<std::size_t> perm(V);
  for (std::size_t v = 0; v < V; ++v) perm[v] = v;
  std::shuffle(perm.begin(), perm.end(), rng);

  spec.emit.assign(K, Distribution(V, 0.0));
  auto zipf_fill = [&](Distribution& row, std::size_t first, std::size_t count, double mass) {
    double z = 0.0;
    for (std::size_t r = 1; r <= count; ++r) z += 1.0 / static_cast<double>(r);
    for (std::size_t r = 1; r <= count; ++r) row[perm[first + r - 1]] += mass / (static_cast<double>(r) * z);
  };
  for (std::size_t k = 0; k < K; ++k) {
    const std::size_t excl_first = shared_total + k * exclusive;
    const std::size_t excl_count = k + 1 == K ? V - excl_first : exclusive;
    zipf_fill(spec.emit[k], excl_first, excl_count, 1.0 - ambiguity);
    if (shared_per_pair > 0 && ambiguity > 0.0) {
      zipf_fill(spec.emit[k], k * shared_per_pair, shared_per_pair, ambiguity / 2);                  // shared with k+1
      zipf_fill(spec.emit[k], ((k + K - 1) % K) * shared_per_pair, shared_per_pair, ambiguity / 2);  // shared with k-1
    }
    double s = 0.0;
    for (double p : spec.emit[k]) s += p;
    for (double& p : spec.emit[k]) p /= s;
  }
  spec.validate();
  return spec;
}

enum class ChannelShape {
  cyclic,  // tag i leaks into tags i+1 (primary share) and i+2
  sink,    // every tag leaks into tags 0 (primary share) and 1; those two leak into each other
};

// Channel with `diagonal` on the diagonal and the remaining mass on one or two
// confusable tags, arranged according to `shape`.
inline NoiseChannel make_confusion_channel(std::size_t K, double diagonal, double primary_share, double p_unaligned,
                                           ChannelShape shape = ChannelShape::cyclic) {
  if (K < 3) throw DataError("confusion channels need at least three tags");
  NoiseChannel ch{Stochastic(K, Distribution(K, 0.0)), p_unaligned};
  const double off = 1.0 - diagonal;
  for (std::size_t i = 0; i < K; ++i) {
    ch.C[i][i] += diagonal;
    if (shape == ChannelShape::cyclic) {
      ch.C[i][(i + 1) % K] += off * primary_share;
      ch.C[i][(i + 2) % K] += off * (1.0 - primary_share);
    } else if (i < 2) {
      ch.C[i][1 - i] += off;
    } else {
      ch.C[i][0] += off * primary_share;
      ch.C[i][1] += off * (1.0 - primary_share);
    }
  }
  ch.validate();
  return ch;
}

inline NoiseChannel identity_channel(std::size_t K) {
  NoiseChannel ch{Stochastic(K, Distribution(K, 0.0)), 0.0};
  for (std::size_t i = 0; i < K; ++i) ch.C[i][i] = 1.0;
  return ch;
}

// ---------------------------------------------------------------------------
// Recovery experiment: annotated-only vs projected-only vs debias.

struct ExperimentConfig {
  std::uint64_t seed = 1;  // master seed
  std::size_t K = 6;
  std::size_t V = 200;
  std::size_t gold_train_tokens = 1000;
  std::size_t eval_tokens = 4000;  // dev + test, split by sentence count
  std::size_t projected_tokens = 20000;
  double diagonal = 0.7;
  double primary_share = 2.0 / 3.0;
  ChannelShape channel_shape = ChannelShape::sink;
  double p_unaligned = 0.15;
  double ambiguity = 0.4;
  double concentration = 0.5;
  std::size_t shared_per_pair = 8;
  std::size_t min_len = 5;
  std::size_t max_len = 15;
  std::size_t min_eligible_count = 50;
  TrainConfig train = default_train();

  static TrainConfig default_train() {
    TrainConfig t;
    t.d_e = 32;
    t.d_h = 32;
    t.stage1_epochs = 30;
    t.stage2_epochs = 20;
    t.patience = 5;
    t.proj_per_gold = 20;
    return t;
  }

  // Training keys are prefixed with `train.`.
  void set(const std::string& key, const std::string& value) {
    using detail::parse_number;
    if (key.rfind("train.", 0) == 0) return train.set(key.substr(6), value);
    if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
    else if (key == "K") K = parse_number<std::size_t>(key, value);
    else if (key == "V") V = parse_number<std::size_t>(key, value);
    else if (key == "gold_train_tokens") gold_train_tokens = parse_number<std::size_t>(key, value);
    else if (key == "eval_tokens") eval_tokens = parse_number<std::size_t>(key, value);
    else if (key == "projected_tokens") projected_tokens = parse_number<std::size_t>(key, value);
    else if (key == "diagonal") diagonal = parse_number<double>(key, value);
    else if (key == "primary_share") primary_share = parse_number<double>(key, value);
    else if (key == "channel_shape") {
      if (value == "cyclic") channel_shape = ChannelShape::cyclic;
      else if (value == "sink") channel_shape = ChannelShape::sink;
      else throw ConfigError("channel_shape must be 'cyclic' or 'sink'");
    } else if (key == "p_unaligned") p_unaligned = parse_number<double>(key, value);
    else if (key == "ambiguity") ambiguity = parse_number<double>(key, value);
    else if (key == "concentration") concentration = parse_number<double>(key, value);
    else if (key == "shared_per_pair") shared_per_pair = parse_number<std::size_t>(key, value);
    else if (key == "min_len") min_len = parse_number<std::size_t>(key, value);
    else if (key == "max_len") max_len = parse_number<std::size_t>(key, value);
    else if (key == "min_eligible_count") min_eligible_count = parse_number<std::size_t>(key, value);
    else throw ConfigError("unknown experiment key '" + key + "'");
  }

  void apply(const KeyValues& kv) {
    for (const auto& [k, v] : kv) set(k, v);
  }

  std::string to_string() const {
    std::ostringstream os;
    os.precision(17);
    os << "seed = " << seed << "\nK = " << K << "\nV = " << V << "\ngold_train_tokens = " << gold_train_tokens
       << "\neval_tokens = " << eval_tokens << "\nprojected_tokens = " << projected_tokens << "\ndiagonal = " << diagonal
       << "\nprimary_share = " << primary_share
       << "\nchannel_shape = " << (channel_shape == ChannelShape::cyclic ? "cyclic" : "sink") << "\np_unaligned = " << p_unaligned << "\nambiguity = " << ambiguity
       << "\nconcentration = " << concentration << "\nshared_per_pair = " << shared_per_pair << "\nmin_len = " << min_len
       << "\nmax_len = " << max_len << "\nmin_eligible_count = " << min_eligible_count << '\n';
    std::istringstream t(train.to_string());
    for (std::string line; std::getline(t, line);) os << "train." << line << '\n';
    return os.str();
  }
};

struct ExperimentReport {
  ExperimentConfig config;
  std::uint64_t hmm_seed = 0, data_seed = 0, train_seed = 0;
  std::size_t gold_train_tokens = 0, dev_tokens = 0, test_tokens = 0, projected_tokens = 0;
  double acc_annotated = 0.0;
  double acc_projected = 0.0;
  double acc_debias = 0.0;
  double agreement = 0.0;
  std::vector<bool> eligible;
  Matrix learned_A;
  Stochastic channel;
  TagSet tagset;

  std::string to_text() const {
    std::ostringstream os;
    os << "# config\n" << config.to_string() << "\n# derived seeds\nhmm_seed = " << hmm_seed << "\ndata_seed = " << data_seed
       << "\ntrain_seed = " << train_seed << "\n\n";
    os << "# data\ngold_train_tokens = " << gold_train_tokens << "\ndev_tokens = " << dev_tokens
       << "\ntest_tokens = " << test_tokens << "\nprojected_tokens = " << projected_tokens << "\n\n";
    os << std::fixed << std::setprecision(4);
    os << "# test accuracy\nannotated = " << acc_annotated << "\nprojected = " << acc_projected
       << "\ndebias = " << acc_debias << "\nchannel_agreement = " << agreement << '\n';
    return os.str();
  }

  std::string to_csv() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(6);
    os << "model,test_accuracy\nannotated," << acc_annotated << "\nprojected," << acc_projected << "\ndebias," << acc_debias
       << "\n\nmetric,value\nchannel_agreement," << agreement << "\n\n";
    export_bias(os, learned_A, tagset, tagset);
    return os.str();
  }
};

namespace detail {

inline constexpr std::uint32_t kHmmStream = 11;
inline constexpr std::uint32_t kDataStream = 12;
inline constexpr std::uint32_t kTrainStream = 13;

}  // namespace detail

inline ExperimentReport run_recovery_experiment(const ExperimentConfig& cfg) {
  ExperimentReport rep;
  rep.config = cfg;
  rep.hmm_seed = detail::derived_seed(cfg.seed, detail::kHmmStream);
  rep.data_seed = detail::derived_seed(cfg.seed, detail::kDataStream);
  rep.train_seed = detail::derived_seed(cfg.seed, detail::kTrainStream);

  const HMMSpec hmm = make_pos_like_hmm(cfg.K, cfg.V, cfg.ambiguity, cfg.concentration, cfg.shared_per_pair, cfg.min_len,
                                        cfg.max_len, rep.hmm_seed);
  const NoiseChannel channel = make_confusion_channel(cfg.K, cfg.diagonal, cfg.primary_share, cfg.p_unaligned, cfg.channel_shape);
  rep.channel = channel.C;
  rep.tagset = hmm.tagset();

  std::mt19937_64 data_rng(rep.data_seed);
  const GoldCorpus gold_all = sample_tokens(hmm, cfg.gold_train_tokens + cfg.eval_tokens, data_rng);
  auto [gold_train, rest] = take_first_tokens(gold_all, cfg.gold_train_tokens);
  auto [dev, test] = split_dev_test(rest);
  const GoldCorpus proj_gold = sample_tokens(hmm, cfg.projected_tokens, data_rng);
  const ProjectedCorpus projected = corrupt_corpus(proj_gold, channel, rep.tagset, data_rng);
  rep.gold_train_tokens = gold_train.token_count();
  rep.dev_tokens = dev.token_count();
  rep.test_tokens = test.token_count();
  rep.projected_tokens = projected.token_count();

  std::vector<std::size_t> tag_counts(cfg.K, 0);
  for (const auto& s : proj_gold.sentences)
    for (auto y : s.tags) ++tag_counts[y];
  rep.eligible.resize(cfg.K);
  for (std::size_t k = 0; k < cfg.K; ++k) rep.eligible[k] = tag_counts[k] >= cfg.min_eligible_count;

  TrainConfig tc = cfg.train;
  tc.seed = rep.train_seed;
  auto test_accuracy = [&](const Tagger& m) { return token_accuracy(predict_all(m, test), gold_tags(test)); };

  // (a) annotated only
  {
    TrainConfig a = tc;
    a.stage2_epochs = 0;
    auto [m, report] = train_tagger(gold_train, dev, nullptr, a);
    rep.acc_annotated = test_accuracy(m);
  }
  // (b) projected only, trained directly on the projected labels
  {
    std::vector<std::vector<std::string>> seqs;
    for (const auto& s : projected.sentences) seqs.push_back(s.tokens);
    Tagger m;
    m.vocab = build_vocab(seqs, tc.min_count);
    m.gold_tags = rep.tagset;
    m.proj_tags = rep.tagset;
    const auto proj_ex = encode_corpus(projected, m.vocab);
    const auto dev_ex = encode_corpus(dev, m.vocab);
    const ModelDims dims{m.vocab.size(), tc.d_e, tc.d_h, cfg.K, cfg.K};
    auto [params, report] = train_projected_direct(init_params(dims, tc.seed), proj_ex, dev_ex, tc);
    m.params = std::move(params);
    rep.acc_projected = test_accuracy(m);
  }
  // (c) two-stage debias
  {
    auto [m, report] = train_tagger(gold_train, dev, &projected, tc);
    rep.acc_debias = test_accuracy(m);
    rep.learned_A = m.params.A;
    rep.agreement = channel_agreement(rep.learned_A, channel.C, rep.eligible);
  }
  return rep;
}

}  // namespace debias
