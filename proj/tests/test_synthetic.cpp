#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "debias/synthetic.hpp"

using namespace debias;

namespace {

// Power iteration on the transition matrix.
Distribution stationary(const Stochastic& T) {
  const std::size_t K = T.size();
  Distribution pi(K, 1.0 / static_cast<double>(K));
  for (int it = 0; it < 10000; ++it) {
    Distribution next(K, 0.0);
    for (std::size_t i = 0; i < K; ++i)
      for (std::size_t j = 0; j < K; ++j) next[j] += pi[i] * T[i][j];
    pi = next;
  }
  return pi;
}

HMMSpec three_tag_hmm() {
  HMMSpec s;
  s.K = 3;
  s.V = 6;
  s.trans = {{0.1, 0.6, 0.3}, {0.5, 0.2, 0.3}, {0.3, 0.3, 0.4}};
  s.emit = {{0.5, 0.5, 0, 0, 0, 0}, {0, 0, 0.5, 0.5, 0, 0}, {0, 0, 0, 0, 0.5, 0.5}};
  s.start = stationary(s.trans);
  s.min_len = 3;
  s.max_len = 12;
  return s;
}

}  // namespace

TEST(SampleCorpus, DeterministicGivenSeed) {
  const auto hmm = make_pos_like_hmm(6, 200, 0.4, 0.5, 8, 5, 15, 3);
  const auto a = sample_corpus(hmm, 50, 7), b = sample_corpus(hmm, 50, 7), c = sample_corpus(hmm, 50, 8);
  EXPECT_EQ(a.sentences, b.sentences);
  EXPECT_NE(a.sentences, c.sentences);
  for (const auto& s : a.sentences) {
    EXPECT_GE(s.size(), 5u);
    EXPECT_LE(s.size(), 15u);
  }
}

TEST(SampleCorpus, AbsorbingChainRepeatsTheStartTag) {
  HMMSpec s = three_tag_hmm();
  s.trans = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  s.start = {0, 0, 1};
  for (const auto& sent : sample_corpus(s, 30, 1).sentences)
    for (auto y : sent.tags) EXPECT_EQ(y, 2u);
}

TEST(SampleCorpus, TagUnigramMatchesStationaryDistribution) {
  const HMMSpec s = three_tag_hmm();
  const Distribution pi = stationary(s.trans);
  std::mt19937_64 rng(5);
  const auto c = sample_tokens(s, 10000, rng);
  std::vector<double> freq(3, 0.0);
  for (const auto& sent : c.sentences)
    for (auto y : sent.tags) freq[y] += 1.0;
  const double n = static_cast<double>(c.token_count());
  double tv = 0.0;
  for (std::size_t k = 0; k < 3; ++k) tv += std::abs(freq[k] / n - pi[k]);
  EXPECT_LE(tv / 2.0, 0.03);
}

TEST(PosLikeHmm, RowsAreSimplexPoints) {
  const auto hmm = make_pos_like_hmm(6, 200, 0.4, 0.5, 8, 5, 15, 1);
  EXPECT_NO_THROW(hmm.validate());
  for (const auto& row : hmm.emit) {
    EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), 1.0, 1e-9);
    for (double p : row) EXPECT_GE(p, 0.0);
  }
  EXPECT_THROW(make_pos_like_hmm(6, 20, 0.4, 0.5, 8, 5, 15, 1), DataError);
}

TEST(Corrupt, IdentityChannelIsTheIdentity) {
  const auto hmm = make_pos_like_hmm(6, 200, 0.4, 0.5, 8, 5, 15, 2);
  const auto ch = identity_channel(6);
  for (const auto& s : sample_corpus(hmm, 40, 3).sentences) {
    const auto p = corrupt(s, ch, std::uint64_t{9});
    ASSERT_EQ(p.labels.size(), s.size());
    for (std::size_t t = 0; t < s.size(); ++t) {
      ASSERT_TRUE(is_hard(p.labels[t]));
      EXPECT_EQ(std::get<HardLabel>(p.labels[t]).tag, s.tags[t]);
    }
  }
}

TEST(Corrupt, AlwaysUnalignedGivesSoftDistributions) {
  const auto hmm = make_pos_like_hmm(6, 200, 0.4, 0.5, 8, 5, 15, 2);
  auto ch = make_confusion_channel(6, 0.7, 2.0 / 3.0, 1.0);
  for (const auto& s : sample_corpus(hmm, 40, 4).sentences) {
    const auto p = corrupt(s, ch, std::uint64_t{1});
    for (const auto& l : p.labels) {
      ASSERT_FALSE(is_hard(l));
      const auto& d = std::get<SoftLabel>(l).dist;
      EXPECT_NEAR(std::accumulate(d.begin(), d.end(), 0.0), 1.0, 1e-9);
    }
  }
}

TEST(Corrupt, DeterministicGivenSeed) {
  const auto hmm = make_pos_like_hmm(6, 200, 0.4, 0.5, 8, 5, 15, 2);
  const auto ch = make_confusion_channel(6, 0.7, 2.0 / 3.0, 0.15);
  const auto s = sample_corpus(hmm, 1, 4).sentences[0];
  const auto a = corrupt(s, ch, std::uint64_t{5}), b = corrupt(s, ch, std::uint64_t{5});
  for (std::size_t t = 0; t < s.size(); ++t)
    EXPECT_EQ(label_distribution(a.labels[t], 6), label_distribution(b.labels[t], 6));
}

TEST(Corrupt, EmpiricalConfusionApproachesChannel) {
  for (auto shape : {ChannelShape::cyclic, ChannelShape::sink}) {
    const auto hmm = make_pos_like_hmm(6, 200, 0.4, 0.5, 8, 5, 15, 6);
    const auto ch = make_confusion_channel(6, 0.7, 2.0 / 3.0, 0.0, shape);
    std::mt19937_64 rng(12);
    const auto gold = sample_tokens(hmm, 50000, rng);
    const auto proj = corrupt_corpus(gold, ch, hmm.tagset(), rng);
    std::vector<std::vector<double>> counts(6, std::vector<double>(6, 0.0));
    for (std::size_t s = 0; s < gold.size(); ++s)
      for (std::size_t t = 0; t < gold.sentences[s].size(); ++t)
        counts[gold.sentences[s].tags[t]][std::get<HardLabel>(proj.sentences[s].labels[t]).tag] += 1.0;
    for (std::size_t i = 0; i < 6; ++i) {
      const double row = std::accumulate(counts[i].begin(), counts[i].end(), 0.0);
      ASSERT_GT(row, 0.0);
      for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(counts[i][j] / row, ch.C[i][j], 0.02) << i << "," << j;
    }
  }
}

TEST(Channel, ShapesAreDiagonallyDominant) {
  for (auto shape : {ChannelShape::cyclic, ChannelShape::sink}) {
    const auto ch = make_confusion_channel(6, 0.7, 2.0 / 3.0, 0.15, shape);
    for (std::size_t i = 0; i < 6; ++i) {
      EXPECT_DOUBLE_EQ(ch.C[i][i], 0.7);
      std::size_t nonzero = 0;
      for (double p : ch.C[i]) nonzero += p > 0.0;
      EXPECT_LE(nonzero, 3u);
    }
  }
  EXPECT_THROW(make_confusion_channel(2, 0.7, 0.5, 0.1), DataError);
}

TEST(ChannelAgreement, ExactAndShiftInvariant) {
  const auto ch = make_confusion_channel(6, 0.7, 2.0 / 3.0, 0.15);
  Matrix A(6, 6);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = ch.C[i][j];
  EXPECT_DOUBLE_EQ(channel_agreement(A, ch.C), 1.0);
  Matrix shifted = A;
  for (Eigen::Index i = 0; i < 6; ++i) shifted.row(i).array() += static_cast<double>(i) * 3.0 - 7.0;
  EXPECT_DOUBLE_EQ(channel_agreement(shifted, ch.C), 1.0);

  std::vector<bool> eligible(6, true);
  eligible[0] = false;
  Matrix wrong = A;
  wrong(0, 0) = -1.0;
  EXPECT_DOUBLE_EQ(channel_agreement(wrong, ch.C, eligible), 1.0);
  EXPECT_NEAR(channel_agreement(wrong, ch.C), 5.0 / 6.0, 1e-15);
  EXPECT_THROW(channel_agreement(Matrix::Zero(5, 6), ch.C), ShapeError);
  EXPECT_THROW(channel_agreement(A, ch.C, std::vector<bool>(6, false)), DataError);
}

TEST(ChannelAgreement, RandomMatricesAgreeOneTimeInSix) {
  const auto ch = make_confusion_channel(6, 0.7, 2.0 / 3.0, 0.15);
  std::mt19937_64 rng(99);
  std::normal_distribution<double> n(0.0, 1.0);
  double total = 0.0;
  const int trials = 4000;
  for (int k = 0; k < trials; ++k) {
    Matrix A(6, 6);
    for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = n(rng);
    total += channel_agreement(A, ch.C);
  }
  // standard error of the mean is about 0.0024
  EXPECT_NEAR(total / trials, 1.0 / 6.0, 0.01);
}

TEST(ExperimentConfig, KeysRoundTripThroughText) {
  ExperimentConfig c;
  c.set("seed", "9");
  c.set("channel_shape", "cyclic");
  c.set("train.d_h", "16");
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.channel_shape, ChannelShape::cyclic);
  EXPECT_EQ(c.train.d_h, 16u);
  EXPECT_THROW(c.set("bogus", "1"), ConfigError);
  EXPECT_THROW(c.set("train.bogus", "1"), ConfigError);
  std::istringstream in(c.to_string());
  ExperimentConfig d;
  d.apply(parse_key_values(in));
  EXPECT_EQ(d.to_string(), c.to_string());
}

TEST(RecoveryExperiment, SmallRunIsDeterministic) {
  ExperimentConfig c;
  c.V = 100;
  c.gold_train_tokens = 200;
  c.eval_tokens = 400;
  c.projected_tokens = 1000;
  c.min_eligible_count = 10;
  c.train.d_e = c.train.d_h = 8;
  c.train.stage1_epochs = 2;
  c.train.stage2_epochs = 1;
  c.train.proj_per_gold = 2;
  const auto a = run_recovery_experiment(c), b = run_recovery_experiment(c);
  EXPECT_EQ(a.to_text(), b.to_text());
  EXPECT_EQ(a.to_csv(), b.to_csv());
  EXPECT_GE(a.gold_train_tokens, 200u);
  EXPECT_GE(a.projected_tokens, 1000u);
  for (double acc : {a.acc_annotated, a.acc_projected, a.acc_debias}) {
    EXPECT_GE(acc, 0.0);
    EXPECT_LE(acc, 1.0);
  }
  EXPECT_NE(a.to_text().find("hmm_seed"), std::string::npos);
}
