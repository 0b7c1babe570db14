#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "debias/evaluation.hpp"
#include "test_util.hpp"

using namespace debias;

TEST(TokenAccuracy, BasicCases) {
  const TagSequences nvn{{0, 1, 0}}, nnn{{0, 0, 0}};
  EXPECT_DOUBLE_EQ(token_accuracy(nnn, nnn), 1.0);
  EXPECT_NEAR(token_accuracy(nvn, nnn), 2.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(token_accuracy({{1}}, {{0}}), 0.0);
}

TEST(TokenAccuracy, Errors) {
  EXPECT_THROW(token_accuracy({{0, 1}}, {{0}}), ShapeError);
  EXPECT_THROW(token_accuracy({{0}}, {{0}, {1}}), ShapeError);
  EXPECT_THROW(token_accuracy({}, {}), DataError);
}

TEST(TokenAccuracy, SentenceOrderIsIrrelevant) {
  const TagSequences pred{{0, 1}, {2}, {1, 1, 0}}, gold{{0, 0}, {2}, {1, 2, 0}};
  const TagSequences pred_r{{1, 1, 0}, {2}, {0, 1}}, gold_r{{1, 2, 0}, {2}, {0, 0}};
  EXPECT_DOUBLE_EQ(token_accuracy(pred, gold), token_accuracy(pred_r, gold_r));
}

TEST(Confusion, CellsAndTotals) {
  const TagSequences pred{{0, 1, 1}, {2}}, gold{{0, 0, 1}, {2}};
  const auto m = confusion(pred, gold, 3);
  EXPECT_EQ(m[0][0], 1u);
  EXPECT_EQ(m[0][1], 1u);
  EXPECT_EQ(m[1][1], 1u);
  EXPECT_EQ(m[2][2], 1u);
  const auto empty = confusion({}, {}, 3);
  for (const auto& row : empty)
    for (auto c : row) EXPECT_EQ(c, 0u);
  EXPECT_THROW(confusion({{5}}, {{0}}, 3), ShapeError);
}

TEST(Confusion, TraceOverTotalEqualsAccuracy) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> tag(0, 4), len(1, 9);
  for (int trial = 0; trial < 200; ++trial) {
    TagSequences pred, gold;
    for (int s = 0; s < 5; ++s) {
      const auto n = len(rng);
      std::vector<TagId> p, g;
      for (std::size_t t = 0; t < n; ++t) p.push_back(tag(rng)), g.push_back(rng() % 3 ? p.back() : tag(rng));
      pred.push_back(p), gold.push_back(g);
    }
    const auto m = confusion(pred, gold, 5);
    std::size_t trace = 0, total = 0;
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) total += m[i][j], trace += i == j ? m[i][j] : 0;
    EXPECT_EQ(static_cast<double>(trace) / static_cast<double>(total), token_accuracy(pred, gold));
    EXPECT_DOUBLE_EQ(token_accuracy(gold, gold), 1.0);
  }
}

TEST(EvalReport, PrecisionRecallAndFormats) {
  const TagSet tags({"N", "V", "D"});
  const TagSequences pred{{0, 1, 1, 2}}, gold{{0, 0, 1, 2}};
  const auto r = evaluate(pred, gold, tags);
  EXPECT_EQ(r.token_count, 4u);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.75);
  EXPECT_DOUBLE_EQ(r.precision[0], 1.0);
  EXPECT_DOUBLE_EQ(r.recall[0], 0.5);
  EXPECT_DOUBLE_EQ(r.precision[1], 0.5);
  EXPECT_DOUBLE_EQ(r.recall[1], 1.0);
  EXPECT_NE(r.to_text().find("accuracy  0.7500"), std::string::npos);
  const auto csv = r.to_csv();
  EXPECT_NE(csv.find("accuracy,0.750000"), std::string::npos);
  EXPECT_NE(csv.find("gold\\predicted,N,V,D"), std::string::npos);
  EXPECT_NE(csv.find("N,1,1,0"), std::string::npos);
}

TEST(BiasExport, IdentityInitialisedMatrix) {
  const TagSet tags({"N", "V"});
  std::ostringstream os;
  export_bias(os, Matrix::Identity(2, 2), tags, tags);
  EXPECT_EQ(os.str(), "gold\\projected,N,V\nN,1.000000,0.000000\nV,0.000000,1.000000\n");
}

TEST(BiasExport, RectangularShapeAndRoundTrip) {
  const TagSet gold({"NOUN", "VERB", "."}), proj({"NN", "NNS", "VB", "VBD", ",", "X"});
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  Matrix A(3, 6);
  for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = u(rng);
  std::stringstream ss;
  export_bias(ss, A, gold, proj);
  const auto t = import_bias(ss);
  EXPECT_EQ(t.gold, gold);
  EXPECT_EQ(t.proj, proj);
  ASSERT_EQ(t.A.rows(), 3);
  ASSERT_EQ(t.A.cols(), 6);
  EXPECT_LE((t.A - A).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_THROW(export_bias(ss, Matrix::Zero(6, 3), gold, proj), ShapeError);
}

TEST(BiasExport, MalformedCsvIsRejected) {
  std::istringstream bad("gold\\projected,N,V\nN,1.0\n");
  EXPECT_THROW(import_bias(bad), ParseError);
  std::istringstream nan("gold\\projected,N\nN,abc\n");
  EXPECT_THROW(import_bias(nan), ParseError);
}

TEST(Csv, QuotingRoundTrip) {
  EXPECT_EQ(detail::csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(detail::split_csv_line("\"a,b\",\"q\"\"x\",c", 1), (std::vector<std::string>{"a,b", "q\"x", "c"}));
}
