#include <gtest/gtest.h>

#include "debias/gradcheck.hpp"
#include "debias/model.hpp"
#include "debias/network.hpp"

using namespace debias;

TEST(Gradients, MatchFiniteDifferencesOnTenSeeds) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto prob = random_gradcheck_problem(seed);
    const auto res = check_gradients(prob.params, prob.gold, prob.proj);
    EXPECT_TRUE(res.ok()) << "seed " << seed << ": " << res.failures << " failures, worst " << res.worst;
    EXPECT_GT(res.checked, 300u);
  }
}

TEST(Gradients, DirectHeadMatchesFiniteDifferences) {
  for (std::uint64_t seed = 20; seed < 23; ++seed) {
    const auto prob = random_gradcheck_problem(seed);
    const auto res = check_gradients(prob.params, prob.gold, prob.proj, ProjectedHead::direct);
    EXPECT_TRUE(res.ok()) << "seed " << seed << ": " << res.worst;
  }
}

TEST(Gradients, RectangularBiasMatchesFiniteDifferences) {
  for (std::uint64_t seed = 30; seed < 33; ++seed) {
    const auto prob = random_gradcheck_problem(seed, 3, 5);
    const auto res = check_gradients(prob.params, prob.gold, prob.proj);
    EXPECT_TRUE(res.ok()) << "seed " << seed << ": " << res.worst;
  }
}

TEST(Gradients, GoldBatchLeavesBiasUntouched) {
  const auto prob = random_gradcheck_problem(3);
  const auto g = gradients(prob.params, prob.gold, {});
  EXPECT_EQ(g.d.A, Matrix::Zero(3, 3));
  EXPECT_GT(g.d.W_fwd.norm(), 0.0);
}

TEST(Gradients, UntouchedEmbeddingRowsAreZero) {
  const auto prob = random_gradcheck_problem(4);
  const std::vector<TaggedExample> gold{{{1, 5, 1}, {0, 1, 2}}};
  const auto g = gradients(prob.params, gold, {});
  EXPECT_EQ(g.rows, (std::vector<TokenId>{1, 5}));
  for (Eigen::Index r = 0; r < g.d.E.rows(); ++r) {
    if (r == 1 || r == 5) EXPECT_GT(g.d.E.row(r).norm(), 0.0);
    else EXPECT_EQ(g.d.E.row(r).norm(), 0.0) << "row " << r;
  }
}

TEST(Gradients, ClearResetsEverything) {
  const auto prob = random_gradcheck_problem(5);
  Gradients g(prob.params.dims());
  accumulate_gradients(prob.params, prob.gold, prob.proj, g);
  EXPECT_GT(g.squared_norm(), 0.0);
  g.clear();
  EXPECT_EQ(g.squared_norm(), 0.0);
  EXPECT_TRUE(g.rows.empty());
  EXPECT_EQ(g.d.E.norm(), 0.0);
}

TEST(Gradients, ReturnedLossEqualsJointLoss) {
  const auto prob = random_gradcheck_problem(6);
  Gradients g(prob.params.dims());
  const double loss = accumulate_gradients(prob.params, prob.gold, prob.proj, g);
  EXPECT_NEAR(loss, joint_loss(prob.params, prob.gold, prob.proj), 1e-12);
}
