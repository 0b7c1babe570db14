#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "debias/model.hpp"
#include "debias/network.hpp"

namespace debias {

struct GradCheckOptions {
  double step = 1e-4;
  double rel_tol = 1e-4;
  double abs_tol = 1e-7;
};

struct GradCheckResult {
  std::size_t checked = 0;
  std::size_t failures = 0;
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;  // over components outside the absolute floor
  std::string worst;           // "array[index]: analytic vs numeric"

  bool ok() const noexcept { return failures == 0; }
};

// Compares every analytic partial derivative of joint_loss with a central
// finite difference of the loss itself.
inline GradCheckResult check_gradients(ModelParams p, std::span<const TaggedExample> gold,
                                       std::span<const ProjectedExample> proj, ProjectedHead head = ProjectedHead::bias,
                                       const GradCheckOptions& opt = {}) {
  const Gradients g = gradients(p, gold, proj, head);
  static const char* names[] = {"E", "fwd.W", "fwd.U", "fwd.b", "bwd.W", "bwd.U", "bwd.b", "W_fwd", "W_bwd", "b", "A"};
  GradCheckResult res;
  std::size_t array_index = 0;
  auto check = [&](auto& param, const auto& analytic) {
    for (Eigen::Index k = 0; k < param.size(); ++k) {
      double& x = param.data()[k];
      const double saved = x;
      x = saved + opt.step;
      const double up = joint_loss(p, gold, proj, head);
      x = saved - opt.step;
      const double down = joint_loss(p, gold, proj, head);
      x = saved;
      const double numeric = (up - down) / (2.0 * opt.step);
      const double a = analytic.data()[k];
      const double diff = std::abs(a - numeric);
      ++res.checked;
      res.max_abs_error = std::max(res.max_abs_error, diff);
      if (diff <= opt.abs_tol) continue;
      const double rel = diff / std::max(std::abs(a), std::abs(numeric));
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst = std::string(names[array_index]) + "[" + std::to_string(k) + "]: analytic " + std::to_string(a) +
                    " vs numeric " + std::to_string(numeric);
      }
      if (rel > opt.rel_tol) ++res.failures;
    }
    ++array_index;
  };
  for_each_array(check, p, g.d);
  return res;
}

// A small random problem for gradient checking: random parameters (wider than
// the training init so every path carries signal), random A, and a mix of
// hard and soft projected labels.
struct GradCheckProblem {
  ModelParams params;
  std::vector<TaggedExample> gold;
  std::vector<ProjectedExample> proj;
};

inline GradCheckProblem random_gradcheck_problem(std::uint64_t seed, std::size_t gold_tags = 3, std::size_t proj_tags = 3,
                                                 std::size_t embed = 4, std::size_t hidden = 4, std::size_t vocab = 8,
                                                 std::size_t max_len = 6) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> weight(-0.6, 0.6), unit(0.0, 1.0);
  GradCheckProblem prob{ModelParams::zeros({vocab, embed, hidden, gold_tags, proj_tags}), {}, {}};
  for_each_array(
      [&](auto& m) {
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = weight(rng);
      },
      prob.params);
  prob.params.A *= 2.0;

  std::uniform_int_distribution<std::size_t> len(1, max_len), tok(0, vocab - 1), gtag(0, gold_tags - 1),
      ptag(0, proj_tags - 1);
  for (int s = 0; s < 2; ++s) {
    TaggedExample ex;
    const auto n = len(rng);
    for (std::size_t t = 0; t < n; ++t) ex.ids.push_back(tok(rng)), ex.tags.push_back(gtag(rng));
    prob.gold.push_back(std::move(ex));
  }
  for (int s = 0; s < 2; ++s) {
    ProjectedExample ex;
    const auto n = len(rng);
    ex.targets = Matrix::Zero(static_cast<Eigen::Index>(proj_tags), static_cast<Eigen::Index>(n));
    for (std::size_t t = 0; t < n; ++t) {
      ex.ids.push_back(tok(rng));
      const auto col = static_cast<Eigen::Index>(t);
      if (unit(rng) < 0.5) {
        ex.targets(static_cast<Eigen::Index>(ptag(rng)), col) = 1.0;
      } else {
        for (Eigen::Index j = 0; j < ex.targets.rows(); ++j) ex.targets(j, col) = unit(rng) + 0.05;
        ex.targets.col(col) /= ex.targets.col(col).sum();
      }
    }
    prob.proj.push_back(std::move(ex));
  }
  return prob;
}

}  // namespace debias
