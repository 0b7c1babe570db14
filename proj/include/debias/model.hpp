#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "debias/errors.hpp"
#include "debias/tagset.hpp"

namespace debias {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ModelDims {
  std::size_t vocab = 0;
  std::size_t embed = 0;
  std::size_t hidden = 0;
  std::size_t gold_tags = 0;
  std::size_t proj_tags = 0;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

// One LSTM direction. Gate blocks are stacked in the order
// input, forget, output, candidate (each `hidden` rows).
struct LstmParams {
  Matrix W;  // 4h x e
  Matrix U;  // 4h x h
  Vector b;  // 4h

  std::size_t hidden() const noexcept { return static_cast<std::size_t>(U.cols()); }
  std::size_t input() const noexcept { return static_cast<std::size_t>(W.cols()); }

  static LstmParams zeros(std::size_t embed, std::size_t hidden) {
    const auto e = static_cast<Eigen::Index>(embed), h = static_cast<Eigen::Index>(hidden);
    return {Matrix::Zero(4 * h, e), Matrix::Zero(4 * h, h), Vector::Zero(4 * h)};
  }
};

enum class Gate : Eigen::Index { input = 0, forget = 1, output = 2, candidate = 3 };

// Everything trainable. `A` maps gold-tag probabilities to projected-tag
// logits: rows are gold tags, columns projected tags.
struct ModelParams {
  RowMatrix E;  // vocab x embed
  LstmParams fwd;
  LstmParams bwd;
  Matrix W_fwd;  // K_gold x hidden
  Matrix W_bwd;  // K_gold x hidden
  Vector b;      // K_gold
  Matrix A;      // K_gold x K_proj

  ModelDims dims() const {
    return {static_cast<std::size_t>(E.rows()), static_cast<std::size_t>(E.cols()), fwd.hidden(),
            static_cast<std::size_t>(W_fwd.rows()), static_cast<std::size_t>(A.cols())};
  }

  static ModelParams zeros(const ModelDims& d) {
    const auto V = static_cast<Eigen::Index>(d.vocab), e = static_cast<Eigen::Index>(d.embed),
               h = static_cast<Eigen::Index>(d.hidden), kg = static_cast<Eigen::Index>(d.gold_tags),
               kp = static_cast<Eigen::Index>(d.proj_tags);
    return {RowMatrix::Zero(V, e),   LstmParams::zeros(d.embed, d.hidden), LstmParams::zeros(d.embed, d.hidden),
            Matrix::Zero(kg, h),     Matrix::Zero(kg, h),                  Vector::Zero(kg),
            Matrix::Zero(kg, kp)};
  }
};

// Visits every dense array of one or more same-shaped parameter sets, in a
// fixed order: E, fwd.{W,U,b}, bwd.{W,U,b}, W_fwd, W_bwd, b, A.
template <typename Fn, typename... Ps>
void for_each_array(Fn&& fn, Ps&... ps) {
  fn(ps.E...);
  fn(ps.fwd.W...);
  fn(ps.fwd.U...);
  fn(ps.fwd.b...);
  fn(ps.bwd.W...);
  fn(ps.bwd.U...);
  fn(ps.bwd.b...);
  fn(ps.W_fwd...);
  fn(ps.W_bwd...);
  fn(ps.b...);
  fn(ps.A...);
}

inline bool same_shape(const ModelParams& a, const ModelParams& b) {
  bool ok = true;
  for_each_array([&](const auto& x, const auto& y) { ok = ok && x.rows() == y.rows() && x.cols() == y.cols(); },
                 a, b);
  return ok;
}

inline bool all_finite(const ModelParams& p) {
  bool ok = true;
  for_each_array([&](const auto& x) { ok = ok && x.allFinite(); }, p);
  return ok;
}

// Bitwise equality of every array.
inline bool identical(const ModelParams& a, const ModelParams& b) {
  if (!same_shape(a, b)) return false;
  bool eq = true;
  for_each_array([&](const auto& x, const auto& y) { eq = eq && (x.array() == y.array()).all(); },
                 a, b);
  return eq;
}

inline constexpr double kInitRange = 0.08;
inline constexpr double kBiasInitGain = 1.0;

// theta ~ U[-0.08, 0.08] from a generator seeded with `seed`; A = I on the
// shared square block, zero elsewhere.
inline ModelParams init_params(const ModelDims& d, std::uint64_t seed) {
  if (d.vocab == 0 || d.embed == 0 || d.hidden == 0 || d.gold_tags == 0 || d.proj_tags == 0)
    throw ShapeError("all model dimensions must be positive");
  ModelParams p = ModelParams::zeros(d);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-kInitRange, kInitRange);
  auto fill = [&](auto& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = unif(rng);
  };
  fill(p.E);
  fill(p.fwd.W), fill(p.fwd.U), fill(p.fwd.b);
  fill(p.bwd.W), fill(p.bwd.U), fill(p.bwd.b);
  fill(p.W_fwd), fill(p.W_bwd), fill(p.b);
  const auto k = std::min(p.A.rows(), p.A.cols());
  for (Eigen::Index i = 0; i < k; ++i) p.A(i, i) = kBiasInitGain;
  return p;
}

// A trained tagger: parameters plus the symbol tables they are indexed by.
struct Tagger {
  Vocabulary vocab;
  TagSet gold_tags;
  TagSet proj_tags;
  ModelParams params;
};

}  // namespace debias
