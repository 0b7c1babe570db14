#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "debias/corpus.hpp"
#include "debias/errors.hpp"
#include "debias/model.hpp"
#include "debias/projection.hpp"

namespace debias {

// Sentence with gold tags, tokens already mapped through the vocabulary.
struct TaggedExample {
  std::vector<TokenId> ids;
  std::vector<TagId> tags;
};

// Sentence with projected supervision; column t of `targets` is the label
// distribution of token t over the projected tagset.
struct ProjectedExample {
  std::vector<TokenId> ids;
  Matrix targets;
};

// How projected supervision reaches the tagger.
enum class ProjectedHead {
  bias,    // through the bias transformation A (the debiasing model)
  direct,  // straight against o_t; needs identical tagsets
};

inline TaggedExample encode_example(const GoldSentence& s, const Vocabulary& vocab) {
  return {vocab.encode(s.tokens), s.tags};
}

inline ProjectedExample encode_example(const ProjectedSentence& s, const Vocabulary& vocab, std::size_t proj_tags) {
  ProjectedExample ex{vocab.encode(s.tokens), Matrix(static_cast<Eigen::Index>(proj_tags), static_cast<Eigen::Index>(s.size()))};
  for (std::size_t t = 0; t < s.size(); ++t) {
    const auto d = label_distribution(s.labels[t], proj_tags);
    ex.targets.col(static_cast<Eigen::Index>(t)) = Eigen::Map<const Vector>(d.data(), static_cast<Eigen::Index>(d.size()));
  }
  return ex;
}

inline std::vector<TaggedExample> encode_corpus(const GoldCorpus& c, const Vocabulary& vocab) {
  std::vector<TaggedExample> out;
  out.reserve(c.size());
  for (const auto& s : c.sentences) out.push_back(encode_example(s, vocab));
  return out;
}

inline std::vector<ProjectedExample> encode_corpus(const ProjectedCorpus& c, const Vocabulary& vocab) {
  std::vector<ProjectedExample> out;
  out.reserve(c.size());
  for (const auto& s : c.sentences) out.push_back(encode_example(s, vocab, c.tagset.size()));
  return out;
}

// Numerically stable softmax (max-subtracted).
inline Vector softmax(const Vector& logits) {
  Vector e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

inline constexpr double kLogFloor = 1e-12;

inline double safe_log(double p) { return std::log(std::max(p, kLogFloor)); }

// Index of the largest entry; ties go to the lowest index.
inline std::size_t argmax(const Vector& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return static_cast<std::size_t>(best);
}

namespace detail {

inline Vector sigmoid(const Vector& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }

// Activated gates, stacked like the parameters: [i; f; o; g].
inline Vector activate_gates(const Vector& preact, Eigen::Index h) {
  Vector g(4 * h);
  g.head(3 * h) = sigmoid(preact.head(3 * h));
  g.tail(h) = preact.tail(h).array().tanh().matrix();
  return g;
}

struct DirectionTrace {
  Matrix gates;   // 4h x T
  Matrix c;       // h x T
  Matrix tanh_c;  // h x T
  Matrix h;       // h x T
};

struct SentenceTrace {
  Matrix X;  // e x T
  DirectionTrace fwd;
  DirectionTrace bwd;
  Matrix O;  // K_gold x T, columns are o_t
};

inline Matrix embed(const ModelParams& p, std::span<const TokenId> ids) {
  Matrix X(p.E.cols(), static_cast<Eigen::Index>(ids.size()));
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] >= static_cast<std::size_t>(p.E.rows())) throw ShapeError("token id out of vocabulary range");
    X.col(static_cast<Eigen::Index>(t)) = p.E.row(static_cast<Eigen::Index>(ids[t])).transpose();
  }
  return X;
}

// Runs one direction over all columns of X. `reverse` walks right to left, so
// the state at t depends on t+1.
inline DirectionTrace run_direction(const LstmParams& p, const Matrix& X, bool reverse) {
  const Eigen::Index h = p.U.cols(), T = X.cols();
  DirectionTrace tr{Matrix(4 * h, T), Matrix(h, T), Matrix(h, T), Matrix(h, T)};
  Matrix pre = p.W * X;
  pre.colwise() += p.b;
  for (Eigen::Index s = 0; s < T; ++s) {
    const Eigen::Index t = reverse ? T - 1 - s : s;
    Vector a = pre.col(t);
    Vector c_prev = Vector::Zero(h);
    if (s > 0) {
      const Eigen::Index prev = reverse ? t + 1 : t - 1;
      a.noalias() += p.U * tr.h.col(prev);
      c_prev = tr.c.col(prev);
    }
    tr.gates.col(t) = activate_gates(a, h);
    const auto g = tr.gates.col(t);
    tr.c.col(t) = g.segment(h, h).cwiseProduct(c_prev) + g.head(h).cwiseProduct(g.tail(h));
    tr.tanh_c.col(t) = tr.c.col(t).array().tanh().matrix();
    tr.h.col(t) = g.segment(2 * h, h).cwiseProduct(tr.tanh_c.col(t));
  }
  return tr;
}

// Backpropagates dH (gradient w.r.t. every h_t of this direction) through
// time. Accumulates parameter gradients into `g` and returns dL/dX.
inline Matrix backprop_direction(const LstmParams& p, LstmParams& g, const Matrix& X, const DirectionTrace& tr,
                                 const Matrix& dH, bool reverse) {
  const Eigen::Index h = p.U.cols(), T = X.cols();
  Matrix dPre(4 * h, T);
  Matrix Hprev = Matrix::Zero(h, T);
  Vector dh_next = Vector::Zero(h), dc_next = Vector::Zero(h);
  for (Eigen::Index s = T - 1; s >= 0; --s) {
    const Eigen::Index t = reverse ? T - 1 - s : s;
    const bool has_prev = s > 0;
    const Eigen::Index prev = reverse ? t + 1 : t - 1;
    const auto gates = tr.gates.col(t);
    const auto i = gates.head(h).array(), f = gates.segment(h, h).array(), o = gates.segment(2 * h, h).array(),
               cand = gates.tail(h).array();
    const auto tc = tr.tanh_c.col(t).array();

    const Vector dh = dH.col(t) + dh_next;
    const Vector dc = dc_next.array() + dh.array() * o * (1.0 - tc.square());
    auto col = dPre.col(t);
    col.head(h) = (dc.array() * cand * i * (1.0 - i)).matrix();
    if (has_prev) {
      col.segment(h, h) = (dc.array() * tr.c.col(prev).array() * f * (1.0 - f)).matrix();
      Hprev.col(t) = tr.h.col(prev);
    } else {
      col.segment(h, h).setZero();
    }
    col.segment(2 * h, h) = (dh.array() * tc * o * (1.0 - o)).matrix();
    col.tail(h) = (dc.array() * i * (1.0 - cand.square())).matrix();

    dc_next = dc.array() * f;
    dh_next.noalias() = p.U.transpose() * col;
  }
  g.W.noalias() += dPre * X.transpose();
  g.U.noalias() += dPre * Hprev.transpose();
  g.b += dPre.rowwise().sum();
  return p.W.transpose() * dPre;
}

inline SentenceTrace forward(const ModelParams& p, std::span<const TokenId> ids) {
  if (ids.empty()) throw DataError("cannot run the tagger on an empty sentence");
  SentenceTrace tr;
  tr.X = embed(p, ids);
  tr.fwd = run_direction(p.fwd, tr.X, false);
  tr.bwd = run_direction(p.bwd, tr.X, true);
  Matrix Z = p.W_fwd * tr.fwd.h + p.W_bwd * tr.bwd.h;
  Z.colwise() += p.b;
  tr.O.resize(Z.rows(), Z.cols());
  for (Eigen::Index t = 0; t < Z.cols(); ++t) tr.O.col(t) = softmax(Z.col(t));
  return tr;
}

}  // namespace detail

// Gradients of the joint loss, shaped like ModelParams. Only the embedding
// rows listed in `rows` can be nonzero.
struct Gradients {
  ModelParams d;
  std::vector<TokenId> rows;

  Gradients() = default;
  explicit Gradients(const ModelDims& dims) : d(ModelParams::zeros(dims)) {}

  void clear() {
    for (auto r : rows) d.E.row(static_cast<Eigen::Index>(r)).setZero();
    rows.clear();
    auto zero = [](auto& m) { m.setZero(); };
    zero(d.fwd.W), zero(d.fwd.U), zero(d.fwd.b);
    zero(d.bwd.W), zero(d.bwd.U), zero(d.bwd.b);
    zero(d.W_fwd), zero(d.W_bwd), zero(d.b), zero(d.A);
  }

  void touch(TokenId row) {
    auto it = std::lower_bound(rows.begin(), rows.end(), row);
    if (it == rows.end() || *it != row) rows.insert(it, row);
  }

  double squared_norm() const {
    double s = 0.0;
    for (auto r : rows) s += d.E.row(static_cast<Eigen::Index>(r)).squaredNorm();
    auto add = [&](const auto& m) { s += m.squaredNorm(); };
    add(d.fwd.W), add(d.fwd.U), add(d.fwd.b);
    add(d.bwd.W), add(d.bwd.U), add(d.bwd.b);
    add(d.W_fwd), add(d.W_bwd), add(d.b), add(d.A);
    return s;
  }

  bool all_finite() const { return std::isfinite(squared_norm()); }
};

// ---------------------------------------------------------------------------
// Single-step and per-position operations

inline std::pair<Vector, Vector> lstm_step(const LstmParams& p, const Vector& x, const Vector& h_prev, const Vector& c_prev) {
  const Eigen::Index h = p.U.cols();
  if (x.size() != p.W.cols() || h_prev.size() != h || c_prev.size() != h || p.W.rows() != 4 * h || p.b.size() != 4 * h)
    throw ShapeError("lstm_step: dimension mismatch");
  const Vector g = detail::activate_gates(p.W * x + p.U * h_prev + p.b, h);
  Vector c = g.segment(h, h).cwiseProduct(c_prev) + g.head(h).cwiseProduct(g.tail(h));
  Vector hn = g.segment(2 * h, h).cwiseProduct(c.array().tanh().matrix());
  return {std::move(hn), std::move(c)};
}

// (h_fwd_t, h_bwd_t) for every position.
inline std::vector<std::pair<Vector, Vector>> encode(const ModelParams& p, std::span<const TokenId> ids) {
  if (ids.empty()) throw DataError("cannot encode an empty sentence");
  const Matrix X = detail::embed(p, ids);
  const auto f = detail::run_direction(p.fwd, X, false);
  const auto b = detail::run_direction(p.bwd, X, true);
  std::vector<std::pair<Vector, Vector>> out;
  out.reserve(ids.size());
  for (Eigen::Index t = 0; t < X.cols(); ++t) out.emplace_back(f.h.col(t), b.h.col(t));
  return out;
}

// o_t = softmax(W_fwd h_fwd + W_bwd h_bwd + b).
inline Vector output_dist(const ModelParams& p, const Vector& h_fwd, const Vector& h_bwd) {
  return softmax(p.W_fwd * h_fwd + p.W_bwd * h_bwd + p.b);
}

// Distribution over projected tags: softmax_j(sum_i A[i][j] o[i]).
inline Vector bias_dist(const Matrix& A, const Vector& o) {
  if (A.rows() != o.size()) throw ShapeError("bias_dist: A has " + std::to_string(A.rows()) + " rows, o has " + std::to_string(o.size()) + " entries");
  return softmax(A.transpose() * o);
}

// Output distributions o_t for every token (columns).
inline Matrix tag_distributions(const ModelParams& p, std::span<const TokenId> ids) { return detail::forward(p, ids).O; }

// Gold-tag argmax per token. A is not consulted.
inline std::vector<TagId> predict(const ModelParams& p, std::span<const TokenId> ids) {
  const Matrix O = tag_distributions(p, ids);
  std::vector<TagId> out(static_cast<std::size_t>(O.cols()));
  for (Eigen::Index t = 0; t < O.cols(); ++t) out[static_cast<std::size_t>(t)] = argmax(O.col(t));
  return out;
}

inline std::vector<TagId> predict(const Tagger& m, const std::vector<std::string>& tokens) {
  const auto ids = m.vocab.encode(tokens);
  return predict(m.params, ids);
}

// ---------------------------------------------------------------------------
// Losses

struct LossSum {
  double loss = 0.0;
  std::size_t tokens = 0;
};

namespace detail {

inline void check_tags(const ModelParams& p, const TaggedExample& ex) {
  if (ex.ids.size() != ex.tags.size()) throw ShapeError("token and tag counts differ");
  for (auto y : ex.tags)
    if (y >= static_cast<std::size_t>(p.W_fwd.rows())) throw ShapeError("gold tag index out of range");
}

inline void check_targets(const ModelParams& p, const ProjectedExample& ex, ProjectedHead head) {
  const Eigen::Index k = head == ProjectedHead::bias ? p.A.cols() : p.W_fwd.rows();
  if (ex.targets.rows() != k || ex.targets.cols() != static_cast<Eigen::Index>(ex.ids.size()))
    throw ShapeError("projected targets have the wrong shape");
}

// Per-token cross-entropy -sum_j y_j log q_j, skipping zero targets.
inline double cross_entropy(const Vector& target, const Vector& q) {
  double l = 0.0;
  for (Eigen::Index j = 0; j < q.size(); ++j)
    if (target[j] != 0.0) l -= target[j] * safe_log(q[j]);
  return l;
}

}  // namespace detail

inline LossSum gold_nll(const ModelParams& p, const TaggedExample& ex) {
  detail::check_tags(p, ex);
  const Matrix O = tag_distributions(p, ex.ids);
  LossSum r{0.0, ex.ids.size()};
  for (std::size_t t = 0; t < ex.tags.size(); ++t) r.loss -= safe_log(O(static_cast<Eigen::Index>(ex.tags[t]), static_cast<Eigen::Index>(t)));
  return r;
}

inline LossSum projected_nll(const ModelParams& p, const ProjectedExample& ex, ProjectedHead head = ProjectedHead::bias) {
  detail::check_targets(p, ex, head);
  const Matrix O = tag_distributions(p, ex.ids);
  LossSum r{0.0, ex.ids.size()};
  for (Eigen::Index t = 0; t < O.cols(); ++t) {
    const Vector q = head == ProjectedHead::bias ? bias_dist(p.A, O.col(t)) : Vector(O.col(t));
    r.loss += detail::cross_entropy(ex.targets.col(t), q);
  }
  return r;
}

// Mean-per-token projected term plus mean-per-token gold term; an empty batch
// contributes nothing.
inline double joint_loss(const ModelParams& p, std::span<const TaggedExample> gold, std::span<const ProjectedExample> proj,
                         ProjectedHead head = ProjectedHead::bias) {
  if (gold.empty() && proj.empty()) throw DataError("joint_loss needs at least one nonempty batch");
  LossSum g, q;
  for (const auto& ex : gold) {
    auto r = gold_nll(p, ex);
    g.loss += r.loss, g.tokens += r.tokens;
  }
  for (const auto& ex : proj) {
    auto r = projected_nll(p, ex, head);
    q.loss += r.loss, q.tokens += r.tokens;
  }
  double total = 0.0;
  if (q.tokens) total += q.loss / static_cast<double>(q.tokens);
  if (g.tokens) total += g.loss / static_cast<double>(g.tokens);
  return total;
}

// ---------------------------------------------------------------------------
// Backpropagation

namespace detail {

// Backpropagates dZ (gradient w.r.t. pre-softmax logits, K_gold x T) into all
// parameters below the output softmax.
inline void backprop_logits(const ModelParams& p, Gradients& g, const SentenceTrace& tr, std::span<const TokenId> ids,
                            const Matrix& dZ) {
  g.d.W_fwd.noalias() += dZ * tr.fwd.h.transpose();
  g.d.W_bwd.noalias() += dZ * tr.bwd.h.transpose();
  g.d.b += dZ.rowwise().sum();
  const Matrix dHf = p.W_fwd.transpose() * dZ;
  const Matrix dHb = p.W_bwd.transpose() * dZ;
  Matrix dX = backprop_direction(p.fwd, g.d.fwd, tr.X, tr.fwd, dHf, false);
  dX += backprop_direction(p.bwd, g.d.bwd, tr.X, tr.bwd, dHb, true);
  for (std::size_t t = 0; t < ids.size(); ++t) {
    g.d.E.row(static_cast<Eigen::Index>(ids[t])) += dX.col(static_cast<Eigen::Index>(t)).transpose();
    g.touch(ids[t]);
  }
}

}  // namespace detail

// Adds the gradient of joint_loss(p, gold, proj) into `g` (which must be cleared
// by the caller) and returns the loss value.
inline double accumulate_gradients(const ModelParams& p, std::span<const TaggedExample> gold,
                                   std::span<const ProjectedExample> proj, Gradients& g,
                                   ProjectedHead head = ProjectedHead::bias) {
  if (gold.empty() && proj.empty()) throw DataError("gradients need at least one nonempty batch");
  std::size_t gold_tokens = 0, proj_tokens = 0;
  for (const auto& ex : gold) gold_tokens += ex.ids.size();
  for (const auto& ex : proj) proj_tokens += ex.ids.size();
  double gold_loss = 0.0, proj_loss = 0.0;

  for (const auto& ex : gold) {
    detail::check_tags(p, ex);
    const auto tr = detail::forward(p, ex.ids);
    const double scale = 1.0 / static_cast<double>(gold_tokens);
    Matrix dZ = tr.O;
    for (std::size_t t = 0; t < ex.tags.size(); ++t) {
      const auto col = static_cast<Eigen::Index>(t), y = static_cast<Eigen::Index>(ex.tags[t]);
      gold_loss -= safe_log(tr.O(y, col));
      dZ(y, col) -= 1.0;
    }
    dZ *= scale;
    detail::backprop_logits(p, g, tr, ex.ids, dZ);
  }

  for (const auto& ex : proj) {
    detail::check_targets(p, ex, head);
    const auto tr = detail::forward(p, ex.ids);
    const double scale = 1.0 / static_cast<double>(proj_tokens);
    Matrix dZ(tr.O.rows(), tr.O.cols());
    for (Eigen::Index t = 0; t < tr.O.cols(); ++t) {
      const Vector o = tr.O.col(t);
      const Vector y = ex.targets.col(t);
      const double mass = y.sum();
      if (head == ProjectedHead::direct) {
        proj_loss += detail::cross_entropy(y, o);
        dZ.col(t) = scale * (mass * o - y);
        continue;
      }
      const Vector q = bias_dist(p.A, o);
      proj_loss += detail::cross_entropy(y, q);
      const Vector dU = scale * (mass * q - y);  // d/d(biased logits)
      g.d.A.noalias() += o * dU.transpose();
      const Vector dO = p.A * dU;
      dZ.col(t) = o.cwiseProduct(dO.array().matrix() - Vector::Constant(o.size(), o.dot(dO)));
    }
    detail::backprop_logits(p, g, tr, ex.ids, dZ);
  }

  double total = 0.0;
  if (proj_tokens) total += proj_loss / static_cast<double>(proj_tokens);
  if (gold_tokens) total += gold_loss / static_cast<double>(gold_tokens);
  return total;
}

inline Gradients gradients(const ModelParams& p, std::span<const TaggedExample> gold, std::span<const ProjectedExample> proj,
                           ProjectedHead head = ProjectedHead::bias) {
  Gradients g(p.dims());
  accumulate_gradients(p, gold, proj, g, head);
  return g;
}

}  // namespace debias
