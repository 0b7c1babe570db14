#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
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

namespace debias {

// Clips the global gradient norm to clip_norm, then p -= lr * g.
inline void sgd_update(ModelParams& p, const Gradients& g, double lr, double clip_norm) {
  if (!same_shape(p, g.d)) throw ShapeError("gradient shapes do not match the parameters");
  const double norm = std::sqrt(g.squared_norm());
  if (!std::isfinite(norm)) throw NumericError("non-finite gradient");
  const double step = norm > clip_norm ? lr * clip_norm / norm : lr;
  for (auto r : g.rows) p.E.row(static_cast<Eigen::Index>(r)) -= step * g.d.E.row(static_cast<Eigen::Index>(r));
  p.fwd.W -= step * g.d.fwd.W;
  p.fwd.U -= step * g.d.fwd.U;
  p.fwd.b -= step * g.d.fwd.b;
  p.bwd.W -= step * g.d.bwd.W;
  p.bwd.U -= step * g.d.bwd.U;
  p.bwd.b -= step * g.d.bwd.b;
  p.W_fwd -= step * g.d.W_fwd;
  p.W_bwd -= step * g.d.W_bwd;
  p.b -= step * g.d.b;
  p.A -= step * g.d.A;
}

struct EpochRecord {
  std::string stage;
  std::size_t epoch = 0;  // 1-based within its stage
  double train_loss = 0.0;
  double dev_accuracy = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::optional<std::size_t> chosen;  // index into epochs
  double seconds = 0.0;
  std::string config;  // effective configuration, key = value lines

  void append(const TrainReport& other) {
    epochs.insert(epochs.end(), other.epochs.begin(), other.epochs.end());
    seconds += other.seconds;
  }

  // Earliest epoch with the highest dev accuracy.
  std::optional<std::size_t> best_epoch() const {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < epochs.size(); ++i)
      if (!best || epochs[i].dev_accuracy > epochs[*best].dev_accuracy) best = i;
    return best;
  }

  std::string to_text() const {
    std::ostringstream os;
    os << "# effective config\n" << config << "\n# stage epoch train_loss dev_accuracy\n";
    os << std::fixed << std::setprecision(6);
    for (const auto& e : epochs) os << e.stage << ' ' << e.epoch << ' ' << e.train_loss << ' ' << e.dev_accuracy << '\n';
    if (chosen) {
      const auto& e = epochs[*chosen];
      os << "# chosen " << e.stage << ' ' << e.epoch << " dev_accuracy " << e.dev_accuracy << '\n';
    } else {
      os << "# chosen none\n";
    }
    os << std::setprecision(2) << "# seconds " << seconds << '\n';
    return os.str();
  }
};

namespace detail {

// Best-so-far snapshot shared across stages, so a later stage only replaces
// parameters when it beats every earlier epoch.
struct BestSnapshot {
  double accuracy = -std::numeric_limits<double>::infinity();
  std::optional<ModelParams> params;
};

enum class StageKind { gold, joint, projected_direct };

// Randomness for one stage, derived from the configured seed and a stage tag.
inline std::mt19937_64 stage_rng(std::uint64_t seed, std::uint32_t stage_tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stage_tag};
  return std::mt19937_64(seq);
}

inline double checked_loss(double loss) {
  if (!std::isfinite(loss)) throw NumericError("non-finite training loss");
  return loss;
}

inline TrainReport run_stage(ModelParams& params, StageKind kind, const std::string& label,
                             std::span<const TaggedExample> gold, std::span<const ProjectedExample> proj,
                             std::span<const TaggedExample> dev, const TrainConfig& cfg, std::size_t epochs,
                             std::mt19937_64& rng, BestSnapshot& best) {
  TrainReport report;
  if (epochs == 0) return report;
  if (dev.empty()) throw DataError("early stopping needs a nonempty dev set");
  const auto start = std::chrono::steady_clock::now();

  std::vector<std::size_t> gold_order(gold.size()), proj_order(proj.size());
  std::iota(gold_order.begin(), gold_order.end(), 0);
  std::iota(proj_order.begin(), proj_order.end(), 0);
  Gradients grads(params.dims());
  std::size_t since_best = 0;
  // With no projected steps the joint stage must draw exactly what the gold stage draws.
  const bool uses_proj = kind == StageKind::projected_direct || (kind == StageKind::joint && cfg.proj_per_gold > 0);

  auto gold_step = [&](const TaggedExample& ex) {
    grads.clear();
    const double loss = checked_loss(accumulate_gradients(params, std::span(&ex, 1), {}, grads));
    sgd_update(params, grads, cfg.lr, cfg.clip_norm);
    return loss;
  };
  auto proj_step = [&](const ProjectedExample& ex, ProjectedHead head) {
    grads.clear();
    const double loss = checked_loss(accumulate_gradients(params, {}, std::span(&ex, 1), grads, head));
    sgd_update(params, grads, cfg.lr, cfg.clip_norm);
    return loss;
  };

  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    std::shuffle(gold_order.begin(), gold_order.end(), rng);
    if (uses_proj) std::shuffle(proj_order.begin(), proj_order.end(), rng);
    double loss_sum = 0.0;
    std::size_t steps = 0;
    switch (kind) {
      case StageKind::gold:
        for (auto i : gold_order) loss_sum += gold_step(gold[i]), ++steps;
        break;
      case StageKind::joint: {
        std::size_t cursor = 0;
        for (auto i : gold_order) {
          loss_sum += gold_step(gold[i]), ++steps;
          for (std::size_t k = 0; k < cfg.proj_per_gold; ++k) {
            loss_sum += proj_step(proj[proj_order[cursor]], ProjectedHead::bias), ++steps;
            cursor = (cursor + 1) % proj_order.size();
          }
        }
        break;
      }
      case StageKind::projected_direct:
        for (auto i : proj_order) loss_sum += proj_step(proj[i], ProjectedHead::direct), ++steps;
        break;
    }
    const double acc = accuracy_on(params, dev);
    report.epochs.push_back({label, epoch, steps ? loss_sum / static_cast<double>(steps) : 0.0, acc});
    if (acc > best.accuracy) {
      best.accuracy = acc;
      best.params = params;
      report.chosen = report.epochs.size() - 1;
      since_best = 0;
    } else if (++since_best > cfg.patience) {
      break;
    }
  }
  if (best.params) params = *best.params;
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

inline constexpr std::uint32_t kPretrainStream = 1;
inline constexpr std::uint32_t kJointStream = 2;

}  // namespace detail

// Stage one: SGD on the gold term only, one step per sentence. Returns the
// parameters of the best dev epoch.
inline std::pair<ModelParams, TrainReport> pretrain(ModelParams params, std::span<const TaggedExample> gold_train,
                                                    std::span<const TaggedExample> dev, const TrainConfig& cfg) {
  if (gold_train.empty()) throw DataError("pretraining needs gold training sentences");
  auto rng = detail::stage_rng(cfg.seed, detail::kPretrainStream);
  detail::BestSnapshot best;
  auto report = detail::run_stage(params, detail::StageKind::gold, "pretrain", gold_train, {}, dev, cfg,
                                  cfg.stage1_epochs, rng, best);
  report.config = cfg.to_string();
  return {std::move(params), std::move(report)};
}

// Stage two: each gold step is followed by proj_per_gold steps on projected
// sentences (through the bias layer), cycling a per-epoch shuffle.
inline std::pair<ModelParams, TrainReport> joint_train(ModelParams params, std::span<const TaggedExample> gold_train,
                                                       std::span<const ProjectedExample> projected,
                                                       std::span<const TaggedExample> dev, const TrainConfig& cfg) {
  if (gold_train.empty() || projected.empty()) throw DataError("joint training needs gold and projected sentences");
  auto rng = detail::stage_rng(cfg.seed, detail::kJointStream);
  detail::BestSnapshot best;
  auto report = detail::run_stage(params, detail::StageKind::joint, "joint", gold_train, projected, dev, cfg,
                                  cfg.stage2_epochs, rng, best);
  report.config = cfg.to_string();
  return {std::move(params), std::move(report)};
}

// Trains directly on projected labels (cross-entropy against o_t, no bias
// layer) for stage1_epochs. This is the projected-only baseline.
inline std::pair<ModelParams, TrainReport> train_projected_direct(ModelParams params,
                                                                  std::span<const ProjectedExample> projected,
                                                                  std::span<const TaggedExample> dev,
                                                                  const TrainConfig& cfg) {
  if (projected.empty()) throw DataError("projected-only training needs projected sentences");
  auto rng = detail::stage_rng(cfg.seed, detail::kPretrainStream);
  detail::BestSnapshot best;
  auto report = detail::run_stage(params, detail::StageKind::projected_direct, "projected", {}, projected, dev, cfg,
                                  cfg.stage1_epochs, rng, best);
  report.config = cfg.to_string();
  return {std::move(params), std::move(report)};
}

// init -> pretrain -> joint_train (skipped without projected data). Stage two
// only replaces the parameters when it beats the best pretraining epoch.
inline std::pair<ModelParams, TrainReport> train_pipeline(const ModelDims& dims, std::span<const TaggedExample> gold_train,
                                                          std::span<const ProjectedExample> projected,
                                                          std::span<const TaggedExample> dev, const TrainConfig& cfg) {
  cfg.validate();
  if (gold_train.empty()) throw DataError("training needs gold training sentences");
  ModelParams params = init_params(dims, cfg.seed);
  detail::BestSnapshot best;

  auto rng1 = detail::stage_rng(cfg.seed, detail::kPretrainStream);
  TrainReport report = detail::run_stage(params, detail::StageKind::gold, "pretrain", gold_train, {}, dev, cfg,
                                         cfg.stage1_epochs, rng1, best);
  if (!projected.empty()) {
    auto rng2 = detail::stage_rng(cfg.seed, detail::kJointStream);
    report.append(detail::run_stage(params, detail::StageKind::joint, "joint", gold_train, projected, dev, cfg,
                                    cfg.stage2_epochs, rng2, best));
  }
  report.chosen = report.best_epoch();
  report.config = cfg.to_string();
  return {std::move(params), std::move(report)};
}

// Builds the vocabulary over gold-train and projected tokens, encodes every
// corpus and runs the two-stage pipeline.
inline std::pair<Tagger, TrainReport> train_tagger(const GoldCorpus& gold_train, const GoldCorpus& dev,
                                                   const ProjectedCorpus* projected, const TrainConfig& cfg) {
  cfg.validate();
  auto seqs = token_sequences(gold_train);
  if (projected)
    for (const auto& s : projected->sentences) seqs.push_back(s.tokens);
  Tagger m;
  m.vocab = build_vocab(seqs, cfg.min_count);
  m.gold_tags = gold_train.tagset;
  m.proj_tags = projected ? projected->tagset : gold_train.tagset;

  const auto gold_ex = encode_corpus(gold_train, m.vocab);
  const auto dev_ex = encode_corpus(dev, m.vocab);
  std::vector<ProjectedExample> proj_ex;
  if (projected) proj_ex = encode_corpus(*projected, m.vocab);
  const ModelDims dims{m.vocab.size(), cfg.d_e, cfg.d_h, m.gold_tags.size(), m.proj_tags.size()};
  auto [params, report] = train_pipeline(dims, gold_ex, proj_ex, dev_ex, cfg);
  m.params = std::move(params);
  return {std::move(m), std::move(report)};
}

}  // namespace debias
