/**
 * Copyright 2026 The RankMatch Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "rankmatch/objective.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <utility>

#include "rankmatch/ad/ops.hpp"
#include "rankmatch/core/rng.hpp"
#include "rankmatch/loss/contrastive.hpp"
#include "rankmatch/loss/pairwise.hpp"
#include "rankmatch/loss/triplet.hpp"

namespace rankmatch {
namespace {

/// total = s + lambda_u * u + lambda_r * (sr + ur), evaluated in exactly this
/// association so the logged breakdown recomposes bit-for-bit.
class TotalLossOp final : public ad::OpT<Real> {
 public:
  TotalLossOp(Real lambda_u, Real lambda_r)
      : lambda_u_(lambda_u), lambda_r_(lambda_r) {}

  std::string_view kind() const override { return "total_loss"; }

  ad::Tensor forward(const std::vector<const ad::Tensor*>& in) override {
    const Real s = in[0]->value();
    const Real u = in[1]->value();
    const Real sr = in[2]->value();
    const Real ur = in[3]->value();
    return ad::Tensor::scalar(s + lambda_u_ * u + lambda_r_ * (sr + ur));
  }

  void backward(const std::vector<const ad::Tensor*>&, const ad::Tensor&,
                const ad::Tensor& out_grad,
                const std::vector<ad::Tensor*>& in_grads) override {
    const Real gseed = out_grad.value();
    if (in_grads[0]) in_grads[0]->data()[0] += gseed;
    if (in_grads[1]) in_grads[1]->data()[0] += lambda_u_ * gseed;
    if (in_grads[2]) in_grads[2]->data()[0] += lambda_r_ * gseed;
    if (in_grads[3]) in_grads[3]->data()[0] += lambda_r_ * gseed;
  }

 private:
  Real lambda_u_;
  Real lambda_r_;
};

loss::TripletVariant to_triplet(RankingVariant v) {
  switch (v) {
    case RankingVariant::kBatchAll:
      return loss::TripletVariant::kBatchAll;
    case RankingVariant::kBatchHard:
      return loss::TripletVariant::kBatchHard;
    case RankingVariant::kBatchMean:
      return loss::TripletVariant::kBatchMean;
    default:
      throw ConfigError("not a triplet variant");
  }
}

struct RankBranch {
  ad::NodeRef loss;
  ad::NodeRef dist;  // invalid for contrastive
  bool has_dist = false;
};

/// Normalize (optionally), measure, and attach the configured ranking loss
/// over `logits` with `labels`.
RankBranch build_ranking(ad::Graph& g, ad::NodeRef logits,
                         const std::vector<int>& labels,
                         const ObjectiveConfig& cfg) {
  RankBranch out;
  ad::NodeRef base =
      cfg.normalize_logits ? ad::l2_normalize_rows(g, logits) : logits;
  if (cfg.variant == RankingVariant::kContrastive) {
    ad::NodeRef sims = loss::row_gram(g, base);
    out.loss = loss::contrastive_loss(g, sims, labels, cfg.ranking);
  } else {
    out.dist = loss::pairwise_euclidean(g, base);
    out.has_dist = true;
    out.loss = loss::triplet_loss(g, out.dist, to_triplet(cfg.variant), labels,
                                  cfg.ranking);
  }
  return out;
}

loss::TripletCensus read_census(ad::Graph& g, ad::NodeRef loss_node) {
  if (auto* t = dynamic_cast<loss::TripletLossOp<Real>*>(g.op(loss_node))) {
    return t->census();
  }
  if (auto* c = dynamic_cast<loss::ContrastiveLossOp<Real>*>(g.op(loss_node))) {
    return c->census();
  }
  return {};
}

Real matrix_max(const ad::Tensor& t) {
  Real m = 0;
  for (Index i = 0; i < t.size(); ++i) m = std::max(m, t.data()[i]);
  return m;
}

}  // namespace

std::string variant_name(RankingVariant v) {
  switch (v) {
    case RankingVariant::kNone:
      return "none";
    case RankingVariant::kBatchMean:
      return "bm";
    case RankingVariant::kBatchHard:
      return "bh";
    case RankingVariant::kBatchAll:
      return "ba";
    case RankingVariant::kContrastive:
      return "ct";
  }
  throw ConfigError("unknown ranking variant");
}

RankingVariant variant_from_name(const std::string& name) {
  if (name == "none") return RankingVariant::kNone;
  if (name == "bm") return RankingVariant::kBatchMean;
  if (name == "bh") return RankingVariant::kBatchHard;
  if (name == "ba") return RankingVariant::kBatchAll;
  if (name == "ct") return RankingVariant::kContrastive;
  throw ConfigError("unknown ranking variant '" + name +
                    "' (expected bm|bh|ba|ct|none)");
}

LabeledBatch LabeledBatch::make(MatrixXr samples, std::vector<int> labels,
                                int num_classes) {
  LabeledBatch b;
  b.one_hot = one_hot_matrix(labels, num_classes);
  b.samples = std::move(samples);
  b.labels = std::move(labels);
  if (b.samples.rows() != static_cast<Index>(b.labels.size())) {
    throw ShapeError("labeled batch: " + std::to_string(b.labels.size()) +
                     " labels for " + std::to_string(b.samples.rows()) + " rows");
  }
  return b;
}

void LabeledBatch::validate() const {
  if (samples.rows() != one_hot.rows() ||
      samples.rows() != static_cast<Index>(labels.size())) {
    throw ShapeError("labeled batch: samples/one_hot/labels row counts disagree");
  }
  for (Index r = 0; r < one_hot.rows(); ++r) {
    Index ones = 0;
    for (Index c = 0; c < one_hot.cols(); ++c) {
      const Real v = one_hot(r, c);
      if (v == Real(1)) {
        ++ones;
      } else if (v != Real(0)) {
        throw ShapeError("labeled batch: row " + std::to_string(r) +
                         " is not one-hot");
      }
    }
    if (ones != 1 || labels[static_cast<std::size_t>(r)] < 0 ||
        labels[static_cast<std::size_t>(r)] >= one_hot.cols() ||
        one_hot(r, labels[static_cast<std::size_t>(r)]) != Real(1)) {
      throw ShapeError("labeled batch: row " + std::to_string(r) +
                       " one-hot does not match its label");
    }
  }
}

VectorXr softmax_row(const VectorXr& logits) {
  const Real m = logits.maxCoeff();
  VectorXr e = (logits.array() - m).exp();
  return e / e.sum();
}

MatrixXr softmax_rows_matrix(const MatrixXr& logits) {
  MatrixXr out(logits.rows(), logits.cols());
  for (Index r = 0; r < logits.rows(); ++r) {
    out.row(r) = softmax_row(logits.row(r).transpose()).transpose();
  }
  return out;
}

Real cross_entropy_row(const VectorXr& one_hot_target, const VectorXr& probs) {
  if (one_hot_target.size() != probs.size()) {
    throw ShapeError("cross_entropy: target and prediction sizes differ");
  }
  Real acc = 0;
  for (Index i = 0; i < probs.size(); ++i) {
    if (one_hot_target[i] != Real(0)) {
      acc -= one_hot_target[i] * std::log(std::max(probs[i], Real(1e-12)));
    }
  }
  return acc;
}

MatrixXr one_hot_matrix(const std::vector<int>& labels, int num_classes) {
  if (num_classes < 1) throw ConfigError("one_hot: num_classes must be positive");
  MatrixXr out = MatrixXr::Zero(static_cast<Index>(labels.size()), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw ShapeError("one_hot: label " + std::to_string(labels[i]) +
                       " outside [0, " + std::to_string(num_classes) + ")");
    }
    out(static_cast<Index>(i), labels[i]) = Real(1);
  }
  return out;
}

PseudoLabelOutcome pseudo_label(const MatrixXr& weak_logits, Real tau) {
  if (!(tau > 0) || tau > 1) {
    throw ConfigError("pseudo_label: tau must lie in (0, 1]");
  }
  PseudoLabelOutcome out;
  const Index n = weak_logits.rows();
  out.probabilities = softmax_rows_matrix(weak_logits);
  out.hard_labels.resize(static_cast<std::size_t>(n));
  out.confidence_mask.resize(static_cast<std::size_t>(n));
  for (Index r = 0; r < n; ++r) {
    Index best = 0;
    Real best_p = out.probabilities(r, 0);
    for (Index c = 1; c < out.probabilities.cols(); ++c) {
      if (out.probabilities(r, c) > best_p) {  // strict: lowest index wins ties
        best_p = out.probabilities(r, c);
        best = c;
      }
    }
    out.hard_labels[static_cast<std::size_t>(r)] = static_cast<int>(best);
    const bool confident = best_p >= tau;
    out.confidence_mask[static_cast<std::size_t>(r)] = confident;
    if (confident) ++out.confident_count;
  }
  out.confident_fraction =
      n == 0 ? Real(0)
             : static_cast<Real>(out.confident_count) / static_cast<Real>(n);
  return out;
}

void ObjectiveConfig::validate() const {
  if (!(lambda_u >= 0) || !std::isfinite(lambda_u)) {
    throw ConfigError("objective: lambda_u must be finite and non-negative");
  }
  if (!(lambda_r >= 0) || !std::isfinite(lambda_r)) {
    throw ConfigError("objective: lambda_r must be finite and non-negative");
  }
  if (!(tau > 0) || tau > 1) throw ConfigError("objective: tau must lie in (0, 1]");
  if (mu < 1) throw ConfigError("objective: mu must be >= 1");
  ranking.validate();
}

Real supervised_ce_loss(const LabeledBatch& batch, const Model& model,
                        const ModelParams& params, const Augmenter& augmenter,
                        std::uint64_t step_seed) {
  batch.validate();
  if (batch.samples.rows() == 0) throw ShapeError("supervised_ce: empty batch");
  const MatrixXr weak =
      augmenter.weak(batch.samples, mix_seed(step_seed, kLabeledWeakStream));
  const MatrixXr logits = model.forward_values(params, weak).second;
  const MatrixXr probs = softmax_rows_matrix(logits);
  Real acc = 0;
  for (Index r = 0; r < probs.rows(); ++r) {
    acc += cross_entropy_row(batch.one_hot.row(r).transpose(),
                             probs.row(r).transpose());
  }
  return acc / static_cast<Real>(probs.rows());
}

UnsupervisedCeResult unsupervised_ce_loss(const UnlabeledBatch& batch,
                                          const Model& model,
                                          const ModelParams& params,
                                          const Augmenter& augmenter, Real tau,
                                          std::uint64_t step_seed) {
  const Index n = batch.samples.rows();
  if (n == 0) throw ShapeError("unsupervised_ce: empty batch");
  UnsupervisedCeResult out;
  const MatrixXr weak =
      augmenter.weak(batch.samples, mix_seed(step_seed, kUnlabeledWeakStream));
  out.pseudo = pseudo_label(model.forward_values(params, weak).second, tau);
  const MatrixXr strong =
      augmenter.strong(batch.samples, mix_seed(step_seed, kUnlabeledStrongStream));
  const MatrixXr probs =
      softmax_rows_matrix(model.forward_values(params, strong).second);
  const MatrixXr targets =
      one_hot_matrix(out.pseudo.hard_labels, static_cast<int>(probs.cols()));
  Real acc = 0;
  for (Index r = 0; r < n; ++r) {
    if (!out.pseudo.confidence_mask[static_cast<std::size_t>(r)]) continue;
    acc += cross_entropy_row(targets.row(r).transpose(), probs.row(r).transpose());
  }
  out.loss = acc / static_cast<Real>(n);
  return out;
}

StepResult total_loss(const LabeledBatch& labeled, const UnlabeledBatch& unlabeled,
                      const Model& model, const ModelParams& params,
                      const Augmenter& augmenter, const ObjectiveConfig& cfg,
                      std::uint64_t step_seed, bool want_grads) {
  cfg.validate();
  labeled.validate();
  const Index batch_b = labeled.samples.rows();
  if (batch_b == 0) throw ShapeError("total_loss: empty labeled batch");
  const bool ranking_on = cfg.variant != RankingVariant::kNone;
  const bool need_unlabeled = cfg.lambda_u != 0 || ranking_on;
  if (need_unlabeled && unlabeled.samples.rows() != cfg.mu * batch_b) {
    throw ShapeError("total_loss: unlabeled batch has " +
                     std::to_string(unlabeled.samples.rows()) + " rows, expected mu*B = " +
                     std::to_string(cfg.mu * batch_b));
  }

  ad::Graph g;
  g.set_strict(true);
  std::vector<ad::NodeRef> prefs = model.declare_params(g, params, want_grads);

  StepResult result;

  // Labeled weak branch: CE on true labels, ranking on the same logits.
  const MatrixXr labeled_weak =
      augmenter.weak(labeled.samples, mix_seed(step_seed, kLabeledWeakStream));
  ad::NodeRef x_l =
      g.input("labeled_weak", {labeled_weak.rows(), labeled_weak.cols()}, false);
  g.bind("labeled_weak", ad::Tensor::from_matrix(labeled_weak));
  ModelForward fwd_l = model.forward(g, x_l, prefs);
  ad::NodeRef targets_l =
      g.constant(ad::Tensor::from_matrix(labeled.one_hot), "labels");
  ad::NodeRef s_ce = ad::softmax_cross_entropy(
      g, fwd_l.logits, targets_l,
      std::vector<Real>(static_cast<std::size_t>(batch_b), Real(1)),
      static_cast<Real>(batch_b));

  ad::NodeRef s_rank{}, u_rank{}, u_ce{};
  RankBranch sup_branch, unsup_branch;
  if (ranking_on) {
    sup_branch = build_ranking(g, fwd_l.logits, labeled.labels, cfg);
    s_rank = sup_branch.loss;
  } else {
    s_rank = g.constant(ad::Tensor::scalar(0), "s_rank_off");
  }

  bool unsup_rank_live = false;
  if (need_unlabeled) {
    const MatrixXr unlabeled_weak = augmenter.weak(
        unlabeled.samples, mix_seed(step_seed, kUnlabeledWeakStream));
    result.pseudo =
        pseudo_label(model.forward_values(params, unlabeled_weak).second, cfg.tau);
    const MatrixXr unlabeled_strong = augmenter.strong(
        unlabeled.samples, mix_seed(step_seed, kUnlabeledStrongStream));
    ad::NodeRef x_u = g.input(
        "unlabeled_strong", {unlabeled_strong.rows(), unlabeled_strong.cols()},
        false);
    g.bind("unlabeled_strong", ad::Tensor::from_matrix(unlabeled_strong));
    ModelForward fwd_u = model.forward(g, x_u, prefs);

    const Index n_u = unlabeled_strong.rows();
    std::vector<Real> mask_weights(static_cast<std::size_t>(n_u), Real(0));
    for (Index r = 0; r < n_u; ++r) {
      if (result.pseudo.confidence_mask[static_cast<std::size_t>(r)]) {
        mask_weights[static_cast<std::size_t>(r)] = Real(1);
      }
    }
    ad::NodeRef targets_u = g.constant(
        ad::Tensor::from_matrix(one_hot_matrix(
            result.pseudo.hard_labels, model.spec().num_classes)),
        "pseudo_labels");
    u_ce = ad::softmax_cross_entropy(g, fwd_u.logits, targets_u, mask_weights,
                                     static_cast<Real>(n_u));

    if (ranking_on) {
      if (cfg.mask_ranking) {
        std::vector<Index> confident_rows;
        std::vector<int> confident_labels;
        for (Index r = 0; r < n_u; ++r) {
          if (result.pseudo.confidence_mask[static_cast<std::size_t>(r)]) {
            confident_rows.push_back(r);
            confident_labels.push_back(
                result.pseudo.hard_labels[static_cast<std::size_t>(r)]);
          }
        }
        if (!confident_rows.empty()) {
          ad::NodeRef subset = ad::gather_rows(g, fwd_u.logits, confident_rows);
          unsup_branch = build_ranking(g, subset, confident_labels, cfg);
          u_rank = unsup_branch.loss;
          unsup_rank_live = true;
        }
      } else {
        unsup_branch = build_ranking(g, fwd_u.logits, result.pseudo.hard_labels, cfg);
        u_rank = unsup_branch.loss;
        unsup_rank_live = true;
      }
    }
  }
  if (!u_ce.valid()) u_ce = g.constant(ad::Tensor::scalar(0), "u_ce_off");
  if (!u_rank.valid()) u_rank = g.constant(ad::Tensor::scalar(0), "u_rank_off");

  ad::NodeRef total =
      g.apply(std::make_unique<TotalLossOp>(cfg.lambda_u, cfg.lambda_r),
              {s_ce, u_ce, s_rank, u_rank}, {1, 1});

  g.forward();

  LossBreakdown& b = result.breakdown;
  b.supervised_ce = g.value(s_ce).value();
  b.unsupervised_ce = g.value(u_ce).value();
  b.supervised_rank = g.value(s_rank).value();
  b.unsupervised_rank = g.value(u_rank).value();
  b.total = g.value(total).value();
  b.confident_fraction = result.pseudo.confident_fraction;
  b.confident_count = result.pseudo.confident_count;
  if (ranking_on) {
    b.census += read_census(g, s_rank);
    if (unsup_rank_live) b.census += read_census(g, u_rank);
    if (sup_branch.has_dist) {
      b.max_pair_distance =
          std::max(b.max_pair_distance, matrix_max(g.value(sup_branch.dist)));
    }
    if (unsup_rank_live && unsup_branch.has_dist) {
      b.max_pair_distance =
          std::max(b.max_pair_distance, matrix_max(g.value(unsup_branch.dist)));
    }
  }

  if (want_grads) {
    g.backward(total, ad::Tensor::scalar(1));
    result.param_grads.reserve(prefs.size());
    for (const ad::NodeRef p : prefs) result.param_grads.push_back(g.grad(p));
  }
  return result;
}

}  // namespace rankmatch
