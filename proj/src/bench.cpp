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
#include "rankmatch/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "rankmatch/ad/ops.hpp"
#include "rankmatch/core/rng.hpp"
#include "rankmatch/loss/contrastive.hpp"
#include "rankmatch/loss/pairwise.hpp"
#include "rankmatch/loss/triplet.hpp"
#include "rankmatch/metrics.hpp"

namespace rankmatch {
namespace {

long long median_ns(std::vector<long long> samples) {
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  if (n % 2 == 1) return samples[n / 2];
  return (samples[n / 2 - 1] + samples[n / 2]) / 2;
}

/// Warmup run discarded, then `repetitions` timed runs; median returned.
template <typename F>
long long time_closure(F&& fn, int repetitions) {
  fn();  // warmup
  std::vector<long long> samples;
  samples.reserve(static_cast<std::size_t>(repetitions));
  for (int i = 0; i < repetitions; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    samples.push_back(
        std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
  }
  return median_ns(std::move(samples));
}

loss::TripletVariant bench_triplet(RankingVariant v) {
  switch (v) {
    case RankingVariant::kBatchAll:
      return loss::TripletVariant::kBatchAll;
    case RankingVariant::kBatchHard:
      return loss::TripletVariant::kBatchHard;
    default:
      return loss::TripletVariant::kBatchMean;
  }
}

}  // namespace

BenchBatch make_bench_batch(Index batch_size, int class_count, Index dim,
                            Real confident_fraction, std::uint64_t seed) {
  if (batch_size < 1 || class_count < 1 || dim < 1) {
    throw ConfigError("bench batch: geometry must be positive");
  }
  if (confident_fraction < 0 || confident_fraction > 1) {
    throw ConfigError("bench batch: confident_fraction must lie in [0, 1]");
  }
  BenchBatch batch;
  batch.confident_fraction = confident_fraction;
  batch.features.resize(batch_size, dim);
  Rng rng(mix_seed(seed, 0x62656e6368ULL));
  for (Index i = 0; i < batch_size; ++i) {
    for (Index j = 0; j < dim; ++j) batch.features(i, j) = rng.normal();
  }
  batch.labels = balanced_labels(batch_size, class_count);
  return batch;
}

std::vector<int> balanced_labels(Index n, int k) {
  if (n < 0 || k < 1) throw ConfigError("balanced_labels: bad arguments");
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    labels[static_cast<std::size_t>(i)] = static_cast<int>(i % k);
  }
  return labels;
}

BenchRecord time_loss_variant(RankingVariant variant, const Model& model,
                              const ModelParams& params, const BenchBatch& batch,
                              const ObjectiveConfig& cfg, int repetitions) {
  if (repetitions < 5) {
    throw ConfigError("bench: repetitions must be >= 5, got " +
                      std::to_string(repetitions));
  }
  const Index n = batch.features.rows();
  if (n < 1) throw ShapeError("bench: empty batch");
  const int k = model.spec().num_classes;

  const Index confident =
      std::min<Index>(n, static_cast<Index>(std::llround(
                             batch.confident_fraction * static_cast<Real>(n))));
  std::vector<Real> mask(static_cast<std::size_t>(n), Real(0));
  for (Index i = 0; i < confident; ++i) mask[static_cast<std::size_t>(i)] = Real(1);

  // The ranking loss sees every row by default; the masked ablation restricts
  // it to the confident prefix.
  std::vector<Index> rank_rows;
  std::vector<int> rank_labels;
  if (cfg.ranking.apply_confidence_mask) {
    for (Index i = 0; i < confident; ++i) {
      rank_rows.push_back(i);
      rank_labels.push_back(batch.labels[static_cast<std::size_t>(i)]);
    }
  } else {
    rank_labels = batch.labels;
  }

  ad::Graph g;
  std::vector<ad::NodeRef> prefs = model.declare_params(g, params, true);
  ad::NodeRef x = g.input("bench_batch", {n, batch.features.cols()}, false);
  g.bind("bench_batch", ad::Tensor::from_matrix(batch.features));
  ModelForward fwd = model.forward(g, x, prefs);
  ad::NodeRef targets =
      g.constant(ad::Tensor::from_matrix(one_hot_matrix(batch.labels, k)), "labels");
  ad::NodeRef ce = ad::softmax_cross_entropy(g, fwd.logits, targets, mask,
                                             static_cast<Real>(n));
  ad::NodeRef total = ce;
  BenchRecord record;
  if (variant != RankingVariant::kNone) {
    ad::NodeRef rows = fwd.logits;
    if (cfg.ranking.apply_confidence_mask) {
      if (rank_rows.empty()) {
        rows = ad::NodeRef{};
      } else {
        rows = ad::gather_rows(g, fwd.logits, rank_rows);
      }
    }
    if (rows.valid()) {
      ad::NodeRef base =
          cfg.normalize_logits ? ad::l2_normalize_rows(g, rows) : rows;
      ad::NodeRef rank;
      if (variant == RankingVariant::kContrastive) {
        rank = loss::contrastive_loss(g, loss::row_gram(g, base), rank_labels,
                                      cfg.ranking);
      } else {
        rank = loss::triplet_loss(g, loss::pairwise_euclidean(g, base),
                                  bench_triplet(variant), rank_labels, cfg.ranking);
      }
      total = ad::weighted_sum(g, std::vector<ad::NodeRef>{ce, rank},
                               std::vector<Real>{Real(1), Real(1)});
    }
    record.census = loss::count_triplets(rank_labels);
  }

  const ad::Tensor seed_one = ad::Tensor::scalar(1);
  const long long raw = time_closure(
      [&] {
        g.forward();
        g.backward(total, seed_one);
      },
      repetitions);
  const long long baseline = time_closure([] {}, repetitions);

  record.variant = variant;
  record.batch_size = n;
  record.class_count = k;
  record.confident_fraction = batch.confident_fraction;
  record.wall_time_ns = std::max<long long>(0, raw - baseline);
  record.repetitions = repetitions;
  return record;
}

std::vector<loss::TripletCensus> census_scaling(
    const std::function<std::vector<int>(Index)>& labels_for,
    const std::vector<Index>& sizes) {
  if (sizes.empty()) throw ConfigError("census_scaling: no sizes given");
  std::vector<loss::TripletCensus> out;
  out.reserve(sizes.size());
  for (const Index n : sizes) {
    out.push_back(loss::count_triplets(labels_for(n)));
  }
  return out;
}

std::vector<Real> confidence_sweep(const Model& model,
                                   const std::vector<ModelParams>& param_history,
                                   const MatrixXr& unlabeled, Real tau) {
  if (unlabeled.rows() == 0) throw ShapeError("confidence_sweep: empty batch");
  std::vector<Real> fractions;
  fractions.reserve(param_history.size());
  for (const ModelParams& params : param_history) {
    const MatrixXr logits = model.forward_values(params, unlabeled).second;
    fractions.push_back(pseudo_label(logits, tau).confident_fraction);
  }
  return fractions;
}

void write_bench_csv(const std::vector<BenchRecord>& records,
                     const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("bench: cannot open '" + path + "' for writing");
  os << "variant,batch_size,class_count,confident_fraction,triplets,"
        "pairwise_terms,wall_time_ns_median,repetitions\n";
  for (const BenchRecord& r : records) {
    long long triplets = 0;
    switch (r.variant) {
      case RankingVariant::kBatchAll:
        triplets = r.census.batch_all_triplets;
        break;
      case RankingVariant::kBatchHard:
        triplets = r.census.batch_hard_triplets;
        break;
      case RankingVariant::kBatchMean:
        triplets = r.census.batch_mean_triplets;
        break;
      case RankingVariant::kContrastive:
        triplets = r.census.contrastive_pairs;
        break;
      case RankingVariant::kNone:
        triplets = 0;
        break;
    }
    os << variant_name(r.variant) << ',' << r.batch_size << ',' << r.class_count
       << ',' << format_real(r.confident_fraction) << ',' << triplets << ','
       << r.census.pairwise_terms << ',' << r.wall_time_ns << ','
       << r.repetitions << '\n';
  }
  os.flush();
  if (!os) throw Error("bench: write to '" + path + "' failed");
}

}  // namespace rankmatch
