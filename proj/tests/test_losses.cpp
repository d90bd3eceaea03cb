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
#include <cmath>
#include <vector>

#include "doctest.h"
#include "rankmatch/loss/contrastive.hpp"
#include "rankmatch/loss/pairwise.hpp"
#include "rankmatch/loss/triplet.hpp"
#include "rankmatch/loss/types.hpp"
#include "test_support.hpp"

using rankmatch::Index;
using rankmatch::MatrixXr;
using rankmatch::Real;
using rankmatch::Rng;
using rankmatch::loss::NormalizedLogitsBatch;
using rankmatch::loss::PositiveNormalization;
using rankmatch::loss::RankingLossConfig;
using rankmatch::loss::TripletCensus;
using rankmatch::loss::TripletVariant;
using testsupport::rel_err;

namespace {

// Unit rows; all five pairwise distances distinct, so the three mining
// variants and both mean normalizations give five different frozen values.
MatrixXr fixture_rows() {
  MatrixXr rows(4, 2);
  rows << 1.0, 0.0,  //
      0.6, 0.8,      //
      0.0, 1.0,      //
      -1.0, 0.0;
  return rows;
}
const std::vector<int> kFixtureLabels = {0, 0, 1, 1};

RankingLossConfig config(bool soft = true,
                         PositiveNormalization norm =
                             PositiveNormalization::kBatchSize) {
  RankingLossConfig cfg;
  cfg.margin = 0.5;
  cfg.temperature = 0.2;
  cfg.soft_margin = soft;
  cfg.positive_normalization = norm;
  return cfg;
}

}  // namespace

TEST_CASE("frozen values: two-point batch") {
  // rows (1,0), (1,0), (0,1) with labels {0,0,1}: d01 = 0, d02 = d12 = sqrt(2)
  MatrixXr rows(3, 2);
  rows << 1, 0, 1, 0, 0, 1;
  const std::vector<int> labels = {0, 0, 1};
  const auto batch = NormalizedLogitsBatch::from_logits(rows, labels);
  const MatrixXr d = rankmatch::loss::pairwise_euclidean(batch);

  TripletCensus census;
  const Real ba =
      rankmatch::loss::batch_all_distance_loss(d, labels, config(), &census);
  CHECK(census.batch_all_triplets == 2);
  CHECK(rel_err(ba, 0.33706615402081224) < 1e-14);

  const Real bh = rankmatch::loss::batch_hard_distance_loss(d, labels, config());
  CHECK(rel_err(bh, 0.33706615402081224) < 1e-14);  // single pos/neg per anchor

  const Real bm = rankmatch::loss::batch_mean_distance_loss(d, labels, config());
  CHECK(rel_err(bm, 0.63704974409699059) < 1e-14);

  const MatrixXr s = rankmatch::loss::pairwise_cosine(batch);
  const Real ct =
      rankmatch::loss::contrastive_similarity_loss(s, labels, config());
  CHECK(rel_err(ct, 0.0067153484891180686) < 1e-13);
}

TEST_CASE("frozen values: four-row fixture, every variant distinct") {
  const auto batch =
      NormalizedLogitsBatch::from_logits(fixture_rows(), kFixtureLabels);
  const MatrixXr d = rankmatch::loss::pairwise_euclidean(batch);
  const MatrixXr s = rankmatch::loss::pairwise_cosine(batch);
  const auto& labels = kFixtureLabels;

  TripletCensus census;
  CHECK(rel_err(rankmatch::loss::batch_all_distance_loss(d, labels, config(),
                                                         &census),
                0.83610430794048295) < 1e-14);
  CHECK(census.batch_all_triplets == 8);
  CHECK(census.batch_hard_triplets == 4);
  CHECK(census.batch_mean_triplets == 4);
  CHECK(census.contrastive_pairs == 4);
  CHECK(census.pairwise_terms == 16);

  CHECK(rel_err(rankmatch::loss::batch_all_distance_loss(d, labels,
                                                         config(false)),
                0.33363610870986531) < 1e-14);
  CHECK(rel_err(rankmatch::loss::batch_hard_distance_loss(d, labels, config()),
                1.0282029131086693) < 1e-14);
  CHECK(rel_err(rankmatch::loss::batch_hard_distance_loss(d, labels,
                                                          config(false)),
                0.54227221741973062) < 1e-14);
  CHECK(rel_err(rankmatch::loss::batch_mean_distance_loss(d, labels, config()),
                0.72759033467437845) < 1e-14);
  CHECK(rel_err(rankmatch::loss::batch_mean_distance_loss(
                    d, labels,
                    config(true, PositiveNormalization::kPositiveCount)),
                0.81899876632877012) < 1e-14);
  CHECK(rel_err(rankmatch::loss::contrastive_similarity_loss(s, labels,
                                                             config()),
                1.3634491233048557) < 1e-14);
}

TEST_CASE("random batches match the naive oracle") {
  Rng rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const auto rb = testsupport::random_batch(rng, 12, 4, 5);
    const auto batch = NormalizedLogitsBatch::from_logits(rb.rows, rb.labels);
    const MatrixXr d = rankmatch::loss::pairwise_euclidean(batch);
    const MatrixXr s = rankmatch::loss::pairwise_cosine(batch);
    const auto od = oracle::distance_matrix(
        oracle::normalize_rows(testsupport::to_oracle(rb.rows)));
    const auto os = oracle::similarity_matrix(
        oracle::normalize_rows(testsupport::to_oracle(rb.rows)));
    const bool soft = trial % 2 == 0;

    CHECK(rel_err(
              rankmatch::loss::batch_all_distance_loss(d, rb.labels,
                                                       config(soft)),
              oracle::batch_all(od, rb.labels, 0.5, soft)) < 1e-9);
    CHECK(rel_err(
              rankmatch::loss::batch_hard_distance_loss(d, rb.labels,
                                                        config(soft)),
              oracle::batch_hard(od, rb.labels, 0.5, soft)) < 1e-9);
    CHECK(rel_err(
              rankmatch::loss::batch_mean_distance_loss(d, rb.labels,
                                                        config(soft)),
              oracle::batch_mean(od, rb.labels, 0.5, soft, true)) < 1e-9);
    CHECK(rel_err(rankmatch::loss::batch_mean_distance_loss(
                      d, rb.labels,
                      config(soft, PositiveNormalization::kPositiveCount)),
                  oracle::batch_mean(od, rb.labels, 0.5, soft, false)) < 1e-9);
    CHECK(rel_err(
              rankmatch::loss::contrastive_similarity_loss(s, rb.labels,
                                                           config()),
              oracle::contrastive(os, rb.labels, 0.2)) < 1e-9);
  }
}

TEST_CASE("degenerate batches give zero loss, not NaN") {
  // single class: no negatives anywhere
  MatrixXr rows(3, 2);
  rows << 1, 0, 0, 1, 1, 1;
  const std::vector<int> one_class = {1, 1, 1};
  const auto batch = NormalizedLogitsBatch::from_logits(rows, one_class);
  const MatrixXr d = rankmatch::loss::pairwise_euclidean(batch);
  const MatrixXr s = rankmatch::loss::pairwise_cosine(batch);

  TripletCensus census;
  CHECK(rankmatch::loss::batch_all_distance_loss(d, one_class, config(),
                                                 &census) == 0.0);
  CHECK(census.batch_all_triplets == 0);
  CHECK(rankmatch::loss::batch_hard_distance_loss(d, one_class, config()) == 0.0);
  CHECK(rankmatch::loss::batch_mean_distance_loss(d, one_class, config()) == 0.0);
  CHECK(rankmatch::loss::contrastive_similarity_loss(s, one_class, config()) ==
        0.0);

  // all-distinct labels: positives nowhere
  const std::vector<int> distinct = {0, 1, 2};
  CHECK(rankmatch::loss::batch_all_distance_loss(d, distinct, config()) == 0.0);
  CHECK(rankmatch::loss::batch_hard_distance_loss(d, distinct, config()) == 0.0);
  CHECK(rankmatch::loss::contrastive_similarity_loss(s, distinct, config()) ==
        0.0);
  // batch_mean still has anchors with negatives but empty positive sums
  const Real bm = rankmatch::loss::batch_mean_distance_loss(d, distinct, config());
  CHECK(std::isfinite(bm));
}

TEST_CASE("batch hard resolves distance ties to the lowest row index") {
  // anchor 0: positives 1 and 2 at identical distance, negatives 3 and 4 at
  // identical distance. The gradient must land on rows 1 and 3 only.
  MatrixXr rows(5, 2);
  rows << 0, 0,  //
      1, 0,      // positive, d = 1
      0, 1,      // positive, d = 1 (tie)
      2, 0,      // negative, d = 2
      0, 2;      // negative, d = 2 (tie)
  const std::vector<int> labels = {0, 0, 0, 1, 1};
  const MatrixXr d = rankmatch::loss::pairwise_euclidean_matrix(rows);

  MatrixXr ddist = MatrixXr::Zero(5, 5);
  rankmatch::loss::batch_hard_distance_backward<Real>(d, labels, config(), 1.0,
                                                      ddist);
  // anchor 0 row: tie broken toward column 1 (positive) and column 3 (negative)
  CHECK(ddist(0, 1) != 0.0);
  CHECK(ddist(0, 2) == 0.0);
  CHECK(ddist(0, 3) != 0.0);
  CHECK(ddist(0, 4) == 0.0);
}

TEST_CASE("contrastive pairs without negatives contribute zero") {
  MatrixXr rows(2, 2);
  rows << 1, 0, 0, 1;
  const std::vector<int> labels = {0, 0};
  const auto batch = NormalizedLogitsBatch::from_logits(rows, labels);
  const MatrixXr s = rankmatch::loss::pairwise_cosine(batch);
  std::int64_t pairs = 0;
  const Real v =
      rankmatch::loss::contrastive_similarity_loss(s, labels, config(), &pairs);
  CHECK(pairs == 2);
  CHECK(v == 0.0);  // -log(1) per pair
}

TEST_CASE("census closed form on balanced batches") {
  for (const int n : {8, 16, 32, 64}) {
    for (const int k : {2, 4, 8}) {
      std::vector<int> labels(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i % k;
      const auto census = rankmatch::loss::count_triplets(labels);
      const std::int64_t per = n / k;
      CHECK(census.batch_all_triplets ==
            static_cast<std::int64_t>(n) * (per - 1) * (n - per));
      CHECK(census.batch_hard_triplets == (per > 1 ? n : 0));
      CHECK(census.batch_mean_triplets == n);
      CHECK(census.contrastive_pairs == static_cast<std::int64_t>(n) * (per - 1));
      CHECK(census.pairwise_terms == static_cast<std::int64_t>(n) * n);

      // cross-check against the per-anchor naive census
      oracle::AnchorCensus total;
      for (std::size_t a = 0; a < labels.size(); ++a) {
        const auto c = oracle::anchor_census(labels, a);
        total.batch_all += c.batch_all;
        total.batch_hard += c.batch_hard;
        total.batch_mean += c.batch_mean;
        total.pairs += c.pairs;
      }
      CHECK(census.batch_all_triplets == total.batch_all);
      CHECK(census.batch_hard_triplets == total.batch_hard);
      CHECK(census.batch_mean_triplets == total.batch_mean);
      CHECK(census.contrastive_pairs == total.pairs);
    }
  }
}

TEST_CASE("pairwise distance backward is finite at coincident rows") {
  MatrixXr rows(3, 2);
  rows << 1, 1, 1, 1, 0, 0;  // rows 0 and 1 coincide
  const MatrixXr d = rankmatch::loss::pairwise_euclidean_matrix(rows);
  CHECK(d(0, 1) == 0.0);
  MatrixXr ddist(3, 3);
  ddist.setConstant(1.0);
  MatrixXr dx = MatrixXr::Zero(3, 2);
  rankmatch::loss::pairwise_euclidean_backward<Real>(rows, d, ddist, dx);
  CHECK(dx.allFinite());
}

TEST_CASE("graph nodes agree with the value-level losses and pass FD checks") {
  using rankmatch::ad::Graph;
  using rankmatch::ad::NodeRef;
  using rankmatch::ad::Tensor;

  Rng rng(23);
  MatrixXr raw(6, 3);
  for (Index i = 0; i < raw.size(); ++i) raw(i) = rng.normal();
  const std::vector<int> labels = {0, 1, 0, 2, 1, 0};
  const auto batch = NormalizedLogitsBatch::from_logits(raw, labels);

  const struct {
    TripletVariant variant;
    Real expect;
  } cases[] = {
      {TripletVariant::kBatchAll,
       rankmatch::loss::batch_all_triplet_loss(batch, config()).value},
      {TripletVariant::kBatchHard,
       rankmatch::loss::batch_hard_triplet_loss(batch, config()).value},
      {TripletVariant::kBatchMean,
       rankmatch::loss::batch_mean_triplet_loss(batch, config()).value},
  };

  for (const auto& c : cases) {
    Graph g;
    NodeRef x = g.input("x", {6, 3}, true);
    NodeRef normed = rankmatch::ad::l2_normalize_rows(g, x);
    NodeRef dist = rankmatch::loss::pairwise_euclidean(g, normed);
    NodeRef loss = rankmatch::loss::triplet_loss(g, dist, c.variant, labels,
                                                 config());
    g.bind("x", Tensor::from_matrix(raw));
    g.forward();
    CHECK(rel_err(g.value(loss)[0], c.expect) < 1e-13);

    // central differences through normalize -> distances -> loss
    g.backward(loss, Tensor::scalar(1.0));
    const MatrixXr analytic(g.grad(x).matrix());
    const double h = 1e-6;
    double worst = 0.0;
    for (Index i = 0; i < raw.size(); ++i) {
      MatrixXr probe = raw;
      probe(i) += h;
      g.bind("x", Tensor::from_matrix(probe));
      g.forward();
      const double up = g.value(loss)[0];
      probe(i) -= 2 * h;
      g.bind("x", Tensor::from_matrix(probe));
      g.forward();
      const double down = g.value(loss)[0];
      const double fd = (up - down) / (2 * h);
      const double mag = std::max(std::abs(fd), std::abs(analytic(i)));
      if (mag < 1e-7) continue;
      worst = std::max(worst, std::abs(fd - analytic(i)) / mag);
    }
    CHECK(worst < 1e-4);
  }

  // contrastive goes through the gram matrix instead of distances
  Graph g;
  NodeRef x = g.input("x", {6, 3}, true);
  NodeRef normed = rankmatch::ad::l2_normalize_rows(g, x);
  NodeRef sims = rankmatch::loss::row_gram(g, normed);
  NodeRef loss = rankmatch::loss::contrastive_loss(g, sims, labels, config());
  g.bind("x", Tensor::from_matrix(raw));
  g.forward();
  CHECK(rel_err(g.value(loss)[0],
                rankmatch::loss::contrastive_similarity_loss(
                    rankmatch::loss::pairwise_cosine(batch), labels, config()))
        < 1e-13);
  g.backward(loss, Tensor::scalar(1.0));
  const MatrixXr analytic(g.grad(x).matrix());
  const double h = 1e-6;
  double worst = 0.0;
  for (Index i = 0; i < raw.size(); ++i) {
    MatrixXr probe = raw;
    probe(i) += h;
    g.bind("x", Tensor::from_matrix(probe));
    g.forward();
    const double up = g.value(loss)[0];
    probe(i) -= 2 * h;
    g.bind("x", Tensor::from_matrix(probe));
    g.forward();
    const double down = g.value(loss)[0];
    const double fd = (up - down) / (2 * h);
    const double mag = std::max(std::abs(fd), std::abs(analytic(i)));
    if (mag < 1e-7) continue;
    worst = std::max(worst, std::abs(fd - analytic(i)) / mag);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("ranking config validation") {
  RankingLossConfig bad = config();
  bad.margin = -0.1;
  CHECK_THROWS_AS(bad.validate(), rankmatch::ConfigError);
  bad = config();
  bad.temperature = 0.0;
  CHECK_THROWS_AS(bad.validate(), rankmatch::ConfigError);
}

TEST_CASE("l2 normalization rejects zero rows") {
  MatrixXr rows(2, 2);
  rows << 1, 1, 0, 0;
  CHECK_THROWS_AS(rankmatch::loss::l2_normalize_rows_matrix(rows),
                  rankmatch::NumericError);
}
