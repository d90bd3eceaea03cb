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
#ifndef RANKMATCH_TESTS_ORACLES_HPP_
#define RANKMATCH_TESTS_ORACLES_HPP_

// Naive-loop reference implementations used to cross-check the library.
// Everything here is written from the loss definitions with plain double
// loops and deliberately shares no code with the library implementations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double margin_f(double t, bool soft) {
  return soft ? softplus(t) : std::max(t, 0.0);
}

inline Mat normalize_rows(const Mat& x) {
  Mat y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double ss = 0.0;
    for (double v : x[i]) ss += v * v;
    const double norm = std::sqrt(ss);
    y[i].resize(x[i].size());
    for (std::size_t j = 0; j < x[i].size(); ++j) y[i][j] = x[i][j] / norm;
  }
  return y;
}

inline Mat distance_matrix(const Mat& x) {
  const std::size_t n = x.size();
  Mat d(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double ss = 0.0;
      for (std::size_t c = 0; c < x[i].size(); ++c) {
        const double diff = x[i][c] - x[j][c];
        ss += diff * diff;
      }
      d[i][j] = std::sqrt(ss);
    }
  }
  return d;
}

inline Mat similarity_matrix(const Mat& x) {
  const std::size_t n = x.size();
  Mat s(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < x[i].size(); ++c) dot += x[i][c] * x[j][c];
      s[i][j] = dot;
    }
  }
  return s;
}

// Per-anchor triplet counts; a batch census is the sum over anchors.
struct AnchorCensus {
  std::int64_t batch_all = 0;   // |P(a)| * |N(a)|
  std::int64_t batch_hard = 0;  // 1 when P and N are both non-empty
  std::int64_t batch_mean = 0;  // 1 when N is non-empty
  std::int64_t pairs = 0;       // |P(a)|, ordered contrastive pairs anchored at a
};

inline AnchorCensus anchor_census(const std::vector<int>& labels, std::size_t a) {
  std::int64_t np = 0, nn = 0;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (j == a) continue;
    (labels[j] == labels[a] ? np : nn)++;
  }
  AnchorCensus c;
  c.batch_all = np * nn;
  c.batch_hard = (np > 0 && nn > 0) ? 1 : 0;
  c.batch_mean = nn > 0 ? 1 : 0;
  c.pairs = np;
  return c;
}

inline double batch_all(const Mat& d, const std::vector<int>& labels,
                        double margin, bool soft) {
  const std::size_t n = labels.size();
  double acc = 0.0;
  std::int64_t count = 0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t p = 0; p < n; ++p) {
      if (p == a || labels[p] != labels[a]) continue;
      for (std::size_t q = 0; q < n; ++q) {
        if (labels[q] == labels[a]) continue;
        acc += margin_f(margin + d[a][p] - d[a][q], soft);
        ++count;
      }
    }
  }
  return count == 0 ? 0.0 : acc / static_cast<double>(count);
}

inline double batch_hard(const Mat& d, const std::vector<int>& labels,
                         double margin, bool soft) {
  const std::size_t n = labels.size();
  double acc = 0.0;
  std::int64_t count = 0;
  for (std::size_t a = 0; a < n; ++a) {
    double worst_p = -std::numeric_limits<double>::infinity();
    double best_n = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == a) continue;
      if (labels[j] == labels[a]) {
        worst_p = std::max(worst_p, d[a][j]);
      } else {
        best_n = std::min(best_n, d[a][j]);
      }
    }
    if (!std::isfinite(worst_p) || !std::isfinite(best_n)) continue;
    acc += margin_f(margin + worst_p - best_n, soft);
    ++count;
  }
  return count == 0 ? 0.0 : acc / static_cast<double>(count);
}

// batch_size_norm: divide the positive / negative distance sums by the
// valid-anchor count; otherwise by |P(a)| and |N(a)|.
inline double batch_mean(const Mat& d, const std::vector<int>& labels,
                         double margin, bool soft, bool batch_size_norm) {
  const std::size_t n = labels.size();
  std::int64_t valid = 0;
  for (std::size_t a = 0; a < n; ++a) {
    if (anchor_census(labels, a).batch_mean) ++valid;
  }
  if (valid == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    double pos = 0.0, neg = 0.0;
    std::int64_t np = 0, nn = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == a) continue;
      if (labels[j] == labels[a]) {
        pos += d[a][j];
        ++np;
      } else {
        neg += d[a][j];
        ++nn;
      }
    }
    if (nn == 0) continue;
    double pt, nt;
    if (batch_size_norm) {
      pt = pos / static_cast<double>(valid);
      nt = neg / static_cast<double>(valid);
    } else {
      pt = np > 0 ? pos / static_cast<double>(np) : 0.0;
      nt = neg / static_cast<double>(nn);
    }
    acc += margin_f(margin + pt - nt, soft);
  }
  return acc / static_cast<double>(valid);
}

// One term per ordered same-label pair; the denominator is the pair's own
// positive plus every negative of the anchor. Plain exp, no stabilization:
// only use with similarity scales where exp() cannot overflow.
inline double contrastive(const Mat& s, const std::vector<int>& labels,
                          double temperature) {
  const std::size_t n = labels.size();
  double acc = 0.0;
  std::int64_t count = 0;
  for (std::size_t a = 0; a < n; ++a) {
    double neg_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (labels[j] != labels[a]) neg_sum += std::exp(s[a][j] / temperature);
    }
    for (std::size_t p = 0; p < n; ++p) {
      if (p == a || labels[p] != labels[a]) continue;
      const double ep = std::exp(s[a][p] / temperature);
      acc += -std::log(ep / (ep + neg_sum));
      ++count;
    }
  }
  return count == 0 ? 0.0 : acc / static_cast<double>(count);
}

// Mean over rows of H(target_row, softmax(logit_row)).
inline double softmax_ce(const Mat& logits, const std::vector<int>& labels) {
  double acc = 0.0;
  for (std::size_t r = 0; r < logits.size(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : logits[r]) mx = std::max(mx, v);
    double denom = 0.0;
    for (double v : logits[r]) denom += std::exp(v - mx);
    const double z = logits[r][static_cast<std::size_t>(labels[r])];
    acc += -(z - mx - std::log(denom));
  }
  return acc / static_cast<double>(logits.size());
}

}  // namespace oracle

#endif  // RANKMATCH_TESTS_ORACLES_HPP_
