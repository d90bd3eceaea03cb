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
#include "rankmatch/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "rankmatch/core/error.hpp"

namespace rankmatch {
namespace {

constexpr const char* kHeaderLine1 = "# rankmatch metrics v1";
constexpr const char* kHeaderLine2 =
    "step,epoch,lr,supervised_ce,unsupervised_ce,supervised_rank,"
    "unsupervised_rank,total,confident_fraction,train_accuracy,"
    "validation_accuracy,test_accuracy,wall_time_ns";

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  return out;
}

constexpr Index kEvalChunk = 512;

}  // namespace

std::string metrics_header() {
  return std::string(kHeaderLine1) + "\n" + kHeaderLine2 + "\n";
}

std::string format_real(Real v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", static_cast<double>(v));
  return buf;
}

std::string format_metrics_row(const MetricsRow& row) {
  std::ostringstream os;
  os << row.step << ',' << row.epoch << ',' << format_real(row.lr) << ','
     << format_real(row.supervised_ce) << ',' << format_real(row.unsupervised_ce)
     << ',' << format_real(row.supervised_rank) << ','
     << format_real(row.unsupervised_rank) << ',' << format_real(row.total) << ','
     << format_real(row.confident_fraction) << ','
     << format_real(row.train_accuracy) << ','
     << format_real(row.validation_accuracy) << ','
     << format_real(row.test_accuracy) << ',' << row.wall_time_ns << '\n';
  return os.str();
}

void emit_metrics(const std::vector<MetricsRow>& rows, const std::string& path) {
  if (rows.empty()) throw Error("emit_metrics: no rows to write");

  std::set<Index> existing_steps;
  bool have_file = false;
  {
    std::ifstream is(path);
    if (is) {
      std::string l1, l2;
      if (std::getline(is, l1) && !l1.empty()) {
        have_file = true;
        if (l1 != kHeaderLine1 || !std::getline(is, l2) || l2 != kHeaderLine2) {
          throw DataFormatError("metrics '" + path +
                                "': existing file has an unrecognized header");
        }
        std::string line;
        int line_no = 2;
        while (std::getline(is, line)) {
          ++line_no;
          if (line.empty()) continue;
          try {
            existing_steps.insert(static_cast<Index>(std::stoll(line)));
          } catch (const std::exception&) {
            throw DataFormatError("metrics '" + path + "': bad step field at line " +
                                  std::to_string(line_no));
          }
        }
      }
    }
  }

  std::ofstream os(path, have_file ? std::ios::app : std::ios::trunc);
  if (!os) throw Error("emit_metrics: cannot open '" + path + "' for writing");
  if (!have_file) os << metrics_header();
  for (const MetricsRow& row : rows) {
    if (existing_steps.count(row.step)) continue;
    os << format_metrics_row(row);
  }
  os.flush();
  if (!os) throw Error("emit_metrics: write to '" + path + "' failed");
}

std::vector<MetricsRow> read_metrics(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataFormatError("metrics: cannot open '" + path + "'");
  std::string l1, l2;
  if (!std::getline(is, l1) || l1 != kHeaderLine1 || !std::getline(is, l2) ||
      l2 != kHeaderLine2) {
    throw DataFormatError("metrics '" + path + "': unrecognized header");
  }
  std::vector<MetricsRow> rows;
  std::string line;
  int line_no = 2;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() != 13) {
      throw DataFormatError("metrics '" + path + "': expected 13 fields at line " +
                            std::to_string(line_no) + ", got " +
                            std::to_string(f.size()));
    }
    try {
      MetricsRow r;
      r.step = static_cast<Index>(std::stoll(f[0]));
      r.epoch = static_cast<Index>(std::stoll(f[1]));
      r.lr = static_cast<Real>(std::stod(f[2]));
      r.supervised_ce = static_cast<Real>(std::stod(f[3]));
      r.unsupervised_ce = static_cast<Real>(std::stod(f[4]));
      r.supervised_rank = static_cast<Real>(std::stod(f[5]));
      r.unsupervised_rank = static_cast<Real>(std::stod(f[6]));
      r.total = static_cast<Real>(std::stod(f[7]));
      r.confident_fraction = static_cast<Real>(std::stod(f[8]));
      r.train_accuracy = static_cast<Real>(std::stod(f[9]));
      r.validation_accuracy = static_cast<Real>(std::stod(f[10]));
      r.test_accuracy = static_cast<Real>(std::stod(f[11]));
      r.wall_time_ns = std::stoll(f[12]);
      rows.push_back(r);
    } catch (const std::exception&) {
      throw DataFormatError("metrics '" + path + "': unparseable row at line " +
                            std::to_string(line_no));
    }
  }
  return rows;
}

Evaluation evaluate(const Model& model, const ModelParams& params,
                    const Dataset& split) {
  split.validate();
  if (split.count() == 0) throw ShapeError("evaluate: empty split");
  const int k = split.num_classes;
  Evaluation out;
  out.sample_count = split.count();
  out.confusion.assign(static_cast<std::size_t>(k),
                       std::vector<long long>(static_cast<std::size_t>(k), 0));
  long long correct = 0;
  for (Index base = 0; base < split.count(); base += kEvalChunk) {
    const Index n = std::min<Index>(kEvalChunk, split.count() - base);
    const MatrixXr logits =
        model.forward_values(params, split.features.middleRows(base, n)).second;
    for (Index r = 0; r < n; ++r) {
      Index pred = 0;
      for (Index c = 1; c < logits.cols(); ++c) {
        if (logits(r, c) > logits(r, pred)) pred = c;
      }
      const int truth = split.labels[static_cast<std::size_t>(base + r)];
      ++out.confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred)];
      if (pred == truth) ++correct;
    }
  }
  out.accuracy = static_cast<Real>(correct) / static_cast<Real>(split.count());
  out.error_rate = Real(1) - out.accuracy;
  return out;
}

void write_confusion_csv(const Evaluation& eval, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("confusion: cannot open '" + path + "' for writing");
  const std::size_t k = eval.confusion.size();
  os << "true_class";
  for (std::size_t c = 0; c < k; ++c) os << ",predicted_" << c;
  os << '\n';
  for (std::size_t r = 0; r < k; ++r) {
    os << r;
    for (std::size_t c = 0; c < k; ++c) os << ',' << eval.confusion[r][c];
    os << '\n';
  }
  os.flush();
  if (!os) throw Error("confusion: write to '" + path + "' failed");
}

void export_logits(const Model& model, const ModelParams& params,
                   const Dataset& split, const std::string& path) {
  split.validate();
  if (split.count() == 0) throw ShapeError("export_logits: empty split");
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("export_logits: cannot open '" + path + "' for writing");
  const int k = split.num_classes;
  const Index rdim = model.spec().representation_size();
  os << "sample_index,true_label,predicted_label";
  for (int c = 0; c < k; ++c) os << ",logit_" << c;
  for (Index j = 0; j < rdim; ++j) os << ",repr_" << j;
  os << '\n';
  for (Index base = 0; base < split.count(); base += kEvalChunk) {
    const Index n = std::min<Index>(kEvalChunk, split.count() - base);
    const auto [repr, logits] =
        model.forward_values(params, split.features.middleRows(base, n));
    for (Index r = 0; r < n; ++r) {
      Index pred = 0;
      for (Index c = 1; c < logits.cols(); ++c) {
        if (logits(r, c) > logits(r, pred)) pred = c;
      }
      os << (base + r) << ',' << split.labels[static_cast<std::size_t>(base + r)]
         << ',' << pred;
      for (Index c = 0; c < logits.cols(); ++c) {
        os << ',' << format_real(logits(r, c));
      }
      for (Index j = 0; j < repr.cols(); ++j) {
        os << ',' << format_real(repr(r, j));
      }
      os << '\n';
    }
  }
  os.flush();
  if (!os) throw Error("export_logits: write to '" + path + "' failed");
}

}  // namespace rankmatch
