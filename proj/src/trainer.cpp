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
#include "rankmatch/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rankmatch/checkpoint.hpp"
#include "rankmatch/core/rng.hpp"
#include "rankmatch/optim.hpp"

namespace rankmatch {
namespace {

constexpr std::uint64_t kStepStream = 0x73746570ULL;

bool finite_breakdown(const LossBreakdown& b, std::string* why) {
  struct Term {
    const char* name;
    Real value;
  };
  const Term terms[] = {{"supervised_ce", b.supervised_ce},
                        {"unsupervised_ce", b.unsupervised_ce},
                        {"supervised_rank", b.supervised_rank},
                        {"unsupervised_rank", b.unsupervised_rank},
                        {"total", b.total}};
  for (const Term& t : terms) {
    if (!std::isfinite(t.value)) {
      *why = std::string("non-finite loss term ") + t.name;
      return false;
    }
  }
  return true;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

Real eval_or_zero(const Model& model, const ModelParams& params,
                  const Dataset& split) {
  if (split.count() == 0) return 0;
  return evaluate(model, params, split).accuracy;
}

}  // namespace

std::string format_report(const TrainReport& r) {
  std::ostringstream os;
  os << "steps_run = " << r.steps_run << '\n';
  os << "epochs_run = " << r.epochs_run << '\n';
  os << "steps_per_epoch = " << r.steps_per_epoch << '\n';
  os << "nan_abort = " << (r.nan_abort ? "true" : "false") << '\n';
  os << "nan_step = " << r.nan_step << '\n';
  os << "nan_reason = " << one_line(r.nan_reason) << '\n';
  os << "best_validation_accuracy = " << format_real(r.best_validation_accuracy)
     << '\n';
  os << "best_validation_step = " << r.best_validation_step << '\n';
  os << "final_train_accuracy = " << format_real(r.final_train_accuracy) << '\n';
  os << "final_validation_accuracy = " << format_real(r.final_validation_accuracy)
     << '\n';
  os << "final_test_accuracy = " << format_real(r.final_test_accuracy) << '\n';
  os << "final_validation_accuracy_raw = "
     << format_real(r.final_validation_accuracy_raw) << '\n';
  os << "final_test_accuracy_raw = " << format_real(r.final_test_accuracy_raw)
     << '\n';
  os << "max_pair_distance = " << format_real(r.max_pair_distance) << '\n';
  return os.str();
}

TrainReport run_training(const ExperimentConfig& cfg) {
  cfg.validate();
  std::filesystem::create_directories(cfg.output_dir);

  DatasetSplit split = cfg.load_dataset();
  split.validate();
  const Dataset labeled_set = gather(split.train, split.labeled_indices);

  const ModelSpec spec = cfg.model_spec(split.train);
  Model model(spec);
  ModelParams params = init_params(spec, cfg.seed);
  std::unique_ptr<Augmenter> augmenter = cfg.make_augmenter(split.train);

  SgdNesterov optimizer(cfg.optim_config());
  EmaAverager ema(cfg.ema_decay);
  ema.update(params);  // shadow starts at the initial parameters

  const ObjectiveConfig objective = cfg.objective_config();
  BatchIterator iterator(split, cfg.batch_size, cfg.mu, cfg.seed);

  TrainReport report;
  report.steps_per_epoch = iterator.steps_per_epoch();
  const Index total_steps = cfg.epochs * iterator.steps_per_epoch();

  // Baseline EMA evaluation; carried into rows until the first refresh.
  Real acc_train = eval_or_zero(model, ema.shadow(), split.train);
  Real acc_val = eval_or_zero(model, ema.shadow(), split.validation);
  Real acc_test = eval_or_zero(model, ema.shadow(), split.test);
  report.best_validation_accuracy = acc_val;
  report.best_validation_step = 0;
  save_checkpoint(cfg.output_dir + "/best_ema.ckpt", ema.shadow());

  Index global_step = 0;  // 0-based; reported steps are 1-based
  for (Index epoch = 0; epoch < cfg.epochs && !report.nan_abort; ++epoch) {
    iterator.begin_epoch(epoch);
    for (Index s = 0; s < iterator.steps_per_epoch(); ++s, ++global_step) {
      const StepBatch batch = iterator.next();
      const Dataset lab = gather(split.train, batch.labeled);
      const Dataset unlab = gather(split.train, batch.unlabeled);
      const std::uint64_t step_seed =
          mix_seed(cfg.seed, kStepStream, static_cast<std::uint64_t>(global_step));
      const Real lr = cosine_lr(cfg.lr, global_step, total_steps);

      const auto t0 = std::chrono::steady_clock::now();
      MetricsRow row;
      try {
        LabeledBatch labeled_batch =
            LabeledBatch::make(lab.features, lab.labels, split.train.num_classes);
        UnlabeledBatch unlabeled_batch{unlab.features};
        StepResult step = total_loss(labeled_batch, unlabeled_batch, model, params,
                                     *augmenter, objective, step_seed, true);

        std::string why;
        if (!finite_breakdown(step.breakdown, &why)) {
          report.nan_abort = true;
          report.nan_step = global_step + 1;
          report.nan_reason = why;
          break;
        }
        optimizer.step(params, step.param_grads, lr);
        ema.update(params);

        report.max_pair_distance =
            std::max(report.max_pair_distance, step.breakdown.max_pair_distance);
        row.supervised_ce = step.breakdown.supervised_ce;
        row.unsupervised_ce = step.breakdown.unsupervised_ce;
        row.supervised_rank = step.breakdown.supervised_rank;
        row.unsupervised_rank = step.breakdown.unsupervised_rank;
        row.total = step.breakdown.total;
        row.confident_fraction = step.breakdown.confident_fraction;
      } catch (const NumericError& e) {
        report.nan_abort = true;
        report.nan_step = global_step + 1;
        report.nan_reason = e.what();
        break;
      }

      const bool epoch_end = s + 1 == iterator.steps_per_epoch();
      const bool eval_now = cfg.eval_every_steps > 0
                                ? (global_step + 1) % cfg.eval_every_steps == 0
                                : epoch_end;
      if (eval_now) {
        acc_train = eval_or_zero(model, ema.shadow(), split.train);
        acc_val = eval_or_zero(model, ema.shadow(), split.validation);
        acc_test = eval_or_zero(model, ema.shadow(), split.test);
        if (acc_val > report.best_validation_accuracy) {
          report.best_validation_accuracy = acc_val;
          report.best_validation_step = global_step + 1;
          save_checkpoint(cfg.output_dir + "/best_ema.ckpt", ema.shadow());
        }
      }

      row.step = global_step + 1;
      row.epoch = epoch;
      row.lr = lr;
      row.train_accuracy = acc_train;
      row.validation_accuracy = acc_val;
      row.test_accuracy = acc_test;
      if (cfg.log_wall_time) {
        row.wall_time_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                               std::chrono::steady_clock::now() - t0)
                               .count();
      }
      report.rows.push_back(row);
      ++report.steps_run;
      if (epoch_end) ++report.epochs_run;
    }
  }

  report.final_train_accuracy = eval_or_zero(model, ema.shadow(), split.train);
  report.final_validation_accuracy =
      eval_or_zero(model, ema.shadow(), split.validation);
  report.final_test_accuracy = eval_or_zero(model, ema.shadow(), split.test);
  report.final_validation_accuracy_raw =
      eval_or_zero(model, params, split.validation);
  report.final_test_accuracy_raw = eval_or_zero(model, params, split.test);

  save_checkpoint(cfg.output_dir + "/final_ema.ckpt", ema.shadow());
  save_checkpoint(cfg.output_dir + "/final_raw.ckpt", params);
  if (!report.rows.empty()) {
    emit_metrics(report.rows, cfg.output_dir + "/metrics.csv");
  }
  {
    std::ofstream os(cfg.output_dir + "/report.txt", std::ios::trunc);
    if (!os) throw Error("trainer: cannot write report.txt");
    os << format_report(report);
  }
  if (split.test.count() > 0) {
    write_confusion_csv(evaluate(model, ema.shadow(), split.test),
                        cfg.output_dir + "/confusion.csv");
  }
  return report;
}

}  // namespace rankmatch
