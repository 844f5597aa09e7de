#pragma once

// Steps shared by the single-run commands and sweep cells, so that both paths
// produce identical artifacts for identical inputs.

#include "harness/config.hpp"
#include "heads/head_io.hpp"

#include <cmath>
#include <filesystem>

namespace ibac {

struct TrainedRun {
  LatentModel model;
  LossCurve curve;
  LossBreakdown final_losses;
};

// Writes run.json, model.ibac and loss.csv into `dir`. On divergence the last
// good model is saved with the divergence marker and TrainingDiverged is
// rethrown.
TrainedRun train_run(const RunConfig& config, const TransitionDataset& dataset, const std::filesystem::path& dir);

// Latents are posterior means on the standardized training view.
AlignmentReport analyze_run(const LatentModel& model, const TransitionDataset& dataset, const BinningConfig& binning);
void write_report(const AlignmentReport& report, const std::filesystem::path& dir);

struct HeadResult {
  ActionHead head;
  std::size_t m = 0;
  std::size_t eval_rows = 0;
  double eval_mse = 0.0;
  double train_mse = 0.0;
  double mean_baseline_mse = 0.0;
  double index_accuracy = std::nan("");
  std::vector<double> per_channel;
};

// Few-shot fit on `latents` under make_split(N, m, head.seed). m == 0 takes
// every row outside the evaluation set.
HeadResult fit_head_on_latents(const DenseMatrix& latents, const DenseMatrix& actions, const HeadRunConfig& head);

// As above on the model's latents; writes head_<kind>.ibac and
// head_metrics.csv into `out_dir` unless it is empty.
HeadResult fit_and_evaluate_head(const LatentModel& model, const TransitionDataset& dataset,
                                 const HeadRunConfig& head, const std::filesystem::path& out_dir);

}  // namespace ibac
