#pragma once

#include "common/csv.hpp"
#include "harness/config.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace ibac {

// generate -> offset_pairs(k) -> f32 rounding, i.e. exactly what a dataset
// file holds after a save/load round trip.
TransitionDataset prepare_dataset(const TransitionDataset& base, std::size_t k, LabelReduction reduction);
TransitionDataset prepare_dataset(const RunConfig& config);

CsvTable loss_curve_csv(const LossCurve& curve);

// Side-by-side per-channel maxima, one line per action channel.
std::string format_alignment_table(const AlignmentReport& report);

struct CommandOutput {
  std::string summary;
};

CommandOutput cmd_gen(const RunConfig& config, const std::filesystem::path& out_path);

// Writes <out_dir>/<run_id>/{model.ibac, loss.csv, run.json}. Throws
// TrainingDiverged after saving the last good checkpoint with the divergence
// marker set. Refuses to reuse an existing run directory.
CommandOutput cmd_train(const RunConfig& config, const std::filesystem::path& dataset_path);

// Writes <out_dir>/alignment.{csv,json}. With identity_debug the dataset's
// own actions stand in for the latents.
CommandOutput cmd_analyze(const std::filesystem::path& checkpoint_path, const std::filesystem::path& dataset_path,
                          const BinningConfig& binning, const std::filesystem::path& out_dir,
                          bool identity_debug = false);

// Writes <out_dir>/head_<kind>.ibac and head_metrics.csv.
CommandOutput cmd_head(const std::filesystem::path& checkpoint_path, const std::filesystem::path& dataset_path,
                       const HeadRunConfig& head, const std::filesystem::path& out_dir);

// Per-(kind, beta, k) mean and sample standard deviation of every metric over
// the successful seeds of a sweep CSV.
CsvTable aggregate_sweep(const CsvTable& sweep);
CommandOutput cmd_report(const std::filesystem::path& sweep_csv, const std::filesystem::path& out_path);

}  // namespace ibac
