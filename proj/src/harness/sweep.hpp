#pragma once

#include "common/csv.hpp"
#include "harness/config.hpp"

#include <filesystem>
#include <string>

namespace ibac {

struct SweepCell {
  ModelKind kind = ModelKind::Vib;
  double beta = 0.0;
  std::size_t k = 1;
  std::uint64_t seed = 0;
};

// Dataset seed shared by every cell with this seed value.
std::uint64_t dataset_seed(std::uint64_t env_seed, std::uint64_t seed);
// Training seed: depends only on the cell's own coordinates, so adding grid
// points leaves existing cells unchanged.
std::uint64_t cell_seed(std::uint64_t train_seed, const SweepCell& cell);
std::string cell_name(const SweepCell& cell);

// Fully resolved run configuration of one cell; cmd_gen + cmd_train on it
// reproduce the cell's artifacts.
RunConfig cell_run_config(const SweepConfig& sweep, const SweepCell& cell);

// Cells in key order: kind, beta, k, seed (grid order within each).
std::vector<SweepCell> sweep_cells(const SweepConfig& sweep);

// min(parallelism, IBAC_THREADS) when the variable holds a positive integer.
std::size_t effective_parallelism(std::size_t requested);

struct SweepOutcome {
  CsvTable table;
  std::size_t failed = 0;
  std::string summary;
};

// Writes <out_dir>/sweep.csv, <out_dir>/data/*.ibds and one directory per
// cell under <out_dir>/cells. Failed cells keep their row with a status.
SweepOutcome run_sweep(const SweepConfig& sweep, const std::filesystem::path& out_dir);

}  // namespace ibac
