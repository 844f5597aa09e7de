#include "harness/sweep.hpp"

#include "common/binary_io.hpp"
#include "common/errors.hpp"
#include "env/dataset_io.hpp"
#include "harness/commands.hpp"
#include "harness/run_steps.hpp"
#include "tensor/rng.hpp"

#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>
#include <thread>

namespace ibac {

namespace {

std::uint64_t kind_tag(ModelKind k) { return k == ModelKind::Vib ? 0x766962 : 0x69646d; }

std::string short_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

// Status cells must stay on one CSV field.
std::string sanitize(std::string s) {
  for (auto& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

std::vector<std::string> header_for(const SweepConfig& sweep) {
  std::vector<std::string> h = {"kind",     "beta",     "k",        "seed",           "cell_seed",
                                "status",   "loss_total", "loss_rec", "loss_kl",      "mean_max_ratio",
                                "mean_max_abs_r"};
  for (std::size_t j = 0; j < sweep.base.env.action_dim; ++j) h.push_back("max_ratio_a" + std::to_string(j));
  for (std::size_t j = 0; j < sweep.base.env.action_dim; ++j) h.push_back("max_abs_r_a" + std::to_string(j));
  for (auto m : sweep.head_m) {
    h.push_back("direct_mse_m" + std::to_string(m));
    h.push_back("mean_mse_m" + std::to_string(m));
  }
  return h;
}

struct DatasetKey {
  std::uint64_t seed;
  std::size_t k;
  auto operator<=>(const DatasetKey&) const = default;
};

std::vector<std::string> run_cell(const SweepConfig& sweep, const SweepCell& cell, const TransitionDataset& data,
                                  const std::filesystem::path& dir, std::size_t columns) {
  const RunConfig config = cell_run_config(sweep, cell);
  std::vector<std::string> row = {to_string(cell.kind), format_double(cell.beta), std::to_string(cell.k),
                                  std::to_string(cell.seed), std::to_string(config.train.seed), "ok"};
  try {
    const TrainedRun run = train_run(config, data, dir);
    const AlignmentReport report = analyze_run(run.model, data, config.binning);
    write_report(report, dir);
    row.push_back(format_double(run.final_losses.total));
    row.push_back(format_double(run.final_losses.rec));
    row.push_back(format_double(run.final_losses.kl));
    row.push_back(format_double(report.mean_max_ratio()));
    row.push_back(format_double(report.mean_max_pearson()));
    for (double v : report.max_ratio_per_channel) row.push_back(format_double(v));
    for (double v : report.max_pearson_per_channel) row.push_back(format_double(v));
    if (!sweep.head_m.empty()) {
      const DenseMatrix latents = extract_latents(run.model, training_view(data));
      CsvTable heads;
      heads.header = {"m", "eval_mse", "train_mse", "mean_baseline_mse"};
      for (auto m : sweep.head_m) {
        HeadRunConfig h = config.head;
        h.kind = "direct";
        h.m = m;
        const HeadResult r = fit_head_on_latents(latents, data.actions, h);
        row.push_back(format_double(r.eval_mse));
        row.push_back(format_double(r.mean_baseline_mse));
        heads.rows.push_back({std::to_string(m), format_double(r.eval_mse), format_double(r.train_mse),
                              format_double(r.mean_baseline_mse)});
      }
      write_text_file(dir / "heads.csv", heads.to_string());
    }
  } catch (const TrainingDiverged& e) {
    row.resize(6);
    row[5] = sanitize("diverged at epoch " + std::to_string(e.epoch()));
  } catch (const std::exception& e) {
    row.resize(6);
    row[5] = sanitize(std::string("error: ") + e.what());
  }
  while (row.size() < columns) row.push_back("nan");
  return row;
}

}  // namespace

std::uint64_t dataset_seed(std::uint64_t env_seed, std::uint64_t seed) {
  return mix_seed({env_seed, 0x64617461, seed});
}

std::uint64_t cell_seed(std::uint64_t train_seed, const SweepCell& cell) {
  return mix_seed({train_seed, kind_tag(cell.kind), std::bit_cast<std::uint64_t>(cell.beta), cell.k, cell.seed});
}

std::string cell_name(const SweepCell& cell) {
  return to_string(cell.kind) + "_b" + short_double(cell.beta) + "_k" + std::to_string(cell.k) + "_s" +
         std::to_string(cell.seed);
}

RunConfig cell_run_config(const SweepConfig& sweep, const SweepCell& cell) {
  RunConfig c = sweep.base;
  c.run_id = cell_name(cell);
  c.kind = cell.kind;
  c.offset_k = cell.k;
  c.env.seed = dataset_seed(sweep.base.env.seed, cell.seed);
  c.train.beta = cell.beta;
  c.train.seed = cell_seed(sweep.base.train.seed, cell);
  // few-shot splits depend on the data only, so kinds and betas share them
  c.head.seed = mix_seed({sweep.base.head.seed, cell.k, cell.seed});
  c.head.direct.seed = c.head.seed;
  c.head.index.seed = c.head.seed;
  return c;
}

std::vector<SweepCell> sweep_cells(const SweepConfig& sweep) {
  std::vector<SweepCell> cells;
  for (auto kind : sweep.kinds)
    for (double beta : sweep.beta_grid)
      for (auto k : sweep.offset_grid)
        for (auto seed : sweep.seeds) cells.push_back({kind, beta, k, seed});
  return cells;
}

std::size_t effective_parallelism(std::size_t requested) {
  std::size_t p = std::max<std::size_t>(1, requested);
  if (const char* env = std::getenv("IBAC_THREADS")) {
    char* end = nullptr;
    const unsigned long long cap = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && cap > 0) p = std::min<std::size_t>(p, cap);
  }
  return p;
}

SweepOutcome run_sweep(const SweepConfig& sweep, const std::filesystem::path& out_dir) {
  validate(sweep);
  const auto cells = sweep_cells(sweep);
  const auto header = header_for(sweep);
  std::filesystem::create_directories(out_dir);
  write_text_file(out_dir / "sweep.json", to_json(sweep).dump(2) + "\n");

  // Datasets are generated once per seed value and shared by every cell.
  std::map<DatasetKey, TransitionDataset> datasets;
  std::map<std::uint64_t, std::string> dataset_errors;
  for (auto seed : sweep.seeds) {
    if (dataset_errors.count(seed) || datasets.count({seed, sweep.offset_grid.front()})) continue;
    try {
      EnvConfig env = sweep.base.env;
      env.seed = dataset_seed(sweep.base.env.seed, seed);
      const TransitionDataset base = generate(env);
      for (auto k : sweep.offset_grid) {
        if (datasets.count({seed, k})) continue;
        auto d = prepare_dataset(base, k, sweep.base.label_reduction);
        save_dataset(out_dir / "data" / ("seed" + std::to_string(seed) + "_k" + std::to_string(k) + ".ibds"), d);
        datasets.emplace(DatasetKey{seed, k}, std::move(d));
      }
    } catch (const std::exception& e) {
      dataset_errors[seed] = e.what();
    }
  }

  std::vector<std::vector<std::string>> rows(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const auto& cell = cells[i];
      const auto it = datasets.find({cell.seed, cell.k});
      if (it == datasets.end()) {
        rows[i] = {to_string(cell.kind),
                   format_double(cell.beta),
                   std::to_string(cell.k),
                   std::to_string(cell.seed),
                   std::to_string(cell_seed(sweep.base.train.seed, cell)),
                   sanitize("error: dataset generation failed: " + dataset_errors[cell.seed])};
        rows[i].resize(header.size(), "nan");
        continue;
      }
      rows[i] = run_cell(sweep, cell, it->second, out_dir / "cells" / cell_name(cell), header.size());
    }
  };
  const std::size_t threads = std::min(effective_parallelism(sweep.parallelism), cells.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  SweepOutcome out;
  out.table.header = header;
  out.table.rows = std::move(rows);
  const std::size_t status_c = out.table.column("status");
  for (const auto& r : out.table.rows) out.failed += r[status_c] != "ok";
  write_text_file(out_dir / "sweep.csv", out.table.to_string());

  std::ostringstream s;
  s << "ran " << cells.size() << " cells on " << threads << " thread(s), " << out.failed << " failed\nwrote "
    << (out_dir / "sweep.csv").string();
  out.summary = s.str();
  return out;
}

}  // namespace ibac
