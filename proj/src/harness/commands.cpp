#include "harness/commands.hpp"

#include "common/binary_io.hpp"
#include "common/errors.hpp"
#include "env/dataset_io.hpp"
#include "harness/run_steps.hpp"
#include "heads/head_io.hpp"
#include "metrics/report_io.hpp"
#include "models/checkpoint.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace ibac {

namespace {

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

TransitionDataset prepare_dataset(const TransitionDataset& base, std::size_t k, LabelReduction reduction) {
  TransitionDataset d = offset_pairs(base, k, reduction);
  quantize_to_f32(d);
  return d;
}

TransitionDataset prepare_dataset(const RunConfig& config) {
  validate(config);
  return prepare_dataset(generate(config.env), config.offset_k, config.label_reduction);
}

CsvTable loss_curve_csv(const LossCurve& curve) {
  CsvTable t;
  t.header = {"epoch", "loss_total", "loss_rec", "loss_kl"};
  for (std::size_t e = 0; e < curve.size(); ++e) {
    t.rows.push_back({std::to_string(e + 1), format_double(curve[e].total), format_double(curve[e].rec),
                      format_double(curve[e].kl)});
  }
  return t;
}

std::string format_alignment_table(const AlignmentReport& r) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-8s %10s %10s %14s\n", "channel", "H(a) nats", "max |r|", "max MI ratio");
  out << line;
  for (std::size_t j = 0; j < r.d_a; ++j) {
    if (r.channel_degenerate[j]) {
      std::snprintf(line, sizeof line, "a%-7zu %10s %10s %14s\n", j, fixed(r.entropy[j]).c_str(), "-", "degenerate");
    } else {
      std::snprintf(line, sizeof line, "a%-7zu %10s %10s %14s\n", j, fixed(r.entropy[j]).c_str(),
                    fixed(r.max_pearson_per_channel[j]).c_str(), fixed(r.max_ratio_per_channel[j]).c_str());
    }
    out << line;
  }
  std::snprintf(line, sizeof line, "%-8s %10s %10s %14s\n", "mean", "", fixed(r.mean_max_pearson()).c_str(),
                fixed(r.mean_max_ratio()).c_str());
  out << line;
  return out.str();
}

CommandOutput cmd_gen(const RunConfig& config, const std::filesystem::path& out_path) {
  const TransitionDataset d = prepare_dataset(config);
  save_dataset(out_path, d);
  std::ostringstream s;
  s << "wrote " << out_path.string() << ": N=" << d.size() << " d_obs=" << d.d_obs() << " d_a=" << d.d_a()
    << " k=" << d.offset << " env=" << to_string(d.env.kind) << " seed=" << d.env.seed;
  return {s.str()};
}

CommandOutput cmd_train(const RunConfig& config, const std::filesystem::path& dataset_path) {
  validate(config);
  const std::filesystem::path dir = std::filesystem::path(config.out_dir) / config.run_id;
  if (std::filesystem::exists(dir / "model.ibac")) {
    throw ConfigError("run_id: '" + config.run_id + "' already exists in '" + config.out_dir + "'");
  }
  const TransitionDataset d = load_dataset(dataset_path);
  const TrainedRun run = train_run(config, d, dir);
  std::ostringstream s;
  s << "trained " << to_string(config.kind) << " for " << run.curve.size() << " epochs on N=" << d.size()
    << " (k=" << d.offset << "): loss_total=" << format_double(run.final_losses.total)
    << " loss_rec=" << format_double(run.final_losses.rec) << " loss_kl=" << format_double(run.final_losses.kl)
    << "\nwrote " << (dir / "model.ibac").string();
  return {s.str()};
}

CommandOutput cmd_analyze(const std::filesystem::path& checkpoint_path, const std::filesystem::path& dataset_path,
                          const BinningConfig& binning, const std::filesystem::path& out_dir, bool identity_debug) {
  const TransitionDataset d = load_dataset(dataset_path);
  AlignmentReport report;
  if (identity_debug) {
    report = alignment_report(d.actions, d.actions, binning);
  } else {
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    report = analyze_run(ck.model, d, binning);
  }
  write_report(report, out_dir);
  return {format_alignment_table(report) + "wrote " + (out_dir / "alignment.csv").string()};
}

CommandOutput cmd_head(const std::filesystem::path& checkpoint_path, const std::filesystem::path& dataset_path,
                       const HeadRunConfig& head, const std::filesystem::path& out_dir) {
  if (head.kind != "direct" && head.kind != "index") {
    throw ConfigError("head.kind: unknown head kind '" + head.kind + "' (direct|index)");
  }
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  const TransitionDataset d = load_dataset(dataset_path);
  const HeadResult r = fit_and_evaluate_head(ck.model, d, head, out_dir);
  std::ostringstream s;
  s << head.kind << " head, M=" << r.m << ", eval rows=" << r.eval_rows << ": eval_mse=" << format_double(r.eval_mse)
    << " mean_baseline_mse=" << format_double(r.mean_baseline_mse);
  if (head.kind == "index") s << " index_accuracy=" << format_double(r.index_accuracy);
  s << "\nwrote " << (out_dir / ("head_" + head.kind + ".ibac")).string();
  return {s.str()};
}

CsvTable aggregate_sweep(const CsvTable& sweep) {
  const std::vector<std::string> keys = {"kind", "beta", "k", "seed", "cell_seed", "status"};
  std::vector<std::size_t> key_cols;
  for (const auto& k : keys) {
    if (k == "cell_seed") continue;
    key_cols.push_back(sweep.column(k));
  }
  std::vector<std::size_t> metric_cols;
  for (std::size_t c = 0; c < sweep.header.size(); ++c) {
    if (std::find(keys.begin(), keys.end(), sweep.header[c]) == keys.end()) metric_cols.push_back(c);
  }
  const std::size_t kind_c = sweep.column("kind"), beta_c = sweep.column("beta"), k_c = sweep.column("k"),
                    status_c = sweep.column("status");

  std::vector<std::array<std::string, 3>> order;
  std::map<std::array<std::string, 3>, std::vector<const std::vector<std::string>*>> groups;
  for (const auto& row : sweep.rows) {
    const std::array<std::string, 3> key{row[kind_c], row[beta_c], row[k_c]};
    if (!groups.count(key)) order.push_back(key);
    auto& g = groups[key];
    if (row[status_c] == "ok") g.push_back(&row);
  }

  CsvTable out;
  out.header = {"kind", "beta", "k", "n"};
  for (auto c : metric_cols) {
    out.header.push_back(sweep.header[c] + "_mean");
    out.header.push_back(sweep.header[c] + "_std");
  }
  for (const auto& key : order) {
    const auto& g = groups[key];
    std::vector<std::string> row{key[0], key[1], key[2], std::to_string(g.size())};
    for (auto c : metric_cols) {
      const double n = static_cast<double>(g.size());
      double mean = 0.0;
      for (const auto* r : g) mean += std::stod((*r)[c]);
      mean = g.empty() ? std::nan("") : mean / n;
      double ss = 0.0;
      for (const auto* r : g) ss += (std::stod((*r)[c]) - mean) * (std::stod((*r)[c]) - mean);
      const double sd = g.empty() ? std::nan("") : g.size() == 1 ? 0.0 : std::sqrt(ss / (n - 1.0));
      row.push_back(format_double(mean));
      row.push_back(format_double(sd));
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

CommandOutput cmd_report(const std::filesystem::path& sweep_csv, const std::filesystem::path& out_path) {
  const CsvTable sweep = parse_csv(read_text_file(sweep_csv));
  const CsvTable agg = aggregate_sweep(sweep);
  write_text_file(out_path, agg.to_string());
  std::ostringstream s;
  s << "aggregated " << sweep.rows.size() << " rows into " << agg.rows.size() << " groups\nwrote "
    << out_path.string();
  return {s.str()};
}

}  // namespace ibac
