#include "harness/run_steps.hpp"

#include "common/binary_io.hpp"
#include "common/csv.hpp"
#include "common/errors.hpp"
#include "harness/commands.hpp"
#include "metrics/report_io.hpp"
#include "models/checkpoint.hpp"

namespace ibac {

namespace {

nlohmann::json dataset_summary(const TransitionDataset& d) {
  return {{"k", d.offset},
          {"env_seed", d.env.seed},
          {"n", d.size()},
          {"d_obs", d.d_obs()},
          {"d_a", d.d_a()},
          {"label_reduction", to_string(d.label_reduction)}};
}

void save_run(const std::filesystem::path& dir, const RunConfig& config, const TransitionDataset& d,
              const LatentModel& model, const LossCurve& curve, bool diverged) {
  Checkpoint ck;
  ck.model = model;
  ck.train = config.train;
  ck.final_losses = curve.empty() ? LossBreakdown{std::nan(""), std::nan(""), std::nan("")} : curve.back();
  ck.diverged = diverged;
  ck.extra = {{"run_id", config.run_id}, {"dataset", dataset_summary(d)}};
  save_checkpoint(dir / "model.ibac", ck);
  write_text_file(dir / "loss.csv", loss_curve_csv(curve).to_string());
}

}  // namespace

TrainedRun train_run(const RunConfig& config, const TransitionDataset& dataset, const std::filesystem::path& dir) {
  RunConfig resolved = config;
  resolved.env = dataset.env;
  resolved.offset_k = dataset.offset;
  resolved.label_reduction = dataset.label_reduction;
  validate(resolved);
  std::filesystem::create_directories(dir);
  write_text_file(dir / "run.json", to_json(resolved).dump(2) + "\n");

  const ObservationPairs pairs = training_view(dataset);
  try {
    TrainResult r = train(config.kind, pairs, config.model, config.train);
    save_run(dir, config, dataset, r.model, r.curve, false);
    TrainedRun out{std::move(r.model), std::move(r.curve), {}};
    out.final_losses = out.curve.empty() ? LossBreakdown{std::nan(""), std::nan(""), std::nan("")} : out.curve.back();
    return out;
  } catch (const TrainingDiverged& e) {
    save_run(dir, config, dataset, e.last_good(), e.curve(), true);
    throw;
  }
}

AlignmentReport analyze_run(const LatentModel& model, const TransitionDataset& dataset, const BinningConfig& binning) {
  if (model.d_obs != dataset.d_obs()) {
    throw ShapeError("checkpoint expects d_obs=" + std::to_string(model.d_obs) + " but the dataset has d_obs=" +
                     std::to_string(dataset.d_obs()));
  }
  const DenseMatrix latents = extract_latents(model, training_view(dataset));
  return alignment_report(latents, dataset.actions, binning);
}

void write_report(const AlignmentReport& report, const std::filesystem::path& dir) {
  write_text_file(dir / "alignment.csv", report_to_csv(report).to_string());
  write_text_file(dir / "alignment.json", report_to_json(report).dump(2) + "\n");
}

HeadResult fit_head_on_latents(const DenseMatrix& latents, const DenseMatrix& actions, const HeadRunConfig& head) {
  if (latents.rows() != actions.rows()) throw ShapeError("latent and action row counts differ");
  const std::size_t n = latents.rows();
  const std::size_t e = eval_count(n, head.eval_fraction);
  const std::size_t m = head.m == 0 ? (n > e ? n - e : 0) : head.m;
  const FewShotSplit split = make_split(n, m, head.seed, head.eval_fraction);
  const LabeledActions labeled = labeled_subset(actions, split.labeled);

  HeadResult r;
  r.m = m;
  r.eval_rows = split.eval.size();
  r.mean_baseline_mse = evaluate_mean_predictor(labeled_mean(labeled), actions, split.eval).mse;
  if (head.kind == "direct") {
    HeadTrainConfig cfg = head.direct;
    const DirectProjectionHead h = fit_direct(latents, labeled, cfg);
    const DenseMatrix pred = predict(h, latents);
    const HeadMetrics eval = evaluate_predictions(pred, actions, split.eval);
    r.eval_mse = eval.mse;
    r.per_channel = eval.per_channel;
    r.train_mse = evaluate_predictions(pred, actions, split.labeled).mse;
    r.head = h;
  } else if (head.kind == "index") {
    const Codebook cb = build_codebook(latents, head.codebook_k, head.seed);
    const auto codes = assign_codes(cb, latents);
    const QuantizedIndexHead h = fit_index_head(latents, cb, codes, labeled, head.index);
    const DenseMatrix pred = predict(h, latents);
    const HeadMetrics eval = evaluate_predictions(pred, actions, split.eval);
    r.eval_mse = eval.mse;
    r.per_channel = eval.per_channel;
    r.train_mse = evaluate_predictions(pred, actions, split.labeled).mse;
    r.index_accuracy = index_accuracy(h, latents, codes, split.eval);
    r.head = h;
  } else {
    throw ConfigError("head.kind: unknown head kind '" + head.kind + "' (direct|index)");
  }
  return r;
}

HeadResult fit_and_evaluate_head(const LatentModel& model, const TransitionDataset& dataset,
                                 const HeadRunConfig& head, const std::filesystem::path& out_dir) {
  if (model.d_obs != dataset.d_obs()) {
    throw ShapeError("checkpoint expects d_obs=" + std::to_string(model.d_obs) + " but the dataset has d_obs=" +
                     std::to_string(dataset.d_obs()));
  }
  const DenseMatrix latents = extract_latents(model, training_view(dataset));
  HeadResult r = fit_head_on_latents(latents, dataset.actions, head);
  if (!out_dir.empty()) {
    save_head(out_dir / ("head_" + head.kind + ".ibac"), r.head,
              {{"m", r.m}, {"seed", head.seed}, {"eval_fraction", head.eval_fraction}});
    CsvTable t;
    t.header = {"head_kind", "m", "seed", "eval_rows", "eval_mse", "train_mse", "mean_baseline_mse", "index_accuracy"};
    std::vector<std::string> row = {head.kind,
                                    std::to_string(r.m),
                                    std::to_string(head.seed),
                                    std::to_string(r.eval_rows),
                                    format_double(r.eval_mse),
                                    format_double(r.train_mse),
                                    format_double(r.mean_baseline_mse),
                                    format_double(r.index_accuracy)};
    for (std::size_t j = 0; j < r.per_channel.size(); ++j) {
      t.header.push_back("mse_a" + std::to_string(j));
      row.push_back(format_double(r.per_channel[j]));
    }
    t.rows.push_back(std::move(row));
    write_text_file(out_dir / "head_metrics.csv", t.to_string());
  }
  return r;
}

}  // namespace ibac
