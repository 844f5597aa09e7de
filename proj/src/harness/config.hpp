#pragma once

#include "env/synth_env.hpp"
#include "heads/action_heads.hpp"
#include "metrics/info_metrics.hpp"
#include "models/trainer.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace ibac {

struct HeadRunConfig {
  std::string kind = "direct";  // direct | index
  std::size_t m = 50;           // labeled rows; 0 means every row outside the evaluation set
  std::uint64_t seed = 1;
  double eval_fraction = 0.2;
  std::size_t codebook_k = 16;
  HeadTrainConfig direct;
  HeadTrainConfig index{{32}, Activation::Tanh, false, 3e-3, 0.0, 20, 256, 1};
};

struct RunConfig {
  std::string run_id = "run";
  std::string out_dir = "out";
  ModelKind kind = ModelKind::Vib;
  std::size_t offset_k = 1;
  LabelReduction label_reduction = LabelReduction::First;
  EnvConfig env;
  ArchitectureConfig model;
  TrainConfig train;
  BinningConfig binning;
  HeadRunConfig head;
};

struct SweepConfig {
  RunConfig base;
  std::vector<ModelKind> kinds{ModelKind::Vib};
  std::vector<double> beta_grid{1e-4, 1e-3, 1e-2, 1e-1, 1.0};
  std::vector<std::size_t> offset_grid{1, 2, 4, 8};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::size_t parallelism = 1;
  std::vector<std::size_t> head_m;  // direct-head few-shot sizes evaluated per cell
};

// Field-level ConfigError messages ("train.epochs: ..."); unknown keys are
// rejected so typos do not silently fall back to defaults.
RunConfig run_config_from_json(const nlohmann::json& j);
SweepConfig sweep_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& config);
nlohmann::json to_json(const SweepConfig& config);

void validate(const RunConfig& config);
void validate(const SweepConfig& config);

nlohmann::json read_json_file(const std::filesystem::path& path);
RunConfig load_run_config(const std::filesystem::path& path);
SweepConfig load_sweep_config(const std::filesystem::path& path);

}  // namespace ibac
