#pragma once

#include "common/binary_io.hpp"
#include "models/trainer.hpp"

#include <json.hpp>

#include <filesystem>

namespace ibac {

inline constexpr std::uint16_t kCheckpointFormatVersion = 1;

struct Checkpoint {
  LatentModel model;
  TrainConfig train;
  LossBreakdown final_losses;
  bool diverged = false;
  nlohmann::json extra = nlohmann::json::object();  // caller-defined, e.g. dataset details
};

nlohmann::json to_json(const MlpSpec& spec);
MlpSpec mlp_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ArchitectureConfig& arch);
ArchitectureConfig architecture_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LossBreakdown& losses);

// "IBAC" container; the payload is the flat parameter vector as f64.
Bytes encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::span<const unsigned char> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ibac
