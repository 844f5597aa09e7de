#pragma once

#include "env/synth_env.hpp"

#include "common/binary_io.hpp"

#include <json.hpp>

#include <filesystem>

namespace ibac {

inline constexpr std::uint16_t kDatasetFormatVersion = 1;

// Missing keys keep their defaults; unknown keys are a ConfigError.
nlohmann::json to_json(const EnvConfig& config);
EnvConfig env_config_from_json(const nlohmann::json& j);

// "IBDS" container: JSON header (env config, k, N, dims, label reduction,
// standardization constants) and three f32 row-major blocks: obs_t, obs_next,
// actions.
Bytes encode_dataset(const TransitionDataset& dataset);
TransitionDataset decode_dataset(std::span<const unsigned char> bytes);

void save_dataset(const std::filesystem::path& path, const TransitionDataset& dataset);
TransitionDataset load_dataset(const std::filesystem::path& path);

}  // namespace ibac
