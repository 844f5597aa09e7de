#pragma once

#include "common/binary_io.hpp"
#include "heads/action_heads.hpp"

#include <json.hpp>

#include <filesystem>
#include <variant>

namespace ibac {

inline constexpr std::uint16_t kHeadFormatVersion = 1;

using ActionHead = std::variant<DirectProjectionHead, QuantizedIndexHead>;

// "IBAC" container tagged with "head": "direct" | "index". Payload for
// direct: MLP params. For index: classifier params, codebook, action table.
Bytes encode_head(const ActionHead& head, const nlohmann::json& extra = nlohmann::json::object());
ActionHead decode_head(std::span<const unsigned char> bytes, nlohmann::json* extra = nullptr);

void save_head(const std::filesystem::path& path, const ActionHead& head,
               const nlohmann::json& extra = nlohmann::json::object());
ActionHead load_head(const std::filesystem::path& path, nlohmann::json* extra = nullptr);

nlohmann::json to_json(const HeadTrainConfig& config);
HeadTrainConfig head_config_from_json(const nlohmann::json& j);

}  // namespace ibac
