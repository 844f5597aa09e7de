#include "env/dataset_io.hpp"

#include "common/binary_io.hpp"
#include "common/errors.hpp"

#include <set>

namespace ibac {

namespace {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("env.") + key + ": wrong type");
  }
}

void put_block(Bytes& out, const DenseMatrix& m) {
  for (double v : m.values()) put_f32(out, static_cast<float>(v));
}

DenseMatrix read_block(ByteReader& in, std::size_t rows, std::size_t cols) {
  DenseMatrix m(rows, cols);
  for (auto& v : m.values()) v = static_cast<double>(in.f32());
  return m;
}

}  // namespace

nlohmann::json to_json(const EnvConfig& c) {
  return {{"kind", to_string(c.kind)},
          {"state_dim", c.state_dim},
          {"action_dim", c.action_dim},
          {"nuisance_dim", c.nuisance_dim},
          {"nuisance_mode", to_string(c.nuisance_mode)},
          {"nuisance_jitter", c.nuisance_jitter},
          {"drift_sigma", c.drift_sigma},
          {"obs_noise_sigma", c.obs_noise_sigma},
          {"action_mode", to_string(c.action_mode)},
          {"segment_len", c.segment_len},
          {"segment_lens", c.segment_lens},
          {"action_levels", c.action_levels},
          {"action_scale", c.action_scale},
          {"observe_velocity", c.observe_velocity},
          {"episode_len", c.episode_len},
          {"episodes", c.episodes},
          {"seed", c.seed}};
}

EnvConfig env_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("env: expected an object");
  static const std::set<std::string> known = {
      "kind",          "state_dim",   "action_dim",    "nuisance_dim",  "nuisance_mode",    "nuisance_jitter",
      "drift_sigma",   "obs_noise_sigma", "action_mode", "segment_len", "segment_lens",     "action_levels",
      "action_scale",  "observe_velocity", "episode_len", "episodes",   "seed"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("env." + key + ": unknown field");
  }
  EnvConfig c;
  std::string s;
  if (j.contains("kind")) {
    read_field(j, "kind", s);
    c.kind = env_kind_from_string(s);
    if (c.kind == EnvKind::Arm2Link) c.state_dim = c.action_dim = 2;
  }
  read_field(j, "state_dim", c.state_dim);
  read_field(j, "action_dim", c.action_dim);
  if (!j.contains("state_dim") && c.kind == EnvKind::Pointmass) c.state_dim = c.action_dim;
  read_field(j, "nuisance_dim", c.nuisance_dim);
  if (j.contains("nuisance_mode")) {
    read_field(j, "nuisance_mode", s);
    c.nuisance_mode = nuisance_mode_from_string(s);
  }
  read_field(j, "nuisance_jitter", c.nuisance_jitter);
  read_field(j, "drift_sigma", c.drift_sigma);
  read_field(j, "obs_noise_sigma", c.obs_noise_sigma);
  if (j.contains("action_mode")) {
    read_field(j, "action_mode", s);
    c.action_mode = action_mode_from_string(s);
  }
  read_field(j, "segment_len", c.segment_len);
  read_field(j, "segment_lens", c.segment_lens);
  read_field(j, "action_levels", c.action_levels);
  read_field(j, "action_scale", c.action_scale);
  read_field(j, "observe_velocity", c.observe_velocity);
  read_field(j, "episode_len", c.episode_len);
  read_field(j, "episodes", c.episodes);
  read_field(j, "seed", c.seed);
  return c;
}

Bytes encode_dataset(const TransitionDataset& d) {
  validate(d);
  Container c;
  c.version = kDatasetFormatVersion;
  c.meta = {{"env", to_json(d.env)},
            {"seed", d.env.seed},
            {"k", d.offset},
            {"n", d.size()},
            {"d_obs", d.d_obs()},
            {"d_a", d.d_a()},
            {"label_reduction", to_string(d.label_reduction)},
            {"standardization", {{"mean", d.standardization.mean}, {"std", d.standardization.scale}}}};
  c.payload.reserve(4 * (2 * d.obs_t.size() + d.actions.size()));
  put_block(c.payload, d.obs_t);
  put_block(c.payload, d.obs_next);
  put_block(c.payload, d.actions);
  return encode_container("IBDS", c);
}

TransitionDataset decode_dataset(std::span<const unsigned char> bytes) {
  const Container c = decode_container(bytes, "IBDS", kDatasetFormatVersion);
  TransitionDataset d;
  std::size_t n = 0, d_obs = 0, d_a = 0;
  try {
    d.env = env_config_from_json(c.meta.at("env"));
    d.offset = c.meta.at("k").get<std::size_t>();
    n = c.meta.at("n").get<std::size_t>();
    d_obs = c.meta.at("d_obs").get<std::size_t>();
    d_a = c.meta.at("d_a").get<std::size_t>();
    d.label_reduction = label_reduction_from_string(c.meta.at("label_reduction").get<std::string>());
    d.standardization.mean = c.meta.at("standardization").at("mean").get<std::vector<double>>();
    d.standardization.scale = c.meta.at("standardization").at("std").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed dataset header: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("malformed dataset header: ") + e.what());
  }
  if (d.offset == 0 || d.offset >= d.env.episode_len || n != d.env.episodes * (d.env.episode_len - d.offset)) {
    throw FormatError("dataset header inconsistent: N=" + std::to_string(n) + " but episodes*(episode_len-k)=" +
                      std::to_string(d.env.episodes * (d.env.episode_len - std::min(d.offset, d.env.episode_len))));
  }
  const std::size_t expected = 4 * n * (2 * d_obs + d_a);
  if (c.payload.size() != expected) {
    throw FormatError("truncated payload: " + std::to_string(c.payload.size()) + " bytes, expected " +
                      std::to_string(expected));
  }
  ByteReader in(c.payload);
  d.obs_t = read_block(in, n, d_obs);
  d.obs_next = read_block(in, n, d_obs);
  d.actions = read_block(in, n, d_a);
  try {
    validate(d);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("malformed dataset header: ") + e.what());
  }
  return d;
}

void save_dataset(const std::filesystem::path& path, const TransitionDataset& dataset) {
  write_file(path, encode_dataset(dataset));
}

TransitionDataset load_dataset(const std::filesystem::path& path) { return decode_dataset(read_file(path)); }

}  // namespace ibac
