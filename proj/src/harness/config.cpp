#include "harness/config.hpp"

#include "common/binary_io.hpp"
#include "common/errors.hpp"
#include "env/dataset_io.hpp"
#include "heads/head_io.hpp"
#include "metrics/report_io.hpp"
#include "models/checkpoint.hpp"

#include <cmath>
#include <set>

namespace ibac {

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& prefix) {
  if (!j.is_object()) throw ConfigError((prefix.empty() ? std::string("config") : prefix) + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError((prefix.empty() ? "" : prefix + ".") + key + ": unknown field");
  }
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out, const std::string& prefix) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError((prefix.empty() ? "" : prefix + ".") + key + ": wrong type");
  }
}

HeadRunConfig head_run_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"kind", "m", "seed", "eval_fraction", "codebook_k", "direct", "index"}, "head");
  HeadRunConfig h;
  read_field(j, "kind", h.kind, "head");
  read_field(j, "m", h.m, "head");
  read_field(j, "seed", h.seed, "head");
  read_field(j, "eval_fraction", h.eval_fraction, "head");
  read_field(j, "codebook_k", h.codebook_k, "head");
  if (j.contains("direct")) h.direct = head_config_from_json(j.at("direct"));
  if (j.contains("index")) {
    // partial index configs start from the index defaults
    nlohmann::json merged = to_json(h.index);
    merged.update(j.at("index"));
    h.index = head_config_from_json(merged);
  }
  return h;
}

nlohmann::json to_json(const HeadRunConfig& h) {
  return {{"kind", h.kind},
          {"m", h.m},
          {"seed", h.seed},
          {"eval_fraction", h.eval_fraction},
          {"codebook_k", h.codebook_k},
          {"direct", to_json(h.direct)},
          {"index", to_json(h.index)}};
}

const std::set<std::string> kRunKeys = {"run_id", "out_dir", "kind",  "offset_k", "label_reduction", "env",
                                        "model",  "train",   "binning", "head"};

}  // namespace

RunConfig run_config_from_json(const nlohmann::json& j) {
  reject_unknown(j, kRunKeys, "");
  RunConfig c;
  read_field(j, "run_id", c.run_id, "");
  read_field(j, "out_dir", c.out_dir, "");
  if (j.contains("kind")) {
    std::string s;
    read_field(j, "kind", s, "");
    c.kind = model_kind_from_string(s);
  }
  read_field(j, "offset_k", c.offset_k, "");
  if (j.contains("label_reduction")) {
    std::string s;
    read_field(j, "label_reduction", s, "");
    c.label_reduction = label_reduction_from_string(s);
  }
  if (j.contains("env")) c.env = env_config_from_json(j.at("env"));
  if (j.contains("model")) c.model = architecture_from_json(j.at("model"));
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
  if (j.contains("binning")) c.binning = binning_from_json(j.at("binning"));
  if (j.contains("head")) c.head = head_run_from_json(j.at("head"));
  validate(c);
  return c;
}

SweepConfig sweep_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: expected an object");
  nlohmann::json base = j;
  nlohmann::json sweep = nlohmann::json::object();
  if (base.contains("sweep")) {
    sweep = base.at("sweep");
    base.erase("sweep");
  }
  SweepConfig c;
  c.base = run_config_from_json(base);
  reject_unknown(sweep, {"kinds", "beta_grid", "offset_grid", "seeds", "parallelism", "head_m"}, "sweep");
  if (sweep.contains("kinds")) {
    std::vector<std::string> names;
    read_field(sweep, "kinds", names, "sweep");
    c.kinds.clear();
    for (const auto& n : names) c.kinds.push_back(model_kind_from_string(n));
  }
  read_field(sweep, "beta_grid", c.beta_grid, "sweep");
  read_field(sweep, "offset_grid", c.offset_grid, "sweep");
  read_field(sweep, "seeds", c.seeds, "sweep");
  read_field(sweep, "parallelism", c.parallelism, "sweep");
  read_field(sweep, "head_m", c.head_m, "sweep");
  validate(c);
  return c;
}

nlohmann::json to_json(const RunConfig& c) {
  return {{"run_id", c.run_id},
          {"out_dir", c.out_dir},
          {"kind", to_string(c.kind)},
          {"offset_k", c.offset_k},
          {"label_reduction", to_string(c.label_reduction)},
          {"env", to_json(c.env)},
          {"model", to_json(c.model)},
          {"train", to_json(c.train)},
          {"binning", to_json(c.binning)},
          {"head", to_json(c.head)}};
}

nlohmann::json to_json(const SweepConfig& c) {
  nlohmann::json j = to_json(c.base);
  std::vector<std::string> kinds;
  for (auto k : c.kinds) kinds.push_back(to_string(k));
  j["sweep"] = {{"kinds", kinds},
                {"beta_grid", c.beta_grid},
                {"offset_grid", c.offset_grid},
                {"seeds", c.seeds},
                {"parallelism", c.parallelism},
                {"head_m", c.head_m}};
  return j;
}

void validate(const RunConfig& c) {
  if (c.run_id.empty() || c.run_id.find('/') != std::string::npos) {
    throw ConfigError("run_id: must be a non-empty name without '/'");
  }
  validate(c.env);
  validate(c.train);
  validate(c.binning);
  if (c.offset_k == 0) throw ConfigError("offset_k: must be >= 1");
  if (c.offset_k >= c.env.episode_len) throw ConfigError("offset_k: must be < env.episode_len");
  if (c.head.kind != "direct" && c.head.kind != "index") {
    throw ConfigError("head.kind: unknown head kind '" + c.head.kind + "' (direct|index)");
  }
  if (!(c.head.eval_fraction > 0.0 && c.head.eval_fraction < 1.0)) {
    throw ConfigError("head.eval_fraction: must be in (0, 1)");
  }
  if (c.head.codebook_k < 1) throw ConfigError("head.codebook_k: must be >= 1");
}

void validate(const SweepConfig& c) {
  validate(c.base);
  if (c.kinds.empty()) throw ConfigError("sweep.kinds: must not be empty");
  if (c.beta_grid.empty()) throw ConfigError("sweep.beta_grid: must not be empty");
  if (c.offset_grid.empty()) throw ConfigError("sweep.offset_grid: must not be empty");
  if (c.seeds.empty()) throw ConfigError("sweep.seeds: must not be empty");
  if (c.parallelism == 0) throw ConfigError("sweep.parallelism: must be >= 1");
  for (double b : c.beta_grid) {
    if (!std::isfinite(b) || b < 0.0) throw ConfigError("sweep.beta_grid: values must be finite and >= 0");
  }
  for (auto k : c.offset_grid) {
    if (k == 0 || k >= c.base.env.episode_len) throw ConfigError("sweep.offset_grid: need 1 <= k < env.episode_len");
  }
  for (auto m : c.head_m) {
    if (m == 0) throw ConfigError("sweep.head_m: values must be >= 1");
  }
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  nlohmann::json j = read_json_file(path);
  // a sweep document is also a valid run config for its base run
  if (j.is_object()) j.erase("sweep");
  return run_config_from_json(j);
}

SweepConfig load_sweep_config(const std::filesystem::path& path) { return sweep_config_from_json(read_json_file(path)); }

}  // namespace ibac
