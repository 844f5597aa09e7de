#include "models/checkpoint.hpp"

#include "common/errors.hpp"

#include <cmath>
#include <set>

namespace ibac {

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& prefix) {
  if (!j.is_object()) throw ConfigError(prefix + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError(prefix + "." + key + ": unknown field");
  }
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out, const std::string& prefix) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(prefix + "." + key + ": wrong type");
  }
}

double number_or_nan(const nlohmann::json& j) { return j.is_number() ? j.get<double>() : std::nan(""); }

}  // namespace

nlohmann::json to_json(const MlpSpec& s) {
  return {{"widths", s.widths}, {"activation", to_string(s.activation)}, {"residual", s.residual}};
}

MlpSpec mlp_spec_from_json(const nlohmann::json& j) {
  MlpSpec s;
  s.widths = j.at("widths").get<std::vector<std::size_t>>();
  s.activation = activation_from_string(j.at("activation").get<std::string>());
  s.residual = j.at("residual").get<bool>();
  return s;
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"beta", c.beta}, {"lr", c.lr}, {"epochs", c.epochs}, {"batch_size", c.batch_size}, {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"beta", "lr", "epochs", "batch_size", "seed"}, "train");
  TrainConfig c;
  read_field(j, "beta", c.beta, "train");
  read_field(j, "lr", c.lr, "train");
  read_field(j, "epochs", c.epochs, "train");
  read_field(j, "batch_size", c.batch_size, "train");
  read_field(j, "seed", c.seed, "train");
  return c;
}

nlohmann::json to_json(const ArchitectureConfig& a) {
  return {{"d_z", a.d_z},
          {"hidden", a.hidden},
          {"activation", to_string(a.activation)},
          {"residual", a.residual},
          {"log_var_min", a.lv_clamp.lo},
          {"log_var_max", a.lv_clamp.hi}};
}

ArchitectureConfig architecture_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"d_z", "hidden", "activation", "residual", "log_var_min", "log_var_max"}, "model");
  ArchitectureConfig a;
  read_field(j, "d_z", a.d_z, "model");
  read_field(j, "hidden", a.hidden, "model");
  if (j.contains("activation")) {
    std::string name;
    read_field(j, "activation", name, "model");
    a.activation = activation_from_string(name);
  }
  read_field(j, "residual", a.residual, "model");
  read_field(j, "log_var_min", a.lv_clamp.lo, "model");
  read_field(j, "log_var_max", a.lv_clamp.hi, "model");
  if (a.d_z == 0) throw ConfigError("model.d_z: must be >= 1");
  if (!(a.lv_clamp.lo < a.lv_clamp.hi)) throw ConfigError("model.log_var_min: must be < log_var_max");
  for (auto h : a.hidden) {
    if (h == 0) throw ConfigError("model.hidden: widths must be >= 1");
  }
  return a;
}

nlohmann::json to_json(const LossBreakdown& l) { return {{"total", l.total}, {"rec", l.rec}, {"kl", l.kl}}; }

Bytes encode_checkpoint(const Checkpoint& ck) {
  validate(ck.model);
  Container c;
  c.version = kCheckpointFormatVersion;
  c.meta = {{"kind", to_string(ck.model.kind)},
            {"d_obs", ck.model.d_obs},
            {"d_z", ck.model.d_z},
            {"encoder", to_json(ck.model.encoder)},
            {"decoder", to_json(ck.model.decoder)},
            {"log_var_min", ck.model.lv_clamp.lo},
            {"log_var_max", ck.model.lv_clamp.hi},
            {"param_count", ck.model.param_count()},
            {"train", to_json(ck.train)},
            {"seed", ck.train.seed},
            {"final_losses", to_json(ck.final_losses)},
            {"diverged", ck.diverged},
            {"extra", ck.extra}};
  const auto flat = ck.model.flat_params();
  c.payload.reserve(8 * flat.size());
  for (double v : flat) put_f64(c.payload, v);
  return encode_container("IBAC", c);
}

Checkpoint decode_checkpoint(std::span<const unsigned char> bytes) {
  const Container c = decode_container(bytes, "IBAC", kCheckpointFormatVersion);
  Checkpoint ck;
  std::size_t count = 0;
  try {
    if (c.meta.contains("head")) throw FormatError("file holds an action head, not a latent model");
    ck.model.kind = model_kind_from_string(c.meta.at("kind").get<std::string>());
    ck.model.d_obs = c.meta.at("d_obs").get<std::size_t>();
    ck.model.d_z = c.meta.at("d_z").get<std::size_t>();
    ck.model.encoder = mlp_spec_from_json(c.meta.at("encoder"));
    ck.model.decoder = mlp_spec_from_json(c.meta.at("decoder"));
    ck.model.lv_clamp = {c.meta.at("log_var_min").get<double>(), c.meta.at("log_var_max").get<double>()};
    count = c.meta.at("param_count").get<std::size_t>();
    ck.train = train_config_from_json(c.meta.at("train"));
    const auto& l = c.meta.at("final_losses");
    ck.final_losses = {number_or_nan(l.at("total")), number_or_nan(l.at("rec")), number_or_nan(l.at("kl"))};
    ck.diverged = c.meta.at("diverged").get<bool>();
    ck.extra = c.meta.at("extra");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed checkpoint metadata: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("malformed checkpoint metadata: ") + e.what());
  }
  if (c.payload.size() != 8 * count) {
    throw FormatError("truncated payload: " + std::to_string(c.payload.size()) + " bytes for " +
                      std::to_string(count) + " parameters");
  }
  ck.model.encoder_params.assign(param_count(ck.model.encoder), 0.0);
  ck.model.decoder_params.assign(param_count(ck.model.decoder), 0.0);
  if (ck.model.param_count() != count) throw FormatError("parameter count does not match the stored specs");
  ByteReader in(c.payload);
  std::vector<double> flat(count);
  for (auto& v : flat) v = in.f64();
  ck.model.set_flat_params(flat);
  try {
    validate(ck.model);
  } catch (const Error& e) {
    throw FormatError(std::string("inconsistent checkpoint: ") + e.what());
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  write_file(path, encode_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace ibac
