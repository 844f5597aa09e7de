#include "heads/head_io.hpp"

#include "common/errors.hpp"
#include "models/checkpoint.hpp"

#include <set>

namespace ibac {

namespace {

void put_all(Bytes& out, std::span<const double> values) {
  for (double v : values) put_f64(out, v);
}

std::vector<double> read_all(ByteReader& in, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = in.f64();
  return v;
}

}  // namespace

nlohmann::json to_json(const HeadTrainConfig& c) {
  return {{"hidden", c.hidden},   {"activation", to_string(c.activation)}, {"residual", c.residual},
          {"lr", c.lr},           {"weight_decay", c.weight_decay},        {"epochs", c.epochs},
          {"batch_size", c.batch_size}, {"seed", c.seed}};
}

HeadTrainConfig head_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("head config: expected an object");
  static const std::set<std::string> known = {"hidden", "activation", "residual",   "lr",
                                              "weight_decay", "epochs", "batch_size", "seed"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("head." + key + ": unknown field");
  }
  HeadTrainConfig c;
  try {
    if (j.contains("hidden")) c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    if (j.contains("activation")) c.activation = activation_from_string(j.at("activation").get<std::string>());
    if (j.contains("residual")) c.residual = j.at("residual").get<bool>();
    if (j.contains("lr")) c.lr = j.at("lr").get<double>();
    if (j.contains("weight_decay")) c.weight_decay = j.at("weight_decay").get<double>();
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<std::size_t>();
    if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("head config: wrong field type");
  }
  validate(c);
  return c;
}

Bytes encode_head(const ActionHead& head, const nlohmann::json& extra) {
  Container c;
  c.version = kHeadFormatVersion;
  if (const auto* d = std::get_if<DirectProjectionHead>(&head)) {
    validate(d->spec);
    if (d->params.size() != param_count(d->spec)) throw ShapeError("direct head parameter count mismatch");
    c.meta = {{"head", "direct"}, {"spec", to_json(d->spec)}, {"param_count", d->params.size()}, {"extra", extra}};
    put_all(c.payload, d->params);
  } else {
    const auto& q = std::get<QuantizedIndexHead>(head);
    validate(q.classifier);
    if (q.params.size() != param_count(q.classifier)) throw ShapeError("index head parameter count mismatch");
    c.meta = {{"head", "index"},
              {"spec", to_json(q.classifier)},
              {"param_count", q.params.size()},
              {"k", q.codebook.size()},
              {"d_z", q.codebook.centroids.cols()},
              {"d_a", q.action_table.cols()},
              {"empty", q.codebook.empty},
              {"fallback", q.fallback},
              {"extra", extra}};
    put_all(c.payload, q.params);
    put_all(c.payload, q.codebook.centroids.values());
    put_all(c.payload, q.action_table.values());
  }
  return encode_container("IBAC", c);
}

ActionHead decode_head(std::span<const unsigned char> bytes, nlohmann::json* extra) {
  const Container c = decode_container(bytes, "IBAC", kHeadFormatVersion);
  try {
    if (!c.meta.contains("head")) throw FormatError("file holds a latent model, not an action head");
    const auto kind = c.meta.at("head").get<std::string>();
    const MlpSpec spec = mlp_spec_from_json(c.meta.at("spec"));
    validate(spec);
    const auto count = c.meta.at("param_count").get<std::size_t>();
    if (count != param_count(spec)) throw FormatError("parameter count does not match the stored spec");
    if (extra) *extra = c.meta.at("extra");
    ByteReader in(c.payload);
    if (kind == "direct") {
      if (c.payload.size() != 8 * count) throw FormatError("truncated payload");
      return DirectProjectionHead{spec, read_all(in, count)};
    }
    if (kind != "index") throw FormatError("unknown head kind '" + kind + "'");
    const auto k = c.meta.at("k").get<std::size_t>();
    const auto d_z = c.meta.at("d_z").get<std::size_t>();
    const auto d_a = c.meta.at("d_a").get<std::size_t>();
    if (c.payload.size() != 8 * (count + k * d_z + k * d_a)) throw FormatError("truncated payload");
    QuantizedIndexHead q;
    q.classifier = spec;
    q.params = read_all(in, count);
    q.codebook.centroids = DenseMatrix(k, d_z, read_all(in, k * d_z));
    q.codebook.empty = c.meta.at("empty").get<std::vector<std::uint8_t>>();
    q.action_table = DenseMatrix(k, d_a, read_all(in, k * d_a));
    q.fallback = c.meta.at("fallback").get<std::vector<std::uint8_t>>();
    if (q.codebook.empty.size() != k || q.fallback.size() != k || spec.output_width() != k) {
      throw FormatError("index head metadata disagrees with K");
    }
    return q;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed head metadata: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("malformed head metadata: ") + e.what());
  } catch (const ShapeError& e) {
    throw FormatError(std::string("malformed head metadata: ") + e.what());
  }
}

void save_head(const std::filesystem::path& path, const ActionHead& head, const nlohmann::json& extra) {
  write_file(path, encode_head(head, extra));
}

ActionHead load_head(const std::filesystem::path& path, nlohmann::json* extra) {
  return decode_head(read_file(path), extra);
}

}  // namespace ibac
