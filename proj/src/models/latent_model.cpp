#include "models/latent_model.hpp"

#include "common/errors.hpp"

#include <algorithm>
#include <cmath>

namespace ibac {

std::string to_string(ModelKind kind) { return kind == ModelKind::Vib ? "vib" : "idm"; }

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "vib") return ModelKind::Vib;
  if (name == "idm") return ModelKind::Idm;
  throw ConfigError("unknown model kind '" + name + "' (expected vib or idm)");
}

std::vector<double> LatentModel::flat_params() const {
  std::vector<double> flat(encoder_params);
  flat.insert(flat.end(), decoder_params.begin(), decoder_params.end());
  return flat;
}

void LatentModel::set_flat_params(std::span<const double> flat) {
  if (flat.size() != param_count()) throw ShapeError("flat parameter length mismatch");
  std::copy_n(flat.begin(), encoder_params.size(), encoder_params.begin());
  std::copy(flat.begin() + static_cast<std::ptrdiff_t>(encoder_params.size()), flat.end(), decoder_params.begin());
}

LatentModel make_model(ModelKind kind, std::size_t d_obs, const ArchitectureConfig& arch, std::uint64_t seed) {
  if (d_obs == 0 || arch.d_z == 0) throw ConfigError("observation and latent dimensions must be >= 1");
  if (!(arch.lv_clamp.lo < arch.lv_clamp.hi)) throw ConfigError("lv_clamp needs lo < hi");
  LatentModel m;
  m.kind = kind;
  m.d_obs = d_obs;
  m.d_z = arch.d_z;
  m.lv_clamp = arch.lv_clamp;

  const std::size_t enc_in = kind == ModelKind::Vib ? d_obs : 2 * d_obs;
  const std::size_t dec_in = kind == ModelKind::Vib ? arch.d_z : d_obs + arch.d_z;
  m.encoder.widths = {enc_in};
  m.decoder.widths = {dec_in};
  for (std::size_t h : arch.hidden) {
    m.encoder.widths.push_back(h);
    m.decoder.widths.push_back(h);
  }
  m.encoder.widths.push_back(2 * arch.d_z);
  m.decoder.widths.push_back(d_obs);
  m.encoder.activation = m.decoder.activation = arch.activation;
  m.encoder.residual = m.decoder.residual = arch.residual;

  Rng rng(seed);
  m.encoder_params = init_params(m.encoder, rng);
  m.decoder_params = init_params(m.decoder, rng);
  return m;
}

void validate(const LatentModel& m) {
  validate(m.encoder);
  validate(m.decoder);
  const std::size_t enc_in = m.kind == ModelKind::Vib ? m.d_obs : 2 * m.d_obs;
  const std::size_t dec_in = m.kind == ModelKind::Vib ? m.d_z : m.d_obs + m.d_z;
  if (m.encoder.input_width() != enc_in || m.encoder.output_width() != 2 * m.d_z) {
    throw ShapeError("encoder widths inconsistent with d_obs=" + std::to_string(m.d_obs) +
                     ", d_z=" + std::to_string(m.d_z));
  }
  if (m.decoder.input_width() != dec_in || m.decoder.output_width() != m.d_obs) {
    throw ShapeError("decoder widths inconsistent with d_obs=" + std::to_string(m.d_obs) +
                     ", d_z=" + std::to_string(m.d_z));
  }
  if (m.encoder_params.size() != param_count(m.encoder) || m.decoder_params.size() != param_count(m.decoder)) {
    throw ShapeError("parameter vector lengths do not match specs");
  }
}

DenseMatrix encoder_input(const LatentModel& model, const DenseMatrix& obs_t, const DenseMatrix& obs_next) {
  if (obs_t.cols() != model.d_obs) {
    throw ShapeError("observation width " + std::to_string(obs_t.cols()) + " != model d_obs " +
                     std::to_string(model.d_obs));
  }
  if (model.kind == ModelKind::Vib) return obs_t;
  if (obs_next.rows() != obs_t.rows() || obs_next.cols() != obs_t.cols()) {
    throw ShapeError("idm encoder needs aligned O_t and O_next batches");
  }
  return hconcat(obs_t, obs_next);
}

GaussianPosterior encode(const LatentModel& model, const DenseMatrix& encoder_in) {
  const DenseMatrix out = mlp_forward(model.encoder_params, model.encoder, encoder_in);
  GaussianPosterior post{column_block(out, 0, model.d_z), column_block(out, model.d_z, model.d_z)};
  for (double& v : post.log_var.values()) v = std::clamp(v, model.lv_clamp.lo, model.lv_clamp.hi);
  return post;
}

GaussianPosterior encode_obs(const LatentModel& model, const DenseMatrix& obs_t) {
  if (model.kind != ModelKind::Vib) throw UnsupportedError("encode_obs needs a vib model; idm encodes pairs");
  return encode(model, encoder_input(model, obs_t, obs_t));
}

DenseMatrix decode(const LatentModel& model, const DenseMatrix& z, const DenseMatrix& obs_t) {
  if (z.cols() != model.d_z) throw ShapeError("latent width mismatch");
  if (model.kind == ModelKind::Vib) return mlp_forward(model.decoder_params, model.decoder, z);
  if (obs_t.rows() != z.rows() || obs_t.cols() != model.d_obs) throw ShapeError("idm decoder needs O_t rows");
  return mlp_forward(model.decoder_params, model.decoder, hconcat(obs_t, z));
}

DenseMatrix reparameterize(const GaussianPosterior& posterior, Rng& rng) {
  if (posterior.mu.rows() != posterior.log_var.rows() || posterior.mu.cols() != posterior.log_var.cols()) {
    throw ShapeError("posterior mu/log_var shapes differ");
  }
  DenseMatrix z(posterior.mu.rows(), posterior.mu.cols());
  const auto mu = posterior.mu.values();
  const auto lv = posterior.log_var.values();
  auto out = z.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mu[i] + std::exp(0.5 * lv[i]) * rng.normal();
  return z;
}

std::vector<double> kl_standard_normal(const GaussianPosterior& posterior) {
  if (posterior.mu.rows() != posterior.log_var.rows() || posterior.mu.cols() != posterior.log_var.cols()) {
    throw ShapeError("posterior mu/log_var shapes differ");
  }
  std::vector<double> kl(posterior.mu.rows(), 0.0);
  for (std::size_t r = 0; r < posterior.mu.rows(); ++r) {
    double acc = 0.0;
    const auto mu = posterior.mu.row(r);
    const auto lv = posterior.log_var.row(r);
    for (std::size_t d = 0; d < mu.size(); ++d) acc += mu[d] * mu[d] + (std::expm1(lv[d]) - lv[d]);
    kl[r] = 0.5 * acc;
  }
  return kl;
}

DenseMatrix extract_latents(const LatentModel& model, const ObservationPairs& pairs) {
  validate(model);
  return encode(model, encoder_input(model, pairs.obs_t, pairs.obs_next)).mu;
}

}  // namespace ibac
