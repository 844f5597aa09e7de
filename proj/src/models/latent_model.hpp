#pragma once

#include "tensor/dense_matrix.hpp"
#include "tensor/mlp.hpp"
#include "tensor/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ibac {

// vib: encoder sees O_t only, decoder sees z only.
// idm: encoder sees [O_t, O_next], decoder sees [O_t, z].
enum class ModelKind { Vib, Idm };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

struct LogVarClamp {
  double lo = -8.0;
  double hi = 4.0;
  friend bool operator==(const LogVarClamp&, const LogVarClamp&) = default;
};

// Per-row diagonal Gaussian q(z | .). log_var is the natural log of the variance.
struct GaussianPosterior {
  DenseMatrix mu;
  DenseMatrix log_var;
};

struct LatentModel {
  ModelKind kind = ModelKind::Vib;
  std::size_t d_obs = 0;
  std::size_t d_z = 0;
  MlpSpec encoder;
  MlpSpec decoder;
  std::vector<double> encoder_params;
  std::vector<double> decoder_params;
  LogVarClamp lv_clamp;

  std::size_t param_count() const { return encoder_params.size() + decoder_params.size(); }
  // Encoder parameters followed by decoder parameters.
  std::vector<double> flat_params() const;
  void set_flat_params(std::span<const double> flat);

  friend bool operator==(const LatentModel&, const LatentModel&) = default;
};

struct ArchitectureConfig {
  std::size_t d_z = 4;
  std::vector<std::size_t> hidden{64, 64};
  Activation activation = Activation::Tanh;
  bool residual = false;
  LogVarClamp lv_clamp;
};

// Specs follow the kind's wiring; parameters are Glorot-initialized from `seed`.
LatentModel make_model(ModelKind kind, std::size_t d_obs, const ArchitectureConfig& arch, std::uint64_t seed);

// Throws ShapeError when specs, parameter lengths and dimensions disagree.
void validate(const LatentModel& model);

// Training-facing view: observation pairs only. Action labels never reach
// this type, so nothing that consumes it can read them.
struct ObservationPairs {
  DenseMatrix obs_t;
  DenseMatrix obs_next;

  std::size_t size() const { return obs_t.rows(); }
  std::size_t d_obs() const { return obs_t.cols(); }
};

// Encoder input for the model's wiring: O_t (vib) or [O_t, O_next] (idm).
DenseMatrix encoder_input(const LatentModel& model, const DenseMatrix& obs_t, const DenseMatrix& obs_next);

GaussianPosterior encode(const LatentModel& model, const DenseMatrix& encoder_in);

// VIB-only convenience: posterior of q(z | O_t).
GaussianPosterior encode_obs(const LatentModel& model, const DenseMatrix& obs_t);

// Decoder output; `obs_t` is ignored for vib and required for idm.
DenseMatrix decode(const LatentModel& model, const DenseMatrix& z, const DenseMatrix& obs_t);

// z = mu + exp(0.5 log_var) * eps, eps drawn row-major from `rng`.
DenseMatrix reparameterize(const GaussianPosterior& posterior, Rng& rng);

// Closed-form KL(N(mu, diag sigma^2) || N(0, I)) per row.
std::vector<double> kl_standard_normal(const GaussianPosterior& posterior);

// Posterior means for every pair, row i for transition i.
DenseMatrix extract_latents(const LatentModel& model, const ObservationPairs& pairs);

}  // namespace ibac
