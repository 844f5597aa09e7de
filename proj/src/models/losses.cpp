#include "models/losses.hpp"

#include "common/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ibac {

LossBreakdown latent_loss(const LatentModel& model, const DenseMatrix& obs_t, const DenseMatrix& obs_next,
                          double beta, Rng& rng, std::vector<double>* grad, std::size_t batch_index) {
  if (obs_t.rows() != obs_next.rows() || obs_t.cols() != obs_next.cols()) {
    throw ShapeError("O_t and O_next batches are not aligned");
  }
  if (obs_t.rows() == 0) throw EmptyError("loss of an empty batch");
  if (beta < 0.0) throw ConfigError("beta must be >= 0");
  validate(model);

  const std::size_t batch = obs_t.rows();
  const std::size_t d_z = model.d_z;
  const std::size_t d_obs = model.d_obs;
  const double inv_b = 1.0 / static_cast<double>(batch);
  const double inv_bd = 1.0 / static_cast<double>(batch * d_obs);

  MlpTape enc_tape;
  const DenseMatrix enc_out =
      mlp_forward_tape(model.encoder_params, model.encoder, encoder_input(model, obs_t, obs_next), enc_tape);

  DenseMatrix mu(batch, d_z);
  DenseMatrix lv(batch, d_z);
  DenseMatrix eps(batch, d_z);
  DenseMatrix z(batch, d_z);
  double kl_sum = 0.0;
  for (std::size_t r = 0; r < batch; ++r) {
    for (std::size_t d = 0; d < d_z; ++d) {
      const double m = enc_out(r, d);
      const double l = std::clamp(enc_out(r, d_z + d), model.lv_clamp.lo, model.lv_clamp.hi);
      const double e = rng.normal();
      mu(r, d) = m;
      lv(r, d) = l;
      eps(r, d) = e;
      z(r, d) = m + std::exp(0.5 * l) * e;
      kl_sum += 0.5 * (m * m + (std::expm1(l) - l));
    }
  }

  MlpTape dec_tape;
  const DenseMatrix dec_in = model.kind == ModelKind::Vib ? z : hconcat(obs_t, z);
  const DenseMatrix recon = mlp_forward_tape(model.decoder_params, model.decoder, dec_in, dec_tape);

  DenseMatrix diff(batch, d_obs);
  diff.map() = recon.map() - obs_next.map();
  LossBreakdown loss;
  loss.rec = diff.map().squaredNorm() * inv_bd;
  loss.kl = kl_sum * inv_b;
  loss.total = loss.rec + beta * loss.kl;
  if (!std::isfinite(loss.total)) {
    throw DivergenceError("non-finite loss in batch " + std::to_string(batch_index), 0, batch_index);
  }
  if (grad == nullptr) return loss;

  grad->assign(model.param_count(), 0.0);
  std::span<double> enc_grad(grad->data(), model.encoder_params.size());
  std::span<double> dec_grad(grad->data() + model.encoder_params.size(), model.decoder_params.size());

  DenseMatrix d_recon(batch, d_obs);
  d_recon.map() = diff.map() * (2.0 * inv_bd);
  const DenseMatrix d_dec_in = mlp_backward_tape(model.decoder_params, model.decoder, dec_tape, d_recon, dec_grad, true);
  const std::size_t z_offset = model.kind == ModelKind::Vib ? 0 : d_obs;

  DenseMatrix d_enc_out(batch, 2 * d_z);
  for (std::size_t r = 0; r < batch; ++r) {
    for (std::size_t d = 0; d < d_z; ++d) {
      const double dz = d_dec_in(r, z_offset + d);
      const double sigma = std::exp(0.5 * lv(r, d));
      d_enc_out(r, d) = dz + beta * mu(r, d) * inv_b;
      const double raw = enc_out(r, d_z + d);
      const bool inside = raw >= model.lv_clamp.lo && raw <= model.lv_clamp.hi;
      d_enc_out(r, d_z + d) =
          inside ? dz * eps(r, d) * 0.5 * sigma + beta * 0.5 * std::expm1(lv(r, d)) * inv_b : 0.0;
    }
  }
  mlp_backward_tape(model.encoder_params, model.encoder, enc_tape, d_enc_out, enc_grad, false);
  return loss;
}

LossBreakdown vib_loss(const LatentModel& model, const DenseMatrix& obs_t, const DenseMatrix& obs_next, double beta,
                       Rng& rng, std::vector<double>* grad) {
  if (model.kind != ModelKind::Vib) throw UnsupportedError("vib_loss called with an idm model");
  return latent_loss(model, obs_t, obs_next, beta, rng, grad);
}

LossBreakdown idm_loss(const LatentModel& model, const DenseMatrix& obs_t, const DenseMatrix& obs_next, double beta,
                       Rng& rng, std::vector<double>* grad) {
  if (model.kind != ModelKind::Idm) throw UnsupportedError("idm_loss called with a vib model");
  return latent_loss(model, obs_t, obs_next, beta, rng, grad);
}

}  // namespace ibac
