#pragma once

#include "models/latent_model.hpp"

#include <cstddef>
#include <vector>

namespace ibac {

struct LossBreakdown {
  double total = 0.0;
  double rec = 0.0;  // mean over batch rows and observation features
  double kl = 0.0;   // mean over rows of the per-row KL (summed over latent dims)
};

// Loss of one minibatch with the wiring of `model.kind`. When `grad` is
// non-null it receives d total / d flat_params(). The reparameterization
// noise is drawn from `rng`, so a fixed seed makes the loss a deterministic
// function of the parameters. Non-finite losses raise DivergenceError with
// `batch_index`.
LossBreakdown latent_loss(const LatentModel& model, const DenseMatrix& obs_t, const DenseMatrix& obs_next,
                          double beta, Rng& rng, std::vector<double>* grad = nullptr, std::size_t batch_index = 0);

// Kind-checked entry points.
LossBreakdown vib_loss(const LatentModel& model, const DenseMatrix& obs_t, const DenseMatrix& obs_next, double beta,
                       Rng& rng, std::vector<double>* grad = nullptr);
LossBreakdown idm_loss(const LatentModel& model, const DenseMatrix& obs_t, const DenseMatrix& obs_next, double beta,
                       Rng& rng, std::vector<double>* grad = nullptr);

}  // namespace ibac
