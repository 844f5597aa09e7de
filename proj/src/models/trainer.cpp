#include "models/trainer.hpp"

#include "common/errors.hpp"
#include "tensor/adam.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace ibac {

void validate(const TrainConfig& c) {
  if (!(c.beta >= 0.0) || !std::isfinite(c.beta)) throw ConfigError("train.beta must be a finite value >= 0");
  if (!(c.lr > 0.0) || !std::isfinite(c.lr)) throw ConfigError("train.lr must be > 0");
  if (c.batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
}

std::uint64_t init_seed(std::uint64_t train_seed) { return mix_seed({train_seed, 0x696e6974ULL}); }
std::uint64_t loop_seed(std::uint64_t train_seed) { return mix_seed({train_seed, 0x6c6f6f70ULL}); }

TrainResult train(LatentModel model, const ObservationPairs& pairs, const TrainConfig& config) {
  validate(config);
  validate(model);
  const std::size_t n = pairs.size();
  if (n == 0) throw EmptyError("training needs a nonempty dataset");
  if (pairs.obs_next.rows() != n || pairs.d_obs() != model.d_obs || pairs.obs_next.cols() != model.d_obs) {
    throw ShapeError("dataset observation width " + std::to_string(pairs.d_obs()) + " does not match model d_obs " +
                     std::to_string(model.d_obs));
  }

  Rng rng(loop_seed(config.seed));
  std::vector<double> params = model.flat_params();
  AdamState adam(params.size());
  const AdamConfig adam_config{.lr = config.lr};
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad;

  TrainResult result{model, {}};
  result.curve.reserve(config.epochs);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    LossBreakdown sum;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size, ++batch_index) {
      const std::size_t count = std::min(config.batch_size, n - start);
      const std::span<const std::size_t> idx(order.data() + start, count);
      const DenseMatrix xb = select_rows(pairs.obs_t, idx);
      const DenseMatrix yb = select_rows(pairs.obs_next, idx);
      try {
        const LossBreakdown loss = latent_loss(model, xb, yb, config.beta, rng, &grad, batch_index);
        adam_step(params, grad, adam, adam_config);
        model.set_flat_params(params);
        const double w = static_cast<double>(count);
        sum.total += loss.total * w;
        sum.rec += loss.rec * w;
        sum.kl += loss.kl * w;
      } catch (const DivergenceError& e) {
        throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(batch_index) + ": " + e.what(),
                               epoch, batch_index, result.model, result.curve);
      }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    result.curve.push_back({sum.total * inv_n, sum.rec * inv_n, sum.kl * inv_n});
    result.model = model;
  }
  return result;
}

TrainResult train(ModelKind kind, const ObservationPairs& pairs, const ArchitectureConfig& arch,
                  const TrainConfig& config) {
  if (pairs.size() == 0) throw EmptyError("training needs a nonempty dataset");
  return train(make_model(kind, pairs.d_obs(), arch, init_seed(config.seed)), pairs, config);
}

}  // namespace ibac
