#pragma once

#include "models/latent_model.hpp"
#include "common/errors.hpp"
#include "models/losses.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ibac {

struct TrainConfig {
  double beta = 1e-3;
  double lr = 1e-3;
  std::size_t epochs = 2000;
  std::size_t batch_size = 256;
  std::uint64_t seed = 1;
};

void validate(const TrainConfig& config);

using LossCurve = std::vector<LossBreakdown>;

struct TrainResult {
  LatentModel model;
  LossCurve curve;  // one row per completed epoch, means weighted by batch size
};

// Raised when a minibatch loss or gradient stops being finite. Carries the
// model as it was at the end of the last completed epoch.
class TrainingDiverged : public DivergenceError {
 public:
  TrainingDiverged(const std::string& what, std::size_t epoch, std::size_t batch, LatentModel last_good, LossCurve curve)
      : DivergenceError(what, epoch, batch), last_good_(std::move(last_good)), curve_(std::move(curve)) {}
  const LatentModel& last_good() const noexcept { return last_good_; }
  const LossCurve& curve() const noexcept { return curve_; }

 private:
  LatentModel last_good_;
  LossCurve curve_;
};

// Seeds used by training, derived from TrainConfig::seed.
std::uint64_t init_seed(std::uint64_t train_seed);
std::uint64_t loop_seed(std::uint64_t train_seed);

// Minibatch Adam on the kind's loss, starting from `model`. Each epoch visits
// a fresh permutation of the pairs; deterministic in (model, pairs, config).
TrainResult train(LatentModel model, const ObservationPairs& pairs, const TrainConfig& config);

// make_model(kind, d_obs, arch, init_seed(config.seed)) followed by train().
TrainResult train(ModelKind kind, const ObservationPairs& pairs, const ArchitectureConfig& arch,
                  const TrainConfig& config);

}  // namespace ibac
