#pragma once

#include "tensor/dense_matrix.hpp"
#include "tensor/mlp.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace ibac {

// Few-shot protocol over N rows. A seeded permutation fixes the evaluation
// set (its last eval_fraction share) independently of M; the labeled rows are
// the first M entries of the same permutation, so a larger M only adds rows.
struct FewShotSplit {
  std::vector<std::size_t> labeled;
  std::vector<std::size_t> eval;
  std::uint64_t seed = 0;
};

std::size_t eval_count(std::size_t n, double eval_fraction = 0.2);
// Throws ConfigError when m < 1 or m > n - eval_count(n).
FewShotSplit make_split(std::size_t n, std::size_t m, std::uint64_t seed, double eval_fraction = 0.2);

// The only action values a head ever fits on.
struct LabeledActions {
  std::vector<std::size_t> rows;
  DenseMatrix values;  // rows.size() x D_a
};

LabeledActions labeled_subset(const DenseMatrix& actions, const std::vector<std::size_t>& rows);

struct HeadTrainConfig {
  std::vector<std::size_t> hidden{32, 32};
  Activation activation = Activation::Tanh;
  bool residual = true;
  double lr = 3e-3;
  double weight_decay = 0.0;  // L2 on all head parameters
  std::size_t epochs = 300;
  std::size_t batch_size = 0;  // 0: full batch
  std::uint64_t seed = 1;

  friend bool operator==(const HeadTrainConfig&, const HeadTrainConfig&) = default;
};

void validate(const HeadTrainConfig& config);

struct DirectProjectionHead {
  MlpSpec spec;  // D_z -> D_a
  std::vector<double> params;

  friend bool operator==(const DirectProjectionHead&, const DirectProjectionHead&) = default;
};

DirectProjectionHead fit_direct(const DenseMatrix& latents, const LabeledActions& labeled,
                                const HeadTrainConfig& config);
DenseMatrix predict(const DirectProjectionHead& head, const DenseMatrix& latents);

struct Codebook {
  DenseMatrix centroids;            // K x D_z
  std::vector<std::uint8_t> empty;  // centroids that ended with no members

  std::size_t size() const { return centroids.rows(); }
  friend bool operator==(const Codebook&, const Codebook&) = default;
};

// k-means with k-means++ seeding and at most max_iters Lloyd rounds, best of
// `restarts` runs by inertia (the first wins ties). Empty clusters keep their
// previous centroid and are flagged.
Codebook build_codebook(const DenseMatrix& latents, std::size_t k, std::uint64_t seed, std::size_t max_iters = 100,
                        std::size_t restarts = 8);

// Nearest centroid by squared distance, ties to the lowest index.
std::vector<std::size_t> assign_codes(const Codebook& codebook, const DenseMatrix& latents);

// Row-wise argmax, ties to the lowest index.
std::vector<std::size_t> argmax_rows(const DenseMatrix& logits);

struct QuantizedIndexHead {
  Codebook codebook;
  MlpSpec classifier;  // features -> K logits
  std::vector<double> params;
  DenseMatrix action_table;             // K x D_a
  std::vector<std::uint8_t> fallback;   // codes whose table row is the global labeled mean

  friend bool operator==(const QuantizedIndexHead&, const QuantizedIndexHead&) = default;
};

// Classifier trained with softmax cross-entropy on every row against its code
// (no labels involved); the action table averages labeled actions per code.
QuantizedIndexHead fit_index_head(const DenseMatrix& features, const Codebook& codebook,
                                  const std::vector<std::size_t>& assignments, const LabeledActions& labeled,
                                  const HeadTrainConfig& config);
DenseMatrix classifier_logits(const QuantizedIndexHead& head, const DenseMatrix& features);
std::vector<std::size_t> predict_codes(const QuantizedIndexHead& head, const DenseMatrix& features);
DenseMatrix predict(const QuantizedIndexHead& head, const DenseMatrix& features);

std::vector<double> labeled_mean(const LabeledActions& labeled);

struct HeadMetrics {
  double mse = 0.0;
  std::vector<double> per_channel;
};

// MSE over `rows` of predictions against true actions. Throws EmptyError on
// an empty row set.
HeadMetrics evaluate_predictions(const DenseMatrix& predicted, const DenseMatrix& actions,
                                 const std::vector<std::size_t>& rows);
HeadMetrics evaluate_head(const DirectProjectionHead& head, const DenseMatrix& latents, const DenseMatrix& actions,
                          const std::vector<std::size_t>& rows);
HeadMetrics evaluate_head(const QuantizedIndexHead& head, const DenseMatrix& features, const DenseMatrix& actions,
                          const std::vector<std::size_t>& rows);
HeadMetrics evaluate_mean_predictor(const std::vector<double>& mean, const DenseMatrix& actions,
                                    const std::vector<std::size_t>& rows);

// Share of `rows` where the predicted code equals the assignment.
double index_accuracy(const QuantizedIndexHead& head, const DenseMatrix& features,
                      const std::vector<std::size_t>& assignments, const std::vector<std::size_t>& rows);

}  // namespace ibac
