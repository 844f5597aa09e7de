#pragma once

#include "tensor/dense_matrix.hpp"
#include "tensor/rng.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ibac {

enum class Activation { Tanh, Relu };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

// Fully connected network. The activation applies to every non-final layer;
// the final layer is linear. With `residual` set, a hidden layer whose input
// and output widths match computes h + act(W h + b).
//
// Flat parameter layout, layer by layer: W (out x in, row-major) then b (out).
struct MlpSpec {
  std::vector<std::size_t> widths;
  Activation activation = Activation::Tanh;
  bool residual = false;

  std::size_t input_width() const { return widths.front(); }
  std::size_t output_width() const { return widths.back(); }
  std::size_t layer_count() const { return widths.size() - 1; }
  bool layer_has_skip(std::size_t layer) const;

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

void validate(const MlpSpec& spec);
std::size_t param_count(const MlpSpec& spec);

// Offset of layer `layer`'s weight block inside the flat parameter vector.
std::size_t layer_offset(const MlpSpec& spec, std::size_t layer);

// Glorot-uniform weights, zero biases.
std::vector<double> init_params(const MlpSpec& spec, Rng& rng);

DenseMatrix mlp_forward(std::span<const double> params, const MlpSpec& spec, const DenseMatrix& input);

struct MlpGradients {
  std::vector<double> params;
  DenseMatrix input;
};

MlpGradients mlp_backward(std::span<const double> params, const MlpSpec& spec, const DenseMatrix& input,
                          const DenseMatrix& upstream);

// Forward pass that keeps what the backward pass needs. Used by the training
// loops to avoid a second forward evaluation.
class MlpTape {
 public:
  const DenseMatrix& output() const { return activations_.back(); }

 private:
  friend DenseMatrix mlp_forward_tape(std::span<const double>, const MlpSpec&, const DenseMatrix&, MlpTape&);
  friend DenseMatrix mlp_backward_tape(std::span<const double>, const MlpSpec&, const MlpTape&, const DenseMatrix&,
                                       std::span<double>, bool);
  // activations_[0] is the input, activations_[l + 1] the output of layer l.
  std::vector<DenseMatrix> activations_;
  // Post-nonlinearity values of each hidden layer, before any skip is added.
  std::vector<DenseMatrix> branch_;
};

DenseMatrix mlp_forward_tape(std::span<const double> params, const MlpSpec& spec, const DenseMatrix& input,
                             MlpTape& tape);

// Accumulates parameter gradients into `param_grad` (same layout as params)
// and returns the input gradient when `want_input_grad` is set, otherwise an
// empty matrix.
DenseMatrix mlp_backward_tape(std::span<const double> params, const MlpSpec& spec, const MlpTape& tape,
                              const DenseMatrix& upstream, std::span<double> param_grad, bool want_input_grad);

}  // namespace ibac
