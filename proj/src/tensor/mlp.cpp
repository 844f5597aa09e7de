#include "tensor/mlp.hpp"

#include "common/errors.hpp"

#include <cmath>

namespace ibac {

namespace {

std::string dims(std::size_t r, std::size_t c) { return std::to_string(r) + "x" + std::to_string(c); }

void check_params(std::span<const double> params, const MlpSpec& spec) {
  validate(spec);
  const std::size_t expected = param_count(spec);
  if (params.size() != expected) {
    throw ShapeError("mlp parameter vector has length " + std::to_string(params.size()) + ", spec needs " +
                     std::to_string(expected));
  }
}

void check_input(const MlpSpec& spec, const DenseMatrix& input) {
  if (input.cols() != spec.input_width()) {
    throw ShapeError("mlp input is " + dims(input.rows(), input.cols()) + ", expected width " +
                     std::to_string(spec.input_width()));
  }
}

}  // namespace

std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  throw ConfigError("unknown activation '" + name + "' (expected tanh or relu)");
}

bool MlpSpec::layer_has_skip(std::size_t layer) const {
  return residual && layer + 1 < layer_count() && widths[layer] == widths[layer + 1];
}

void validate(const MlpSpec& spec) {
  if (spec.widths.size() < 2) throw ShapeError("mlp spec needs at least 2 widths");
  for (std::size_t w : spec.widths) {
    if (w == 0) throw ShapeError("mlp widths must be >= 1");
  }
}

std::size_t param_count(const MlpSpec& spec) {
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) total += (spec.widths[l] + 1) * spec.widths[l + 1];
  return total;
}

std::size_t layer_offset(const MlpSpec& spec, std::size_t layer) {
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layer; ++l) offset += (spec.widths[l] + 1) * spec.widths[l + 1];
  return offset;
}

std::vector<double> init_params(const MlpSpec& spec, Rng& rng) {
  validate(spec);
  std::vector<double> params(param_count(spec), 0.0);
  std::size_t offset = 0;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const std::size_t in = spec.widths[l];
    const std::size_t out = spec.widths[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    for (std::size_t i = 0; i < in * out; ++i) params[offset + i] = rng.uniform(-limit, limit);
    offset += (in + 1) * out;
  }
  return params;
}

DenseMatrix mlp_forward_tape(std::span<const double> params, const MlpSpec& spec, const DenseMatrix& input,
                             MlpTape& tape) {
  check_params(params, spec);
  check_input(spec, input);
  const auto layers = spec.layer_count();
  tape.activations_.assign(1, input);
  tape.branch_.assign(layers, DenseMatrix{});
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto in = static_cast<Eigen::Index>(spec.widths[l]);
    const auto out = static_cast<Eigen::Index>(spec.widths[l + 1]);
    ConstRowMatrixMap w(params.data() + offset, out, in);
    Eigen::Map<const Eigen::RowVectorXd> b(params.data() + offset + out * in, out);
    const DenseMatrix& x = tape.activations_.back();

    DenseMatrix pre(x.rows(), static_cast<std::size_t>(out));
    pre.map().noalias() = x.map() * w.transpose();
    pre.map().rowwise() += b;

    if (l + 1 == layers) {
      tape.activations_.push_back(std::move(pre));
    } else {
      auto m = pre.map();
      if (spec.activation == Activation::Tanh) {
        m = m.array().tanh().matrix();
      } else {
        m = m.cwiseMax(0.0);
      }
      if (spec.layer_has_skip(l)) {
        tape.branch_[l] = pre;
        pre.map() += x.map();
      }
      tape.activations_.push_back(std::move(pre));
    }
    offset += static_cast<std::size_t>((in + 1) * out);
  }
  return tape.activations_.back();
}

DenseMatrix mlp_backward_tape(std::span<const double> params, const MlpSpec& spec, const MlpTape& tape,
                              const DenseMatrix& upstream, std::span<double> param_grad, bool want_input_grad) {
  check_params(params, spec);
  if (param_grad.size() != params.size()) throw ShapeError("gradient buffer length mismatch");
  const auto layers = spec.layer_count();
  if (tape.activations_.size() != layers + 1) throw ShapeError("mlp tape does not match spec");
  const DenseMatrix& out_act = tape.activations_.back();
  if (upstream.rows() != out_act.rows() || upstream.cols() != out_act.cols()) {
    throw ShapeError("upstream gradient is " + dims(upstream.rows(), upstream.cols()) + ", output is " +
                     dims(out_act.rows(), out_act.cols()));
  }

  RowMatrix grad = upstream.map();
  for (std::size_t li = layers; li-- > 0;) {
    const auto in = static_cast<Eigen::Index>(spec.widths[li]);
    const auto out = static_cast<Eigen::Index>(spec.widths[li + 1]);
    const std::size_t offset = layer_offset(spec, li);
    ConstRowMatrixMap w(params.data() + offset, out, in);

    RowMatrix dpre;
    if (li + 1 == layers) {
      dpre = grad;
    } else {
      const bool skip = spec.layer_has_skip(li);
      const auto act = skip ? tape.branch_[li].map() : tape.activations_[li + 1].map();
      if (spec.activation == Activation::Tanh) {
        dpre = grad.array() * (1.0 - act.array().square());
      } else {
        dpre = grad.array() * (act.array() > 0.0).cast<double>();
      }
    }

    const auto x = tape.activations_[li].map();
    RowMatrixMap dw(param_grad.data() + offset, out, in);
    Eigen::Map<Eigen::RowVectorXd> db(param_grad.data() + offset + out * in, out);
    dw.noalias() += dpre.transpose() * x;
    db += dpre.colwise().sum();

    if (li > 0 || want_input_grad) {
      RowMatrix next = dpre * w;
      if (li + 1 != layers && spec.layer_has_skip(li)) next += grad;
      grad = std::move(next);
    }
  }
  if (!want_input_grad) return {};
  return from_eigen(grad);
}

DenseMatrix mlp_forward(std::span<const double> params, const MlpSpec& spec, const DenseMatrix& input) {
  MlpTape tape;
  return mlp_forward_tape(params, spec, input, tape);
}

MlpGradients mlp_backward(std::span<const double> params, const MlpSpec& spec, const DenseMatrix& input,
                          const DenseMatrix& upstream) {
  MlpTape tape;
  mlp_forward_tape(params, spec, input, tape);
  MlpGradients g;
  g.params.assign(params.size(), 0.0);
  g.input = mlp_backward_tape(params, spec, tape, upstream, g.params, true);
  return g;
}

}  // namespace ibac
