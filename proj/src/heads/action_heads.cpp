#include "heads/action_heads.hpp"

#include "common/errors.hpp"
#include "tensor/adam.hpp"
#include "tensor/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ibac {

namespace {

MlpSpec head_spec(std::size_t in, std::size_t out, const HeadTrainConfig& c) {
  MlpSpec s;
  s.widths = {in};
  s.widths.insert(s.widths.end(), c.hidden.begin(), c.hidden.end());
  s.widths.push_back(out);
  s.activation = c.activation;
  s.residual = c.residual;
  return s;
}

// Loss gradient w.r.t. the network output for one batch; returns the loss.
using OutputGrad = double (*)(const DenseMatrix& out, const DenseMatrix& target, DenseMatrix& grad);

double squared_error_grad(const DenseMatrix& out, const DenseMatrix& target, DenseMatrix& grad) {
  grad = DenseMatrix(out.rows(), out.cols());
  const double scale = 1.0 / static_cast<double>(out.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double d = out.values()[i] - target.values()[i];
    loss += d * d;
    grad.values()[i] = 2.0 * d * scale;
  }
  return loss * scale;
}

// target holds one column with the class index
double softmax_xent_grad(const DenseMatrix& out, const DenseMatrix& target, DenseMatrix& grad) {
  grad = DenseMatrix(out.rows(), out.cols());
  const double inv_b = 1.0 / static_cast<double>(out.rows());
  double loss = 0.0;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto z = out.row(r);
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - mx);
    const double log_sum = mx + std::log(sum);
    const auto y = static_cast<std::size_t>(target(r, 0));
    loss -= z[y] - log_sum;
    for (std::size_t c = 0; c < out.cols(); ++c) {
      grad(r, c) = (std::exp(z[c] - log_sum) - (c == y ? 1.0 : 0.0)) * inv_b;
    }
  }
  return loss * inv_b;
}

std::vector<double> fit_mlp(const MlpSpec& spec, const DenseMatrix& x, const DenseMatrix& y, OutputGrad loss_grad,
                            const HeadTrainConfig& c, std::uint64_t stream) {
  Rng init(mix_seed({c.seed, stream, 0x696e6974}));
  std::vector<double> params = init_params(spec, init);
  Rng order(mix_seed({c.seed, stream, 0x6c6f6f70}));
  AdamState state(params.size());
  const AdamConfig adam{c.lr};
  const std::size_t n = x.rows();
  const std::size_t batch = c.batch_size == 0 ? n : std::min(c.batch_size, n);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> grad(params.size());
  MlpTape tape;
  DenseMatrix out_grad;
  for (std::size_t epoch = 0; epoch < c.epochs; ++epoch) {
    if (batch < n) order.shuffle(std::span(perm));
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t len = std::min(batch, n - start);
      const std::span<const std::size_t> idx(perm.data() + start, len);
      const DenseMatrix xb = batch == n ? x : select_rows(x, idx);
      const DenseMatrix yb = batch == n ? y : select_rows(y, idx);
      const DenseMatrix out = mlp_forward_tape(params, spec, xb, tape);
      const double loss = loss_grad(out, yb, out_grad);
      if (!std::isfinite(loss)) throw DivergenceError("head loss became non-finite", epoch, start / batch);
      std::fill(grad.begin(), grad.end(), 0.0);
      mlp_backward_tape(params, spec, tape, out_grad, grad, false);
      if (c.weight_decay > 0.0) {
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += c.weight_decay * params[i];
      }
      adam_step(params, grad, state, adam);
    }
  }
  return params;
}

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

std::size_t eval_count(std::size_t n, double eval_fraction) {
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) throw ConfigError("eval_fraction must be in (0, 1)");
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(static_cast<double>(n) * eval_fraction)));
}

FewShotSplit make_split(std::size_t n, std::size_t m, std::uint64_t seed, double eval_fraction) {
  if (m < 1) throw ConfigError("few-shot M must be >= 1");
  const std::size_t e = eval_count(n, eval_fraction);
  if (n < e || m > n - e) {
    throw ConfigError("few-shot M=" + std::to_string(m) + " exceeds the " + std::to_string(n > e ? n - e : 0) +
                      " rows outside the evaluation set");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(mix_seed({seed, 0x73706c6974}));
  rng.shuffle(std::span(perm));
  FewShotSplit s;
  s.seed = seed;
  s.labeled.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(m));
  s.eval.assign(perm.end() - static_cast<std::ptrdiff_t>(e), perm.end());
  return s;
}

LabeledActions labeled_subset(const DenseMatrix& actions, const std::vector<std::size_t>& rows) {
  for (auto r : rows) {
    if (r >= actions.rows()) throw ShapeError("labeled row " + std::to_string(r) + " out of range");
  }
  return {rows, select_rows(actions, rows)};
}

void validate(const HeadTrainConfig& c) {
  if (!(c.lr > 0.0) || !std::isfinite(c.lr)) throw ConfigError("head.lr: must be > 0");
  if (c.weight_decay < 0.0 || !std::isfinite(c.weight_decay)) throw ConfigError("head.weight_decay: must be >= 0");
  for (auto h : c.hidden) {
    if (h == 0) throw ConfigError("head.hidden: widths must be >= 1");
  }
}

DirectProjectionHead fit_direct(const DenseMatrix& latents, const LabeledActions& labeled,
                                const HeadTrainConfig& config) {
  validate(config);
  if (labeled.rows.empty()) throw EmptyError("fit_direct needs at least one labeled row");
  if (labeled.values.rows() != labeled.rows.size()) throw ShapeError("labeled values and rows disagree");
  const DenseMatrix x = select_rows(latents, labeled.rows);
  DirectProjectionHead head;
  head.spec = head_spec(latents.cols(), labeled.values.cols(), config);
  head.params = fit_mlp(head.spec, x, labeled.values, squared_error_grad, config, 0x646972);
  return head;
}

DenseMatrix predict(const DirectProjectionHead& head, const DenseMatrix& latents) {
  return mlp_forward(head.params, head.spec, latents);
}

namespace {

// One k-means++ seeding followed by Lloyd rounds. Returns the inertia.
double kmeans_once(const DenseMatrix& x, std::size_t k, Rng& rng, std::size_t max_iters, Codebook& cb) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  cb.centroids = DenseMatrix(k, d);
  cb.empty.assign(k, 0);
  // once every point coincides with a chosen centre the remaining centres
  // duplicate the first one and end up empty
  const std::size_t first = rng.below(n);
  std::copy(x.row(first).begin(), x.row(first).end(), cb.centroids.row(0).begin());
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = sq_dist(x.row(i), cb.centroids.row(0));
  for (std::size_t c = 1; c < k; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = first;
    if (total > 0.0) {
      const double u = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > u && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    }
    std::copy(x.row(pick).begin(), x.row(pick).end(), cb.centroids.row(c).begin());
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(x.row(i), cb.centroids.row(c)));
  }

  std::vector<std::size_t> assign = assign_codes(cb, x);
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    DenseMatrix sums(k, d);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assign[i]];
      for (std::size_t j = 0; j < d; ++j) sums(assign[i], j) += x(i, j);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t j = 0; j < d; ++j) cb.centroids(c, j) = sums(c, j) / static_cast<double>(counts[c]);
    }
    auto next = assign_codes(cb, x);
    const bool done = next == assign;
    assign = std::move(next);
    if (done) break;
  }
  std::vector<std::size_t> counts(k, 0);
  double inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ++counts[assign[i]];
    inertia += sq_dist(x.row(i), cb.centroids.row(assign[i]));
  }
  for (std::size_t c = 0; c < k; ++c) cb.empty[c] = counts[c] == 0;
  return inertia;
}

}  // namespace

Codebook build_codebook(const DenseMatrix& x, std::size_t k, std::uint64_t seed, std::size_t max_iters,
                        std::size_t restarts) {
  if (k < 1) throw ConfigError("codebook size K must be >= 1");
  if (restarts < 1) throw ConfigError("codebook restarts must be >= 1");
  if (x.rows() < k) {
    throw EmptyError("codebook needs N >= K (N=" + std::to_string(x.rows()) + ", K=" + std::to_string(k) + ")");
  }
  Rng rng(mix_seed({seed, 0x6b6d65616e73}));
  Codebook best;
  double best_inertia = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < restarts; ++r) {
    Codebook cb;
    const double inertia = kmeans_once(x, k, rng, max_iters, cb);
    if (inertia < best_inertia) {
      best_inertia = inertia;
      best = std::move(cb);
    }
  }
  return best;
}

std::vector<std::size_t> assign_codes(const Codebook& cb, const DenseMatrix& x) {
  if (cb.size() == 0) throw EmptyError("codebook is empty");
  if (x.cols() != cb.centroids.cols()) throw ShapeError("latent width does not match the codebook");
  std::vector<std::size_t> out(x.rows(), 0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cb.size(); ++c) {
      const double dist = sq_dist(x.row(i), cb.centroids.row(c));
      if (dist < best) {
        best = dist;
        out[i] = c;
      }
    }
  }
  return out;
}

std::vector<std::size_t> argmax_rows(const DenseMatrix& logits) {
  std::vector<std::size_t> out(logits.rows(), 0);
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto z = logits.row(r);
    out[r] = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
  }
  return out;
}

std::vector<double> labeled_mean(const LabeledActions& labeled) {
  if (labeled.values.rows() == 0) throw EmptyError("no labeled rows");
  std::vector<double> mean(labeled.values.cols(), 0.0);
  for (std::size_t r = 0; r < labeled.values.rows(); ++r)
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += labeled.values(r, j);
  for (auto& v : mean) v /= static_cast<double>(labeled.values.rows());
  return mean;
}

QuantizedIndexHead fit_index_head(const DenseMatrix& features, const Codebook& codebook,
                                  const std::vector<std::size_t>& assignments, const LabeledActions& labeled,
                                  const HeadTrainConfig& config) {
  validate(config);
  const std::size_t k = codebook.size();
  if (k == 0) throw EmptyError("codebook is empty");
  if (assignments.size() != features.rows()) throw ShapeError("one assignment per feature row is required");
  if (labeled.rows.empty()) throw EmptyError("fit_index_head needs at least one labeled row");
  DenseMatrix targets(features.rows(), 1);
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] >= k) throw ShapeError("assignment out of codebook range");
    targets(i, 0) = static_cast<double>(assignments[i]);
  }

  QuantizedIndexHead head;
  head.codebook = codebook;
  head.classifier = head_spec(features.cols(), k, config);
  head.params = fit_mlp(head.classifier, features, targets, softmax_xent_grad, config, 0x696478);

  const std::size_t d_a = labeled.values.cols();
  const auto global = labeled_mean(labeled);
  head.action_table = DenseMatrix(k, d_a);
  head.fallback.assign(k, 0);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t r = 0; r < labeled.rows.size(); ++r) {
    const std::size_t code = assignments.at(labeled.rows[r]);
    ++counts[code];
    for (std::size_t j = 0; j < d_a; ++j) head.action_table(code, j) += labeled.values(r, j);
  }
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t j = 0; j < d_a; ++j) {
      head.action_table(c, j) = counts[c] ? head.action_table(c, j) / static_cast<double>(counts[c]) : global[j];
    }
    head.fallback[c] = counts[c] == 0;
  }
  return head;
}

DenseMatrix classifier_logits(const QuantizedIndexHead& head, const DenseMatrix& features) {
  return mlp_forward(head.params, head.classifier, features);
}

std::vector<std::size_t> predict_codes(const QuantizedIndexHead& head, const DenseMatrix& features) {
  return argmax_rows(classifier_logits(head, features));
}

DenseMatrix predict(const QuantizedIndexHead& head, const DenseMatrix& features) {
  const auto codes = predict_codes(head, features);
  DenseMatrix out(features.rows(), head.action_table.cols());
  for (std::size_t r = 0; r < codes.size(); ++r) {
    std::copy(head.action_table.row(codes[r]).begin(), head.action_table.row(codes[r]).end(), out.row(r).begin());
  }
  return out;
}

HeadMetrics evaluate_predictions(const DenseMatrix& predicted, const DenseMatrix& actions,
                                 const std::vector<std::size_t>& rows) {
  if (rows.empty()) throw EmptyError("evaluation needs at least one row");
  if (predicted.cols() != actions.cols() || predicted.rows() != actions.rows()) {
    throw ShapeError("prediction shape does not match the actions");
  }
  HeadMetrics m;
  m.per_channel.assign(actions.cols(), 0.0);
  for (auto r : rows) {
    if (r >= actions.rows()) throw ShapeError("evaluation row " + std::to_string(r) + " out of range");
    for (std::size_t j = 0; j < actions.cols(); ++j) {
      const double d = predicted(r, j) - actions(r, j);
      m.per_channel[j] += d * d;
    }
  }
  for (auto& v : m.per_channel) {
    v /= static_cast<double>(rows.size());
    m.mse += v;
  }
  m.mse /= static_cast<double>(actions.cols());
  return m;
}

HeadMetrics evaluate_head(const DirectProjectionHead& head, const DenseMatrix& latents, const DenseMatrix& actions,
                          const std::vector<std::size_t>& rows) {
  return evaluate_predictions(predict(head, latents), actions, rows);
}

HeadMetrics evaluate_head(const QuantizedIndexHead& head, const DenseMatrix& features, const DenseMatrix& actions,
                          const std::vector<std::size_t>& rows) {
  return evaluate_predictions(predict(head, features), actions, rows);
}

HeadMetrics evaluate_mean_predictor(const std::vector<double>& mean, const DenseMatrix& actions,
                                    const std::vector<std::size_t>& rows) {
  if (mean.size() != actions.cols()) throw ShapeError("mean predictor width does not match the actions");
  DenseMatrix pred(actions.rows(), actions.cols());
  for (std::size_t r = 0; r < pred.rows(); ++r) std::copy(mean.begin(), mean.end(), pred.row(r).begin());
  return evaluate_predictions(pred, actions, rows);
}

double index_accuracy(const QuantizedIndexHead& head, const DenseMatrix& features,
                      const std::vector<std::size_t>& assignments, const std::vector<std::size_t>& rows) {
  if (rows.empty()) throw EmptyError("index accuracy needs at least one row");
  const auto codes = predict_codes(head, select_rows(features, rows));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) hits += codes[i] == assignments.at(rows[i]);
  return static_cast<double>(hits) / static_cast<double>(rows.size());
}

}  // namespace ibac
