#include "env/synth_env.hpp"

#include "common/errors.hpp"
#include "tensor/rng.hpp"

#include <cmath>
#include <numbers>

namespace ibac {

namespace {

template <typename E>
E parse_enum(const std::string& s, std::initializer_list<std::pair<const char*, E>> table, const char* what) {
  for (const auto& [name, value] : table) {
    if (s == name) return value;
  }
  throw ConfigError(std::string("unknown ") + what + " '" + s + "'");
}

void require(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw ConfigError("env." + field + ": " + message);
}

double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  return a <= -std::numbers::pi ? a + 2.0 * std::numbers::pi : a;
}

double draw_action_value(const EnvConfig& c, Rng& rng) {
  if (c.action_levels == 0) return c.action_scale * rng.uniform(-1.0, 1.0);
  const auto i = static_cast<double>(rng.below(c.action_levels));
  return c.action_scale * (-1.0 + 2.0 * i / static_cast<double>(c.action_levels - 1));
}

// actions[t] for t = 0..T-1 is a_{t-1}; the first entry only feeds the
// velocity feature of frame 0.
DenseMatrix draw_actions(const EnvConfig& c, Rng& rng) {
  const std::size_t steps = c.episode_len;
  DenseMatrix a(steps, c.action_dim);
  if (c.action_mode == ActionMode::Iid) {
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t j = 0; j < c.action_dim; ++j) a(t, j) = draw_action_value(c, rng);
    return a;
  }
  for (std::size_t j = 0; j < c.action_dim; ++j) {
    const std::size_t len = c.segment_lens.empty() ? c.segment_len : c.segment_lens[j];
    const std::size_t phase = rng.below(len);
    double current = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
      if (t == 0 || (t + phase) % len == 0) current = draw_action_value(c, rng);
      a(t, j) = current;
    }
  }
  return a;
}

// Frames of one episode, episode_len x d_obs, plus the T-1 actions taken.
void simulate_episode(const EnvConfig& c, std::size_t episode, DenseMatrix& frames, DenseMatrix& taken) {
  Rng rng(mix_seed({c.seed, 0x656e76ULL, episode}));
  const ObservationLayout layout = layout_of(c);
  const std::size_t T = c.episode_len;

  std::vector<double> state(c.action_dim);
  for (auto& s : state) {
    s = c.kind == EnvKind::Pointmass ? rng.normal() : rng.uniform(-std::numbers::pi, std::numbers::pi);
  }
  std::vector<double> nuisance(c.nuisance_dim);
  for (auto& n : nuisance) n = rng.normal();

  const DenseMatrix a = draw_actions(c, rng);

  frames = DenseMatrix(T, layout.d_obs());
  taken = DenseMatrix(T - 1, c.action_dim);
  for (std::size_t t = 0; t < T; ++t) {
    if (t > 0) {
      for (std::size_t j = 0; j < c.action_dim; ++j) state[j] += a(t, j);
      if (c.nuisance_mode == NuisanceMode::Drift) {
        for (auto& n : nuisance) n += c.drift_sigma * rng.normal();
      }
    }
    if (t + 1 < T) {
      for (std::size_t j = 0; j < c.action_dim; ++j) taken(t, j) = a(t + 1, j);
    }

    auto row = frames.row(t);
    std::size_t col = 0;
    if (layout.state_dim > 0) {
      if (c.kind == EnvKind::Pointmass) {
        for (double s : state) row[col++] = s;
      } else {
        const auto xy = arm_endpoint(state[0], state[1]);
        row[col++] = xy[0];
        row[col++] = xy[1];
        for (double th : state) {
          row[col++] = std::sin(th);
          row[col++] = std::cos(th);
        }
      }
      if (layout.velocity) {
        for (std::size_t j = 0; j < c.action_dim; ++j) row[col++] = a(t, j);
      }
    }
    for (double n : nuisance) {
      row[col++] = c.nuisance_jitter > 0.0 ? n + c.nuisance_jitter * rng.normal() : n;
    }
    if (c.obs_noise_sigma > 0.0) {
      for (auto& v : row) v += c.obs_noise_sigma * rng.normal();
    }
  }
}

Standardization standardize_constants(const DenseMatrix& x) {
  Standardization s;
  s.mean.assign(x.cols(), 0.0);
  s.scale.assign(x.cols(), 1.0);
  const auto n = static_cast<double>(x.rows());
  for (std::size_t c = 0; c < x.cols(); ++c) {
    bool constant = true;
    for (std::size_t r = 1; r < x.rows() && constant; ++r) constant = x(r, c) == x(0, c);
    if (constant) {
      // summing can leave a rounding residue that would blow up on division
      s.mean[c] = x.rows() ? x(0, c) : 0.0;
      continue;
    }
    double mean = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) mean += x(r, c);
    mean /= n;
    double var = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) var += (x(r, c) - mean) * (x(r, c) - mean);
    const double sd = std::sqrt(var / n);
    s.mean[c] = mean;
    s.scale[c] = sd > 0.0 && std::isfinite(sd) ? sd : 1.0;
  }
  return s;
}

}  // namespace

std::string to_string(EnvKind v) { return v == EnvKind::Pointmass ? "pointmass" : "arm2link"; }
std::string to_string(NuisanceMode v) { return v == NuisanceMode::Static ? "static" : "drift"; }
std::string to_string(ActionMode v) { return v == ActionMode::Iid ? "iid" : "piecewise_constant"; }
std::string to_string(LabelReduction v) {
  switch (v) {
    case LabelReduction::First: return "first";
    case LabelReduction::Mean: return "mean";
    case LabelReduction::Sum: return "sum";
  }
  return "first";
}

EnvKind env_kind_from_string(const std::string& s) {
  return parse_enum<EnvKind>(s, {{"pointmass", EnvKind::Pointmass}, {"arm2link", EnvKind::Arm2Link}}, "env kind");
}
NuisanceMode nuisance_mode_from_string(const std::string& s) {
  return parse_enum<NuisanceMode>(s, {{"static", NuisanceMode::Static}, {"drift", NuisanceMode::Drift}},
                                  "nuisance mode");
}
ActionMode action_mode_from_string(const std::string& s) {
  return parse_enum<ActionMode>(s, {{"iid", ActionMode::Iid}, {"piecewise_constant", ActionMode::PiecewiseConstant}},
                                "action mode");
}
LabelReduction label_reduction_from_string(const std::string& s) {
  return parse_enum<LabelReduction>(
      s, {{"first", LabelReduction::First}, {"mean", LabelReduction::Mean}, {"sum", LabelReduction::Sum}},
      "label reduction");
}

void validate(const EnvConfig& c) {
  require(c.episodes >= 1, "episodes", "must be >= 1");
  require(c.episode_len >= 2, "episode_len", "must be >= 2");
  require(c.action_dim >= 1, "action_dim", "must be >= 1");
  if (c.kind == EnvKind::Pointmass) {
    require(c.state_dim == 0 || c.state_dim == c.action_dim, "state_dim", "must equal action_dim (or 0 = unobserved)");
  } else {
    require(c.action_dim == 2, "action_dim", "arm2link has exactly 2 joints");
    require(c.state_dim == 0 || c.state_dim == 2, "state_dim", "arm2link has exactly 2 joints (or 0 = unobserved)");
  }
  require(std::isfinite(c.obs_noise_sigma) && c.obs_noise_sigma >= 0.0, "obs_noise_sigma", "must be finite and >= 0");
  require(std::isfinite(c.nuisance_jitter) && c.nuisance_jitter >= 0.0, "nuisance_jitter", "must be finite and >= 0");
  require(std::isfinite(c.drift_sigma) && c.drift_sigma >= 0.0, "drift_sigma", "must be finite and >= 0");
  require(std::isfinite(c.action_scale) && c.action_scale >= 0.0, "action_scale", "must be finite and >= 0");
  require(c.action_levels != 1, "action_levels", "must be 0 (continuous) or >= 2");
  require(c.segment_len >= 1, "segment_len", "must be >= 1");
  require(c.segment_lens.empty() || c.segment_lens.size() == c.action_dim, "segment_lens",
          "must be empty or have one entry per action channel");
  for (auto len : c.segment_lens) require(len >= 1, "segment_lens", "entries must be >= 1");
  require(layout_of(c).d_obs() >= 1, "nuisance_dim", "observation would have no features");
}

std::size_t ObservationLayout::position_features() const {
  if (state_dim == 0) return 0;
  return kind == EnvKind::Pointmass ? state_dim : 6;
}

std::size_t ObservationLayout::state_features() const {
  if (state_dim == 0) return 0;
  return position_features() + (velocity ? action_dim : 0);
}

ObservationLayout layout_of(const EnvConfig& c) {
  return {c.kind, c.state_dim, c.action_dim, c.observe_velocity, c.nuisance_dim};
}

void validate(const TransitionDataset& d) {
  validate(d.env);
  const auto layout = layout_of(d.env);
  if (d.offset == 0) throw FormatError("dataset offset must be >= 1");
  if (d.offset >= d.env.episode_len) throw FormatError("dataset offset must be < episode_len");
  const std::size_t expected = d.env.episodes * (d.env.episode_len - d.offset);
  if (d.obs_t.rows() != expected || d.obs_next.rows() != expected || d.actions.rows() != expected) {
    throw FormatError("dataset has " + std::to_string(d.obs_t.rows()) + " rows, expected episodes*(episode_len-k) = " +
                      std::to_string(expected));
  }
  if (d.obs_t.cols() != layout.d_obs() || d.obs_next.cols() != layout.d_obs()) {
    throw FormatError("observation width does not match the environment layout");
  }
  if (d.actions.cols() != d.env.action_dim) throw FormatError("action width does not match action_dim");
  if (d.standardization.mean.size() != layout.d_obs() || d.standardization.scale.size() != layout.d_obs()) {
    throw FormatError("standardization constants do not match d_obs");
  }
}

TransitionDataset generate(const EnvConfig& config) {
  validate(config);
  const auto layout = layout_of(config);
  const std::size_t per = config.episode_len - 1;
  const std::size_t n = config.episodes * per;

  TransitionDataset d;
  d.env = config;
  d.offset = 1;
  d.obs_t = DenseMatrix(n, layout.d_obs());
  d.obs_next = DenseMatrix(n, layout.d_obs());
  d.actions = DenseMatrix(n, config.action_dim);

  DenseMatrix frames;
  DenseMatrix taken;
  for (std::size_t e = 0; e < config.episodes; ++e) {
    simulate_episode(config, e, frames, taken);
    for (std::size_t t = 0; t < per; ++t) {
      const std::size_t r = e * per + t;
      std::copy(frames.row(t).begin(), frames.row(t).end(), d.obs_t.row(r).begin());
      std::copy(frames.row(t + 1).begin(), frames.row(t + 1).end(), d.obs_next.row(r).begin());
      std::copy(taken.row(t).begin(), taken.row(t).end(), d.actions.row(r).begin());
    }
  }
  d.standardization = standardize_constants(d.obs_t);
  return d;
}

TransitionDataset offset_pairs(const TransitionDataset& source, std::size_t k, LabelReduction reduction) {
  if (source.offset != 1) throw ConfigError("offset_pairs needs a unit-offset source dataset");
  if (k == 0) throw ConfigError("offset k must be >= 1");
  validate(source);
  const std::size_t T = source.env.episode_len;
  if (k >= T) {
    throw EmptyError("offset k=" + std::to_string(k) + " leaves no pairs inside episodes of length " +
                     std::to_string(T));
  }
  const std::size_t per_src = T - 1;
  const std::size_t per = T - k;
  const std::size_t episodes = source.env.episodes;
  const std::size_t d_a = source.d_a();

  TransitionDataset d;
  d.env = source.env;
  d.offset = k;
  d.label_reduction = reduction;
  d.standardization = source.standardization;
  d.obs_t = DenseMatrix(episodes * per, source.d_obs());
  d.obs_next = DenseMatrix(episodes * per, source.d_obs());
  d.actions = DenseMatrix(episodes * per, d_a);

  auto frame = [&](std::size_t e, std::size_t t) {
    return t < per_src ? source.obs_t.row(e * per_src + t) : source.obs_next.row(e * per_src + per_src - 1);
  };
  for (std::size_t e = 0; e < episodes; ++e) {
    for (std::size_t t = 0; t < per; ++t) {
      const std::size_t r = e * per + t;
      auto a = frame(e, t);
      auto b = frame(e, t + k);
      std::copy(a.begin(), a.end(), d.obs_t.row(r).begin());
      std::copy(b.begin(), b.end(), d.obs_next.row(r).begin());
      for (std::size_t j = 0; j < d_a; ++j) {
        double label = source.actions(e * per_src + t, j);
        if (reduction != LabelReduction::First) {
          double sum = 0.0;
          for (std::size_t g = 0; g < k; ++g) sum += source.actions(e * per_src + t + g, j);
          label = reduction == LabelReduction::Sum ? sum : sum / static_cast<double>(k);
        }
        d.actions(r, j) = label;
      }
    }
  }
  return d;
}

void quantize_to_f32(TransitionDataset& d) {
  for (DenseMatrix* m : {&d.obs_t, &d.obs_next, &d.actions}) {
    for (auto& v : m->values()) v = static_cast<double>(static_cast<float>(v));
  }
}

ObservationPairs training_view(const TransitionDataset& d) {
  const auto& s = d.standardization;
  if (s.mean.size() != d.d_obs() || s.scale.size() != d.d_obs()) {
    throw ShapeError("standardization constants do not match d_obs");
  }
  auto apply = [&](const DenseMatrix& x) {
    DenseMatrix out(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = (x(r, c) - s.mean[c]) / s.scale[c];
    return out;
  };
  return {apply(d.obs_t), apply(d.obs_next)};
}

std::vector<double> recover_action(const ObservationLayout& layout, std::span<const double> obs_t,
                                   std::span<const double> obs_next) {
  if (layout.state_features() == 0) {
    throw UnsupportedError("recover_action needs state features; this environment observes none");
  }
  if (obs_t.size() != layout.d_obs() || obs_next.size() != layout.d_obs()) {
    throw ShapeError("observation width does not match the layout");
  }
  std::vector<double> a(layout.action_dim);
  if (layout.kind == EnvKind::Pointmass) {
    for (std::size_t j = 0; j < a.size(); ++j) a[j] = obs_next[j] - obs_t[j];
    return a;
  }
  // joint angles from their (sin, cos) features, after the endpoint pair
  for (std::size_t j = 0; j < 2; ++j) {
    const double th0 = std::atan2(obs_t[2 + 2 * j], obs_t[3 + 2 * j]);
    const double th1 = std::atan2(obs_next[2 + 2 * j], obs_next[3 + 2 * j]);
    a[j] = wrap_angle(th1 - th0);
  }
  return a;
}

DenseMatrix recover_actions(const ObservationLayout& layout, const DenseMatrix& obs_t, const DenseMatrix& obs_next) {
  if (obs_t.rows() != obs_next.rows()) throw ShapeError("observation row counts differ");
  DenseMatrix out(obs_t.rows(), layout.action_dim);
  for (std::size_t r = 0; r < obs_t.rows(); ++r) {
    const auto a = recover_action(layout, obs_t.row(r), obs_next.row(r));
    std::copy(a.begin(), a.end(), out.row(r).begin());
  }
  return out;
}

std::vector<double> arm_endpoint(double theta1, double theta2) {
  return {std::cos(theta1) + std::cos(theta1 + theta2), std::sin(theta1) + std::sin(theta1 + theta2)};
}

std::vector<double> arm_jacobian(double theta1, double theta2) {
  const double s1 = std::sin(theta1), c1 = std::cos(theta1);
  const double s12 = std::sin(theta1 + theta2), c12 = std::cos(theta1 + theta2);
  return {-s1 - s12, -s12, c1 + c12, c12};
}

}  // namespace ibac
