#pragma once

#include "models/latent_model.hpp"
#include "tensor/dense_matrix.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ibac {

enum class EnvKind { Pointmass, Arm2Link };
enum class NuisanceMode { Static, Drift };
enum class ActionMode { Iid, PiecewiseConstant };
// Label attached to an offset pair (O_t, O_{t+k}): the gap's first action,
// the mean over the gap, or its sum.
enum class LabelReduction { First, Mean, Sum };

std::string to_string(EnvKind v);
std::string to_string(NuisanceMode v);
std::string to_string(ActionMode v);
std::string to_string(LabelReduction v);
EnvKind env_kind_from_string(const std::string& s);
NuisanceMode nuisance_mode_from_string(const std::string& s);
ActionMode action_mode_from_string(const std::string& s);
LabelReduction label_reduction_from_string(const std::string& s);

// Synthetic environment family.
//
// pointmass: position p in R^state_dim (state_dim == action_dim),
//   p_{t+1} = p_t + a_t.
// arm2link: joint angles (theta1, theta2) with unit links,
//   theta_{t+1} = theta_t + a_t; features are the forward-kinematics endpoint
//   followed by (sin, cos) of each joint.
//
// With observe_velocity the state features also carry the most recent
// displacement (p_t - p_{t-1}, or the last joint increment); the action
// process starts one step before the first frame so t = 0 has a velocity.
//
// Nuisance features: a per-episode offset drawn from N(0, I), constant
// (static) or following a random walk with step drift_sigma (drift), plus
// independent per-frame jitter of scale nuisance_jitter.
//
// Action values: uniform on [-1, 1] when action_levels == 0, otherwise drawn
// uniformly from action_levels evenly spaced values spanning [-1, 1]; all
// scaled by action_scale. piecewise_constant redraws a channel every
// segment_len steps (per-channel segment_lens when given) with a random
// per-episode phase.
struct EnvConfig {
  EnvKind kind = EnvKind::Pointmass;
  std::size_t state_dim = 2;
  std::size_t action_dim = 2;
  std::size_t nuisance_dim = 8;
  NuisanceMode nuisance_mode = NuisanceMode::Static;
  double nuisance_jitter = 0.0;
  double drift_sigma = 0.05;
  double obs_noise_sigma = 0.0;
  ActionMode action_mode = ActionMode::Iid;
  std::size_t segment_len = 8;
  std::vector<std::size_t> segment_lens;
  std::size_t action_levels = 0;
  double action_scale = 1.0;
  bool observe_velocity = true;
  std::size_t episode_len = 100;
  std::size_t episodes = 200;
  std::uint64_t seed = 1;

  friend bool operator==(const EnvConfig&, const EnvConfig&) = default;
};

void validate(const EnvConfig& config);

// Column layout of an observation row: state features, then nuisance.
struct ObservationLayout {
  EnvKind kind = EnvKind::Pointmass;
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  bool velocity = true;
  std::size_t nuisance_dim = 0;

  std::size_t position_features() const;
  std::size_t state_features() const;
  std::size_t d_obs() const { return state_features() + nuisance_dim; }
};

ObservationLayout layout_of(const EnvConfig& config);

struct Standardization {
  std::vector<double> mean;
  std::vector<double> scale;  // per-feature std, 1 for constant features

  friend bool operator==(const Standardization&, const Standardization&) = default;
};

// Transitions with hidden ground-truth labels. Rows are ordered by episode,
// then time. `actions` is evaluation-only: the training entry points accept
// ObservationPairs (see training_view), which has no label field.
struct TransitionDataset {
  DenseMatrix obs_t;
  DenseMatrix obs_next;
  DenseMatrix actions;
  std::size_t offset = 1;
  LabelReduction label_reduction = LabelReduction::First;
  EnvConfig env;
  Standardization standardization;

  std::size_t size() const { return obs_t.rows(); }
  std::size_t d_obs() const { return obs_t.cols(); }
  std::size_t d_a() const { return actions.cols(); }
};

// Throws FormatError when row counts, widths or the episode arithmetic
// (episodes * (episode_len - offset) rows) disagree.
void validate(const TransitionDataset& dataset);

// Pairs at offset 1 in raw (unstandardized) units.
TransitionDataset generate(const EnvConfig& config);

// Re-pairs a unit-offset dataset as (O_t, O_{t+k}); pairs never straddle an
// episode boundary. Throws EmptyError when k >= episode_len.
TransitionDataset offset_pairs(const TransitionDataset& source, std::size_t k,
                               LabelReduction reduction = LabelReduction::First);

// Rounds every stored value through 32-bit float, the file payload precision.
void quantize_to_f32(TransitionDataset& dataset);

// Standardized observation pairs: the only view training code receives.
ObservationPairs training_view(const TransitionDataset& dataset);

// Inverse of the dynamics from a noise-free observation pair: the position
// difference for pointmass, wrapped joint-angle differences for arm2link.
std::vector<double> recover_action(const ObservationLayout& layout, std::span<const double> obs_t,
                                   std::span<const double> obs_next);
DenseMatrix recover_actions(const ObservationLayout& layout, const DenseMatrix& obs_t, const DenseMatrix& obs_next);

// Arm forward kinematics and its Jacobian (row-major 2x2) for unit links.
std::vector<double> arm_endpoint(double theta1, double theta2);
std::vector<double> arm_jacobian(double theta1, double theta2);

}  // namespace ibac
