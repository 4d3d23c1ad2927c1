#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfgmesh/env.hpp"
#include "mfgmesh/rng.hpp"

namespace mfgmesh {

using QValues = std::array<double, kNumActions>;
using ActionProbs = std::array<double, kNumActions>;

/// Replay record (o_t, a_t, r_t, o_{t+1}).
struct Transition {
  std::vector<double> obs;
  Action action = Action::Stay;
  double reward = 0.0;
  std::vector<double> next_obs;
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

/// input -> hidden -> hidden -> kNumActions, ReLU between layers.
struct MlpParams {
  std::array<DenseLayer, 3> layers;

  static MlpParams zeros(std::size_t input, std::size_t hidden);
  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
  static MlpParams random(std::size_t input, std::size_t hidden, Rng& rng);

  std::size_t input_size() const { return static_cast<std::size_t>(layers[0].weight.cols()); }
  std::size_t hidden_size() const { return static_cast<std::size_t>(layers[0].weight.rows()); }
  std::size_t parameter_count() const;
  bool all_finite() const;

  // Flat view helpers used by Adam and the gradient checks.
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> values);

  bool operator==(const MlpParams& other) const;
};

using Gradients = MlpParams;

inline constexpr std::size_t kMinHiddenWidth = 16;

/// Largest power of two <= input, floored at `min_width`.
std::size_t hidden_width_for(std::size_t input, std::size_t min_width = kMinHiddenWidth);

QValues forward(const MlpParams& params, std::span<const double> obs);
/// Column-batched forward pass; `inputs` is input_size x batch.
Eigen::MatrixXd forward_batch(const MlpParams& params, const Eigen::MatrixXd& inputs);

ActionProbs policy_from_q(std::span<const double> q, double tau_q);
ActionProbs log_policy_from_q(std::span<const double> q, double tau_q);

/// Target from precomputed target-network q-values at o_t and o_{t+1}.
double munchausen_target_from_q(const QValues& q_now, const QValues& q_next, Action action,
                                double reward, double tau_q, double cl, double gamma);

double munchausen_target(const Transition& tr, const MlpParams& target_params, double tau_q,
                         double cl, double gamma);

struct LossResult {
  double loss = 0.0;
  Gradients grads;
};

LossResult loss_and_gradients(const MlpParams& params, const MlpParams& target_params,
                              std::span<const Transition> batch, double tau_q, double cl,
                              double gamma);

/// Core of the loss: `inputs` holds o_t as columns, `targets` the (constant)
/// regression targets of the taken actions.
LossResult loss_and_gradients(const MlpParams& params, const Eigen::MatrixXd& inputs,
                              std::span<const Action> actions, std::span<const double> targets);

struct AdamState {
  MlpParams m;
  MlpParams v;
  std::uint64_t step = 0;
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_params(const MlpParams& params, double lr = 0.01);
};

void adam_step(MlpParams& params, const Gradients& grads, AdamState& state);

inline MlpParams sync_target(const MlpParams& params) { return params; }

/// Little-endian f64 stream preceded by a u64 shape header:
/// layer count, then (in, out) per layer; weights are row-major, bias follows.
std::string serialize_params(const MlpParams& params);
MlpParams deserialize_params(std::string_view bytes);

}  // namespace mfgmesh
