#include "mfgmesh/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mfgmesh {

namespace {

DenseLayer make_layer(std::size_t in, std::size_t out) {
  return {Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in)),
          Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out))};
}

void check_input(const MlpParams& params, std::size_t n) {
  if (n != params.input_size())
    throw std::invalid_argument("observation length " + std::to_string(n) +
                                " does not match network input " +
                                std::to_string(params.input_size()));
}

struct Activations {
  Eigen::MatrixXd z1, h1, z2, h2, q;
};

Activations run_layers(const MlpParams& p, const Eigen::MatrixXd& x) {
  Activations a;
  a.z1 = (p.layers[0].weight * x).colwise() + p.layers[0].bias;
  a.h1 = a.z1.cwiseMax(0.0);
  a.z2 = (p.layers[1].weight * a.h1).colwise() + p.layers[1].bias;
  a.h2 = a.z2.cwiseMax(0.0);
  a.q = (p.layers[2].weight * a.h2).colwise() + p.layers[2].bias;
  return a;
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffU));
}

std::uint64_t get_u64(std::string_view in, std::size_t& pos) {
  if (pos + 8 > in.size()) throw std::runtime_error("truncated parameter stream");
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + b])) << (8 * b);
  pos += 8;
  return v;
}

template <typename Fn>
void for_each_block(MlpParams& p, Fn&& fn) {
  for (auto& layer : p.layers) {
    fn(layer.weight.data(), static_cast<std::size_t>(layer.weight.size()));
    fn(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
  }
}

}  // namespace

MlpParams MlpParams::zeros(std::size_t input, std::size_t hidden) {
  MlpParams p;
  p.layers[0] = make_layer(input, hidden);
  p.layers[1] = make_layer(hidden, hidden);
  p.layers[2] = make_layer(hidden, kNumActions);
  return p;
}

MlpParams MlpParams::random(std::size_t input, std::size_t hidden, Rng& rng) {
  MlpParams p = zeros(input, hidden);
  for (auto& layer : p.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
    auto draw = [&] { return (2.0 * uniform01(rng) - 1.0) * bound; };
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = draw();
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = draw();
  }
  return p;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

bool MlpParams::all_finite() const {
  return std::all_of(layers.begin(), layers.end(), [](const DenseLayer& l) {
    return l.weight.allFinite() && l.bias.allFinite();
  });
}

std::vector<double> MlpParams::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& l : layers) {
    out.insert(out.end(), l.weight.data(), l.weight.data() + l.weight.size());
    out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
  }
  return out;
}

void MlpParams::unflatten(std::span<const double> values) {
  if (values.size() != parameter_count())
    throw std::invalid_argument("flat parameter vector has the wrong length");
  std::size_t pos = 0;
  for_each_block(*this, [&](double* d, std::size_t n) {
    std::copy_n(values.begin() + static_cast<long>(pos), n, d);
    pos += n;
  });
}

bool MlpParams::operator==(const MlpParams& other) const {
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& a = layers[k];
    const auto& b = other.layers[k];
    if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols()) return false;
    if (a.weight != b.weight || a.bias != b.bias) return false;
  }
  return true;
}

std::size_t hidden_width_for(std::size_t input, std::size_t min_width) {
  if (input == 0) throw std::invalid_argument("input size must be positive");
  const std::size_t pow2 = std::bit_floor(input);
  return std::max(pow2, min_width);
}

QValues forward(const MlpParams& params, std::span<const double> obs) {
  check_input(params, obs.size());
  const Eigen::Map<const Eigen::VectorXd> x(obs.data(), static_cast<Eigen::Index>(obs.size()));
  const auto a = run_layers(params, x);
  QValues q{};
  for (std::size_t k = 0; k < kNumActions; ++k) q[k] = a.q(static_cast<Eigen::Index>(k), 0);
  return q;
}

Eigen::MatrixXd forward_batch(const MlpParams& params, const Eigen::MatrixXd& inputs) {
  check_input(params, static_cast<std::size_t>(inputs.rows()));
  return run_layers(params, inputs).q;
}

ActionProbs log_policy_from_q(std::span<const double> q, double tau_q) {
  if (!(tau_q > 0.0)) throw std::invalid_argument("tau_q must be positive");
  if (q.size() != kNumActions) throw std::invalid_argument("expected one q-value per action");
  if (!std::all_of(q.begin(), q.end(), [](double v) { return std::isfinite(v); }))
    throw std::invalid_argument("non-finite q-value");
  const double qmax = *std::max_element(q.begin(), q.end());
  ActionProbs logits{};
  double sum = 0.0;
  for (std::size_t k = 0; k < kNumActions; ++k) {
    logits[k] = (q[k] - qmax) / tau_q;
    sum += std::exp(logits[k]);
  }
  const double log_sum = std::log(sum);
  for (auto& l : logits) l -= log_sum;
  return logits;
}

ActionProbs policy_from_q(std::span<const double> q, double tau_q) {
  ActionProbs p = log_policy_from_q(q, tau_q);
  for (auto& v : p) v = std::exp(v);
  return p;
}

// r + clip(tau ln pi'(a|o)) + gamma * sum_a pi'(a|o') (Q'(o',a) - tau ln pi'(a|o'))
double munchausen_target_from_q(const QValues& q_now, const QValues& q_next, Action action,
                                double reward, double tau_q, double cl, double gamma) {
  const auto log_pi_now = log_policy_from_q(q_now, tau_q);
  const double bonus =
      std::clamp(tau_q * log_pi_now[static_cast<std::size_t>(action)], cl, 0.0);

  const auto log_pi_next = log_policy_from_q(q_next, tau_q);
  double soft_value = 0.0;
  for (std::size_t k = 0; k < kNumActions; ++k) {
    const double pi = std::exp(log_pi_next[k]);
    if (pi == 0.0) continue;  // pi ln pi -> 0
    soft_value += pi * (q_next[k] - tau_q * log_pi_next[k]);
  }
  const double target = reward + bonus + gamma * soft_value;
  if (!std::isfinite(target)) throw std::runtime_error("non-finite Munchausen target");
  return target;
}

double munchausen_target(const Transition& tr, const MlpParams& target_params, double tau_q,
                         double cl, double gamma) {
  if (!(cl < 0.0)) throw std::invalid_argument("clip bound cl must be negative");
  return munchausen_target_from_q(forward(target_params, tr.obs),
                                  forward(target_params, tr.next_obs), tr.action, tr.reward,
                                  tau_q, cl, gamma);
}

LossResult loss_and_gradients(const MlpParams& params, const Eigen::MatrixXd& inputs,
                              std::span<const Action> actions, std::span<const double> targets) {
  const auto batch = static_cast<std::size_t>(inputs.cols());
  if (batch == 0) throw std::invalid_argument("empty batch");
  if (actions.size() != batch || targets.size() != batch)
    throw std::invalid_argument("batch components disagree in length");
  check_input(params, static_cast<std::size_t>(inputs.rows()));

  const auto a = run_layers(params, inputs);
  const double scale = 1.0 / static_cast<double>(batch);

  Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(a.q.rows(), a.q.cols());
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const auto col = static_cast<Eigen::Index>(b);
    const auto row = static_cast<Eigen::Index>(actions[b]);
    const double residual = a.q(row, col) - targets[b];
    loss += residual * residual;
    dq(row, col) = 2.0 * residual * scale;
  }
  loss *= scale;

  LossResult out;
  out.loss = loss;
  auto& g = out.grads.layers;
  g[2].weight = dq * a.h2.transpose();
  g[2].bias = dq.rowwise().sum();
  const Eigen::MatrixXd dz2 =
      (params.layers[2].weight.transpose() * dq).cwiseProduct((a.z2.array() > 0.0).cast<double>().matrix());
  g[1].weight = dz2 * a.h1.transpose();
  g[1].bias = dz2.rowwise().sum();
  const Eigen::MatrixXd dz1 =
      (params.layers[1].weight.transpose() * dz2).cwiseProduct((a.z1.array() > 0.0).cast<double>().matrix());
  g[0].weight = dz1 * inputs.transpose();
  g[0].bias = dz1.rowwise().sum();
  return out;
}

LossResult loss_and_gradients(const MlpParams& params, const MlpParams& target_params,
                              std::span<const Transition> batch, double tau_q, double cl,
                              double gamma) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const std::size_t in = params.input_size();
  Eigen::MatrixXd inputs(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(batch.size()));
  std::vector<Action> actions;
  std::vector<double> targets;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& tr = batch[b];
    if (tr.obs.size() != in || tr.next_obs.size() != in)
      throw std::invalid_argument("transition observation length mismatch");
    inputs.col(static_cast<Eigen::Index>(b)) =
        Eigen::Map<const Eigen::VectorXd>(tr.obs.data(), static_cast<Eigen::Index>(in));
    actions.push_back(tr.action);
    targets.push_back(munchausen_target(tr, target_params, tau_q, cl, gamma));
  }
  return loss_and_gradients(params, inputs, actions, targets);
}

AdamState AdamState::for_params(const MlpParams& params, double lr) {
  AdamState s;
  s.m = MlpParams::zeros(params.input_size(), params.hidden_size());
  s.v = s.m;
  s.lr = lr;
  return s;
}

void adam_step(MlpParams& params, const Gradients& grads, AdamState& state) {
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    const auto m_hat = m.array() / c1;
    const auto v_hat = v.array() / c2;
    p.array() -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
  };
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    update(params.layers[k].weight, grads.layers[k].weight, state.m.layers[k].weight,
           state.v.layers[k].weight);
    update(params.layers[k].bias, grads.layers[k].bias, state.m.layers[k].bias,
           state.v.layers[k].bias);
  }
}

std::string serialize_params(const MlpParams& params) {
  std::string out;
  out.reserve(8 * (1 + 2 * params.layers.size() + params.parameter_count()));
  put_u64(out, params.layers.size());
  for (const auto& l : params.layers) {
    put_u64(out, static_cast<std::uint64_t>(l.weight.cols()));
    put_u64(out, static_cast<std::uint64_t>(l.weight.rows()));
  }
  for (const auto& l : params.layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
        put_u64(out, std::bit_cast<std::uint64_t>(l.weight(r, c)));
    for (Eigen::Index r = 0; r < l.bias.size(); ++r)
      put_u64(out, std::bit_cast<std::uint64_t>(l.bias(r)));
  }
  return out;
}

MlpParams deserialize_params(std::string_view bytes) {
  std::size_t pos = 0;
  const std::uint64_t count = get_u64(bytes, pos);
  if (count != 3) throw std::runtime_error("expected a 3-layer parameter stream");
  std::array<std::pair<std::uint64_t, std::uint64_t>, 3> dims{};
  for (auto& d : dims) {
    d.first = get_u64(bytes, pos);
    d.second = get_u64(bytes, pos);
  }
  if (dims[1].first != dims[0].second || dims[2].first != dims[1].second ||
      dims[1].second != dims[0].second || dims[2].second != kNumActions)
    throw std::runtime_error("inconsistent layer shapes in parameter stream");
  MlpParams p = MlpParams::zeros(dims[0].first, dims[0].second);
  for (auto& l : p.layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
        l.weight(r, c) = std::bit_cast<double>(get_u64(bytes, pos));
    for (Eigen::Index r = 0; r < l.bias.size(); ++r)
      l.bias(r) = std::bit_cast<double>(get_u64(bytes, pos));
  }
  if (pos != bytes.size()) throw std::runtime_error("trailing bytes in parameter stream");
  return p;
}

}  // namespace mfgmesh
