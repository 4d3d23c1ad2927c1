#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

#include "gradient_check.hpp"
#include "mfgmesh/nn.hpp"
#include "support.hpp"

using namespace mfgmesh;
using namespace testsupport;

namespace {

std::uint64_t read_u64(const std::string& bytes, std::size_t offset) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[offset + b])) << (8 * b);
  return v;
}

}  // namespace

TEST_CASE("hidden width rounds down to a power of two with a floor") {
  CHECK(hidden_width_for(20) == 16);
  CHECK(hidden_width_for(140) == 128);
  CHECK(hidden_width_for(64) == 64);
  CHECK(hidden_width_for(8) == 16);
  CHECK(hidden_width_for(8, 1) == 8);
  CHECK(hidden_width_for(100, 1) == 64);
}

TEST_CASE("forward of a zero network is zero") {
  const auto p = MlpParams::zeros(6, 16);
  const std::vector<double> obs(6, 1.0);
  const auto q = forward(p, obs);
  CHECK(q.size() == 5);
  for (double v : q) CHECK(v == 0.0);
  CHECK_THROWS(forward(p, std::vector<double>(5, 1.0)));
}

TEST_CASE("forward of a one-unit handcrafted network") {
  auto p = MlpParams::zeros(2, 1);
  p.layers[0].weight << 1.0, -2.0;
  p.layers[0].bias << 0.5;
  p.layers[1].weight << 3.0;
  p.layers[1].bias << -1.0;
  p.layers[2].weight << 1.0, -1.0, 0.0, 2.0, 0.5;
  p.layers[2].bias << 0.0, 0.0, 1.0, 0.0, 0.0;
  // h1 = relu(1*2 - 2*0.25 + 0.5) = 2; h2 = relu(3*2 - 1) = 5
  auto q = forward(p, std::vector<double>{2.0, 0.25});
  CHECK(q == QValues{5.0, -5.0, 1.0, 10.0, 2.5});
  // negative pre-activation is cut by the ReLU
  q = forward(p, std::vector<double>{0.0, 1.0});
  CHECK(q == QValues{0.0, 0.0, 1.0, 0.0, 0.0});
}

TEST_CASE("batched forward agrees with the single forward") {
  Rng rng = make_stream(51, Stream::Weights);
  const auto p = MlpParams::random(7, 16, rng);
  Eigen::MatrixXd inputs(7, 4);
  for (Eigen::Index c = 0; c < 4; ++c)
    for (Eigen::Index r = 0; r < 7; ++r) inputs(r, c) = uniform01(rng);
  const auto out = forward_batch(p, inputs);
  for (Eigen::Index c = 0; c < 4; ++c) {
    std::vector<double> col(inputs.col(c).data(), inputs.col(c).data() + 7);
    const auto q = forward(p, col);
    for (Eigen::Index a = 0; a < 5; ++a) CHECK(out(a, c) == doctest::Approx(q[static_cast<std::size_t>(a)]).epsilon(1e-14));
  }
}

TEST_CASE("random init stays inside the fan-in bound") {
  Rng rng = make_stream(52, Stream::Weights);
  const auto p = MlpParams::random(20, 16, rng);
  for (const auto& l : p.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.weight.cols()));
    CHECK(l.weight.cwiseAbs().maxCoeff() <= bound);
    CHECK(l.bias.cwiseAbs().maxCoeff() <= bound);
  }
  CHECK(p.parameter_count() == 20 * 16 + 16 + 16 * 16 + 16 + 16 * 5 + 5);
}

TEST_CASE("policy examples") {
  const auto uniform = policy_from_q(std::vector<double>(5, 3.7), 0.03);
  for (double p : uniform) CHECK(p == doctest::Approx(0.2));

  const auto sharp = policy_from_q(std::vector<double>{1, 0, 0, 0, 0}, 0.03);
  CHECK(sharp[0] > 1.0 - 1e-9);

  const std::vector<double> q{0.3, -1.2, 0.8, 0.0, 0.05};
  const std::vector<double> permuted{q[2], q[0], q[4], q[1], q[3]};
  const auto a = policy_from_q(q, 0.5);
  const auto b = policy_from_q(permuted, 0.5);
  CHECK(b[0] == doctest::Approx(a[2]));
  CHECK(b[1] == doctest::Approx(a[0]));
  CHECK(b[2] == doctest::Approx(a[4]));
  CHECK(b[3] == doctest::Approx(a[1]));
  CHECK(b[4] == doctest::Approx(a[3]));

  CHECK_THROWS(policy_from_q(std::vector<double>{NAN, 0, 0, 0, 0}, 0.03));
  CHECK_THROWS(policy_from_q(q, 0.0));
}

TEST_CASE("policy sums to one and is strictly positive (property)") {
  Rng rng = make_stream(53, Stream::Init);
  for (int trial = 0; trial < 5000; ++trial) {
    std::vector<double> q(5);
    for (auto& v : q) v = rand_double(rng, -5.0, 5.0);
    const double tau = rand_double(rng, 0.05, 2.0);
    const auto p = policy_from_q(q, tau);
    REQUIRE(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-12);
    for (double x : p) REQUIRE(x > 0.0);
    const auto lp = log_policy_from_q(q, tau);
    for (std::size_t a = 0; a < 5; ++a) REQUIRE(std::exp(lp[a]) == doctest::Approx(p[a]).epsilon(1e-12));
  }
}

TEST_CASE("munchausen target closed forms") {
  const QValues zero{};
  const double t = munchausen_target_from_q(zero, zero, Action::Up, 0.5, 0.03, -1.0, 0.9);
  const double expected = 0.5 + 0.03 * std::log(0.2) + 0.9 * (-0.03 * std::log(0.2));
  CHECK(t == doctest::Approx(expected).epsilon(1e-14));
  CHECK(0.03 * std::log(0.2) == doctest::Approx(-0.048283).epsilon(1e-4));

  // zero-parameter target net gives the same value
  Transition tr{std::vector<double>(4, 1.0), Action::Left, 0.5, std::vector<double>(4, 0.0)};
  CHECK(munchausen_target(tr, MlpParams::zeros(4, 16), 0.03, -1.0, 0.9) ==
        doctest::Approx(expected).epsilon(1e-14));

  // nearly deterministic policy: the log term is clipped to cl
  const QValues peaked{100.0, 0.0, 0.0, 0.0, 0.0};
  const double clipped = munchausen_target_from_q(peaked, zero, Action::Down, 0.0, 0.03, -1.0, 0.9);
  CHECK(clipped == doctest::Approx(-1.0 + 0.9 * (-0.03 * std::log(0.2))).epsilon(1e-14));

  // tau -> 0: only the soft-greedy bootstrap remains
  const QValues q_next{0.2, 0.7, -0.1, 0.4, 0.0};
  const double tiny = munchausen_target_from_q(zero, q_next, Action::Stay, 0.3, 1e-12, -1.0, 0.9);
  CHECK(std::abs(tiny - (0.3 + 0.9 * 0.7)) < 1e-9);

  Transition bad = tr;
  CHECK_THROWS(munchausen_target(bad, MlpParams::zeros(4, 16), 0.03, 0.5, 0.9));
}

TEST_CASE("munchausen target under constant shifts (property)") {
  Rng rng = make_stream(54, Stream::Init);
  for (int trial = 0; trial < 2000; ++trial) {
    QValues now{}, next{};
    for (auto& v : now) v = rand_double(rng, -1.0, 1.0);
    for (auto& v : next) v = rand_double(rng, -1.0, 1.0);
    const auto a = static_cast<Action>(rand_int(rng, 0, 4));
    const double shift = rand_double(rng, -3.0, 3.0);
    const double base = munchausen_target_from_q(now, next, a, 0.4, 0.03, -1.0, 0.9);
    QValues now_s = now, next_s = next;
    for (auto& v : now_s) v += shift;
    for (auto& v : next_s) v += shift;
    // shifting the o_t logits leaves the policy, hence the target, unchanged
    REQUIRE(munchausen_target_from_q(now_s, next, a, 0.4, 0.03, -1.0, 0.9) ==
            doctest::Approx(base).epsilon(1e-12));
    // shifting the o_{t+1} values moves the target by gamma * shift
    REQUIRE(munchausen_target_from_q(now, next_s, a, 0.4, 0.03, -1.0, 0.9) ==
            doctest::Approx(base + 0.9 * shift).epsilon(1e-12));
  }
}

TEST_CASE("loss is zero with zero gradients when Q already equals the target") {
  // zero online net, targets all zero
  const auto p = MlpParams::zeros(3, 16);
  Eigen::MatrixXd inputs = Eigen::MatrixXd::Ones(3, 4);
  const std::vector<Action> actions(4, Action::Right);
  const std::vector<double> targets(4, 0.0);
  const auto res = loss_and_gradients(p, inputs, actions, targets);
  CHECK(res.loss == 0.0);
  for (double g : res.grads.flatten()) CHECK(g == 0.0);

  // and with the Transition overload: target net = online net, reward
  // chosen so that T equals Q exactly
  Rng rng = make_stream(55, Stream::Weights);
  const auto net = MlpParams::random(3, 16, rng);
  Transition tr{{0.1, 0.2, 0.3}, Action::Up, 0.0, {0.3, 0.1, -0.2}};
  const double t0 = munchausen_target(tr, net, 0.03, -1.0, 0.9);
  tr.reward = forward(net, tr.obs)[0] - t0;
  const std::vector<Transition> batch{tr};
  const auto r2 = loss_and_gradients(net, net, batch, 0.03, -1.0, 0.9);
  CHECK(r2.loss < 1e-28);
}

TEST_CASE("single transition loss is the squared residual") {
  Rng rng = make_stream(56, Stream::Weights);
  const auto net = MlpParams::random(4, 16, rng);
  const auto target = MlpParams::random(4, 16, rng);
  const auto batch = random_batch(rng, 4, 1);
  const double t = munchausen_target(batch[0], target, 0.03, -1.0, 0.9);
  const double q = forward(net, batch[0].obs)[static_cast<std::size_t>(batch[0].action)];
  CHECK(loss_and_gradients(net, target, batch, 0.03, -1.0, 0.9).loss ==
        doctest::Approx((q - t) * (q - t)).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central finite differences") {
  Rng rng = make_stream(57, Stream::Weights);
  for (std::size_t input : {4u, 9u, 20u}) {
    const auto net = MlpParams::random(input, 16, rng);
    const auto target = MlpParams::random(input, 16, rng);
    const auto batch = random_batch(rng, input, 8);
    const auto res = check_gradients(net, target, batch, 0.03, -1.0, 0.9);
    CHECK(res.checked == net.parameter_count());
    CHECK(res.max_rel_error < 1e-4);
  }
}

TEST_CASE("adam examples") {
  Rng rng = make_stream(58, Stream::Weights);
  auto p = MlpParams::random(3, 16, rng);
  const auto before = p;
  auto state = AdamState::for_params(p, 0.01);
  adam_step(p, MlpParams::zeros(3, 16), state);
  CHECK(p == before);
  CHECK(state.step == 1);

  // first step with gradient g moves every entry by about -lr * sign(g)
  auto q = before;
  auto s2 = AdamState::for_params(q, 0.01);
  auto g = MlpParams::random(3, 16, rng);
  adam_step(q, g, s2);
  const auto fb = before.flatten(), fq = q.flatten(), fg = g.flatten();
  for (std::size_t k = 0; k < fb.size(); ++k) {
    const double step = fq[k] - fb[k];
    const double expected = -0.01 * fg[k] / (std::abs(fg[k]) + 1e-8);
    REQUIRE(std::abs(step - expected) < 1e-12);
  }

  // identical calls from identical state are bit-identical
  auto a = before, b = before;
  auto sa = AdamState::for_params(a), sb = AdamState::for_params(b);
  for (int i = 0; i < 3; ++i) {
    adam_step(a, g, sa);
    adam_step(b, g, sb);
  }
  CHECK(serialize_params(a) == serialize_params(b));
  CHECK(sa.step == 3);
}

TEST_CASE("adam drives a frozen regression target below 1e-3") {
  Rng rng = make_stream(59, Stream::Weights);
  auto net = MlpParams::random(6, 16, rng);
  auto state = AdamState::for_params(net, 0.01);
  Eigen::MatrixXd inputs(6, 20);
  std::vector<Action> actions(20);
  std::vector<double> targets(20);
  for (Eigen::Index c = 0; c < 20; ++c) {
    for (Eigen::Index r = 0; r < 6; ++r) inputs(r, c) = uniform01(rng);
    actions[static_cast<std::size_t>(c)] = static_cast<Action>(uniform_index(rng, 5));
    targets[static_cast<std::size_t>(c)] = uniform01(rng);
  }
  std::vector<double> losses;
  for (int step = 0; step < 500; ++step) {
    const auto res = loss_and_gradients(net, inputs, actions, targets);
    losses.push_back(res.loss);
    adam_step(net, res.grads, state);
  }
  CHECK(losses.back() < 1e-3);
  // windowed means decrease
  double prev = INFINITY;
  for (int w = 0; w < 5; ++w) {
    const double mean = std::accumulate(losses.begin() + w * 100, losses.begin() + (w + 1) * 100, 0.0) / 100.0;
    CHECK(mean < prev);
    prev = mean;
  }
}

TEST_CASE("sync_target copies deeply") {
  Rng rng = make_stream(60, Stream::Weights);
  auto p = MlpParams::random(3, 16, rng);
  auto t = sync_target(p);
  CHECK(t == p);
  p.layers[0].weight(0, 0) += 1.0;
  CHECK_FALSE(t == p);
  CHECK(sync_target(sync_target(t)) == t);
}

TEST_CASE("parameter stream layout and round trip") {
  Rng rng = make_stream(61, Stream::Weights);
  const auto p = MlpParams::random(3, 16, rng);
  const std::string bytes = serialize_params(p);
  CHECK(bytes.size() == 8 * (1 + 6 + p.parameter_count()));
  CHECK(read_u64(bytes, 0) == 3);
  CHECK(read_u64(bytes, 8) == 3);
  CHECK(read_u64(bytes, 16) == 16);
  CHECK(read_u64(bytes, 24) == 16);
  CHECK(read_u64(bytes, 32) == 16);
  CHECK(read_u64(bytes, 40) == 16);
  CHECK(read_u64(bytes, 48) == 5);
  // first value: layer 0 weight (0,0), then (0,1) (row-major)
  double w00, w01;
  std::memcpy(&w00, bytes.data() + 56, 8);
  std::memcpy(&w01, bytes.data() + 64, 8);
  CHECK(w00 == p.layers[0].weight(0, 0));
  CHECK(w01 == p.layers[0].weight(0, 1));
  // bias of layer 0 follows its 48 weights
  double b0;
  std::memcpy(&b0, bytes.data() + 56 + 8 * 48, 8);
  CHECK(b0 == p.layers[0].bias(0));

  CHECK(deserialize_params(bytes) == p);
  CHECK_THROWS(deserialize_params(bytes.substr(0, bytes.size() - 1)));
  CHECK_THROWS(deserialize_params(bytes + std::string(8, '\0')));
}
