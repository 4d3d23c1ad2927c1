#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>

#include "mfgmesh/env.hpp"
#include "support.hpp"

using namespace mfgmesh;
using namespace testsupport;

TEST_CASE("step_agent clamps at the boundary and moves by one cell") {
  const auto g = grid(10, 10, 2);
  CHECK(step_agent({0, 0}, Action::Up, g) == Cell{0, 0});
  CHECK(step_agent({0, 0}, Action::Left, g) == Cell{0, 0});
  CHECK(step_agent({9, 9}, Action::Down, g) == Cell{9, 9});
  CHECK(step_agent({9, 9}, Action::Right, g) == Cell{9, 9});
  CHECK(step_agent({3, 3}, Action::Stay, g) == Cell{3, 3});
  CHECK(step_agent({3, 3}, Action::Right, g) == Cell{3, 4});
  CHECK(step_agent({3, 3}, Action::Up, g) == Cell{2, 3});
  CHECK(step_agent({3, 3}, Action::Down, g) == Cell{4, 3});
  CHECK(step_agent({3, 3}, Action::Left, g) == Cell{3, 2});
}

TEST_CASE("step_agent never leaves the grid (property)") {
  Rng rng = make_stream(11, Stream::Init);
  for (int trial = 0; trial < 2000; ++trial) {
    const int w = rand_int(rng, 2, 9), h = rand_int(rng, 2, 9);
    const auto g = grid(w, h, 2);
    const Cell c = rand_cell(rng, w, h);
    const auto a = static_cast<Action>(rand_int(rng, 0, 4));
    const Cell next = step_agent(c, a, g);
    REQUIRE(g.contains(next));
    REQUIRE(std::abs(next.row - c.row) + std::abs(next.col - c.col) <= 1);
    REQUIRE(step_agent(c, Action::Stay, g) == c);
  }
}

TEST_CASE("empirical distribution examples") {
  const auto g = grid(10, 10, 4);
  const auto point = empirical_distribution(std::vector<Cell>(4, Cell{0, 0}), g);
  CHECK(point[0] == 1.0);
  CHECK(std::accumulate(point.probs.begin() + 1, point.probs.end(), 0.0) == 0.0);

  const auto two = empirical_distribution(std::vector<Cell>{{0, 0}, {0, 1}}, grid(10, 10, 2));
  CHECK(two[0] == 0.5);
  CHECK(two[1] == 0.5);
  CHECK(two.sum() == 1.0);
}

TEST_CASE("empirical distribution matches an independent tally for N=500") {
  Rng rng = make_stream(12, Stream::Init);
  const auto g = grid(10, 10, 500);
  const auto cells = rand_cells(rng, 500, 10, 10);
  std::map<std::pair<int, int>, int> tally;
  for (const auto& c : cells) ++tally[{c.row, c.col}];
  const auto mu = empirical_distribution(cells, g);
  CHECK(std::abs(mu.sum() - 1.0) < 1e-9);
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 10; ++c) {
      const double expected = tally.count({r, c}) ? tally[{r, c}] / 500.0 : 0.0;
      const double v = mu[static_cast<std::size_t>(r * 10 + c)];
      CHECK(v == expected);
      CHECK(std::abs(v * 500.0 - std::round(v * 500.0)) < 1e-12 * 500.0);
    }
}

TEST_CASE("empirical distribution is permutation invariant (property)") {
  Rng rng = make_stream(13, Stream::Init);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = rand_int(rng, 2, 40);
    const auto g = grid(6, 5, n);
    auto cells = rand_cells(rng, static_cast<std::size_t>(n), 6, 5);
    const auto before = empirical_distribution(cells, g);
    std::shuffle(cells.begin(), cells.end(), rng);
    REQUIRE(empirical_distribution(cells, g).probs == before.probs);
  }
}

TEST_CASE("cluster reward endpoints") {
  const auto g = grid(10, 10, 5);
  const auto together = env_at(std::vector<Cell>(5, Cell{4, 4}));
  const auto mu = empirical_distribution(together.agents, g);
  CHECK(compute_reward(TaskKind::Cluster, 2, together, Action::Stay, mu, g) == 1.0);

  const auto apart = env_at({{0, 0}, {4, 4}, {4, 4}, {4, 4}, {4, 4}});
  const auto mu2 = empirical_distribution(apart.agents, g);
  CHECK(compute_reward(TaskKind::Cluster, 0, apart, Action::Stay, mu2, g) == doctest::Approx(0.0));
  // log(4/5) mapped from [log(1/5), 0]
  const double expected = (std::log(0.8) - std::log(0.2)) / (0.0 - std::log(0.2));
  CHECK(compute_reward(TaskKind::Cluster, 1, apart, Action::Stay, mu2, g) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("disperse reward") {
  const auto g = grid(10, 10, 4);
  const auto env = env_at({{0, 0}, {1, 1}, {1, 1}, {1, 1}});
  const auto mu = empirical_distribution(env.agents, g);
  CHECK(compute_reward(TaskKind::Disperse, 0, env, Action::Up, mu, g) == 0.0);
  // stationary: raw -mu(s) on [-1, 0]
  CHECK(compute_reward(TaskKind::Disperse, 0, env, Action::Stay, mu, g) == doctest::Approx(0.75));
  CHECK(compute_reward(TaskKind::Disperse, 1, env, Action::Stay, mu, g) == doctest::Approx(0.25));
}

TEST_CASE("target agreement reward follows the affine map") {
  const auto g = grid(10, 10, 4, TaskKind::TargetAgreement);
  // three agents on the (0,0) target, one alone on another target
  const auto env = env_at({{0, 0}, {0, 0}, {0, 0}, {9, 9}});
  const auto mu = empirical_distribution(env.agents, g);
  const double f = 3.0 / 4.0;
  CHECK(compute_reward(TaskKind::TargetAgreement, 0, env, Action::Stay, mu, g) ==
        doctest::Approx((f - (-1.0)) / (1.0 - (-1.0))));
  // fraction exactly 1/N is not collaboration
  CHECK(compute_reward(TaskKind::TargetAgreement, 3, env, Action::Stay, mu, g) == 0.0);
  // off target
  const auto off = env_at({{1, 1}, {1, 1}, {1, 1}, {1, 1}});
  const auto mu_off = empirical_distribution(off.agents, g);
  CHECK(compute_reward(TaskKind::TargetAgreement, 0, off, Action::Stay, mu_off, g) == 0.0);

  auto bad = g;
  bad.targets.clear();
  CHECK_THROWS_AS(compute_reward(TaskKind::TargetAgreement, 0, env, Action::Stay, mu, bad),
                  std::invalid_argument);
}

TEST_CASE("evade shark reward hand values") {
  const auto g = grid(10, 10, 4, TaskKind::EvadeShark);
  auto env = env_at({{9, 9}, {0, 5}, {5, 0}, {5, 5}});
  env.entity = Cell{0, 0};
  const auto mu = empirical_distribution(env.agents, g);
  // distance 18, alone (log term at floor) -> raw 18 on [0, 36]
  CHECK(compute_reward(TaskKind::EvadeShark, 0, env, Action::Stay, mu, g) == doctest::Approx(0.5));

  auto packed = env_at(std::vector<Cell>(4, Cell{9, 9}));
  packed.entity = Cell{0, 0};
  const auto mu2 = empirical_distribution(packed.agents, g);
  CHECK(compute_reward(TaskKind::EvadeShark, 0, packed, Action::Stay, mu2, g) ==
        doctest::Approx(1.0));
}

TEST_CASE("push object reward hand values") {
  const auto g = grid(10, 10, 2, TaskKind::PushObject);
  auto env = env_at({{0, 0}, {9, 9}});
  env.entity = Cell{0, 0};
  const auto mu = empirical_distribution(env.agents, g);
  CHECK(compute_reward(TaskKind::PushObject, 0, env, Action::Stay, mu, g) == 1.0);
  CHECK(compute_reward(TaskKind::PushObject, 1, env, Action::Stay, mu, g) == doctest::Approx(0.5));
  // object in the middle: edge distance 4, agent on it
  env.entity = Cell{4, 4};
  env.agents[0].pos = {4, 4};
  CHECK(compute_reward(TaskKind::PushObject, 0, env, Action::Stay, mu, g) ==
        doctest::Approx((-4.0 + 36.0) / 36.0));
}

TEST_CASE("every task reward lies in [0,1] (property)") {
  Rng rng = make_stream(14, Stream::Init);
  const std::array tasks{TaskKind::Cluster, TaskKind::TargetAgreement, TaskKind::EvadeShark,
                         TaskKind::PushObject, TaskKind::Disperse};
  for (int trial = 0; trial < 3000; ++trial) {
    const auto task = tasks[static_cast<std::size_t>(trial) % tasks.size()];
    const int w = rand_int(rng, 2, 8), h = rand_int(rng, 2, 8), n = rand_int(rng, 2, 20);
    const auto g = grid(w, h, n, task);
    auto env = env_at(rand_cells(rng, static_cast<std::size_t>(n), w, h));
    if (has_entity(task)) env.entity = rand_cell(rng, w, h);
    const auto mu = empirical_distribution(env.agents, g);
    const auto i = static_cast<std::size_t>(rand_int(rng, 0, n - 1));
    const auto a = static_cast<Action>(rand_int(rng, 0, 4));
    const double r = compute_reward(task, i, env, a, mu, g);
    REQUIRE(r >= 0.0);
    REQUIRE(r <= 1.0);
    const auto [lo, hi] = raw_reward_bounds(task, g);
    const double raw = raw_reward(task, i, env, a, mu, g);
    REQUIRE(raw >= lo - 1e-12);
    REQUIRE(raw <= hi + 1e-12);
  }
}

TEST_CASE("shark steps toward the most populated cell") {
  auto g = grid(10, 10, 3, TaskKind::EvadeShark);
  g.shark_noise_prob = 0.0;
  Rng rng = make_stream(15, Stream::Entity);
  auto env = env_at({{5, 9}, {5, 9}, {0, 0}});
  env.entity = Cell{5, 5};
  auto mu = empirical_distribution(env.agents, g);
  CHECK(advance_entity(TaskKind::EvadeShark, env, mu, g, rng) == Cell{5, 6});

  // mode on the shark itself: no step
  env = env_at({{5, 5}, {5, 5}, {0, 0}});
  env.entity = Cell{5, 5};
  mu = empirical_distribution(env.agents, g);
  CHECK(advance_entity(TaskKind::EvadeShark, env, mu, g, rng) == Cell{5, 5});

  // vertical when the vertical gap is larger; horizontal on equal gaps
  CHECK(shark_step({0, 0}, {5, 2}, g) == Cell{1, 0});
  CHECK(shark_step({0, 0}, {3, 3}, g) == Cell{0, 1});

  // ties between equally populated cells go to the lowest index
  env = env_at({{7, 7}, {2, 2}, {9, 0}});
  mu = empirical_distribution(env.agents, g);
  CHECK(most_populated_state(mu) == g.index({2, 2}));
}

TEST_CASE("noiseless shark never moves away from its goal (property)") {
  Rng rng = make_stream(16, Stream::Init);
  Rng ent = make_stream(16, Stream::Entity);
  for (int trial = 0; trial < 2000; ++trial) {
    const int w = rand_int(rng, 2, 9), h = rand_int(rng, 2, 9), n = rand_int(rng, 2, 12);
    auto g = grid(w, h, n, TaskKind::EvadeShark);
    g.shark_noise_prob = 0.0;
    auto env = env_at(rand_cells(rng, static_cast<std::size_t>(n), w, h));
    env.entity = rand_cell(rng, w, h);
    const auto mu = empirical_distribution(env.agents, g);
    const Cell goal = g.cell(most_populated_state(mu));
    const Cell next = advance_entity(TaskKind::EvadeShark, env, mu, g, ent);
    auto l1 = [](Cell a, Cell b) { return std::abs(a.row - b.row) + std::abs(a.col - b.col); };
    if (!(*env.entity == goal)) REQUIRE(l1(next, goal) == l1(*env.entity, goal) - 1);
  }
}

TEST_CASE("shark noise picks a uniform cardinal step") {
  auto g = grid(10, 10, 2, TaskKind::EvadeShark);
  g.shark_noise_prob = 1.0;
  Rng rng = make_stream(17, Stream::Entity);
  auto env = env_at({{0, 0}, {0, 0}});
  env.entity = Cell{5, 5};
  const auto mu = empirical_distribution(env.agents, g);
  std::map<std::pair<int, int>, int> hits;
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    const Cell c = advance_entity(TaskKind::EvadeShark, env, mu, g, rng);
    ++hits[{c.row, c.col}];
  }
  CHECK(hits.size() == 4);
  for (const auto& [cell, count] : hits) CHECK(static_cast<double>(count) / n == doctest::Approx(0.25).epsilon(0.05));
}

TEST_CASE("push field with equal neighbours samples each direction with probability 1/4") {
  const auto g = grid(10, 10, 4, TaskKind::PushObject);
  auto env = env_at({{4, 5}, {6, 5}, {5, 4}, {5, 6}});
  env.entity = Cell{5, 5};
  const auto mu = empirical_distribution(env.agents, g);
  Rng rng = make_stream(18, Stream::Entity);
  std::map<std::pair<int, int>, int> hits;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Cell c = advance_entity(TaskKind::PushObject, env, mu, g, rng);
    ++hits[{c.row, c.col}];
  }
  REQUIRE(hits.size() == 4);
  for (const auto& [cell, count] : hits) CHECK(std::abs(static_cast<double>(count) / n - 0.25) <= 0.01);
}

TEST_CASE("push field weights count agents on the opposite side") {
  const auto g = grid(10, 10, 3, TaskKind::PushObject);
  const std::vector<Cell> below{{6, 5}, {6, 5}, {0, 0}};
  const auto w = push_field_weights({5, 5}, below, g);
  // Up, Down, Left, Right
  CHECK(w == std::array<double, 4>{3.0, 1.0, 1.0, 1.0});

  auto env = env_at(below);
  env.entity = Cell{5, 5};
  const auto mu = empirical_distribution(env.agents, g);
  Rng rng = make_stream(19, Stream::Entity);
  int up = 0;
  const int n = 60000;
  for (int i = 0; i < n; ++i) up += advance_entity(TaskKind::PushObject, env, mu, g, rng) == Cell{4, 5};
  CHECK(static_cast<double>(up) / n == doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("advance_entity rejects tasks without an entity") {
  const auto g = grid(4, 4, 2);
  const auto env = env_at({{0, 0}, {1, 1}});
  const auto mu = empirical_distribution(env.agents, g);
  Rng rng;
  CHECK_THROWS_AS(advance_entity(TaskKind::Cluster, env, mu, g, rng), std::invalid_argument);
}

TEST_CASE("observation encoding layout") {
  const auto g = grid(10, 10, 2);
  const auto env = env_at({{0, 0}, {3, 7}});
  const auto o = encode_observation(env.agents[0], env, nullptr, g, ObservationMode::LocalOnly);
  CHECK(o.size() == 20);
  CHECK(std::accumulate(o.begin(), o.end(), 0.0) == 2.0);
  CHECK(o[0] == 1.0);
  CHECK(o[10] == 1.0);

  const auto o2 = encode_observation(env.agents[1], env, nullptr, g, ObservationMode::LocalOnly);
  CHECK(o2[3] == 1.0);
  CHECK(o2[10 + 7] == 1.0);

  auto ge = grid(10, 10, 2, TaskKind::EvadeShark);
  auto env2 = env;
  env2.entity = Cell{9, 1};
  const auto mu = empirical_distribution(env2.agents, ge);
  const auto o3 = encode_observation(env2.agents[0], env2, &mu, ge, ObservationMode::GlobalMeanField);
  CHECK(o3.size() == 140);
  CHECK(observation_size(ge, ObservationMode::EstimatedMeanField) == 4 * 10 + 100);
  CHECK(o3[20 + 9] == 1.0);
  CHECK(o3[30 + 1] == 1.0);
  CHECK(std::accumulate(o3.begin() + 40, o3.end(), 0.0) == doctest::Approx(1.0));

  CHECK_THROWS_AS(encode_observation(env.agents[0], env, nullptr, g, ObservationMode::GlobalMeanField),
                  std::invalid_argument);
  EmpiricalDistribution wrong{std::vector<double>(5, 0.2)};
  CHECK_THROWS_AS(encode_observation(env.agents[0], env, &wrong, g, ObservationMode::GlobalMeanField),
                  std::invalid_argument);
}

TEST_CASE("one-hot blocks hold exactly one 1 (property)") {
  Rng rng = make_stream(20, Stream::Init);
  for (int trial = 0; trial < 500; ++trial) {
    const int w = rand_int(rng, 2, 9), h = rand_int(rng, 2, 9);
    const auto g = grid(w, h, 3, TaskKind::PushObject);
    auto env = env_at(rand_cells(rng, 3, w, h));
    env.entity = rand_cell(rng, w, h);
    const auto o = encode_observation(env.agents[1], env, nullptr, g, ObservationMode::LocalOnly);
    std::size_t off = 0;
    for (int block = 0; block < 4; ++block) {
      const std::size_t len = static_cast<std::size_t>(block % 2 == 0 ? h : w);
      REQUIRE(std::accumulate(o.begin() + static_cast<long>(off),
                              o.begin() + static_cast<long>(off + len), 0.0) == 1.0);
      off += len;
    }
    REQUIRE(off == o.size());
  }
}

TEST_CASE("grid validation") {
  CHECK_THROWS_AS(grid(1, 5, 2).validate(), std::invalid_argument);
  CHECK_THROWS_AS(grid(5, 5, 1).validate(), std::invalid_argument);
  auto g = grid(5, 5, 2, TaskKind::TargetAgreement);
  CHECK_NOTHROW(g.validate());
  g.targets.push_back({7, 7});
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  g = grid(5, 5, 2, TaskKind::TargetAgreement);
  g.targets.clear();
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
}
