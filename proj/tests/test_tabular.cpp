#include <cmath>
#include <vector>

#include "doctest.h"

#include "deltarl/tabular.hpp"

using namespace deltarl;

namespace {

TimescaleLadder two_level_half() {
  TimescaleLadder l;
  l.gammas = {0.5, 0.75};
  l.ks = {2, 2};
  l.lambdas = {0.9, 0.9};
  l.alphas = {0.5, 0.5};
  return l;
}

// Synchronous expectation backup of the one-step targets, the sampling-free
// counterpart of the online update.
DeltaTable expected_update(const DeltaTable& dt, const MdpSpec& mdp,
                           const TabularPolicy& pi) {
  DeltaTable next = dt;
  for (int z = 0; z < dt.ladder.levels(); ++z) {
    const double gz = dt.ladder.gammas[static_cast<std::size_t>(z)];
    const double gp =
        z == 0 ? 0.0 : dt.ladder.gammas[static_cast<std::size_t>(z - 1)];
    for (int s = 0; s < dt.n_states; ++s)
      for (int a = 0; a < dt.n_actions; ++a) {
        double target = z == 0 ? mdp.r(s, a) : 0.0;
        for (int s2 = 0; s2 < dt.n_states; ++s2)
          for (int a2 = 0; a2 < dt.n_actions; ++a2) {
            const double w = mdp.p(s, a, s2) * pi.pi(s2, a2);
            if (w == 0.0) continue;
            if (z == 0)
              target += w * gz * dt.at(0, s2, a2);
            else
              target += w * ((gz - gp) * dt.q_at(z - 1, s2, a2) +
                             gz * dt.at(z, s2, a2));
          }
        next.at(z, s, a) = target;
      }
  }
  return next;
}

}  // namespace

TEST_CASE("baseline sarsa step") {
  QTable q = QTable::zeros(2, 2);
  const TransitionStep t{0, 1, 1.0, 1, 0, false};
  baseline_sarsa_step(q, t, 0.5, 1.0);
  CHECK(q.at(0, 1) == doctest::Approx(1.0));
  CHECK(q.at(0, 0) == 0.0);
  CHECK(q.at(1, 0) == 0.0);

  QTable q2 = q;
  baseline_sarsa_step(q2, t, 0.5, 0.0);
  CHECK(q2.at(0, 1) == q.at(0, 1));
}

TEST_CASE("baseline sarsa is unbiased at the exact fixed point") {
  const MdpSpec mdp = make_random(4, 2, 5);
  const TabularPolicy pi = TabularPolicy::uniform(4, 2);
  const double gamma = 0.8;
  const QTable q = exact_q(mdp, pi, gamma);
  for (int s = 0; s < 4; ++s)
    for (int a = 0; a < 2; ++a) {
      double expected_td = mdp.r(s, a) - q.at(s, a);
      for (int s2 = 0; s2 < 4; ++s2)
        for (int a2 = 0; a2 < 2; ++a2)
          expected_td +=
              gamma * mdp.p(s, a, s2) * pi.pi(s2, a2) * q.at(s2, a2);
      CHECK(std::abs(expected_td) < 1e-10);
    }
}

TEST_CASE("one-step delta targets") {
  SUBCASE("degenerate ladder level contributes nothing") {
    TimescaleLadder l = two_level_half();
    l.gammas = {0.5, 0.5};
    DeltaTable dt = DeltaTable::zeros(l, 1, 1);
    dt.at(0, 0, 0) = 3.0;  // only the z=1 coefficient matters here
    const TransitionStep t{0, 0, 1.0, 0, 0, false};
    CHECK(delta_single_step_target(dt, 1, t) == doctest::Approx(0.0));
  }
  SUBCASE("self-loop fixed point") {
    DeltaTable dt = DeltaTable::zeros(two_level_half(), 1, 1);
    dt.at(0, 0, 0) = 2.0;  // exact Q at 0.5
    dt.at(1, 0, 0) = 2.0;  // exact Q at 0.75 minus Q at 0.5
    const TransitionStep t{0, 0, 1.0, 0, 0, false};
    CHECK(delta_single_step_target(dt, 0, t) == doctest::Approx(2.0));
    CHECK(delta_single_step_target(dt, 1, t) == doctest::Approx(2.0));
  }
  SUBCASE("index checks") {
    DeltaTable dt = DeltaTable::zeros(two_level_half(), 1, 1);
    const TransitionStep t{0, 0, 1.0, 0, 0, false};
    CHECK_THROWS_AS(delta_single_step_target(dt, 5, t), std::out_of_range);
  }
}

TEST_CASE("multi-step targets") {
  SUBCASE("self-loop fixed point arithmetic") {
    DeltaTable dt = DeltaTable::zeros(two_level_half(), 1, 1);
    dt.at(0, 0, 0) = 2.0;
    dt.at(1, 0, 0) = 2.0;
    const std::vector<TransitionStep> window = {
        {0, 0, 1.0, 0, 0, false}, {0, 0, 1.0, 0, 0, false}};
    const auto g = multi_step_targets(dt, window);
    // G^1 = 0.25*1 + (0.5625-0.25)*2 + 0.5625*2
    CHECK(g[1] == doctest::Approx(2.0));
    CHECK(g[0] == doctest::Approx(1.0 + 0.5 + 0.25 * 2.0));
  }
  SUBCASE("zero rewards and tables give zero targets") {
    DeltaTable dt = DeltaTable::zeros(two_level_half(), 1, 1);
    const std::vector<TransitionStep> window = {
        {0, 0, 0.0, 0, 0, false}, {0, 0, 0.0, 0, 0, false}};
    for (double g : multi_step_targets(dt, window))
      CHECK(g == doctest::Approx(0.0));
  }
  SUBCASE("window too short without terminal") {
    DeltaTable dt = DeltaTable::zeros(two_level_half(), 1, 1);
    const std::vector<TransitionStep> window = {{0, 0, 1.0, 0, 0, false}};
    CHECK_THROWS_AS(multi_step_targets(dt, window), std::invalid_argument);
  }
  SUBCASE("k=1 reduces to the one-step targets bitwise") {
    TimescaleLadder l;
    l.gammas = {0.5, 0.75, 0.875};
    l.ks = {1, 1, 1};
    l.lambdas = {0.9, 0.9, 0.9};
    l.alphas = {0.1, 0.1, 0.1};
    DeltaTable dt = DeltaTable::zeros(l, 3, 2);
    Rng rng(4);
    for (auto& w : dt.w) w = rng.uniform(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
      const TransitionStep t{rng.uniform_int(3), rng.uniform_int(2),
                             rng.uniform(-1.0, 1.0), rng.uniform_int(3),
                             rng.uniform_int(2), false};
      const std::vector<TransitionStep> window = {t};
      const auto multi = multi_step_targets(dt, window);
      for (int z = 0; z < 3; ++z)
        CHECK(multi[static_cast<std::size_t>(z)] ==
              delta_single_step_target(dt, z, t));
    }
  }
}

TEST_CASE("apply_targets moves each level by its step size") {
  DeltaTable dt = DeltaTable::zeros(two_level_half(), 2, 1);
  const std::vector<double> targets = {2.0, 4.0};

  std::vector<double> ones = {1.0, 1.0};
  apply_targets(dt, 0, 0, targets, ones);
  CHECK(dt.at(0, 0, 0) == doctest::Approx(2.0));
  CHECK(dt.at(1, 0, 0) == doctest::Approx(4.0));
  CHECK(dt.at(0, 1, 0) == 0.0);  // untouched cell

  std::vector<double> zeros = {0.0, 0.0};
  apply_targets(dt, 1, 0, targets, zeros);
  CHECK(dt.at(0, 1, 0) == 0.0);

  DeltaTable half = DeltaTable::zeros(two_level_half(), 1, 1);
  apply_targets(half, 0, 0, std::vector<double>{2.0, 2.0});
  CHECK(half.at(0, 0, 0) == doctest::Approx(1.0));  // alpha 0.5 midpoint
}

TEST_CASE("reconstruct_q sums the levels") {
  DeltaTable dt = DeltaTable::zeros(two_level_half(), 1, 1);
  dt.at(0, 0, 0) = 1.0;
  dt.at(1, 0, 0) = 0.5;
  CHECK(reconstruct_q(dt, 1).at(0, 0) == doctest::Approx(1.5));
  CHECK(reconstruct_q(dt, 0).at(0, 0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(reconstruct_q(dt, 3), std::out_of_range);
}

TEST_CASE("action selection") {
  QTable q = QTable::zeros(1, 2);
  q.at(0, 0) = 0.1;
  q.at(0, 1) = 0.9;
  Rng rng(3);
  CHECK(select_action(q, 0, 0.0, rng) == 1);

  QTable tie = QTable::zeros(1, 2);
  tie.at(0, 0) = 0.5;
  tie.at(0, 1) = 0.5;
  CHECK(select_action(tie, 0, 0.0, rng) == 0);

  Rng explore(11);
  int counts[2] = {0, 0};
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[select_action(q, 0, 1.0, explore)];
  CHECK(std::abs(static_cast<double>(counts[0]) / n - 0.5) < 0.01);
  CHECK_THROWS_AS(select_action(q, 0, 1.5, rng), std::invalid_argument);
}

TEST_CASE("expectation backups converge to the exact decomposition") {
  const MdpSpec mdp = make_random(4, 2, 8);
  const TabularPolicy pi = TabularPolicy::uniform(4, 2);
  TimescaleLadder l = build_doubling_ladder(2, 1.0, 0.9);
  DeltaTable dt = DeltaTable::zeros(l, 4, 2);
  for (int sweep = 0; sweep < 400; ++sweep) dt = expected_update(dt, mdp, pi);
  const auto w = exact_w(mdp, pi, l.gammas);
  for (int z = 0; z < l.levels(); ++z)
    for (int s = 0; s < 4; ++s)
      for (int a = 0; a < 2; ++a)
        CHECK(std::abs(dt.at(z, s, a) -
                       w[static_cast<std::size_t>(z)].at(s, a)) < 1e-8);
}

TEST_CASE("online learner converges on the two-state ring") {
  const std::vector<double> rewards = {1.0, 0.0};
  const MdpSpec ring = make_ring(2, rewards);
  const TabularPolicy pi = TabularPolicy::uniform(2, 1);
  TimescaleLadder l = build_doubling_ladder(2, 0.2, 0.9);
  const QTable oracle = exact_q(ring, pi, l.gamma_top());

  for (bool multi : {false, true}) {
    DeltaSarsaLearner learner(l, 2, 1, multi);
    Rng rng(1);
    int s = 0;
    for (int t = 0; t < 20000; ++t) {
      const auto [r, s2] = step(ring, s, 0, rng);
      learner.observe(TransitionStep{s, 0, r, s2, 0, false});
      s = s2;
    }
    CHECK(sup_distance(learner.top_q(), oracle) < 1e-3);
  }
}

TEST_CASE("single-level learner reduces to baseline sarsa bitwise") {
  TimescaleLadder l;
  l.gammas = {0.7};
  l.ks = {1};
  l.lambdas = {0.9};
  l.alphas = {0.3};
  const MdpSpec mdp = make_random(4, 2, 14);
  const TabularPolicy pi = TabularPolicy::uniform(4, 2);
  DeltaSarsaLearner delta(l, 4, 2, false);
  BaselineSarsaLearner base(4, 2, 0.7, 0.3);
  Rng rng(6);
  int s = 0;
  int a = rng.categorical(pi.row(0));
  for (int t = 0; t < 500; ++t) {
    const auto [r, s2] = step(mdp, s, a, rng);
    const int a2 = rng.categorical(pi.row(s2));
    const TransitionStep tr{s, a, r, s2, a2, false};
    delta.observe(tr);
    base.observe(tr);
    s = s2;
    a = a2;
  }
  for (int s2 = 0; s2 < 4; ++s2)
    for (int a2 = 0; a2 < 2; ++a2)
      CHECK(delta.table().at(0, s2, a2) == base.table().at(s2, a2));
}

TEST_CASE("greedy bootstrap mode ignores the recorded next action") {
  TimescaleLadder l = build_doubling_ladder(0, 1.0, 0.9);
  DeltaSarsaLearner learner(l, 2, 2, false);
  learner.set_bootstrap_mode(BootstrapMode::greedy);
  learner.observe(TransitionStep{1, 1, 1.0, 0, 0, false});  // W(1,1) = 1
  // the transition records next_action 0, but state 1 prefers action 1
  learner.observe(TransitionStep{0, 0, 0.0, 1, 0, false});
  CHECK(learner.table().at(0, 0, 0) == doctest::Approx(0.5 * 1.0));

  DeltaSarsaLearner on_policy(l, 2, 2, false);
  on_policy.observe(TransitionStep{1, 1, 1.0, 0, 0, false});
  on_policy.observe(TransitionStep{0, 0, 0.0, 1, 0, false});
  CHECK(on_policy.table().at(0, 0, 0) == doctest::Approx(0.0));
}
