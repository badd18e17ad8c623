#include <cmath>
#include <vector>

#include "doctest.h"

#include "deltarl/actor_critic.hpp"

using namespace deltarl;

namespace {

MdpSpec self_loop(double reward) {
  MdpSpec mdp;
  mdp.n_states = 1;
  mdp.n_actions = 1;
  mdp.transition = {1.0};
  mdp.reward = {reward};
  return mdp;
}

double numeric_grad_log_prob(SoftmaxPolicy policy, int s, int a, int b,
                             double h) {
  const std::size_t idx =
      static_cast<std::size_t>(s) * policy.n_actions + b;
  SoftmaxPolicy plus = policy;
  plus.logits[idx] += h;
  SoftmaxPolicy minus = policy;
  minus.logits[idx] -= h;
  return (plus.log_prob(s, a) - minus.log_prob(s, a)) / (2.0 * h);
}

}  // namespace

TEST_CASE("softmax rows stay normalized through updates") {
  SoftmaxPolicy p = SoftmaxPolicy::zeros(3, 4);
  Rng rng(5);
  for (int step = 0; step < 200; ++step) {
    policy_step(p, rng.uniform_int(3), rng.uniform_int(4),
                rng.uniform(-2.0, 2.0), 0.3);
    for (int s = 0; s < 3; ++s) {
      const auto probs = p.probs(s);
      double sum = 0.0;
      for (double v : probs) sum += v;
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("policy gradient direction and magnitude") {
  SoftmaxPolicy p = SoftmaxPolicy::zeros(1, 2);
  SUBCASE("zero advantage is a no-op") {
    policy_step(p, 0, 0, 0.0, 0.5);
    CHECK(p.logits[0] == 0.0);
    CHECK(p.logits[1] == 0.0);
  }
  SUBCASE("unit advantage moves half a unit at uniform probabilities") {
    policy_step(p, 0, 0, 1.0, 1.0);
    CHECK(p.logits[0] == doctest::Approx(0.5));
    CHECK(p.logits[1] == doctest::Approx(-0.5));
    CHECK(p.probs(0)[0] > 0.5);
  }
}

TEST_CASE("analytic log-probability gradient matches central differences") {
  Rng rng(9);
  double max_rel = 0.0;
  for (int draw = 0; draw < 50; ++draw) {
    const int n_actions = 2 + rng.uniform_int(4);
    SoftmaxPolicy p = SoftmaxPolicy::zeros(1, n_actions);
    for (auto& v : p.logits) v = rng.uniform(-2.0, 2.0);
    const int a = rng.uniform_int(n_actions);
    const auto probs = p.probs(0);
    double num_norm = 0.0, diff_norm = 0.0;
    for (int b = 0; b < n_actions; ++b) {
      const double analytic =
          ((b == a) ? 1.0 : 0.0) - probs[static_cast<std::size_t>(b)];
      const double numeric = numeric_grad_log_prob(p, 0, a, b, 1e-5);
      num_norm = std::max(num_norm, std::abs(numeric));
      diff_norm = std::max(diff_norm, std::abs(numeric - analytic));
    }
    max_rel = std::max(max_rel, diff_norm / std::max(1.0, num_norm));
  }
  CHECK(max_rel <= 1e-6);
}

TEST_CASE("entropy gradient matches central differences") {
  Rng rng(4);
  SoftmaxPolicy p = SoftmaxPolicy::zeros(1, 3);
  for (auto& v : p.logits) v = rng.uniform(-1.0, 1.0);
  SoftmaxPolicy stepped = p;
  entropy_step(stepped, 0, 1.0, 1.0);  // logits move by the entropy gradient
  for (int b = 0; b < 3; ++b) {
    SoftmaxPolicy plus = p, minus = p;
    plus.logits[static_cast<std::size_t>(b)] += 1e-5;
    minus.logits[static_cast<std::size_t>(b)] -= 1e-5;
    const double numeric =
        (plus.entropy(0) - minus.entropy(0)) / 2e-5;
    const double analytic =
        stepped.logits[static_cast<std::size_t>(b)] -
        p.logits[static_cast<std::size_t>(b)];
    CHECK(analytic == doctest::Approx(numeric).epsilon(1e-5));
  }
}

TEST_CASE("advantage estimates") {
  const FeatureMap fm = FeatureMap::one_hot(1, 1);
  TimescaleLadder l;
  l.gammas = {0.5, 0.75};
  l.ks = {2, 2};
  l.lambdas = {1.0 / 3.0, 1.0 / 3.0};  // lambda_Z * gamma_Z = 0.25
  l.alphas = {0.5, 0.5};

  SUBCASE("zero critics accumulate the geometric error sum") {
    LinearDeltaModel critics = LinearDeltaModel::zeros(l, 1);
    const std::vector<TransitionStep> window(
        3, TransitionStep{0, 0, 1.0, 0, 0, false});
    CHECK(delta_gae(window, critics, fm) == doctest::Approx(1.3125));
  }
  SUBCASE("single transition reduces to the one-step error") {
    LinearDeltaModel critics = LinearDeltaModel::zeros(l, 1);
    critics.theta_z[0][0] = 1.0;
    critics.theta_z[1][0] = 0.5;
    const std::vector<TransitionStep> window = {
        TransitionStep{0, 0, 1.0, 0, 0, false}};
    const double total = 1.5;
    CHECK(delta_gae(window, critics, fm) ==
          doctest::Approx(1.0 + 0.75 * total - total));
  }
  SUBCASE("critics at the exact fixed point give zero advantage") {
    LinearDeltaModel critics = LinearDeltaModel::zeros(l, 1);
    critics.theta_z[0][0] = 2.0;  // Q at 0.5
    critics.theta_z[1][0] = 2.0;  // difference up to 0.75
    const std::vector<TransitionStep> window(
        4, TransitionStep{0, 0, 1.0, 0, 0, false});
    CHECK(delta_gae(window, critics, fm) == doctest::Approx(0.0));
  }
}

TEST_CASE("expected advantage vanishes at the exact decomposition") {
  const MdpSpec mdp = make_random(4, 2, 17);
  const TabularPolicy pi = TabularPolicy::uniform(4, 2);
  TimescaleLadder l = build_doubling_ladder(1, 0.1, 0.9);
  const FeatureMap fm = FeatureMap::one_hot(4, 2);
  const auto w = exact_w(mdp, pi, l.gammas);
  LinearDeltaModel critics = LinearDeltaModel::zeros(l, fm.dim());
  for (int z = 0; z < l.levels(); ++z)
    for (int s = 0; s < 4; ++s)
      for (int a = 0; a < 2; ++a)
        critics.theta_z[static_cast<std::size_t>(z)]
                       [static_cast<std::size_t>(s * 2 + a)] =
            w[static_cast<std::size_t>(z)].at(s, a);
  const double gamma = l.gamma_top();
  for (int s = 0; s < 4; ++s)
    for (int a = 0; a < 2; ++a) {
      double expected = mdp.r(s, a) - critics.q_prefix(fm, l.top(), s, a);
      for (int s2 = 0; s2 < 4; ++s2)
        for (int a2 = 0; a2 < 2; ++a2)
          expected += gamma * mdp.p(s, a, s2) * pi.pi(s2, a2) *
                      critics.q_prefix(fm, l.top(), s2, a2);
      CHECK(std::abs(expected) < 1e-10);
    }
}

TEST_CASE("single-level advantage equals an independently coded estimator") {
  const MdpSpec mdp = make_random(3, 2, 23);
  const TabularPolicy pi = TabularPolicy::uniform(3, 2);
  TimescaleLadder l = build_doubling_ladder(0, 0.1, 0.6);
  const FeatureMap fm = FeatureMap::one_hot(3, 2);
  LinearDeltaModel critics = LinearDeltaModel::zeros(l, fm.dim());
  Rng init(2);
  for (auto& v : critics.theta_z[0]) v = init.uniform(-1.0, 1.0);
  Rng rng(8);
  const Trajectory traj = sample_trajectory(mdp, pi, 0, 0, 24, rng);
  const std::span<const TransitionStep> window(traj.steps);

  const double gamma = l.gammas[0];
  const double lambda = l.lambdas[0];
  double manual = 0.0;
  double weight = 1.0;
  for (const auto& t : traj.steps) {
    const double v = critics.w_hat(fm, 0, t.state, t.action);
    const double vn = critics.w_hat(fm, 0, t.next_state, t.next_action);
    manual += weight * (t.reward + gamma * vn - v);
    weight *= lambda * gamma;
  }
  CHECK(delta_gae(window, critics, fm) ==
        doctest::Approx(manual).epsilon(1e-12));
}

TEST_CASE("critic step") {
  const FeatureMap fm = FeatureMap::one_hot(1, 1);
  TimescaleLadder l;
  l.gammas = {0.5, 0.75};
  l.ks = {2, 2};
  l.lambdas = {0.9, 0.9};
  l.alphas = {1.0, 1.0};

  SUBCASE("no movement at the fixed point") {
    LinearDeltaModel critics = LinearDeltaModel::zeros(l, 1);
    critics.theta_z[0][0] = 2.0;
    critics.theta_z[1][0] = 2.0;
    const std::vector<TransitionStep> window(
        4, TransitionStep{0, 0, 1.0, 0, 0, false});
    critic_step(critics, window, fm);
    CHECK(critics.theta_z[0][0] == doctest::Approx(2.0));
    CHECK(critics.theta_z[1][0] == doctest::Approx(2.0));
  }
  SUBCASE("unit step size writes the return into the cell") {
    LinearDeltaModel critics = LinearDeltaModel::zeros(l, 1);
    const std::vector<TransitionStep> window(
        2, TransitionStep{0, 0, 1.0, 0, 0, false});
    const double g0 = delta_lambda_return(window, critics, fm, 0, 2);
    critic_step(critics, window, fm);
    CHECK(critics.theta_z[0][0] == doctest::Approx(g0));
  }
  SUBCASE("repeated application on a fixed batch descends the loss") {
    TimescaleLadder l2 = l;
    l2.alphas = {0.4, 0.4};
    LinearDeltaModel critics = LinearDeltaModel::zeros(l2, 1);
    const std::vector<TransitionStep> window(
        3, TransitionStep{0, 0, 1.0, 0, 0, false});
    double prev = 1e300;
    for (int i = 0; i < 30; ++i) {
      const auto losses = critic_step(critics, window, fm);
      const double total = losses[0] + losses[1];
      CHECK(total <= prev + 1e-12);
      prev = total;
    }
  }
}

TEST_CASE("actor-critic loop") {
  SUBCASE("no updates before the window fills") {
    const MdpSpec mdp = make_random(3, 2, 31);  // continuing, never flushes
    TimescaleLadder l = build_doubling_ladder(1, 0.1, 0.9);
    ActorCriticOptions opt;
    opt.window = 8;
    opt.total_steps = 7;
    opt.episode_cap = 1000;
    const ActorCriticResult res = run_actor_critic(mdp, l, opt, 3);
    for (double v : res.policy.logits) CHECK(v == 0.0);
    for (const auto& theta : res.critics.theta_z)
      for (double v : theta) CHECK(v == 0.0);
  }
  SUBCASE("frozen actor matches the exact uniform-policy return") {
    const MdpSpec chain = make_chain(5, 1.0, 0.0, 0.1);
    TimescaleLadder l = build_doubling_ladder(2, 0.05, 0.9);
    ActorCriticOptions opt;
    opt.window = 8;
    opt.total_steps = 60000;
    opt.alpha_policy = 0.0;
    opt.episode_cap = 100;
    const ActorCriticResult res = run_actor_critic(chain, l, opt, 12);
    const TabularPolicy uniform = TabularPolicy::uniform(5, 2);
    const double oracle = finite_horizon_return(chain, uniform, 0, 100, 1.0);
    double mean = 0.0;
    for (const auto& ep : res.episodes) mean += ep.ret;
    mean /= static_cast<double>(res.episodes.size());
    double var = 0.0;
    for (const auto& ep : res.episodes) var += (ep.ret - mean) * (ep.ret - mean);
    const double se = std::sqrt(
        var / (static_cast<double>(res.episodes.size()) - 1.0) /
        static_cast<double>(res.episodes.size()));
    CHECK(std::abs(mean - oracle) <= 3.0 * se + 1e-9);
    for (double v : res.policy.logits) CHECK(v == 0.0);
  }
  SUBCASE("impossible value cap triggers the divergence guard") {
    MdpSpec loop = self_loop(1.0);
    // On the self-loop at gamma 0.5 the one-step update multiplies the
    // error by 1 - alpha/2, so alpha = 4.5 oscillates outward.
    TimescaleLadder l = build_doubling_ladder(0, 4.5, 0.0);
    ActorCriticOptions opt;
    opt.window = 1;
    opt.total_steps = 5000;
    opt.episode_cap = 1 << 30;
    const ActorCriticResult res = run_actor_critic(loop, l, opt, 1);
    CHECK(res.diverged);
  }
}
