#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "deltarl/common.hpp"
#include "deltarl/rng.hpp"

namespace deltarl {

// Action-value table, row-major over (state, action).
struct QTable {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> q;

  static QTable zeros(int n_states, int n_actions) {
    return QTable{n_states, n_actions,
                  std::vector<double>(
                      static_cast<std::size_t>(n_states) * n_actions, 0.0)};
  }
  double& at(int s, int a) {
    return q[static_cast<std::size_t>(s) * n_actions + a];
  }
  double at(int s, int a) const {
    return q[static_cast<std::size_t>(s) * n_actions + a];
  }
};

double sup_norm(const QTable& a);
double sup_distance(const QTable& a, const QTable& b);

// Finite MDP: transition tensor P[s][a][s'] (rows sum to 1) and reward
// table r[s][a] with |r| <= 1. Terminal states absorb with zero reward.
struct MdpSpec {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> transition;      // [s][a][s']
  std::vector<double> reward;          // [s][a]
  std::vector<std::uint8_t> terminal;  // per-state flag

  double p(int s, int a, int s2) const {
    return transition[(static_cast<std::size_t>(s) * n_actions + a) *
                          n_states +
                      s2];
  }
  double& p_ref(int s, int a, int s2) {
    return transition[(static_cast<std::size_t>(s) * n_actions + a) *
                          n_states +
                      s2];
  }
  std::span<const double> p_row(int s, int a) const {
    return {transition.data() +
                (static_cast<std::size_t>(s) * n_actions + a) * n_states,
            static_cast<std::size_t>(n_states)};
  }
  double r(int s, int a) const {
    return reward[static_cast<std::size_t>(s) * n_actions + a];
  }
  double& r_ref(int s, int a) {
    return reward[static_cast<std::size_t>(s) * n_actions + a];
  }
  bool is_terminal(int s) const {
    return !terminal.empty() && terminal[static_cast<std::size_t>(s)] != 0;
  }
  std::vector<int> terminal_list() const;
  double max_abs_reward() const;
};

// Throws ConfigError unless rows sum to 1 within 1e-12 with nonnegative
// entries, every |r| <= 1, and terminal states absorb with zero reward.
void check(const MdpSpec& mdp);

struct TabularPolicy {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> probs;  // [s][a]

  static TabularPolicy uniform(int n_states, int n_actions);
  double pi(int s, int a) const {
    return probs[static_cast<std::size_t>(s) * n_actions + a];
  }
  double& pi_ref(int s, int a) {
    return probs[static_cast<std::size_t>(s) * n_actions + a];
  }
  std::span<const double> row(int s) const {
    return {probs.data() + static_cast<std::size_t>(s) * n_actions,
            static_cast<std::size_t>(n_actions)};
  }
};

// Throws ConfigError unless rows are stochastic within 1e-12 and shapes match.
void check(const TabularPolicy& policy, const MdpSpec& mdp);

struct TransitionStep {
  int state = 0;
  int action = 0;
  double reward = 0.0;
  int next_state = 0;
  int next_action = 0;
  bool done = false;  // next_state is terminal
};

struct Trajectory {
  std::vector<TransitionStep> steps;
  std::uint64_t seed = 0;
};

// Deterministic single-action ring: state i moves to (i+1) mod n,
// r[i][0] = reward_vector[i].
MdpSpec make_ring(int n_states, std::span<const double> reward_vector);

// Two-action chain (0 = left, 1 = right). Right moves +1 with probability
// 1-slip and -1 with probability slip; left is mirrored; moves off the left
// end stay in place. The rightmost state is terminal. Rewards are expected
// immediate rewards: r[s][a] = step_reward + goal_reward * P(next is goal).
MdpSpec make_chain(int n_states, double goal_reward, double step_reward,
                   double slip);

// Dense random continuing MDP with rewards in [-1, 1].
MdpSpec make_random(int n_states, int n_actions, std::uint64_t seed);

struct StepResult {
  double reward = 0.0;
  int next_state = 0;
};

StepResult step(const MdpSpec& mdp, int s, int a, Rng& rng);

// Exactly `horizon` chained steps, cut short if a terminal state is entered.
// The first action is forced to `start_action`; later actions follow policy.
Trajectory sample_trajectory(const MdpSpec& mdp, const TabularPolicy& policy,
                             int start_state, int start_action, int horizon,
                             Rng& rng);

// Direct solve of Q = r + gamma * P Pi Q; residual checked against 1e-10.
QTable exact_q(const MdpSpec& mdp, const TabularPolicy& policy, double gamma);

// Difference tables between consecutive discounts: W_0 = Q_{gamma_0},
// W_z = Q_{gamma_z} - Q_{gamma_{z-1}}.
std::vector<QTable> exact_w(const MdpSpec& mdp, const TabularPolicy& policy,
                            std::span<const double> gammas);

// Expected (optionally discounted) return of `policy` from `start_state`
// over `horizon` steps, terminals absorbing with zero reward. Exact DP.
double finite_horizon_return(const MdpSpec& mdp, const TabularPolicy& policy,
                             int start_state, int horizon, double gamma = 1.0);

// Same quantity for the best deterministic policy (finite-horizon backup).
double finite_horizon_optimal_return(const MdpSpec& mdp, int start_state,
                                     int horizon, double gamma = 1.0);

}  // namespace deltarl
