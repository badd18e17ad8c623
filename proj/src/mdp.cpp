#include "deltarl/mdp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>

namespace deltarl {

namespace {

std::string cell_name(int s, int a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "(s=%d, a=%d)", s, a);
  return buf;
}

void require_state_action(const MdpSpec& mdp, int s, int a) {
  if (s < 0 || s >= mdp.n_states || a < 0 || a >= mdp.n_actions)
    throw std::out_of_range("state/action out of range " + cell_name(s, a));
}

}  // namespace

double sup_norm(const QTable& a) {
  double m = 0.0;
  for (double v : a.q) m = std::max(m, std::abs(v));
  return m;
}

double sup_distance(const QTable& a, const QTable& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.q.size(); ++i)
    m = std::max(m, std::abs(a.q[i] - b.q[i]));
  return m;
}

std::vector<int> MdpSpec::terminal_list() const {
  std::vector<int> ids;
  for (int s = 0; s < n_states; ++s)
    if (is_terminal(s)) ids.push_back(s);
  return ids;
}

double MdpSpec::max_abs_reward() const {
  double m = 0.0;
  for (double v : reward) m = std::max(m, std::abs(v));
  return m;
}

void check(const MdpSpec& mdp) {
  if (mdp.n_states < 1 || mdp.n_actions < 1)
    throw ConfigError("mdp needs at least one state and one action");
  const std::size_t sa =
      static_cast<std::size_t>(mdp.n_states) * mdp.n_actions;
  if (mdp.transition.size() != sa * mdp.n_states)
    throw ConfigError("transition tensor has wrong size");
  if (mdp.reward.size() != sa) throw ConfigError("reward table has wrong size");
  if (!mdp.terminal.empty() &&
      mdp.terminal.size() != static_cast<std::size_t>(mdp.n_states))
    throw ConfigError("terminal flag vector has wrong size");
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      double sum = 0.0;
      for (int s2 = 0; s2 < mdp.n_states; ++s2) {
        double p = mdp.p(s, a, s2);
        if (p < 0.0)
          throw ConfigError("negative transition probability at " +
                            cell_name(s, a));
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-12)
        throw ConfigError("transition row does not sum to 1 at " +
                          cell_name(s, a));
      if (std::abs(mdp.r(s, a)) > 1.0 + 1e-12)
        throw ConfigError("reward outside [-1, 1] at " + cell_name(s, a));
      if (mdp.is_terminal(s)) {
        if (mdp.r(s, a) != 0.0)
          throw ConfigError("terminal state has nonzero reward at " +
                            cell_name(s, a));
        if (std::abs(mdp.p(s, a, s) - 1.0) > 1e-12)
          throw ConfigError("terminal state is not absorbing at " +
                            cell_name(s, a));
      }
    }
  }
}

TabularPolicy TabularPolicy::uniform(int n_states, int n_actions) {
  TabularPolicy p{n_states, n_actions,
                  std::vector<double>(
                      static_cast<std::size_t>(n_states) * n_actions,
                      1.0 / n_actions)};
  return p;
}

void check(const TabularPolicy& policy, const MdpSpec& mdp) {
  if (policy.n_states != mdp.n_states || policy.n_actions != mdp.n_actions)
    throw ConfigError("policy shape does not match mdp");
  for (int s = 0; s < policy.n_states; ++s) {
    double sum = 0.0;
    for (int a = 0; a < policy.n_actions; ++a) {
      double p = policy.pi(s, a);
      if (p < 0.0) throw ConfigError("negative policy probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw ConfigError("policy row does not sum to 1 at state " +
                        std::to_string(s));
  }
}

MdpSpec make_ring(int n_states, std::span<const double> reward_vector) {
  if (n_states < 2) throw ConfigError("ring needs at least 2 states");
  if (reward_vector.size() != static_cast<std::size_t>(n_states))
    throw ConfigError("ring reward vector length must equal n_states");
  MdpSpec mdp;
  mdp.n_states = n_states;
  mdp.n_actions = 1;
  mdp.transition.assign(static_cast<std::size_t>(n_states) * n_states, 0.0);
  mdp.reward.assign(static_cast<std::size_t>(n_states), 0.0);
  for (int s = 0; s < n_states; ++s) {
    mdp.p_ref(s, 0, (s + 1) % n_states) = 1.0;
    mdp.r_ref(s, 0) = reward_vector[static_cast<std::size_t>(s)];
  }
  check(mdp);
  return mdp;
}

MdpSpec make_chain(int n_states, double goal_reward, double step_reward,
                   double slip) {
  if (n_states < 2) throw ConfigError("chain needs at least 2 states");
  if (slip < 0.0 || slip > 0.5)
    throw ConfigError("chain slip must lie in [0, 0.5]");
  const int goal = n_states - 1;
  MdpSpec mdp;
  mdp.n_states = n_states;
  mdp.n_actions = 2;
  mdp.transition.assign(
      static_cast<std::size_t>(n_states) * 2 * n_states, 0.0);
  mdp.reward.assign(static_cast<std::size_t>(n_states) * 2, 0.0);
  mdp.terminal.assign(static_cast<std::size_t>(n_states), 0);
  mdp.terminal[static_cast<std::size_t>(goal)] = 1;
  for (int s = 0; s < n_states; ++s) {
    if (s == goal) {
      mdp.p_ref(s, 0, s) = 1.0;
      mdp.p_ref(s, 1, s) = 1.0;
      continue;
    }
    for (int a = 0; a < 2; ++a) {
      const double p_fwd = (a == 1) ? 1.0 - slip : slip;
      const int fwd = std::min(s + 1, n_states - 1);
      const int back = std::max(s - 1, 0);
      mdp.p_ref(s, a, fwd) += p_fwd;
      mdp.p_ref(s, a, back) += 1.0 - p_fwd;
      mdp.r_ref(s, a) = step_reward + goal_reward * mdp.p(s, a, goal);
    }
  }
  check(mdp);
  return mdp;
}

MdpSpec make_random(int n_states, int n_actions, std::uint64_t seed) {
  if (n_states < 1 || n_actions < 1)
    throw ConfigError("random mdp needs at least one state and action");
  Rng rng(derive_seed(seed, {0x6d6470}));
  MdpSpec mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.transition.assign(
      static_cast<std::size_t>(n_states) * n_actions * n_states, 0.0);
  mdp.reward.assign(static_cast<std::size_t>(n_states) * n_actions, 0.0);
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      double sum = 0.0;
      std::vector<double> row(static_cast<std::size_t>(n_states));
      for (int s2 = 0; s2 < n_states; ++s2) {
        row[static_cast<std::size_t>(s2)] = -std::log(1.0 - rng.uniform());
        sum += row[static_cast<std::size_t>(s2)];
      }
      for (int s2 = 0; s2 < n_states; ++s2)
        mdp.p_ref(s, a, s2) = row[static_cast<std::size_t>(s2)] / sum;
      mdp.r_ref(s, a) = rng.uniform(-1.0, 1.0);
    }
  }
  check(mdp);
  return mdp;
}

StepResult step(const MdpSpec& mdp, int s, int a, Rng& rng) {
  require_state_action(mdp, s, a);
  const int next = rng.categorical(mdp.p_row(s, a));
  return StepResult{mdp.r(s, a), next};
}

Trajectory sample_trajectory(const MdpSpec& mdp, const TabularPolicy& policy,
                             int start_state, int start_action, int horizon,
                             Rng& rng) {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  require_state_action(mdp, start_state, start_action);
  Trajectory traj;
  traj.steps.reserve(static_cast<std::size_t>(horizon));
  int s = start_state;
  int a = start_action;
  for (int t = 0; t < horizon; ++t) {
    const auto [r, s2] = step(mdp, s, a, rng);
    const int a2 = rng.categorical(policy.row(s2));
    const bool done = mdp.is_terminal(s2);
    traj.steps.push_back(TransitionStep{s, a, r, s2, a2, done});
    if (done) break;
    s = s2;
    a = a2;
  }
  return traj;
}

namespace {

// Row-stochastic state-action operator induced by the policy:
// B[(s,a),(s',a')] = P[s][a][s'] * pi(a'|s').
Eigen::MatrixXd policy_operator(const MdpSpec& mdp,
                                const TabularPolicy& policy) {
  const int sa = mdp.n_states * mdp.n_actions;
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(sa, sa);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      for (int s2 = 0; s2 < mdp.n_states; ++s2)
        for (int a2 = 0; a2 < mdp.n_actions; ++a2)
          b(s * mdp.n_actions + a, s2 * mdp.n_actions + a2) =
              mdp.p(s, a, s2) * policy.pi(s2, a2);
  return b;
}

}  // namespace

QTable exact_q(const MdpSpec& mdp, const TabularPolicy& policy, double gamma) {
  if (gamma < 0.0 || gamma >= 1.0)
    throw std::invalid_argument("exact_q needs 0 <= gamma < 1");
  check(policy, mdp);
  const int sa = mdp.n_states * mdp.n_actions;
  const Eigen::MatrixXd b = policy_operator(mdp, policy);
  const Eigen::MatrixXd m =
      Eigen::MatrixXd::Identity(sa, sa) - gamma * b;
  Eigen::VectorXd r(sa);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      r(s * mdp.n_actions + a) = mdp.r(s, a);
  const Eigen::VectorXd q = m.partialPivLu().solve(r);
  const double residual = (m * q - r).lpNorm<Eigen::Infinity>();
  if (residual > 1e-10)
    throw NumericalError("exact_q residual " + std::to_string(residual) +
                         " exceeds 1e-10");
  QTable out = QTable::zeros(mdp.n_states, mdp.n_actions);
  for (int i = 0; i < sa; ++i) out.q[static_cast<std::size_t>(i)] = q(i);
  return out;
}

std::vector<QTable> exact_w(const MdpSpec& mdp, const TabularPolicy& policy,
                            std::span<const double> gammas) {
  std::vector<QTable> w;
  w.reserve(gammas.size());
  QTable prev;
  for (std::size_t z = 0; z < gammas.size(); ++z) {
    QTable q = exact_q(mdp, policy, gammas[z]);
    if (z == 0) {
      w.push_back(q);
    } else {
      QTable diff = q;
      for (std::size_t i = 0; i < diff.q.size(); ++i) diff.q[i] -= prev.q[i];
      w.push_back(std::move(diff));
    }
    prev = std::move(q);
  }
  return w;
}

double finite_horizon_return(const MdpSpec& mdp, const TabularPolicy& policy,
                             int start_state, int horizon, double gamma) {
  check(policy, mdp);
  if (start_state < 0 || start_state >= mdp.n_states)
    throw std::out_of_range("start state out of range");
  std::vector<double> v(static_cast<std::size_t>(mdp.n_states), 0.0);
  std::vector<double> next(v.size(), 0.0);
  for (int t = 0; t < horizon; ++t) {
    for (int s = 0; s < mdp.n_states; ++s) {
      if (mdp.is_terminal(s)) {
        next[static_cast<std::size_t>(s)] = 0.0;
        continue;
      }
      double acc = 0.0;
      for (int a = 0; a < mdp.n_actions; ++a) {
        double exp_next = 0.0;
        for (int s2 = 0; s2 < mdp.n_states; ++s2)
          exp_next += mdp.p(s, a, s2) * v[static_cast<std::size_t>(s2)];
        acc += policy.pi(s, a) * (mdp.r(s, a) + gamma * exp_next);
      }
      next[static_cast<std::size_t>(s)] = acc;
    }
    std::swap(v, next);
  }
  return v[static_cast<std::size_t>(start_state)];
}

double finite_horizon_optimal_return(const MdpSpec& mdp, int start_state,
                                     int horizon, double gamma) {
  if (start_state < 0 || start_state >= mdp.n_states)
    throw std::out_of_range("start state out of range");
  std::vector<double> v(static_cast<std::size_t>(mdp.n_states), 0.0);
  std::vector<double> next(v.size(), 0.0);
  for (int t = 0; t < horizon; ++t) {
    for (int s = 0; s < mdp.n_states; ++s) {
      if (mdp.is_terminal(s)) {
        next[static_cast<std::size_t>(s)] = 0.0;
        continue;
      }
      double best = -1e300;
      for (int a = 0; a < mdp.n_actions; ++a) {
        double exp_next = 0.0;
        for (int s2 = 0; s2 < mdp.n_states; ++s2)
          exp_next += mdp.p(s, a, s2) * v[static_cast<std::size_t>(s2)];
        best = std::max(best, mdp.r(s, a) + gamma * exp_next);
      }
      next[static_cast<std::size_t>(s)] = best;
    }
    std::swap(v, next);
  }
  return v[static_cast<std::size_t>(start_state)];
}

}  // namespace deltarl
