#include "deltarl/phased.hpp"

#include <cmath>
#include <limits>

namespace deltarl {

PhasedState make_phased_td(int n_states, int n_actions, int n) {
  if (n < 1) throw ConfigError("phased estimation needs n >= 1");
  PhasedState st;
  st.kind = PhasedKind::td;
  st.q_hat = QTable::zeros(n_states, n_actions);
  st.n = n;
  return st;
}

PhasedState make_phased_delta(const TimescaleLadder& ladder, int n_states,
                              int n_actions, int n) {
  if (n < 1) throw ConfigError("phased estimation needs n >= 1");
  PhasedState st;
  st.kind = PhasedKind::delta;
  st.w_hat = DeltaTable::zeros(ladder, n_states, n_actions);
  st.n = n;
  return st;
}

double hoeffding_eps(int k, double delta, int n) {
  if (k < 1) throw std::invalid_argument("hoeffding_eps needs k >= 1");
  if (n < 1) throw std::invalid_argument("hoeffding_eps needs n >= 1");
  if (delta <= 0.0 || delta >= 1.0)
    throw std::invalid_argument("hoeffding_eps needs 0 < delta < 1");
  return std::sqrt(2.0 * std::log(2.0 * k / delta) / n);
}

void phased_td_update(PhasedState& state, const MdpSpec& mdp,
                      const TabularPolicy& policy, double gamma, int k,
                      std::uint64_t run_seed) {
  if (state.kind != PhasedKind::td)
    throw std::invalid_argument("state does not hold a td estimator");
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  const QTable prev = state.q_hat;
  const int t = state.phase;
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      double acc = 0.0;
      for (int j = 0; j < state.n; ++j) {
        Rng rng(derive_seed(run_seed,
                            {static_cast<std::uint64_t>(t),
                             static_cast<std::uint64_t>(s),
                             static_cast<std::uint64_t>(a),
                             static_cast<std::uint64_t>(j)}));
        const Trajectory traj =
            sample_trajectory(mdp, policy, s, a, k, rng);
        double g = 0.0;
        const int len = static_cast<int>(traj.steps.size());
        for (int i = 0; i < len; ++i)
          g += pow_int(gamma, i) * traj.steps[static_cast<std::size_t>(i)].reward;
        const auto& last = traj.steps.back();
        g += pow_int(gamma, k) * prev.at(last.next_state, last.next_action);
        acc += g;
      }
      state.q_hat.at(s, a) = acc / state.n;
    }
  }
  ++state.phase;
}

void phased_delta_update(PhasedState& state, const MdpSpec& mdp,
                         const TabularPolicy& policy, std::uint64_t run_seed) {
  if (state.kind != PhasedKind::delta)
    throw std::invalid_argument("state does not hold a delta estimator");
  const DeltaTable prev = state.w_hat;
  const TimescaleLadder& ladder = prev.ladder;
  require_valid(ladder);
  const int levels = ladder.levels();
  const int k_max = ladder.k_top();
  const int t = state.phase;
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      std::vector<double> acc(static_cast<std::size_t>(levels), 0.0);
      for (int j = 0; j < state.n; ++j) {
        Rng rng(derive_seed(run_seed,
                            {static_cast<std::uint64_t>(t),
                             static_cast<std::uint64_t>(s),
                             static_cast<std::uint64_t>(a),
                             static_cast<std::uint64_t>(j)}));
        const Trajectory traj =
            sample_trajectory(mdp, policy, s, a, k_max, rng);
        const int len = static_cast<int>(traj.steps.size());
        for (int z = 0; z < levels; ++z) {
          const double gz = ladder.gammas[static_cast<std::size_t>(z)];
          const int kz = ladder.ks[static_cast<std::size_t>(z)];
          const int m = std::min(kz, len);
          const auto& boot = traj.steps[static_cast<std::size_t>(m - 1)];
          double g = 0.0;
          if (z == 0) {
            for (int i = 0; i < m; ++i)
              g += pow_int(gz, i) *
                   traj.steps[static_cast<std::size_t>(i)].reward;
            g += pow_int(gz, kz) *
                 prev.at(0, boot.next_state, boot.next_action);
          } else {
            const double gp = ladder.gammas[static_cast<std::size_t>(z - 1)];
            for (int i = 1; i < m; ++i)
              g += (pow_int(gz, i) - pow_int(gp, i)) *
                   traj.steps[static_cast<std::size_t>(i)].reward;
            g += (pow_int(gz, kz) - pow_int(gp, kz)) *
                 prev.q_at(z - 1, boot.next_state, boot.next_action);
            g += pow_int(gz, kz) *
                 prev.at(z, boot.next_state, boot.next_action);
          }
          acc[static_cast<std::size_t>(z)] += g;
        }
      }
      for (int z = 0; z < levels; ++z)
        state.w_hat.at(z, s, a) = acc[static_cast<std::size_t>(z)] / state.n;
    }
  }
  ++state.phase;
}

double phased_td_bound(double eps, double gamma, int k, double prev_error) {
  return eps * (1.0 - pow_int(gamma, k)) / (1.0 - gamma) +
         pow_int(gamma, k) * prev_error;
}

double variance_reduction_term(const TimescaleLadder& ladder) {
  double acc = 0.0;
  for (int z = 0; z + 1 < ladder.levels(); ++z) {
    const double gz = ladder.gammas[static_cast<std::size_t>(z)];
    acc += (pow_int(gz, ladder.ks[static_cast<std::size_t>(z + 1)]) -
            pow_int(gz, ladder.ks[static_cast<std::size_t>(z)])) /
           (1.0 - gz);
  }
  return acc;
}

double phased_delta_bound(double eps, const TimescaleLadder& ladder,
                          std::span<const double> prev_errors) {
  require_valid(ladder);
  if (prev_errors.size() != static_cast<std::size_t>(ladder.levels()))
    throw std::invalid_argument("prev_errors length must equal Z+1");
  const double gamma = ladder.gamma_top();
  const int k = ladder.k_top();
  double rhs = eps * (1.0 - pow_int(gamma, k)) / (1.0 - gamma);
  rhs += eps * variance_reduction_term(ladder);
  double prefix = 0.0;
  for (int z = 0; z + 1 < ladder.levels(); ++z) {
    const double gz = ladder.gammas[static_cast<std::size_t>(z)];
    prefix += prev_errors[static_cast<std::size_t>(z)];
    rhs += (pow_int(gz, ladder.ks[static_cast<std::size_t>(z)]) -
            pow_int(gz, ladder.ks[static_cast<std::size_t>(z + 1)])) *
           prefix;
  }
  double total_prev = 0.0;
  for (double e : prev_errors) total_prev += e;
  rhs += pow_int(gamma, k) * total_prev;
  return rhs;
}

ErrorReport measure_errors(const PhasedState& state, const QTable& oracle_q,
                           std::span<const QTable> oracle_w, double eps,
                           double gamma, int k, const ErrorReport* prev) {
  ErrorReport rep;
  if (state.kind == PhasedKind::td) {
    rep.delta_q = sup_distance(state.q_hat, oracle_q);
    rep.total = rep.delta_q;
    if (prev) {
      rep.bound_rhs = phased_td_bound(eps, gamma, k, prev->delta_q);
      rep.holds = rep.total <= rep.bound_rhs;
    } else {
      rep.bound_rhs = std::numeric_limits<double>::infinity();
    }
  } else {
    const TimescaleLadder& ladder = state.w_hat.ladder;
    if (oracle_w.size() != static_cast<std::size_t>(ladder.levels()))
      throw std::invalid_argument("oracle_w length must equal Z+1");
    rep.delta_w.resize(static_cast<std::size_t>(ladder.levels()), 0.0);
    for (int z = 0; z < ladder.levels(); ++z) {
      double m = 0.0;
      for (int s = 0; s < state.w_hat.n_states; ++s)
        for (int a = 0; a < state.w_hat.n_actions; ++a)
          m = std::max(m, std::abs(state.w_hat.at(z, s, a) -
                                   oracle_w[static_cast<std::size_t>(z)].at(s, a)));
      rep.delta_w[static_cast<std::size_t>(z)] = m;
      rep.total += m;
    }
    if (prev) {
      rep.bound_rhs = phased_delta_bound(eps, ladder, prev->delta_w);
      rep.holds = rep.total <= rep.bound_rhs;
    } else {
      rep.bound_rhs = std::numeric_limits<double>::infinity();
    }
  }
  return rep;
}

}  // namespace deltarl
