#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "deltarl/tabular.hpp"

namespace deltarl {

enum class PhasedKind { td, delta };

// Synchronous estimator state: every (s, a) is re-estimated once per phase
// from n fresh trajectories against the previous phase's tables.
struct PhasedState {
  PhasedKind kind = PhasedKind::td;
  QTable q_hat;       // kind == td
  DeltaTable w_hat;   // kind == delta
  int phase = 0;
  int n = 0;          // trajectories per (s, a) per phase
};

PhasedState make_phased_td(int n_states, int n_actions, int n);
PhasedState make_phased_delta(const TimescaleLadder& ladder, int n_states,
                              int n_actions, int n);

// sqrt(2 ln(2k / delta) / n): the deviation that n averaged reward samples
// stay within, simultaneously over k steps, with probability 1 - delta.
double hoeffding_eps(int k, double delta, int n);

// One phase of k-step backups averaged over n trajectories per cell.
// Trajectory j for cell (s, a) at phase t draws from
// derive_seed(run_seed, {t, s, a, j}), so equal run seeds couple the
// td and delta estimators through identical samples.
void phased_td_update(PhasedState& state, const MdpSpec& mdp,
                      const TabularPolicy& policy, double gamma, int k,
                      std::uint64_t run_seed);

// Delta version: row 0 is a k_0-step backup at gamma_0; higher rows mix the
// reward-difference sum with bootstraps from the previous phase's prefix
// sums. All rows of a cell share the same n sampled trajectories.
void phased_delta_update(PhasedState& state, const MdpSpec& mdp,
                         const TabularPolicy& policy, std::uint64_t run_seed);

// eps * (1 - gamma^k) / (1 - gamma) + gamma^k * prev_error
double phased_td_bound(double eps, double gamma, int k, double prev_error);

// Ladder analogue: top-level variance term, plus the (nonpositive)
// variance-reduction sum, plus bias carried from the previous phase.
double phased_delta_bound(double eps, const TimescaleLadder& ladder,
                          std::span<const double> prev_errors);

// sum_z (gamma_z^{k_{z+1}} - gamma_z^{k_z}) / (1 - gamma_z) over z < Z;
// nonpositive whenever k is nondecreasing.
double variance_reduction_term(const TimescaleLadder& ladder);

struct ErrorReport {
  double delta_q = 0.0;          // sup |q_hat - oracle| (td kind)
  std::vector<double> delta_w;   // per-level sup errors (delta kind)
  double total = 0.0;            // delta_q, or the sum over levels
  double bound_rhs = 0.0;
  bool holds = true;
};

// Sup-norm errors of the current tables against the exact solves, with the
// phase inequality evaluated against the previous report when given.
ErrorReport measure_errors(const PhasedState& state, const QTable& oracle_q,
                           std::span<const QTable> oracle_w, double eps,
                           double gamma, int k, const ErrorReport* prev);

}  // namespace deltarl
