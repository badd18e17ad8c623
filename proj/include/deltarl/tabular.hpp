#pragma once

#include <deque>
#include <span>
#include <vector>

#include "deltarl/ladder.hpp"
#include "deltarl/mdp.hpp"

namespace deltarl {

// Per-timescale difference tables W[z][s][a]. Prefix sums over z
// reconstruct the action-value estimate at each discount of the ladder.
struct DeltaTable {
  TimescaleLadder ladder;
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> w;  // [z][s][a]

  static DeltaTable zeros(const TimescaleLadder& ladder, int n_states,
                          int n_actions);
  double& at(int z, int s, int a) {
    return w[(static_cast<std::size_t>(z) * n_states + s) * n_actions + a];
  }
  double at(int z, int s, int a) const {
    return w[(static_cast<std::size_t>(z) * n_states + s) * n_actions + a];
  }
  // Sum of W[0..z] at (s, a).
  double q_at(int z, int s, int a) const {
    double acc = 0.0;
    for (int u = 0; u <= z; ++u) acc += at(u, s, a);
    return acc;
  }
};

// Q(s,a) += alpha * [r + gamma * Q(s',a') - Q(s,a)]; no other cell moves.
void baseline_sarsa_step(QTable& q, const TransitionStep& t, double gamma,
                         double alpha);

// One-step bootstrap target for W_z. Row 0 is a plain one-step target at
// gamma_0; rows z >= 1 carry no direct reward term: the reward cancels in
// the difference of the two one-step backups.
double delta_single_step_target(const DeltaTable& dt, int z,
                                const TransitionStep& t);

// k_z-step targets G^0..G^Z for the window starting at (window[0].state,
// window[0].action). Requires ladder.k_top() chained steps unless the
// window was cut short by a terminal transition (terminal rows stay zero,
// which is exactly the "bootstrap with 0" truncation rule).
std::vector<double> multi_step_targets(const DeltaTable& dt,
                                       std::span<const TransitionStep> window);

// W_z(s,a) += alpha_z * (G^z - W_z(s,a)) with the ladder's alphas.
void apply_targets(DeltaTable& dt, int s, int a,
                   std::span<const double> targets);
// Same with explicit per-level step sizes (used by decay schedules).
void apply_targets(DeltaTable& dt, int s, int a,
                   std::span<const double> targets,
                   std::span<const double> alphas);

// Q[s][a] = sum of W[0..z][s][a].
QTable reconstruct_q(const DeltaTable& dt, int z);

// Greedy in Q(s, .), ties broken toward the lowest action id.
int greedy_action(const QTable& q, int s);

// Epsilon-greedy; the exploration branch draws uniformly over all actions.
int select_action(const QTable& q, int s, double epsilon, Rng& rng);

enum class BootstrapMode {
  on_policy,  // bootstrap on the action actually taken next
  greedy,     // bootstrap on argmax of the reconstructed top-level Q
};

// Online learner over the delta tables: either one-step targets applied
// immediately, or k_z-step targets applied once the window behind a cell
// is complete. Terminal transitions flush the window with truncated
// targets. Optional 1/(1+visits) step-size decay, shared across levels.
class DeltaSarsaLearner {
 public:
  DeltaSarsaLearner(const TimescaleLadder& ladder, int n_states, int n_actions,
                    bool multi_step);

  void set_visit_decay(bool on) { visit_decay_ = on; }
  void set_bootstrap_mode(BootstrapMode m) { mode_ = m; }

  void observe(const TransitionStep& t);
  void flush();

  const DeltaTable& table() const { return table_; }
  QTable top_q() const { return reconstruct_q(table_, table_.ladder.top()); }

 private:
  void update_from_window();
  void apply_at(int s, int a, std::span<const double> targets);

  DeltaTable table_;
  std::deque<TransitionStep> window_;
  std::vector<long> visits_;
  bool multi_step_ = false;
  bool visit_decay_ = false;
  BootstrapMode mode_ = BootstrapMode::on_policy;
};

// Plain one-step SARSA at a single discount, same knobs as above.
class BaselineSarsaLearner {
 public:
  BaselineSarsaLearner(int n_states, int n_actions, double gamma, double alpha);

  void set_visit_decay(bool on) { visit_decay_ = on; }
  void set_bootstrap_mode(BootstrapMode m) { mode_ = m; }

  void observe(const TransitionStep& t);
  const QTable& table() const { return q_; }

 private:
  QTable q_;
  double gamma_;
  double alpha_;
  std::vector<long> visits_;
  bool visit_decay_ = false;
  BootstrapMode mode_ = BootstrapMode::on_policy;
};

}  // namespace deltarl
