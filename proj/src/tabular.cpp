#include "deltarl/tabular.hpp"

#include <algorithm>
#include <cmath>

namespace deltarl {

DeltaTable DeltaTable::zeros(const TimescaleLadder& ladder, int n_states,
                             int n_actions) {
  require_valid(ladder);
  DeltaTable dt;
  dt.ladder = ladder;
  dt.n_states = n_states;
  dt.n_actions = n_actions;
  dt.w.assign(static_cast<std::size_t>(ladder.levels()) * n_states * n_actions,
              0.0);
  return dt;
}

namespace {

void require_cell(int s, int a, int n_states, int n_actions) {
  if (s < 0 || s >= n_states || a < 0 || a >= n_actions)
    throw std::out_of_range("state/action out of range");
}

void require_level(const DeltaTable& dt, int z) {
  if (z < 0 || z >= dt.ladder.levels())
    throw std::out_of_range("timescale index out of range");
}

}  // namespace

void baseline_sarsa_step(QTable& q, const TransitionStep& t, double gamma,
                         double alpha) {
  require_cell(t.state, t.action, q.n_states, q.n_actions);
  require_cell(t.next_state, t.next_action, q.n_states, q.n_actions);
  const double target = t.reward + gamma * q.at(t.next_state, t.next_action);
  q.at(t.state, t.action) += alpha * (target - q.at(t.state, t.action));
}

double delta_single_step_target(const DeltaTable& dt, int z,
                                const TransitionStep& t) {
  require_level(dt, z);
  require_cell(t.next_state, t.next_action, dt.n_states, dt.n_actions);
  const auto& g = dt.ladder.gammas;
  if (z == 0)
    return t.reward +
           g[0] * dt.at(0, t.next_state, t.next_action);
  return (g[static_cast<std::size_t>(z)] - g[static_cast<std::size_t>(z - 1)]) *
             dt.q_at(z - 1, t.next_state, t.next_action) +
         g[static_cast<std::size_t>(z)] * dt.at(z, t.next_state, t.next_action);
}

std::vector<double> multi_step_targets(
    const DeltaTable& dt, std::span<const TransitionStep> window) {
  const int levels = dt.ladder.levels();
  const int k_max = dt.ladder.k_top();
  const int len = static_cast<int>(window.size());
  if (len == 0) throw std::invalid_argument("empty window");
  if (len < k_max && !window.back().done)
    throw std::invalid_argument("window shorter than k_Z without terminal");

  std::vector<double> targets(static_cast<std::size_t>(levels), 0.0);
  for (int z = 0; z < levels; ++z) {
    const double gz = dt.ladder.gammas[static_cast<std::size_t>(z)];
    const int kz = dt.ladder.ks[static_cast<std::size_t>(z)];
    const int m = std::min(kz, len);  // absorbed rewards beyond are zero
    const auto& boot = window[static_cast<std::size_t>(m - 1)];
    double g = 0.0;
    if (z == 0) {
      for (int j = 0; j < m; ++j)
        g += pow_int(gz, j) * window[static_cast<std::size_t>(j)].reward;
      g += pow_int(gz, kz) * dt.at(0, boot.next_state, boot.next_action);
    } else {
      const double gp = dt.ladder.gammas[static_cast<std::size_t>(z - 1)];
      for (int j = 1; j < m; ++j)
        g += (pow_int(gz, j) - pow_int(gp, j)) *
             window[static_cast<std::size_t>(j)].reward;
      g += (pow_int(gz, kz) - pow_int(gp, kz)) *
           dt.q_at(z - 1, boot.next_state, boot.next_action);
      g += pow_int(gz, kz) * dt.at(z, boot.next_state, boot.next_action);
    }
    targets[static_cast<std::size_t>(z)] = g;
  }
  return targets;
}

void apply_targets(DeltaTable& dt, int s, int a,
                   std::span<const double> targets) {
  apply_targets(dt, s, a, targets, dt.ladder.alphas);
}

void apply_targets(DeltaTable& dt, int s, int a,
                   std::span<const double> targets,
                   std::span<const double> alphas) {
  require_cell(s, a, dt.n_states, dt.n_actions);
  if (targets.size() != static_cast<std::size_t>(dt.ladder.levels()) ||
      alphas.size() != targets.size())
    throw std::invalid_argument("targets/alphas length must equal Z+1");
  for (int z = 0; z < dt.ladder.levels(); ++z) {
    double& w = dt.at(z, s, a);
    w += alphas[static_cast<std::size_t>(z)] *
         (targets[static_cast<std::size_t>(z)] - w);
  }
}

QTable reconstruct_q(const DeltaTable& dt, int z) {
  require_level(dt, z);
  QTable q = QTable::zeros(dt.n_states, dt.n_actions);
  for (int s = 0; s < dt.n_states; ++s)
    for (int a = 0; a < dt.n_actions; ++a) q.at(s, a) = dt.q_at(z, s, a);
  return q;
}

int greedy_action(const QTable& q, int s) {
  int best = 0;
  for (int a = 1; a < q.n_actions; ++a)
    if (q.at(s, a) > q.at(s, best)) best = a;
  return best;
}

int select_action(const QTable& q, int s, double epsilon, Rng& rng) {
  if (epsilon < 0.0 || epsilon > 1.0)
    throw std::invalid_argument("epsilon must lie in [0, 1]");
  if (s < 0 || s >= q.n_states) throw std::out_of_range("state out of range");
  if (epsilon > 0.0 && rng.uniform() < epsilon)
    return rng.uniform_int(q.n_actions);
  return greedy_action(q, s);
}

DeltaSarsaLearner::DeltaSarsaLearner(const TimescaleLadder& ladder,
                                     int n_states, int n_actions,
                                     bool multi_step)
    : table_(DeltaTable::zeros(ladder, n_states, n_actions)),
      visits_(static_cast<std::size_t>(n_states) * n_actions, 0),
      multi_step_(multi_step) {}

void DeltaSarsaLearner::apply_at(int s, int a,
                                 std::span<const double> targets) {
  if (visit_decay_) {
    long& v = visits_[static_cast<std::size_t>(s) * table_.n_actions + a];
    const double alpha = 1.0 / (1.0 + static_cast<double>(v));
    ++v;
    std::vector<double> alphas(targets.size(), alpha);
    apply_targets(table_, s, a, targets, alphas);
  } else {
    apply_targets(table_, s, a, targets);
  }
}

void DeltaSarsaLearner::update_from_window() {
  std::vector<TransitionStep> scratch;
  std::span<const TransitionStep> view;
  if (mode_ == BootstrapMode::greedy) {
    scratch.assign(window_.begin(), window_.end());
    const QTable q = top_q();
    for (auto& t : scratch) t.next_action = greedy_action(q, t.next_state);
    view = scratch;
  } else {
    scratch.assign(window_.begin(), window_.end());
    view = scratch;
  }
  const auto& head = view.front();
  if (multi_step_) {
    const auto targets = multi_step_targets(table_, view);
    apply_at(head.state, head.action, targets);
  } else {
    std::vector<double> targets(static_cast<std::size_t>(table_.ladder.levels()));
    for (int z = 0; z < table_.ladder.levels(); ++z)
      targets[static_cast<std::size_t>(z)] =
          delta_single_step_target(table_, z, head);
    apply_at(head.state, head.action, targets);
  }
}

void DeltaSarsaLearner::observe(const TransitionStep& t) {
  window_.push_back(t);
  const std::size_t need =
      multi_step_ ? static_cast<std::size_t>(table_.ladder.k_top()) : 1;
  if (window_.size() == need) {
    update_from_window();
    window_.pop_front();
  }
  if (t.done) flush();
}

void DeltaSarsaLearner::flush() {
  if (window_.empty()) return;
  if (!window_.back().done) {
    // Cut by the episode cap or end of stream: no terminal to bootstrap
    // against, so the unfinished windows cannot form valid targets.
    window_.clear();
    return;
  }
  while (!window_.empty()) {
    update_from_window();
    window_.pop_front();
  }
}

BaselineSarsaLearner::BaselineSarsaLearner(int n_states, int n_actions,
                                           double gamma, double alpha)
    : q_(QTable::zeros(n_states, n_actions)),
      gamma_(gamma),
      alpha_(alpha),
      visits_(static_cast<std::size_t>(n_states) * n_actions, 0) {}

void BaselineSarsaLearner::observe(const TransitionStep& t) {
  TransitionStep u = t;
  if (mode_ == BootstrapMode::greedy)
    u.next_action = greedy_action(q_, u.next_state);
  double alpha = alpha_;
  if (visit_decay_) {
    long& v = visits_[static_cast<std::size_t>(u.state) * q_.n_actions +
                      u.action];
    alpha = 1.0 / (1.0 + static_cast<double>(v));
    ++v;
  }
  baseline_sarsa_step(q_, u, gamma_, alpha);
}

}  // namespace deltarl
