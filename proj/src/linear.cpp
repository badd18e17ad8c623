#include "deltarl/linear.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace deltarl {

FeatureMap FeatureMap::one_hot(int n_states, int n_actions) {
  FeatureMap fm;
  fm.n_states_ = n_states;
  fm.n_actions_ = n_actions;
  fm.dim_ = n_states * n_actions;
  fm.rows_.assign(static_cast<std::size_t>(fm.dim_) * fm.dim_, 0.0);
  for (int i = 0; i < fm.dim_; ++i)
    fm.rows_[static_cast<std::size_t>(i) * fm.dim_ + i] = 1.0;
  return fm;
}

FeatureMap FeatureMap::random(int n_states, int n_actions, int dim,
                              std::uint64_t seed) {
  FeatureMap fm;
  fm.n_states_ = n_states;
  fm.n_actions_ = n_actions;
  fm.dim_ = dim;
  fm.rows_.resize(static_cast<std::size_t>(n_states) * n_actions * dim);
  Rng rng(derive_seed(seed, {0x666561}));
  for (auto& v : fm.rows_) v = rng.uniform(-1.0, 1.0);
  return fm;
}

LinearDeltaModel LinearDeltaModel::zeros(const TimescaleLadder& ladder,
                                         int dim) {
  require_valid(ladder);
  LinearDeltaModel m;
  m.ladder = ladder;
  m.dim = dim;
  m.theta_z.assign(static_cast<std::size_t>(ladder.levels()),
                   std::vector<double>(static_cast<std::size_t>(dim), 0.0));
  m.theta_mono.assign(static_cast<std::size_t>(dim), 0.0);
  return m;
}

double td_error(const TransitionStep& t, const QFn& qhat, double gamma) {
  const double boot = t.done ? 0.0 : qhat(t.next_state, t.next_action);
  return t.reward + gamma * boot - qhat(t.state, t.action);
}

double lambda_return(std::span<const TransitionStep> window, const QFn& qhat,
                     double gamma, double lambda, int T) {
  if (T < 1 || window.size() < static_cast<std::size_t>(T))
    throw std::invalid_argument("window must hold at least T steps");
  double g = qhat(window[0].state, window[0].action);
  double w = 1.0;
  for (int i = 0; i < T; ++i) {
    g += w * td_error(window[static_cast<std::size_t>(i)], qhat, gamma);
    if (window[static_cast<std::size_t>(i)].done) break;
    w *= lambda * gamma;
  }
  return g;
}

double delta_td_error(const LinearDeltaModel& model, const FeatureMap& fm,
                      int z, const TransitionStep& t) {
  const auto& g = model.ladder.gammas;
  if (z == 0) {
    const double boot =
        t.done ? 0.0 : model.w_hat(fm, 0, t.next_state, t.next_action);
    return t.reward + g[0] * boot - model.w_hat(fm, 0, t.state, t.action);
  }
  double boot = 0.0;
  if (!t.done) {
    boot = (g[static_cast<std::size_t>(z)] -
            g[static_cast<std::size_t>(z - 1)]) *
               model.q_prefix(fm, z - 1, t.next_state, t.next_action) +
           g[static_cast<std::size_t>(z)] *
               model.w_hat(fm, z, t.next_state, t.next_action);
  }
  return boot - model.w_hat(fm, z, t.state, t.action);
}

double delta_lambda_return(std::span<const TransitionStep> window,
                           const LinearDeltaModel& model, const FeatureMap& fm,
                           int z, int T) {
  if (z < 0 || z >= model.ladder.levels())
    throw std::out_of_range("timescale index out of range");
  if (T < 1 || window.size() < static_cast<std::size_t>(T))
    throw std::invalid_argument("window must hold at least T steps");
  const double gamma = model.ladder.gammas[static_cast<std::size_t>(z)];
  const double lambda = model.ladder.lambdas[static_cast<std::size_t>(z)];
  double g = model.w_hat(fm, z, window[0].state, window[0].action);
  double w = 1.0;
  for (int i = 0; i < T; ++i) {
    g += w * delta_td_error(model, fm, z, window[static_cast<std::size_t>(i)]);
    if (window[static_cast<std::size_t>(i)].done) break;
    w *= lambda * gamma;
  }
  return g;
}

void tdlambda_update(LinearDeltaModel& model,
                     std::span<const TransitionStep> window,
                     const FeatureMap& fm, double gamma, double lambda,
                     double alpha, int T) {
  const auto& head = window[0];
  const QFn qh = [&](int s, int a) { return model.q_mono(fm, s, a); };
  const double g = lambda_return(window, qh, gamma, lambda, T);
  const double err = g - model.q_mono(fm, head.state, head.action);
  const auto phi = fm.row(head.state, head.action);
  for (int i = 0; i < model.dim; ++i)
    model.theta_mono[static_cast<std::size_t>(i)] +=
        alpha * err * phi[static_cast<std::size_t>(i)];
}

void tdlambda_delta_update(LinearDeltaModel& model,
                           std::span<const TransitionStep> window,
                           const FeatureMap& fm,
                           std::span<const double> alphas, int T) {
  if (alphas.size() != static_cast<std::size_t>(model.ladder.levels()))
    throw std::invalid_argument("alphas length must equal Z+1");
  const auto& head = window[0];
  const auto phi = fm.row(head.state, head.action);
  const int levels = model.ladder.levels();
  std::vector<double> errs(static_cast<std::size_t>(levels));
  for (int z = 0; z < levels; ++z)
    errs[static_cast<std::size_t>(z)] =
        delta_lambda_return(window, model, fm, z, T) -
        model.w_hat(fm, z, head.state, head.action);
  for (int z = 0; z < levels; ++z) {
    auto& theta = model.theta_z[static_cast<std::size_t>(z)];
    const double step = alphas[static_cast<std::size_t>(z)] *
                        errs[static_cast<std::size_t>(z)];
    for (int i = 0; i < model.dim; ++i)
      theta[static_cast<std::size_t>(i)] +=
          step * phi[static_cast<std::size_t>(i)];
  }
}

EquivalenceReport check_equivalence(const MdpSpec& mdp,
                                    const TabularPolicy& policy,
                                    const TimescaleLadder& ladder, long steps,
                                    double alpha, double lambda_gamma,
                                    const FeatureMap& fm, std::uint64_t seed,
                                    int truncation) {
  require_valid(ladder);
  check(policy, mdp);
  if (!mdp.terminal_list().empty())
    throw ConfigError("equivalence check expects a continuing MDP");
  if (alpha <= 0.0) throw ConfigError("equivalence check needs alpha > 0");
  if (lambda_gamma < 0.0 || lambda_gamma >= 1.0)
    throw ConfigError("equivalence check needs 0 <= lambda*gamma < 1");
  for (int z = 0; z < ladder.levels(); ++z) {
    const double lg = ladder.lambdas[static_cast<std::size_t>(z)] *
                      ladder.gammas[static_cast<std::size_t>(z)];
    if (std::abs(lg - lambda_gamma) > 1e-12)
      throw ConfigError(
          "equivalence check needs lambda_z * gamma_z equal at every level");
  }
  const double gamma = ladder.gamma_top();
  const int T = truncation > 0 ? truncation : 4 * horizon_k(gamma);
  const int levels = ladder.levels();

  LinearDeltaModel model = LinearDeltaModel::zeros(ladder, fm.dim());

  Rng rng(derive_seed(seed, {0x657176}));
  const int start_action = rng.categorical(policy.row(0));
  const Trajectory stream = sample_trajectory(
      mdp, policy, 0, start_action, static_cast<int>(steps) + T, rng);
  if (stream.steps.size() < static_cast<std::size_t>(steps) + T)
    throw ConfigError("transition stream ended early");

  EquivalenceReport rep;
  rep.steps = steps;
  std::vector<double> delta_z(static_cast<std::size_t>(levels));
  const std::span<const TransitionStep> all(stream.steps);
  for (long t = 0; t < steps; ++t) {
    const auto window = all.subspan(static_cast<std::size_t>(t),
                                    static_cast<std::size_t>(T));
    const auto& head = window[0];
    const auto phi = fm.row(head.state, head.action);

    // Shared per-offset errors: both returns weight them identically.
    double g_mono = model.q_mono(fm, head.state, head.action);
    std::vector<double> g_z(static_cast<std::size_t>(levels));
    for (int z = 0; z < levels; ++z)
      g_z[static_cast<std::size_t>(z)] =
          model.w_hat(fm, z, head.state, head.action);
    double weight = 1.0;
    for (int i = 0; i < T; ++i) {
      const auto& step_i = window[static_cast<std::size_t>(i)];
      const double d_mono =
          td_error(step_i,
                   [&](int s, int a) { return model.q_mono(fm, s, a); },
                   gamma);
      double d_sum = 0.0;
      for (int z = 0; z < levels; ++z) {
        delta_z[static_cast<std::size_t>(z)] =
            delta_td_error(model, fm, z, step_i);
        d_sum += delta_z[static_cast<std::size_t>(z)];
      }
      rep.max_td_error_gap =
          std::max(rep.max_td_error_gap, std::abs(d_sum - d_mono));
      g_mono += weight * d_mono;
      for (int z = 0; z < levels; ++z)
        g_z[static_cast<std::size_t>(z)] +=
            weight * delta_z[static_cast<std::size_t>(z)];
      weight *= lambda_gamma;
    }

    const double err_mono =
        g_mono - model.q_mono(fm, head.state, head.action);
    for (int i = 0; i < model.dim; ++i)
      model.theta_mono[static_cast<std::size_t>(i)] +=
          alpha * err_mono * phi[static_cast<std::size_t>(i)];
    for (int z = 0; z < levels; ++z) {
      const double err = g_z[static_cast<std::size_t>(z)] -
                         model.w_hat(fm, z, head.state, head.action);
      auto& theta = model.theta_z[static_cast<std::size_t>(z)];
      for (int i = 0; i < model.dim; ++i)
        theta[static_cast<std::size_t>(i)] +=
            alpha * err * phi[static_cast<std::size_t>(i)];
    }

    double gap = 0.0;
    for (int i = 0; i < model.dim; ++i) {
      double sum = 0.0;
      for (int z = 0; z < levels; ++z)
        sum += model.theta_z[static_cast<std::size_t>(z)]
                            [static_cast<std::size_t>(i)];
      gap = std::max(gap,
                     std::abs(sum - model.theta_mono[static_cast<std::size_t>(i)]));
    }
    rep.max_theta_gap = std::max(rep.max_theta_gap, gap);
  }
  return rep;
}

QTable apply_lambda_operator(const MdpSpec& mdp, const TabularPolicy& policy,
                             const QTable& q, double gamma, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("lambda must be nonnegative");
  if (lambda * gamma >= 1.0)
    throw std::invalid_argument("needs lambda * gamma < 1");
  check(policy, mdp);
  const int sa = mdp.n_states * mdp.n_actions;
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(sa, sa);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      for (int s2 = 0; s2 < mdp.n_states; ++s2)
        for (int a2 = 0; a2 < mdp.n_actions; ++a2)
          b(s * mdp.n_actions + a, s2 * mdp.n_actions + a2) =
              mdp.p(s, a, s2) * policy.pi(s2, a2);
  Eigen::VectorXd qv(sa), r(sa);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) {
      qv(s * mdp.n_actions + a) = q.at(s, a);
      r(s * mdp.n_actions + a) = mdp.r(s, a);
    }
  const Eigen::VectorXd bellman = r + gamma * (b * qv);
  const Eigen::MatrixXd m =
      Eigen::MatrixXd::Identity(sa, sa) - (lambda * gamma) * b;
  const Eigen::VectorXd x = m.partialPivLu().solve(bellman - qv);
  QTable out = q;
  for (int i = 0; i < sa; ++i)
    out.q[static_cast<std::size_t>(i)] = qv(i) + x(i);
  return out;
}

ContractionInfo contraction_coeff(double gamma, double lambda) {
  if (gamma < 0.0 || gamma >= 1.0)
    throw std::invalid_argument("needs 0 <= gamma < 1");
  if (lambda < 0.0) throw std::invalid_argument("lambda must be nonnegative");
  if (lambda * gamma >= 1.0)
    throw std::invalid_argument("needs lambda * gamma < 1");
  ContractionInfo info;
  info.coeff = gamma * std::abs(1.0 - lambda) / (1.0 - lambda * gamma);
  info.coeff_alt = gamma / std::abs(1.0 - lambda * gamma);
  info.below_divergence_threshold =
      gamma == 0.0 ? true : lambda < (1.0 + gamma) / (2.0 * gamma);
  return info;
}

}  // namespace deltarl
