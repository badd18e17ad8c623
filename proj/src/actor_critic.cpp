#include "deltarl/actor_critic.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace deltarl {

SoftmaxPolicy SoftmaxPolicy::zeros(int n_states, int n_actions) {
  return SoftmaxPolicy{
      n_states, n_actions,
      std::vector<double>(static_cast<std::size_t>(n_states) * n_actions,
                          0.0)};
}

std::vector<double> SoftmaxPolicy::probs(int s) const {
  const std::size_t base = static_cast<std::size_t>(s) * n_actions;
  double mx = logits[base];
  for (int a = 1; a < n_actions; ++a)
    mx = std::max(mx, logits[base + static_cast<std::size_t>(a)]);
  std::vector<double> p(static_cast<std::size_t>(n_actions));
  double sum = 0.0;
  for (int a = 0; a < n_actions; ++a) {
    p[static_cast<std::size_t>(a)] =
        std::exp(logits[base + static_cast<std::size_t>(a)] - mx);
    sum += p[static_cast<std::size_t>(a)];
  }
  for (auto& v : p) v /= sum;
  return p;
}

int SoftmaxPolicy::sample(int s, Rng& rng) const {
  const auto p = probs(s);
  return rng.categorical(p);
}

double SoftmaxPolicy::log_prob(int s, int a) const {
  const auto p = probs(s);
  return std::log(p[static_cast<std::size_t>(a)]);
}

double SoftmaxPolicy::entropy(int s) const {
  const auto p = probs(s);
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

void policy_step(SoftmaxPolicy& policy, int s, int a, double advantage,
                 double alpha) {
  if (alpha < 0.0) throw std::invalid_argument("alpha must be nonnegative");
  const auto p = policy.probs(s);
  const std::size_t base = static_cast<std::size_t>(s) * policy.n_actions;
  for (int b = 0; b < policy.n_actions; ++b) {
    const double indicator = (b == a) ? 1.0 : 0.0;
    policy.logits[base + static_cast<std::size_t>(b)] +=
        alpha * advantage * (indicator - p[static_cast<std::size_t>(b)]);
  }
}

void entropy_step(SoftmaxPolicy& policy, int s, double coeff, double alpha) {
  if (coeff == 0.0) return;
  const auto p = policy.probs(s);
  const double h = policy.entropy(s);
  const std::size_t base = static_cast<std::size_t>(s) * policy.n_actions;
  for (int b = 0; b < policy.n_actions; ++b) {
    const double pb = p[static_cast<std::size_t>(b)];
    const double grad = pb > 0.0 ? -pb * (std::log(pb) + h) : 0.0;
    policy.logits[base + static_cast<std::size_t>(b)] += alpha * coeff * grad;
  }
}

double advantage_estimate(std::span<const TransitionStep> window,
                          const QFn& qhat, double gamma, double lambda) {
  if (window.empty()) throw std::invalid_argument("empty window");
  double acc = 0.0;
  double w = 1.0;
  for (const auto& t : window) {
    acc += w * td_error(t, qhat, gamma);
    if (t.done) break;
    w *= lambda * gamma;
  }
  return acc;
}

double delta_gae(std::span<const TransitionStep> window,
                 const LinearDeltaModel& critics, const FeatureMap& fm) {
  const int top = critics.ladder.top();
  const double gamma = critics.ladder.gamma_top();
  const double lambda =
      critics.ladder.lambdas[static_cast<std::size_t>(top)];
  const QFn total = [&](int s, int a) {
    return critics.q_prefix(fm, top, s, a);
  };
  return advantage_estimate(window, total, gamma, lambda);
}

std::vector<double> critic_step(LinearDeltaModel& critics,
                                std::span<const TransitionStep> window,
                                const FeatureMap& fm) {
  if (window.empty()) throw std::invalid_argument("empty window");
  const int levels = critics.ladder.levels();
  const auto& head = window[0];
  const auto phi = fm.row(head.state, head.action);
  const int T = static_cast<int>(window.size());
  std::vector<double> errs(static_cast<std::size_t>(levels));
  for (int z = 0; z < levels; ++z)
    errs[static_cast<std::size_t>(z)] =
        delta_lambda_return(window, critics, fm, z, T) -
        critics.w_hat(fm, z, head.state, head.action);
  std::vector<double> losses(static_cast<std::size_t>(levels));
  for (int z = 0; z < levels; ++z) {
    const double err = errs[static_cast<std::size_t>(z)];
    losses[static_cast<std::size_t>(z)] = err * err;
    auto& theta = critics.theta_z[static_cast<std::size_t>(z)];
    const double step =
        critics.ladder.alphas[static_cast<std::size_t>(z)] * err;
    for (int i = 0; i < critics.dim; ++i)
      theta[static_cast<std::size_t>(i)] +=
          step * phi[static_cast<std::size_t>(i)];
  }
  return losses;
}

ActorCriticResult run_actor_critic(const MdpSpec& mdp,
                                   const TimescaleLadder& ladder,
                                   const ActorCriticOptions& opt,
                                   std::uint64_t seed) {
  require_valid(ladder);
  check(mdp);
  if (opt.window < 1) throw ConfigError("window must be >= 1");
  if (opt.start_state < 0 || opt.start_state >= mdp.n_states)
    throw ConfigError("start state out of range");
  if (mdp.is_terminal(opt.start_state))
    throw ConfigError("start state must not be terminal");

  const FeatureMap fm = FeatureMap::one_hot(mdp.n_states, mdp.n_actions);
  ActorCriticResult res;
  res.policy = SoftmaxPolicy::zeros(mdp.n_states, mdp.n_actions);
  res.critics = LinearDeltaModel::zeros(ladder, fm.dim());

  const double value_cap =
      10.0 * std::max(mdp.max_abs_reward(), 1e-6) /
      (1.0 - ladder.gamma_top());

  Rng rng(derive_seed(seed, {0x616374}));
  std::deque<TransitionStep> buffer;
  std::vector<TransitionStep> scratch;

  int s = opt.start_state;
  int a = res.policy.sample(s, rng);
  double ep_return = 0.0;
  long ep_len = 0;
  double ep_abs_adv = 0.0;
  long ep_updates = 0;
  std::vector<double> ep_loss(static_cast<std::size_t>(ladder.levels()), 0.0);
  long episode = 0;

  auto update_front = [&]() {
    scratch.assign(buffer.begin(), buffer.end());
    const std::span<const TransitionStep> window(scratch);
    const auto& head = window[0];
    const double adv = delta_gae(window, res.critics, fm);
    const auto losses = critic_step(res.critics, window, fm);
    policy_step(res.policy, head.state, head.action, adv, opt.alpha_policy);
    entropy_step(res.policy, head.state, opt.entropy_coeff, opt.alpha_policy);
    ep_abs_adv += std::abs(adv);
    for (std::size_t z = 0; z < losses.size(); ++z) ep_loss[z] += losses[z];
    ++ep_updates;
    buffer.pop_front();
  };

  auto end_episode = [&]() {
    while (!buffer.empty()) update_front();
    EpisodeStats st;
    st.episode = episode++;
    st.ret = ep_return;
    st.length = ep_len;
    st.mean_abs_advantage = ep_updates > 0 ? ep_abs_adv / ep_updates : 0.0;
    st.critic_loss.resize(ep_loss.size());
    for (std::size_t z = 0; z < ep_loss.size(); ++z)
      st.critic_loss[z] = ep_updates > 0 ? ep_loss[z] / ep_updates : 0.0;
    res.episodes.push_back(std::move(st));
    ep_return = 0.0;
    ep_len = 0;
    ep_abs_adv = 0.0;
    ep_updates = 0;
    std::fill(ep_loss.begin(), ep_loss.end(), 0.0);
    s = opt.start_state;
    a = res.policy.sample(s, rng);
  };

  for (long t = 0; t < opt.total_steps; ++t) {
    const auto [r, s2] = step(mdp, s, a, rng);
    const int a2 = res.policy.sample(s2, rng);
    const bool done = mdp.is_terminal(s2);
    buffer.push_back(TransitionStep{s, a, r, s2, a2, done});
    ep_return += r;
    ++ep_len;
    if (static_cast<int>(buffer.size()) == opt.window) update_front();

    double max_w = 0.0;
    for (const auto& theta : res.critics.theta_z)
      for (double v : theta) max_w = std::max(max_w, std::abs(v));
    if (max_w > value_cap) {
      res.diverged = true;
      res.steps = t + 1;
      return res;
    }

    if (done || ep_len >= opt.episode_cap) {
      end_episode();
    } else {
      s = s2;
      a = a2;
    }
  }
  res.steps = opt.total_steps;
  return res;
}

}  // namespace deltarl
