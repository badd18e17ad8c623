#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "deltarl/linear.hpp"

namespace deltarl {

// Tabular softmax policy: logits per (state, action).
struct SoftmaxPolicy {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> logits;

  static SoftmaxPolicy zeros(int n_states, int n_actions);

  std::vector<double> probs(int s) const;
  int sample(int s, Rng& rng) const;
  double log_prob(int s, int a) const;
  double entropy(int s) const;
};

// logits[s][.] += alpha * advantage * (onehot(a) - pi(.|s))
void policy_step(SoftmaxPolicy& policy, int s, int a, double advantage,
                 double alpha);

// logits[s][.] += alpha * coeff * grad entropy(pi(.|s))
void entropy_step(SoftmaxPolicy& policy, int s, double coeff, double alpha);

// Sum over the window of (lambda*gamma)^i * one-step errors; equals the
// lambda-return minus the head estimate.
double advantage_estimate(std::span<const TransitionStep> window,
                          const QFn& qhat, double gamma, double lambda);

// Advantage from the summed per-level critics at the top discount: the
// one-step errors use gamma_Z and the total estimate sum_z W_z.
double delta_gae(std::span<const TransitionStep> window,
                 const LinearDeltaModel& critics, const FeatureMap& fm);

// Per-level truncated lambda-return targets applied at the window head;
// all returns are computed before any weight moves. Returns the per-level
// squared target errors.
std::vector<double> critic_step(LinearDeltaModel& critics,
                                std::span<const TransitionStep> window,
                                const FeatureMap& fm);

struct ActorCriticOptions {
  int window = 16;  // update delay T
  long total_steps = 50000;
  double alpha_policy = 0.05;
  double entropy_coeff = 0.0;
  int episode_cap = 100;
  int start_state = 0;
};

struct EpisodeStats {
  long episode = 0;
  double ret = 0.0;  // undiscounted reward sum
  long length = 0;
  double mean_abs_advantage = 0.0;
  std::vector<double> critic_loss;  // mean squared target error per level
};

struct ActorCriticResult {
  std::vector<EpisodeStats> episodes;
  SoftmaxPolicy policy;
  LinearDeltaModel critics;
  long steps = 0;
  bool diverged = false;
};

// Interleaved on-policy loop: act with the softmax policy, hold transitions
// back for `window` steps, then update critics and policy for the delayed
// step; episode ends flush the buffer with truncated returns. Aborts and
// flags divergence if any critic value leaves ±10 r_max / (1 - gamma_Z).
ActorCriticResult run_actor_critic(const MdpSpec& mdp,
                                   const TimescaleLadder& ladder,
                                   const ActorCriticOptions& opt,
                                   std::uint64_t seed);

}  // namespace deltarl
