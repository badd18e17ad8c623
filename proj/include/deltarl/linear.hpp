#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "deltarl/ladder.hpp"
#include "deltarl/mdp.hpp"

namespace deltarl {

// Dense feature rows phi(s, a), one per state-action pair.
class FeatureMap {
 public:
  FeatureMap() = default;

  static FeatureMap one_hot(int n_states, int n_actions);
  static FeatureMap random(int n_states, int n_actions, int dim,
                           std::uint64_t seed);

  int dim() const { return dim_; }
  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  std::span<const double> row(int s, int a) const {
    return {rows_.data() +
                (static_cast<std::size_t>(s) * n_actions_ + a) * dim_,
            static_cast<std::size_t>(dim_)};
  }

 private:
  int n_states_ = 0;
  int n_actions_ = 0;
  int dim_ = 0;
  std::vector<double> rows_;
};

inline double dot(std::span<const double> x, std::span<const double> y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
  return acc;
}

// One weight vector per timescale plus a monolithic vector for the single-
// discount learner the decomposition is compared against.
struct LinearDeltaModel {
  TimescaleLadder ladder;
  int dim = 0;
  std::vector<std::vector<double>> theta_z;
  std::vector<double> theta_mono;

  static LinearDeltaModel zeros(const TimescaleLadder& ladder, int dim);

  double w_hat(const FeatureMap& fm, int z, int s, int a) const {
    return dot(theta_z[static_cast<std::size_t>(z)], fm.row(s, a));
  }
  // Sum of the first z+1 per-level estimates.
  double q_prefix(const FeatureMap& fm, int z, int s, int a) const {
    double acc = 0.0;
    for (int u = 0; u <= z; ++u) acc += w_hat(fm, u, s, a);
    return acc;
  }
  double q_mono(const FeatureMap& fm, int s, int a) const {
    return dot(theta_mono, fm.row(s, a));
  }
};

using QFn = std::function<double(int, int)>;

// r + gamma * Q(s',a') - Q(s,a); the bootstrap is dropped on terminal steps.
double td_error(const TransitionStep& t, const QFn& qhat, double gamma);

// Truncated lambda-return: Q(s_t,a_t) plus the (lambda*gamma)-weighted sum
// of the next T one-step errors along the window.
double lambda_return(std::span<const TransitionStep> window, const QFn& qhat,
                     double gamma, double lambda, int T);

// Per-level error: row 0 is the plain error at gamma_0; rows z >= 1 replace
// the reward with the rescaled previous-level estimate at the next pair.
double delta_td_error(const LinearDeltaModel& model, const FeatureMap& fm,
                      int z, const TransitionStep& t);

double delta_lambda_return(std::span<const TransitionStep> window,
                           const LinearDeltaModel& model, const FeatureMap& fm,
                           int z, int T);

// theta += alpha * (G - Q(s,a)) * phi(s,a) at the window head.
void tdlambda_update(LinearDeltaModel& model,
                     std::span<const TransitionStep> window,
                     const FeatureMap& fm, double gamma, double lambda,
                     double alpha, int T);

// Same rule per level with its own return and step size.
void tdlambda_delta_update(LinearDeltaModel& model,
                           std::span<const TransitionStep> window,
                           const FeatureMap& fm,
                           std::span<const double> alphas, int T);

struct EquivalenceReport {
  long steps = 0;
  double max_theta_gap = 0.0;     // max over steps of |sum_z theta^z - theta|_inf
  double max_td_error_gap = 0.0;  // max over evaluations of |sum_z d^z - d|
};

// Runs the monolithic and the decomposed learner on one shared transition
// stream from a continuing MDP, under the matching conditions (uniform
// alpha, lambda_z * gamma_z equal for all z, zero initialization), and
// reports the largest gaps observed. Violated conditions raise ConfigError.
EquivalenceReport check_equivalence(const MdpSpec& mdp,
                                    const TabularPolicy& policy,
                                    const TimescaleLadder& ladder, long steps,
                                    double alpha, double lambda_gamma,
                                    const FeatureMap& fm, std::uint64_t seed,
                                    int truncation = 0);

// Q + (I - lambda*gamma*P)^-1 (TQ - Q) by direct solve; needs
// lambda * gamma < 1.
QTable apply_lambda_operator(const MdpSpec& mdp, const TabularPolicy& policy,
                             const QTable& q, double gamma, double lambda);

struct ContractionInfo {
  double coeff = 0.0;      // gamma * |1 - lambda| / (1 - lambda * gamma)
  double coeff_alt = 0.0;  // gamma / |1 - lambda * gamma|, kept for comparison
  bool below_divergence_threshold = false;  // lambda < (1 + gamma) / (2 gamma)
};

ContractionInfo contraction_coeff(double gamma, double lambda);

}  // namespace deltarl
