#pragma once

#include <string>
#include <vector>

#include "deltarl/common.hpp"

namespace deltarl {

// Joint timescale schedule (gamma_z, k_z, lambda_z, alpha_z), z = 0..Z.
// Discounts and bootstrap depths must be nondecreasing in z.
struct TimescaleLadder {
  std::vector<double> gammas;
  std::vector<int> ks;
  std::vector<double> lambdas;
  std::vector<double> alphas;

  int levels() const { return static_cast<int>(gammas.size()); }  // Z + 1
  int top() const { return levels() - 1; }
  double gamma_top() const { return gammas.back(); }
  int k_top() const { return ks.back(); }
};

// ceil(1 / (1 - gamma)), snapping values within 1e-9 of an integer down
// so that e.g. gamma = 0.9 maps to 10 rather than 11.
int horizon_k(double gamma);

// gamma_z = 1 - 2^-(z+1): each level doubles the effective horizon.
// k_z = horizon_k(gamma_z); lambda and alpha are uniform across levels.
TimescaleLadder build_doubling_ladder(int levels_above_base, double alpha,
                                      double lambda);

// Ladder ending at gamma_max, built by halving 1 - gamma per level down.
TimescaleLadder build_halving_ladder(int levels_above_base, double gamma_max,
                                     double alpha, double lambda);

// Sets lambda_z = lambda_gamma / gamma_z (the product-matching rule),
// capped just below the divergence threshold (1 + gamma_z) / (2 gamma_z).
void set_matched_lambdas(TimescaleLadder& ladder, double lambda_gamma);

struct LadderViolation {
  int index = -1;  // -1 for whole-ladder rules
  std::string rule;
};

// Empty result iff every ladder invariant holds. Never throws.
std::vector<LadderViolation> validate(const TimescaleLadder& ladder);

// Throws ConfigError listing every violated rule.
void require_valid(const TimescaleLadder& ladder);

}  // namespace deltarl
