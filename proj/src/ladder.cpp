#include "deltarl/ladder.hpp"

#include <cmath>

namespace deltarl {

int horizon_k(double gamma) {
  if (gamma < 0.0 || gamma >= 1.0)
    throw std::invalid_argument("horizon_k needs 0 <= gamma < 1");
  const double h = 1.0 / (1.0 - gamma);
  const int k = static_cast<int>(std::ceil(h - 1e-9));
  return k < 1 ? 1 : k;
}

TimescaleLadder build_doubling_ladder(int levels_above_base, double alpha,
                                      double lambda) {
  if (levels_above_base < 0)
    throw ConfigError("ladder depth must be nonnegative");
  TimescaleLadder l;
  for (int z = 0; z <= levels_above_base; ++z) {
    const double gamma = 1.0 - std::ldexp(1.0, -(z + 1));
    l.gammas.push_back(gamma);
    l.ks.push_back(horizon_k(gamma));
    l.lambdas.push_back(lambda);
    l.alphas.push_back(alpha);
  }
  return l;
}

TimescaleLadder build_halving_ladder(int levels_above_base, double gamma_max,
                                     double alpha, double lambda) {
  if (levels_above_base < 0)
    throw ConfigError("ladder depth must be nonnegative");
  if (gamma_max < 0.0 || gamma_max >= 1.0)
    throw ConfigError("gamma_max must lie in [0, 1)");
  TimescaleLadder l;
  for (int z = 0; z <= levels_above_base; ++z) {
    const double gamma =
        1.0 - std::ldexp(1.0 - gamma_max, levels_above_base - z);
    if (gamma < 0.0)
      throw ConfigError("halving ladder drops below gamma = 0; reduce depth");
    l.gammas.push_back(gamma);
    l.ks.push_back(horizon_k(gamma));
    l.lambdas.push_back(lambda);
    l.alphas.push_back(alpha);
  }
  return l;
}

void set_matched_lambdas(TimescaleLadder& ladder, double lambda_gamma) {
  if (lambda_gamma < 0.0)
    throw ConfigError("lambda-gamma product must be nonnegative");
  for (int z = 0; z < ladder.levels(); ++z) {
    const double gamma = ladder.gammas[static_cast<std::size_t>(z)];
    if (gamma <= 0.0)
      throw ConfigError("matched lambdas need gamma_z > 0");
    const double threshold = (1.0 + gamma) / (2.0 * gamma);
    ladder.lambdas[static_cast<std::size_t>(z)] =
        std::min(lambda_gamma / gamma, threshold * (1.0 - 1e-9));
  }
}

std::vector<LadderViolation> validate(const TimescaleLadder& ladder) {
  std::vector<LadderViolation> out;
  const std::size_t n = ladder.gammas.size();
  if (n == 0) {
    out.push_back({-1, "ladder is empty"});
    return out;
  }
  if (ladder.ks.size() != n || ladder.lambdas.size() != n ||
      ladder.alphas.size() != n) {
    out.push_back({-1, "sequence lengths differ"});
    return out;
  }
  for (std::size_t z = 0; z < n; ++z) {
    const int i = static_cast<int>(z);
    if (ladder.gammas[z] < 0.0 || ladder.gammas[z] >= 1.0)
      out.push_back({i, "gamma outside [0, 1)"});
    if (z > 0 && ladder.gammas[z] < ladder.gammas[z - 1])
      out.push_back({i, "gamma decreases"});
    if (ladder.ks[z] < 1) out.push_back({i, "k below 1"});
    if (z > 0 && ladder.ks[z] < ladder.ks[z - 1])
      out.push_back({i, "k decreases"});
    if (ladder.lambdas[z] < 0.0) out.push_back({i, "lambda negative"});
    if (ladder.alphas[z] <= 0.0) out.push_back({i, "alpha not positive"});
  }
  return out;
}

void require_valid(const TimescaleLadder& ladder) {
  const auto violations = validate(ladder);
  if (violations.empty()) return;
  std::string msg = "invalid ladder:";
  for (const auto& v : violations) {
    msg += " [z=" + std::to_string(v.index) + "] " + v.rule + ";";
  }
  throw ConfigError(msg);
}

}  // namespace deltarl
