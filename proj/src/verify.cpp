#include <cmath>
#include <cstdio>
#include <filesystem>

#include "deltarl/actor_critic.hpp"
#include "deltarl/csv.hpp"
#include "deltarl/phased.hpp"
#include "deltarl/runner.hpp"

namespace deltarl {

namespace {

namespace fs = std::filesystem;

std::string suite_path(const std::string& out_dir, const std::string& name) {
  fs::create_directories(out_dir);
  return (fs::path(out_dir) / name).string();
}

std::uint64_t suite_hash(const std::string& name) {
  return fnv1a64("verify:" + name);
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), pattern, v);
  return buf;
}

}  // namespace

VerifyOutcome verify_equivalence(const std::string& out_dir) {
  const MdpSpec mdp = make_random(6, 2, 7);
  const TabularPolicy policy = TabularPolicy::uniform(6, 2);
  TimescaleLadder ladder = build_doubling_ladder(2, 0.05, 0.9);
  set_matched_lambdas(ladder, 0.45);

  const std::vector<std::string> header = {"features",  "steps",
                                           "alpha",     "lambda_gamma",
                                           "theta_gap", "td_error_gap",
                                           "pass"};
  CsvWriter csv(suite_path(out_dir, "verify_equivalence.csv"),
                suite_hash("equivalence"), header);

  bool pass = true;
  std::string detail;
  const struct {
    const char* name;
    FeatureMap fm;
  } maps[] = {{"one-hot", FeatureMap::one_hot(6, 2)},
              {"random-8", FeatureMap::random(6, 2, 8, 3)}};
  for (const auto& m : maps) {
    const EquivalenceReport rep =
        check_equivalence(mdp, policy, ladder, 10000, 0.05, 0.45, m.fm, 1);
    const bool ok =
        rep.max_theta_gap <= 1e-8 && rep.max_td_error_gap <= 1e-10;
    pass = pass && ok;
    const std::vector<std::string> row = {
        m.name,
        "10000",
        "0.05",
        "0.45",
        format_double(rep.max_theta_gap),
        format_double(rep.max_td_error_gap),
        ok ? "1" : "0"};
    csv.row(std::span<const std::string>(row));
    detail += std::string(m.name) + ": theta_gap=" +
              fmt("%.3g", rep.max_theta_gap) + " td_error_gap=" +
              fmt("%.3g", rep.max_td_error_gap) + "  ";
  }
  return {pass, detail};
}

VerifyOutcome verify_contraction(const std::string& out_dir) {
  const double gamma = 0.9;
  const double lambdas[] = {0.0, 0.5, 0.9, 1.0, 1.02};
  const int pairs = 100;

  const std::vector<std::string> header = {
      "gamma",     "lambda",          "coeff", "coeff_alt",
      "below_thr", "max_ratio",       "pass"};
  CsvWriter csv(suite_path(out_dir, "verify_contraction.csv"),
                suite_hash("contraction"), header);

  bool pass = true;
  std::string detail;
  for (double lambda : lambdas) {
    const ContractionInfo info = contraction_coeff(gamma, lambda);
    double max_ratio = 0.0;
    for (int i = 0; i < pairs; ++i) {
      const MdpSpec mdp =
          make_random(5, 2, 1000 + static_cast<std::uint64_t>(i));
      const TabularPolicy policy = TabularPolicy::uniform(5, 2);
      Rng rng(derive_seed(41, {static_cast<std::uint64_t>(i),
                               static_cast<std::uint64_t>(lambda * 1000)}));
      QTable q1 = QTable::zeros(5, 2);
      QTable q2 = QTable::zeros(5, 2);
      for (auto& v : q1.q) v = rng.uniform(-5.0, 5.0);
      for (auto& v : q2.q) v = rng.uniform(-5.0, 5.0);
      const QTable t1 = apply_lambda_operator(mdp, policy, q1, gamma, lambda);
      const QTable t2 = apply_lambda_operator(mdp, policy, q2, gamma, lambda);
      const double denom = sup_distance(q1, q2);
      if (denom > 0.0)
        max_ratio = std::max(max_ratio, sup_distance(t1, t2) / denom);
    }
    const bool ok = max_ratio <= info.coeff + 1e-10;
    pass = pass && ok;
    const std::vector<std::string> row = {
        format_double(gamma),
        format_double(lambda),
        format_double(info.coeff),
        format_double(info.coeff_alt),
        info.below_divergence_threshold ? "1" : "0",
        format_double(max_ratio),
        ok ? "1" : "0"};
    csv.row(std::span<const std::string>(row));
    detail += "lambda=" + fmt("%.2f", lambda) + " ratio=" +
              fmt("%.4f", max_ratio) + "<=" + fmt("%.4f", info.coeff) + "  ";
  }
  return {pass, detail};
}

namespace {

// Shared protocol for the two bound suites: 200 seeded runs of 20 phases on
// a fixed stochastic 5-state MDP, n = 128 trajectories per cell, delta 0.1.
// A run counts as holding only if the inequality holds at every phase.
struct BoundProtocol {
  int seeds = 200;
  int phases = 20;
  int n = 128;
  double confidence_delta = 0.1;
};

}  // namespace

VerifyOutcome verify_td_bound(const std::string& out_dir) {
  const BoundProtocol proto;
  const double gamma = 0.9;
  const int k = 4;
  const MdpSpec mdp = make_random(5, 2, 11);
  const TabularPolicy policy = TabularPolicy::uniform(5, 2);
  const QTable oracle = exact_q(mdp, policy, gamma);
  const double eps = hoeffding_eps(k, proto.confidence_delta, proto.n);

  const std::vector<std::string> header = {"seed", "holds",
                                           "first_violation_phase",
                                           "final_err"};
  CsvWriter csv(suite_path(out_dir, "verify_td_bound.csv"),
                suite_hash("td-bound"), header);

  int held = 0;
  for (int seed = 1; seed <= proto.seeds; ++seed) {
    PhasedState state = make_phased_td(5, 2, proto.n);
    ErrorReport prev = measure_errors(state, oracle, {}, eps, gamma, k,
                                      nullptr);
    bool holds = true;
    int first_violation = -1;
    for (int t = 0; t < proto.phases; ++t) {
      phased_td_update(state, mdp, policy, gamma, k,
                       static_cast<std::uint64_t>(seed));
      const ErrorReport rep =
          measure_errors(state, oracle, {}, eps, gamma, k, &prev);
      if (!rep.holds && holds) {
        holds = false;
        first_violation = state.phase;
      }
      prev = rep;
    }
    held += holds ? 1 : 0;
    const double row[] = {static_cast<double>(seed), holds ? 1.0 : 0.0,
                          static_cast<double>(first_violation), prev.total};
    csv.row(std::span<const double>(row));
  }
  const double rate = static_cast<double>(held) / proto.seeds;
  return {rate >= 0.90,
          "holds-rate=" + fmt("%.3f", rate) + " (need >= 0.90)"};
}

VerifyOutcome verify_delta_bound(const std::string& out_dir) {
  const BoundProtocol proto;
  const MdpSpec mdp = make_random(5, 2, 11);
  const TabularPolicy policy = TabularPolicy::uniform(5, 2);
  const TimescaleLadder ladder = build_doubling_ladder(2, 0.1, 0.9);
  const QTable oracle_q = exact_q(mdp, policy, ladder.gamma_top());
  const std::vector<QTable> oracle_w = exact_w(mdp, policy, ladder.gammas);
  const double eps =
      hoeffding_eps(ladder.k_top(), proto.confidence_delta, proto.n);

  const std::vector<std::string> header = {"seed", "holds",
                                           "first_violation_phase",
                                           "final_total_err"};
  CsvWriter csv(suite_path(out_dir, "verify_delta_bound.csv"),
                suite_hash("delta-bound"), header);

  int held = 0;
  for (int seed = 1; seed <= proto.seeds; ++seed) {
    PhasedState state = make_phased_delta(ladder, 5, 2, proto.n);
    ErrorReport prev = measure_errors(state, oracle_q, oracle_w, eps,
                                      ladder.gamma_top(), ladder.k_top(),
                                      nullptr);
    bool holds = true;
    int first_violation = -1;
    for (int t = 0; t < proto.phases; ++t) {
      phased_delta_update(state, mdp, policy,
                          static_cast<std::uint64_t>(seed));
      const ErrorReport rep =
          measure_errors(state, oracle_q, oracle_w, eps, ladder.gamma_top(),
                         ladder.k_top(), &prev);
      if (!rep.holds && holds) {
        holds = false;
        first_violation = state.phase;
      }
      prev = rep;
    }
    held += holds ? 1 : 0;
    const double row[] = {static_cast<double>(seed), holds ? 1.0 : 0.0,
                          static_cast<double>(first_violation), prev.total};
    csv.row(std::span<const double>(row));
  }
  const double rate = static_cast<double>(held) / proto.seeds;

  // The variance-reduction sum must be nonpositive for every valid ladder.
  bool vr_ok = true;
  std::vector<TimescaleLadder> ladders;
  for (int z = 0; z <= 4; ++z)
    ladders.push_back(build_doubling_ladder(z, 0.1, 0.9));
  ladders.push_back(build_halving_ladder(2, 0.9, 0.1, 0.9));
  ladders.push_back(build_halving_ladder(3, 0.95, 0.1, 0.9));
  for (const auto& l : ladders)
    vr_ok = vr_ok && variance_reduction_term(l) <= 0.0;

  return {rate >= 0.90 && vr_ok,
          "holds-rate=" + fmt("%.3f", rate) + " (need >= 0.90), " +
              std::string("variance-reduction<=0: ") + (vr_ok ? "yes" : "NO")};
}

VerifyOutcome verify_identities(const std::string& out_dir) {
  const std::vector<std::string> header = {"check", "max_gap", "tolerance",
                                           "pass"};
  CsvWriter csv(suite_path(out_dir, "verify_identities.csv"),
                suite_hash("identities"), header);
  bool pass = true;
  std::string detail;
  auto emit = [&](const std::string& name, double gap, double tol) {
    const bool ok = gap <= tol;
    pass = pass && ok;
    const std::vector<std::string> row = {name, format_double(gap),
                                          format_double(tol), ok ? "1" : "0"};
    csv.row(std::span<const std::string>(row));
    detail += name + "=" + fmt("%.3g", gap) + "  ";
  };

  // Per-step error-sum identity on the coupled linear run.
  {
    const MdpSpec mdp = make_random(6, 2, 7);
    const TabularPolicy policy = TabularPolicy::uniform(6, 2);
    TimescaleLadder ladder = build_doubling_ladder(2, 0.05, 0.9);
    set_matched_lambdas(ladder, 0.45);
    const FeatureMap fm = FeatureMap::one_hot(6, 2);
    const EquivalenceReport rep =
        check_equivalence(mdp, policy, ladder, 2000, 0.05, 0.45, fm, 1);
    emit("td_error_sum", rep.max_td_error_gap, 1e-10);
  }

  // Equal bootstrap depths collapse the phased delta estimator onto the
  // plain phased estimator when both consume the same trajectories.
  {
    const MdpSpec mdp = make_random(5, 2, 11);
    const TabularPolicy policy = TabularPolicy::uniform(5, 2);
    TimescaleLadder ladder = build_doubling_ladder(2, 0.1, 0.9);
    std::fill(ladder.ks.begin(), ladder.ks.end(), 4);
    PhasedState td = make_phased_td(5, 2, 32);
    PhasedState delta = make_phased_delta(ladder, 5, 2, 32);
    double gap = 0.0;
    for (int t = 0; t < 10; ++t) {
      phased_td_update(td, mdp, policy, ladder.gamma_top(), 4, 99);
      phased_delta_update(delta, mdp, policy, 99);
      const QTable sum = reconstruct_q(delta.w_hat, ladder.top());
      gap = std::max(gap, sup_distance(sum, td.q_hat));
    }
    emit("equal_k_collapse", gap, 1e-10);
  }

  // Summed per-level lambda-returns equal the monolithic lambda-return
  // when the weight products match and the estimates are shared.
  {
    const MdpSpec mdp = make_random(6, 2, 7);
    const TabularPolicy policy = TabularPolicy::uniform(6, 2);
    TimescaleLadder ladder = build_doubling_ladder(2, 0.05, 0.9);
    set_matched_lambdas(ladder, 0.45);
    const FeatureMap fm = FeatureMap::one_hot(6, 2);
    LinearDeltaModel model = LinearDeltaModel::zeros(ladder, fm.dim());
    Rng init(5);
    for (auto& theta : model.theta_z)
      for (auto& v : theta) v = init.uniform(-1.0, 1.0);
    const double gamma = ladder.gamma_top();
    const double lambda = 0.45 / gamma;
    Rng rng(17);
    const Trajectory stream = sample_trajectory(mdp, policy, 0, 0, 80, rng);
    const QFn total = [&](int s, int a) {
      return model.q_prefix(fm, ladder.top(), s, a);
    };
    const int T = 16;
    double gap = 0.0;
    const std::span<const TransitionStep> all(stream.steps);
    for (std::size_t t = 0; t + T <= stream.steps.size(); ++t) {
      const auto window = all.subspan(t, T);
      const double mono = lambda_return(window, total, gamma, lambda, T);
      double sum = 0.0;
      for (int z = 0; z < ladder.levels(); ++z)
        sum += delta_lambda_return(window, model, fm, z, T);
      gap = std::max(gap, std::abs(sum - mono));
    }
    emit("lambda_return_sum", gap, 1e-10);
  }

  return {pass, detail};
}

int verify(const std::string& suite, const std::string& out_dir) {
  struct Entry {
    const char* id;
    const char* alias;
    const char* what;
    VerifyOutcome (*fn)(const std::string&);
  };
  static const Entry entries[] = {
      {"t1", "equivalence", "summed delta weights track monolithic weights",
       &verify_equivalence},
      {"t2", "contraction", "lambda operator respects its coefficient",
       &verify_contraction},
      {"t3", "td-bound", "phased estimator stays within its error bound",
       &verify_td_bound},
      {"t4", "delta-bound", "phased delta estimator stays within its bound",
       &verify_delta_bound},
      {"identities", "identities", "error-sum and collapse identities",
       &verify_identities},
  };
  bool any = false;
  bool pass = true;
  for (const auto& e : entries) {
    if (suite != "all" && suite != e.id && suite != e.alias) continue;
    any = true;
    const VerifyOutcome out = e.fn(out_dir);
    pass = pass && out.pass;
    std::printf("[%s] %s (%s): %s\n", out.pass ? "PASS" : "FAIL", e.id,
                e.what, out.detail.c_str());
  }
  if (!any)
    throw ConfigError(
        "unknown verify suite '" + suite +
        "'; expected t1|t2|t3|t4|identities|all (aliases: equivalence, "
        "contraction, td-bound, delta-bound)");
  return pass ? 0 : 2;
}

}  // namespace deltarl
