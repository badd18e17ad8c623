#include <cmath>
#include <vector>

#include "doctest.h"

#include "deltarl/phased.hpp"

using namespace deltarl;

namespace {

MdpSpec self_loop(double reward) {
  MdpSpec mdp;
  mdp.n_states = 1;
  mdp.n_actions = 1;
  mdp.transition = {1.0};
  mdp.reward = {reward};
  return mdp;
}

TimescaleLadder two_level_half() {
  TimescaleLadder l;
  l.gammas = {0.5, 0.75};
  l.ks = {2, 2};
  l.lambdas = {0.9, 0.9};
  l.alphas = {0.5, 0.5};
  return l;
}

}  // namespace

TEST_CASE("hoeffding epsilon") {
  CHECK(hoeffding_eps(4, 0.1, 128) == doctest::Approx(0.2617).epsilon(5e-4));
  // direct evaluation of sqrt(2 ln 80 / 128)
  CHECK(hoeffding_eps(4, 0.1, 128) ==
        doctest::Approx(std::sqrt(2.0 * std::log(80.0) / 128.0))
            .epsilon(1e-12));
  // quadrupling n halves the deviation
  for (int n : {16, 64, 256})
    CHECK(hoeffding_eps(3, 0.2, 4 * n) ==
          doctest::Approx(hoeffding_eps(3, 0.2, n) / 2.0).epsilon(1e-12));
  // ln(2k/delta) = 2 at delta = 2/e^2 and k = 1
  const double delta = 2.0 / std::exp(2.0);
  CHECK(hoeffding_eps(1, delta, 25) ==
        doctest::Approx(std::sqrt(4.0 / 25.0)).epsilon(1e-12));
  CHECK_THROWS_AS(hoeffding_eps(0, 0.1, 10), std::invalid_argument);
  CHECK_THROWS_AS(hoeffding_eps(1, 1.5, 10), std::invalid_argument);
}

TEST_CASE("phased td backups on deterministic environments") {
  SUBCASE("self-loop iterates toward the geometric limit") {
    const MdpSpec mdp = self_loop(1.0);
    const TabularPolicy pi = TabularPolicy::uniform(1, 1);
    PhasedState st = make_phased_td(1, 1, 3);
    phased_td_update(st, mdp, pi, 0.5, 2, 7);
    CHECK(st.q_hat.at(0, 0) == doctest::Approx(1.5));
    phased_td_update(st, mdp, pi, 0.5, 2, 7);
    CHECK(st.q_hat.at(0, 0) == doctest::Approx(1.875));
    CHECK(st.phase == 2);
  }
  SUBCASE("zero rewards stay zero") {
    const std::vector<double> rewards(4, 0.0);
    const MdpSpec ring = make_ring(4, rewards);
    const TabularPolicy pi = TabularPolicy::uniform(4, 1);
    PhasedState st = make_phased_td(4, 1, 2);
    for (int t = 0; t < 5; ++t) phased_td_update(st, ring, pi, 0.8, 3, 1);
    CHECK(sup_norm(st.q_hat) == 0.0);
  }
  SUBCASE("deterministic ring equals the exact k-step backup") {
    const std::vector<double> rewards = {1.0, 0.0, -0.5, 0.2, 0.0};
    const MdpSpec ring = make_ring(5, rewards);
    const TabularPolicy pi = TabularPolicy::uniform(5, 1);
    const double gamma = 0.9;
    const int k = 3;
    PhasedState st = make_phased_td(5, 1, 1);
    QTable manual = QTable::zeros(5, 1);
    for (int t = 0; t < 4; ++t) {
      phased_td_update(st, ring, pi, gamma, k, 9);
      QTable next = QTable::zeros(5, 1);
      for (int s = 0; s < 5; ++s) {
        double g = 0.0;
        for (int i = 0; i < k; ++i)
          g += pow_int(gamma, i) *
               rewards[static_cast<std::size_t>((s + i) % 5)];
        g += pow_int(gamma, k) * manual.at((s + k) % 5, 0);
        next.at(s, 0) = g;
      }
      manual = next;
      CHECK(sup_distance(st.q_hat, manual) < 1e-14);
    }
  }
}

TEST_CASE("phased delta backups") {
  SUBCASE("single-level ladder matches phased td bitwise") {
    const MdpSpec mdp = make_random(4, 2, 21);
    const TabularPolicy pi = TabularPolicy::uniform(4, 2);
    TimescaleLadder l;
    l.gammas = {0.5};
    l.ks = {2};
    l.lambdas = {0.9};
    l.alphas = {0.1};
    PhasedState td = make_phased_td(4, 2, 8);
    PhasedState delta = make_phased_delta(l, 4, 2, 8);
    for (int t = 0; t < 4; ++t) {
      phased_td_update(td, mdp, pi, 0.5, 2, 33);
      phased_delta_update(delta, mdp, pi, 33);
      for (int s = 0; s < 4; ++s)
        for (int a = 0; a < 2; ++a)
          CHECK(delta.w_hat.at(0, s, a) == td.q_hat.at(s, a));
    }
  }
  SUBCASE("self-loop first phase by hand") {
    const MdpSpec mdp = self_loop(1.0);
    const TabularPolicy pi = TabularPolicy::uniform(1, 1);
    PhasedState st = make_phased_delta(two_level_half(), 1, 1, 5);
    phased_delta_update(st, mdp, pi, 3);
    CHECK(st.w_hat.at(0, 0, 0) == doctest::Approx(1.5));
    CHECK(st.w_hat.at(1, 0, 0) == doctest::Approx(0.25));
  }
  SUBCASE("zero rewards stay zero") {
    const std::vector<double> rewards(3, 0.0);
    const MdpSpec ring = make_ring(3, rewards);
    const TabularPolicy pi = TabularPolicy::uniform(3, 1);
    PhasedState st = make_phased_delta(two_level_half(), 3, 1, 2);
    for (int t = 0; t < 3; ++t) phased_delta_update(st, ring, pi, 5);
    for (double v : st.w_hat.w) CHECK(v == 0.0);
  }
}

TEST_CASE("bound arithmetic") {
  SUBCASE("td bound") {
    CHECK(phased_td_bound(0.1, 0.5, 2, 0.0) == doctest::Approx(0.15));
    CHECK(phased_td_bound(0.0, 0.5, 2, 1.0) == doctest::Approx(0.25));
    // large k approaches eps / (1 - gamma)
    CHECK(phased_td_bound(0.2, 0.9, 500, 0.0) ==
          doctest::Approx(0.2 / 0.1).epsilon(1e-9));
  }
  SUBCASE("delta bound, equal depths collapse to the td bound") {
    TimescaleLadder l = two_level_half();
    const std::vector<double> prev = {0.3, 0.4};
    const double rhs = phased_delta_bound(0.1, l, prev);
    const double td = phased_td_bound(0.1, 0.75, 2, 0.7);
    CHECK(rhs == doctest::Approx(td).epsilon(1e-12));
  }
  SUBCASE("doubling ladder example") {
    TimescaleLadder l;
    l.gammas = {0.5, 0.75};
    l.ks = {2, 4};
    l.lambdas = {0.9, 0.9};
    l.alphas = {0.1, 0.1};
    const std::vector<double> prev = {0.0, 0.0};
    CHECK(phased_delta_bound(0.1, l, prev) == doctest::Approx(0.2359375));
    CHECK(variance_reduction_term(l) == doctest::Approx(-0.375));
  }
  SUBCASE("variance reduction is nonpositive for valid ladders") {
    for (int depth = 0; depth <= 5; ++depth)
      CHECK(variance_reduction_term(build_doubling_ladder(depth, 0.1, 0.9)) <=
            0.0);
    CHECK(variance_reduction_term(build_halving_ladder(3, 0.95, 0.1, 0.9)) <=
          0.0);
  }
}

TEST_CASE("error reports") {
  const MdpSpec mdp = self_loop(1.0);
  const TabularPolicy pi = TabularPolicy::uniform(1, 1);
  const TimescaleLadder l = two_level_half();
  const QTable oracle_q = exact_q(mdp, pi, 0.75);
  const auto oracle_w = exact_w(mdp, pi, l.gammas);

  PhasedState st = make_phased_delta(l, 1, 1, 2);
  SUBCASE("phase zero errors are the oracle magnitudes") {
    const ErrorReport rep =
        measure_errors(st, oracle_q, oracle_w, 0.1, 0.75, 2, nullptr);
    CHECK(rep.delta_w[0] == doctest::Approx(2.0));
    CHECK(rep.delta_w[1] == doctest::Approx(2.0));
    CHECK(rep.total == doctest::Approx(4.0));
    CHECK(rep.holds);
  }
  SUBCASE("matching tables give zero error") {
    st.w_hat.at(0, 0, 0) = oracle_w[0].at(0, 0);
    st.w_hat.at(1, 0, 0) = oracle_w[1].at(0, 0);
    ErrorReport prev;
    prev.delta_w = {0.0, 0.0};
    const ErrorReport rep =
        measure_errors(st, oracle_q, oracle_w, 0.1, 0.75, 2, &prev);
    CHECK(rep.total == doctest::Approx(0.0));
    CHECK(rep.holds);
  }
  SUBCASE("a single perturbed cell is picked up") {
    st.w_hat.at(0, 0, 0) = oracle_w[0].at(0, 0) + 0.3;
    st.w_hat.at(1, 0, 0) = oracle_w[1].at(0, 0);
    const ErrorReport rep =
        measure_errors(st, oracle_q, oracle_w, 0.1, 0.75, 2, nullptr);
    CHECK(rep.delta_w[0] == doctest::Approx(0.3));
    CHECK(rep.delta_w[1] == doctest::Approx(0.0));
  }
}

TEST_CASE("deterministic ring error contracts exactly by gamma^k") {
  const std::vector<double> rewards = {1.0, 0.0, 0.0, 0.0, 0.0};
  const MdpSpec ring = make_ring(5, rewards);
  const TabularPolicy pi = TabularPolicy::uniform(5, 1);
  const double gamma = 0.9;
  const int k = 4;
  const QTable oracle = exact_q(ring, pi, gamma);
  PhasedState st = make_phased_td(5, 1, 1);
  double prev_err = sup_distance(st.q_hat, oracle);
  for (int t = 0; t < 6; ++t) {
    phased_td_update(st, ring, pi, gamma, k, 2);
    const double err = sup_distance(st.q_hat, oracle);
    CHECK(err == doctest::Approx(prev_err * pow_int(gamma, k)).epsilon(1e-9));
    prev_err = err;
  }
}

TEST_CASE("bounds hold empirically on a stochastic MDP (reduced protocol)") {
  const MdpSpec mdp = make_random(5, 2, 11);
  const TabularPolicy pi = TabularPolicy::uniform(5, 2);
  const double gamma = 0.9;
  const int k = 4;
  const int n = 128;
  const double eps = hoeffding_eps(k, 0.1, n);
  const QTable oracle = exact_q(mdp, pi, gamma);

  int held = 0;
  const int seeds = 20;
  for (int seed = 1; seed <= seeds; ++seed) {
    PhasedState st = make_phased_td(5, 2, n);
    ErrorReport prev = measure_errors(st, oracle, {}, eps, gamma, k, nullptr);
    bool ok = true;
    for (int t = 0; t < 10; ++t) {
      phased_td_update(st, mdp, pi, gamma, k,
                       static_cast<std::uint64_t>(seed));
      const ErrorReport rep =
          measure_errors(st, oracle, {}, eps, gamma, k, &prev);
      ok = ok && rep.holds;
      prev = rep;
    }
    held += ok ? 1 : 0;
  }
  CHECK(held >= 18);  // the full 200-seed protocol runs in the acceptance suite
}
