#include "deltarl/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <future>

#include "deltarl/actor_critic.hpp"
#include "deltarl/csv.hpp"
#include "deltarl/phased.hpp"
#include "deltarl/tabular.hpp"

namespace deltarl {

std::string write_delta_table_csv(const DeltaTable& table,
                                  const std::string& path,
                                  std::uint64_t config_hash) {
  const std::vector<std::string> header = {"z",      "gamma", "state",
                                           "action", "w",     "q"};
  CsvWriter csv(path, config_hash, header);
  for (int z = 0; z < table.ladder.levels(); ++z)
    for (int s = 0; s < table.n_states; ++s)
      for (int a = 0; a < table.n_actions; ++a) {
        const double row[] = {
            static_cast<double>(z),
            table.ladder.gammas[static_cast<std::size_t>(z)],
            static_cast<double>(s),
            static_cast<double>(a),
            table.at(z, s, a),
            table.q_at(z, s, a)};
        csv.row(std::span<const double>(row));
      }
  return path;
}

namespace {

namespace fs = std::filesystem;

std::string run_path(const ExperimentConfig& c, std::uint64_t seed,
                     const std::string& tag = "") {
  fs::create_directories(c.out_dir);
  return (fs::path(c.out_dir) /
          (c.learner + tag + "-seed" + std::to_string(seed) + ".csv"))
      .string();
}

std::vector<std::string> delta_header(const TimescaleLadder& ladder,
                                      std::initializer_list<std::string> lead,
                                      const std::string& stem) {
  std::vector<std::string> h(lead);
  for (int z = 0; z < ladder.levels(); ++z)
    h.push_back(stem + std::to_string(z));
  return h;
}

// Shared environment loop for the online tabular learners. Episodes end on
// terminal entry or at the episode cap; continuing MDPs run as one stream.
template <typename Observe, typename Flush, typename SelectAction,
          typename OnStep, typename OnEpisode>
void drive_env(const ExperimentConfig& c, std::uint64_t seed, Observe observe,
               Flush flush, SelectAction select, OnStep on_step,
               OnEpisode on_episode) {
  Rng rng(derive_seed(seed, {0x72756e}));
  const bool episodic = !c.mdp.terminal_list().empty();
  int s = c.start_state;
  int a = select(s, rng);
  double ep_return = 0.0;
  long ep_len = 0;
  long episode = 0;
  for (long t = 1; t <= c.steps; ++t) {
    const auto [r, s2] = step(c.mdp, s, a, rng);
    const int a2 = select(s2, rng);
    const bool done = c.mdp.is_terminal(s2);
    observe(TransitionStep{s, a, r, s2, a2, done});
    ep_return += r;
    ++ep_len;
    const bool cut = done || ep_len >= c.episode_cap;
    if (cut && episodic) {
      flush();
      on_episode(episode++, ep_return, ep_len);
      ep_return = 0.0;
      ep_len = 0;
      s = c.start_state;
      a = select(s, rng);
    } else {
      s = s2;
      a = a2;
    }
    on_step(t);
  }
  flush();
}

RunResult run_tabular(const ExperimentConfig& c, std::uint64_t seed) {
  RunResult res;
  res.config_hash = config_hash(c);
  res.seed = seed;

  const bool is_baseline = c.learner == "baseline-sarsa";
  const bool multi = c.learner == "sarsa-delta-multistep";
  const double gamma_top = is_baseline ? c.gamma : c.ladder.gamma_top();
  const BootstrapMode mode = c.bootstrap == "greedy" ? BootstrapMode::greedy
                                                     : BootstrapMode::on_policy;

  BaselineSarsaLearner base(c.mdp.n_states, c.mdp.n_actions, c.gamma, c.alpha);
  DeltaSarsaLearner delta(
      is_baseline ? build_doubling_ladder(0, c.alpha, c.lambda) : c.ladder,
      c.mdp.n_states, c.mdp.n_actions, multi);
  base.set_visit_decay(c.alpha_decay);
  base.set_bootstrap_mode(mode);
  delta.set_visit_decay(c.alpha_decay);
  delta.set_bootstrap_mode(mode);

  auto current_q = [&]() -> QTable {
    return is_baseline ? base.table() : delta.top_q();
  };

  if (c.control) {
    std::vector<std::string> header = {"episode", "return", "length"};
    CsvWriter csv(run_path(c, seed), res.config_hash, header);
    double last_return = 0.0;
    std::vector<double> returns;
    drive_env(
        c, seed,
        [&](const TransitionStep& t) {
          if (is_baseline)
            base.observe(t);
          else
            delta.observe(t);
        },
        [&]() {
          if (!is_baseline) delta.flush();
        },
        [&](int s, Rng& rng) {
          const QTable q = current_q();
          return select_action(q, s, c.epsilon, rng);
        },
        [&](long) {},
        [&](long episode, double ret, long len) {
          const double row[] = {static_cast<double>(episode), ret,
                                static_cast<double>(len)};
          csv.row(std::span<const double>(row));
          returns.push_back(ret);
          last_return = ret;
        });
    res.csv_path = csv.path();
    const std::size_t tail = std::min<std::size_t>(returns.size(), 100);
    double mean = 0.0;
    for (std::size_t i = returns.size() - tail; i < returns.size(); ++i)
      mean += returns[i];
    res.final_metric = tail > 0 ? mean / static_cast<double>(tail) : 0.0;
    if (!is_baseline)
      write_delta_table_csv(delta.table(), run_path(c, seed, "-tables"),
                            res.config_hash);
    return res;
  }

  // Evaluation mode: fixed policy, error curves against the exact solve.
  const QTable oracle = exact_q(c.mdp, c.policy, gamma_top);
  std::vector<QTable> oracle_w;
  if (!is_baseline) oracle_w = exact_w(c.mdp, c.policy, c.ladder.gammas);

  std::vector<std::string> header =
      is_baseline ? std::vector<std::string>{"step", "sup_err"}
                  : delta_header(c.ladder, {"step", "sup_err"}, "err_w");
  CsvWriter csv(run_path(c, seed), res.config_hash, header);

  auto log_row = [&](long t) {
    std::vector<double> row;
    row.push_back(static_cast<double>(t));
    row.push_back(sup_distance(current_q(), oracle));
    if (!is_baseline) {
      for (int z = 0; z < c.ladder.levels(); ++z) {
        double m = 0.0;
        for (int s = 0; s < c.mdp.n_states; ++s)
          for (int a = 0; a < c.mdp.n_actions; ++a)
            m = std::max(m, std::abs(delta.table().at(z, s, a) -
                                     oracle_w[static_cast<std::size_t>(z)].at(
                                         s, a)));
        row.push_back(m);
      }
    }
    csv.row(std::span<const double>(row));
  };

  drive_env(
      c, seed,
      [&](const TransitionStep& t) {
        if (is_baseline)
          base.observe(t);
        else
          delta.observe(t);
      },
      [&]() {
        if (!is_baseline) delta.flush();
      },
      [&](int s, Rng& rng) { return rng.categorical(c.policy.row(s)); },
      [&](long t) {
        if (t % c.log_every == 0 || t == c.steps) log_row(t);
      },
      [&](long, double, long) {});

  res.csv_path = csv.path();
  res.final_metric = sup_distance(current_q(), oracle);
  if (!is_baseline)
    write_delta_table_csv(delta.table(), run_path(c, seed, "-tables"),
                          res.config_hash);
  return res;
}

RunResult run_phased(const ExperimentConfig& c, std::uint64_t seed) {
  RunResult res;
  res.config_hash = config_hash(c);
  res.seed = seed;

  const bool is_delta = c.learner == "phased-delta";
  const double gamma = is_delta ? c.ladder.gamma_top() : c.gamma;
  const int k = is_delta ? c.ladder.k_top() : c.k;
  const double eps = hoeffding_eps(k, c.confidence_delta, c.n);

  const QTable oracle_q = exact_q(c.mdp, c.policy, gamma);
  std::vector<QTable> oracle_w;
  if (is_delta) oracle_w = exact_w(c.mdp, c.policy, c.ladder.gammas);

  PhasedState state =
      is_delta ? make_phased_delta(c.ladder, c.mdp.n_states, c.mdp.n_actions,
                                   c.n)
               : make_phased_td(c.mdp.n_states, c.mdp.n_actions, c.n);

  std::vector<std::string> header =
      is_delta ? delta_header(c.ladder, {"phase"}, "err_w")
               : std::vector<std::string>{"phase"};
  if (is_delta) header.push_back("total_err");
  if (!is_delta) header.push_back("err");
  header.push_back("bound_rhs");
  header.push_back("holds");
  CsvWriter csv(run_path(c, seed), res.config_hash, header);

  auto emit = [&](const ErrorReport& rep) {
    std::vector<double> row;
    row.push_back(static_cast<double>(state.phase));
    if (is_delta) {
      for (double e : rep.delta_w) row.push_back(e);
      row.push_back(rep.total);
    } else {
      row.push_back(rep.delta_q);
    }
    row.push_back(rep.bound_rhs);
    row.push_back(rep.holds ? 1.0 : 0.0);
    csv.row(std::span<const double>(row));
  };

  ErrorReport prev =
      measure_errors(state, oracle_q, oracle_w, eps, gamma, k, nullptr);
  emit(prev);
  bool all_hold = true;
  for (int t = 0; t < c.phases; ++t) {
    if (is_delta)
      phased_delta_update(state, c.mdp, c.policy, seed);
    else
      phased_td_update(state, c.mdp, c.policy, gamma, k, seed);
    const ErrorReport rep =
        measure_errors(state, oracle_q, oracle_w, eps, gamma, k, &prev);
    emit(rep);
    all_hold = all_hold && rep.holds;
    prev = rep;
  }
  res.csv_path = csv.path();
  res.final_metric = prev.total;
  res.bounds_held = all_hold;
  return res;
}

RunResult run_td_lambda(const ExperimentConfig& c, std::uint64_t seed) {
  RunResult res;
  res.config_hash = config_hash(c);
  res.seed = seed;

  if (!c.mdp.terminal_list().empty())
    throw ConfigError("td-lambda learners expect a continuing MDP");
  const bool is_delta = c.learner == "td-lambda-delta";
  const double gamma = is_delta ? c.ladder.gamma_top() : c.gamma;
  const int T = c.window;

  const FeatureMap fm = FeatureMap::one_hot(c.mdp.n_states, c.mdp.n_actions);
  const TimescaleLadder ladder =
      is_delta ? c.ladder : build_doubling_ladder(0, c.alpha, c.lambda);
  LinearDeltaModel model = LinearDeltaModel::zeros(ladder, fm.dim());

  const QTable oracle = exact_q(c.mdp, c.policy, gamma);
  std::vector<QTable> oracle_w;
  if (is_delta) oracle_w = exact_w(c.mdp, c.policy, c.ladder.gammas);

  std::vector<std::string> header =
      is_delta ? delta_header(c.ladder, {"step", "sup_err"}, "err_w")
               : std::vector<std::string>{"step", "sup_err"};
  CsvWriter csv(run_path(c, seed), res.config_hash, header);

  Rng rng(derive_seed(seed, {0x72756e}));
  const int start_action = rng.categorical(c.policy.row(c.start_state));
  const Trajectory stream =
      sample_trajectory(c.mdp, c.policy, c.start_state, start_action,
                        static_cast<int>(c.steps) + T, rng);
  const std::span<const TransitionStep> all(stream.steps);

  auto estimate = [&](int s, int a) {
    return is_delta ? model.q_prefix(fm, model.ladder.top(), s, a)
                    : model.q_mono(fm, s, a);
  };
  auto sup_err = [&]() {
    double m = 0.0;
    for (int s = 0; s < c.mdp.n_states; ++s)
      for (int a = 0; a < c.mdp.n_actions; ++a)
        m = std::max(m, std::abs(estimate(s, a) - oracle.at(s, a)));
    return m;
  };
  auto log_row = [&](long t) {
    std::vector<double> row;
    row.push_back(static_cast<double>(t));
    row.push_back(sup_err());
    if (is_delta) {
      for (int z = 0; z < c.ladder.levels(); ++z) {
        double m = 0.0;
        for (int s = 0; s < c.mdp.n_states; ++s)
          for (int a = 0; a < c.mdp.n_actions; ++a)
            m = std::max(m, std::abs(model.w_hat(fm, z, s, a) -
                                     oracle_w[static_cast<std::size_t>(z)].at(
                                         s, a)));
        row.push_back(m);
      }
    }
    csv.row(std::span<const double>(row));
  };

  for (long t = 0; t < c.steps; ++t) {
    const auto window = all.subspan(static_cast<std::size_t>(t),
                                    static_cast<std::size_t>(T));
    if (is_delta)
      tdlambda_delta_update(model, window, fm, model.ladder.alphas, T);
    else
      tdlambda_update(model, window, fm, gamma, c.lambda, c.alpha, T);
    if ((t + 1) % c.log_every == 0 || t + 1 == c.steps) log_row(t + 1);
  }
  res.csv_path = csv.path();
  res.final_metric = sup_err();
  return res;
}

RunResult run_actor_critic_config(const ExperimentConfig& c,
                                  std::uint64_t seed) {
  RunResult res;
  res.config_hash = config_hash(c);
  res.seed = seed;

  ActorCriticOptions opt;
  opt.window = c.window;
  opt.total_steps = c.steps;
  opt.alpha_policy = c.alpha_policy;
  opt.entropy_coeff = c.entropy_coeff;
  opt.episode_cap = c.episode_cap;
  opt.start_state = c.start_state;

  const ActorCriticResult out = run_actor_critic(c.mdp, c.ladder, opt, seed);

  std::vector<std::string> header = delta_header(
      c.ladder, {"episode", "return", "length", "mean_abs_advantage"},
      "critic_loss_w");
  CsvWriter csv(run_path(c, seed), res.config_hash, header);
  for (const auto& ep : out.episodes) {
    std::vector<double> row = {static_cast<double>(ep.episode), ep.ret,
                               static_cast<double>(ep.length),
                               ep.mean_abs_advantage};
    for (double l : ep.critic_loss) row.push_back(l);
    csv.row(std::span<const double>(row));
  }
  res.csv_path = csv.path();
  if (out.diverged)
    throw DivergenceError("actor-critic run diverged at step " +
                          std::to_string(out.steps));
  const std::size_t tail = std::min<std::size_t>(out.episodes.size(), 100);
  double mean = 0.0;
  for (std::size_t i = out.episodes.size() - tail; i < out.episodes.size();
       ++i)
    mean += out.episodes[i].ret;
  res.final_metric = tail > 0 ? mean / static_cast<double>(tail) : 0.0;
  return res;
}

}  // namespace

RunResult run(const ExperimentConfig& config, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  RunResult res;
  if (config.learner == "baseline-sarsa" ||
      config.learner == "sarsa-delta-1step" ||
      config.learner == "sarsa-delta-multistep") {
    res = run_tabular(config, seed);
  } else if (config.learner == "phased-td" ||
             config.learner == "phased-delta") {
    res = run_phased(config, seed);
  } else if (config.learner == "td-lambda" ||
             config.learner == "td-lambda-delta") {
    res = run_td_lambda(config, seed);
  } else if (config.learner == "actor-critic") {
    res = run_actor_critic_config(config, seed);
  } else {
    throw ConfigError("unknown learner '" + config.learner + "'");
  }
  res.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return res;
}

std::vector<RunResult> sweep(const ExperimentConfig& config,
                             const std::string& axis,
                             const std::vector<nlohmann::json>& values,
                             int jobs) {
  static const std::vector<std::string> axes = {"Z", "k", "n", "alpha",
                                                "lambda"};
  if (std::find(axes.begin(), axes.end(), axis) == axes.end()) {
    std::string msg = "axis '" + axis + "' is not sweepable; expected one of:";
    for (const auto& a : axes) msg += " " + a;
    throw ConfigError(msg);
  }
  if (jobs < 1) jobs = 1;

  struct Job {
    ExperimentConfig config;
    std::uint64_t seed;
    std::string value_text;
  };
  std::vector<Job> todo;
  for (const auto& v : values) {
    nlohmann::json doc = config.doc;
    if (axis == "Z") {
      if (!doc.contains("ladder"))
        throw ConfigError("axis 'Z' needs a ladder in the config");
      doc["ladder"]["Z"] = v;
    } else if (axis == "n") {
      doc["n"] = v;
    } else if (axis == "alpha") {
      doc["alpha"] = v;
      if (doc.contains("ladder")) doc["ladder"]["alpha"] = v;
    } else if (axis == "lambda") {
      doc["lambda"] = v;
      if (doc.contains("ladder")) doc["ladder"]["lambda"] = v;
    } else if (axis == "k") {
      doc["k"] = v;
      if (doc.contains("ladder")) doc["ladder"]["uniform_k"] = v;
    }
    ExperimentConfig patched = config_from_json(doc);
    const std::string text = v.dump();
    patched.out_dir =
        (std::filesystem::path(config.out_dir) / (axis + "=" + text)).string();
    for (std::uint64_t seed : patched.seeds)
      todo.push_back(Job{patched, seed, text});
  }

  std::vector<RunResult> results(todo.size());
  std::size_t next = 0;
  while (next < todo.size()) {
    const std::size_t batch =
        std::min<std::size_t>(static_cast<std::size_t>(jobs),
                              todo.size() - next);
    std::vector<std::future<RunResult>> futures;
    for (std::size_t i = 0; i < batch; ++i) {
      const Job& job = todo[next + i];
      futures.push_back(std::async(std::launch::async, [&job]() {
        return run(job.config, job.seed);
      }));
    }
    for (std::size_t i = 0; i < batch; ++i)
      results[next + i] = futures[i].get();
    next += batch;
  }

  std::filesystem::create_directories(config.out_dir);
  const std::string agg_path =
      (std::filesystem::path(config.out_dir) / "sweep.csv").string();
  const std::vector<std::string> header = {"axis", "value", "seed",
                                           "final_metric", "bounds_held",
                                           "csv"};
  CsvWriter csv(agg_path, config_hash(config), header);
  for (std::size_t i = 0; i < todo.size(); ++i) {
    const std::vector<std::string> row = {
        axis,
        todo[i].value_text,
        std::to_string(todo[i].seed),
        format_double(results[i].final_metric),
        results[i].bounds_held ? "1" : "0",
        results[i].csv_path};
    csv.row(std::span<const std::string>(row));
  }
  return results;
}

std::string oracle_dump(const ExperimentConfig& config) {
  std::filesystem::create_directories(config.out_dir);
  const std::string path =
      (std::filesystem::path(config.out_dir) / "oracle.csv").string();
  if (config.has_ladder) {
    const auto w = exact_w(config.mdp, config.policy, config.ladder.gammas);
    std::vector<QTable> q;
    for (double g : config.ladder.gammas)
      q.push_back(exact_q(config.mdp, config.policy, g));
    const std::vector<std::string> header = {"z",     "gamma", "state",
                                             "action", "q",     "w"};
    CsvWriter csv(path, config_hash(config), header);
    for (int z = 0; z < config.ladder.levels(); ++z)
      for (int s = 0; s < config.mdp.n_states; ++s)
        for (int a = 0; a < config.mdp.n_actions; ++a) {
          const double row[] = {
              static_cast<double>(z),
              config.ladder.gammas[static_cast<std::size_t>(z)],
              static_cast<double>(s),
              static_cast<double>(a),
              q[static_cast<std::size_t>(z)].at(s, a),
              w[static_cast<std::size_t>(z)].at(s, a)};
          csv.row(std::span<const double>(row));
        }
    return path;
  }
  const QTable q = exact_q(config.mdp, config.policy, config.gamma);
  const std::vector<std::string> header = {"state", "action", "q"};
  CsvWriter csv(path, config_hash(config), header);
  for (int s = 0; s < config.mdp.n_states; ++s)
    for (int a = 0; a < config.mdp.n_actions; ++a) {
      const double row[] = {static_cast<double>(s), static_cast<double>(a),
                            q.at(s, a)};
      csv.row(std::span<const double>(row));
    }
  return path;
}

}  // namespace deltarl
