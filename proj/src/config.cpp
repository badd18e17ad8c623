#include "deltarl/config.hpp"

#include <fstream>

#include "deltarl/csv.hpp"

namespace deltarl {

using nlohmann::json;

nlohmann::json mdp_to_json(const MdpSpec& mdp) {
  json j;
  j["kind"] = "inline";
  j["n_states"] = mdp.n_states;
  j["n_actions"] = mdp.n_actions;
  json p = json::array();
  for (int s = 0; s < mdp.n_states; ++s) {
    json rows = json::array();
    for (int a = 0; a < mdp.n_actions; ++a) {
      json row = json::array();
      for (int s2 = 0; s2 < mdp.n_states; ++s2) row.push_back(mdp.p(s, a, s2));
      rows.push_back(std::move(row));
    }
    p.push_back(std::move(rows));
  }
  j["transition"] = std::move(p);
  json r = json::array();
  for (int s = 0; s < mdp.n_states; ++s) {
    json row = json::array();
    for (int a = 0; a < mdp.n_actions; ++a) row.push_back(mdp.r(s, a));
    r.push_back(std::move(row));
  }
  j["reward"] = std::move(r);
  j["terminal"] = mdp.terminal_list();
  return j;
}

namespace {

MdpSpec mdp_from_inline(const json& j) {
  MdpSpec mdp;
  mdp.n_states = j.at("n_states").get<int>();
  mdp.n_actions = j.at("n_actions").get<int>();
  if (mdp.n_states < 1 || mdp.n_actions < 1)
    throw ConfigError("mdp: n_states and n_actions must be positive");
  const auto& p = j.at("transition");
  const auto& r = j.at("reward");
  mdp.transition.assign(static_cast<std::size_t>(mdp.n_states) *
                            mdp.n_actions * mdp.n_states,
                        0.0);
  mdp.reward.assign(
      static_cast<std::size_t>(mdp.n_states) * mdp.n_actions, 0.0);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) {
      for (int s2 = 0; s2 < mdp.n_states; ++s2)
        mdp.p_ref(s, a, s2) = p.at(s).at(a).at(s2).get<double>();
      mdp.r_ref(s, a) = r.at(s).at(a).get<double>();
    }
  if (j.contains("terminal") && !j["terminal"].empty()) {
    mdp.terminal.assign(static_cast<std::size_t>(mdp.n_states), 0);
    for (int s : j["terminal"].get<std::vector<int>>()) {
      if (s < 0 || s >= mdp.n_states)
        throw ConfigError("mdp: terminal state id out of range");
      mdp.terminal[static_cast<std::size_t>(s)] = 1;
    }
  }
  check(mdp);
  return mdp;
}

}  // namespace

MdpSpec mdp_from_json(const json& j) {
  if (j.contains("file")) {
    const std::string path = j.at("file").get<std::string>();
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open mdp file " + path);
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("mdp file " + path + ": " + e.what());
    }
    return mdp_from_json(doc);
  }
  const std::string kind = j.value("kind", "inline");
  if (kind == "ring") {
    const int n = j.at("n_states").get<int>();
    std::vector<double> rewards;
    if (j.contains("rewards")) {
      rewards = j.at("rewards").get<std::vector<double>>();
    } else {
      // default: one unit reward at state 0
      rewards.assign(static_cast<std::size_t>(n), 0.0);
      if (n > 0) rewards[0] = 1.0;
    }
    return make_ring(n, rewards);
  }
  if (kind == "chain") {
    return make_chain(j.at("n_states").get<int>(),
                      j.value("goal_reward", 1.0), j.value("step_reward", 0.0),
                      j.value("slip", 0.0));
  }
  if (kind == "random") {
    return make_random(j.at("n_states").get<int>(),
                       j.at("n_actions").get<int>(),
                       j.value("seed", std::uint64_t{0}));
  }
  if (kind == "inline") return mdp_from_inline(j);
  throw ConfigError("unknown mdp kind '" + kind +
                    "' (expected ring | chain | random | inline)");
}

namespace {

TimescaleLadder ladder_from_json(const json& j) {
  const std::string kind = j.value("kind", "doubling");
  TimescaleLadder ladder;
  if (kind == "doubling") {
    ladder = build_doubling_ladder(j.at("Z").get<int>(), j.value("alpha", 0.1),
                                   j.value("lambda", 0.9));
  } else if (kind == "halving") {
    ladder = build_halving_ladder(j.at("Z").get<int>(),
                                  j.at("gamma_max").get<double>(),
                                  j.value("alpha", 0.1), j.value("lambda", 0.9));
  } else if (kind == "explicit") {
    ladder.gammas = j.at("gammas").get<std::vector<double>>();
    if (j.contains("ks")) {
      ladder.ks = j.at("ks").get<std::vector<int>>();
    } else {
      for (double g : ladder.gammas) ladder.ks.push_back(horizon_k(g));
    }
    const double lam = j.value("lambda", 0.9);
    const double alp = j.value("alpha", 0.1);
    ladder.lambdas = j.contains("lambdas")
                         ? j.at("lambdas").get<std::vector<double>>()
                         : std::vector<double>(ladder.gammas.size(), lam);
    ladder.alphas = j.contains("alphas")
                        ? j.at("alphas").get<std::vector<double>>()
                        : std::vector<double>(ladder.gammas.size(), alp);
  } else {
    throw ConfigError("unknown ladder kind '" + kind +
                      "' (expected doubling | halving | explicit)");
  }
  if (j.contains("uniform_k")) {
    const int k = j.at("uniform_k").get<int>();
    std::fill(ladder.ks.begin(), ladder.ks.end(), k);
  }
  if (j.contains("lambda_gamma"))
    set_matched_lambdas(ladder, j.at("lambda_gamma").get<double>());
  require_valid(ladder);
  return ladder;
}

void require_field(const json& j, const std::string& name,
                   const std::string& learner) {
  if (!j.contains(name))
    throw ConfigError("missing field '" + name + "' required by learner '" +
                      learner + "'");
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config root must be an object");
  ExperimentConfig c;
  c.doc = j;
  if (!j.contains("learner")) throw ConfigError("missing field 'learner'");
  c.learner = j.at("learner").get<std::string>();
  if (c.learner == "alg2") c.learner = "actor-critic";
  const auto& kinds = learner_kinds();
  if (std::find(kinds.begin(), kinds.end(), c.learner) == kinds.end()) {
    std::string msg = "unknown learner '" + c.learner + "'; expected one of:";
    for (const auto& k : kinds) msg += " " + k;
    msg += " (alias: alg2)";
    throw ConfigError(msg);
  }
  c.doc["learner"] = c.learner;

  require_field(j, "mdp", c.learner);
  c.mdp = mdp_from_json(j.at("mdp"));

  if (j.contains("policy") && !j.at("policy").is_string()) {
    const auto rows = j.at("policy").get<std::vector<std::vector<double>>>();
    c.policy.n_states = static_cast<int>(rows.size());
    c.policy.n_actions = rows.empty() ? 0 : static_cast<int>(rows[0].size());
    for (const auto& row : rows) {
      if (static_cast<int>(row.size()) != c.policy.n_actions)
        throw ConfigError("policy rows must have equal length");
      c.policy.probs.insert(c.policy.probs.end(), row.begin(), row.end());
    }
    check(c.policy, c.mdp);
  } else {
    c.policy = TabularPolicy::uniform(c.mdp.n_states, c.mdp.n_actions);
    c.doc["policy"] = "uniform";
  }

  const bool needs_ladder =
      c.learner == "sarsa-delta-1step" || c.learner == "sarsa-delta-multistep" ||
      c.learner == "phased-delta" || c.learner == "td-lambda-delta" ||
      c.learner == "actor-critic";
  if (needs_ladder) require_field(j, "ladder", c.learner);
  if (j.contains("ladder")) {
    c.ladder = ladder_from_json(j.at("ladder"));
    c.has_ladder = true;
  }

  const bool needs_steps =
      c.learner == "baseline-sarsa" || c.learner == "sarsa-delta-1step" ||
      c.learner == "sarsa-delta-multistep" || c.learner == "td-lambda" ||
      c.learner == "td-lambda-delta" || c.learner == "actor-critic";
  if (needs_steps) require_field(j, "steps", c.learner);
  const bool phased =
      c.learner == "phased-td" || c.learner == "phased-delta";
  if (phased) {
    require_field(j, "phases", c.learner);
    require_field(j, "n", c.learner);
  }
  if (c.learner == "phased-td" || c.learner == "baseline-sarsa" ||
      c.learner == "td-lambda")
    require_field(j, "gamma", c.learner);
  if (c.learner == "phased-td") require_field(j, "k", c.learner);

  auto fill = [&](const char* name, auto& field) {
    using T = std::decay_t<decltype(field)>;
    if (j.contains(name))
      field = j.at(name).get<T>();
    else
      c.doc[name] = field;
  };
  fill("steps", c.steps);
  fill("phases", c.phases);
  fill("n", c.n);
  fill("confidence_delta", c.confidence_delta);
  fill("gamma", c.gamma);
  fill("alpha", c.alpha);
  fill("lambda", c.lambda);
  fill("k", c.k);
  fill("T", c.window);
  fill("epsilon", c.epsilon);
  fill("alpha_policy", c.alpha_policy);
  fill("entropy_coeff", c.entropy_coeff);
  fill("alpha_decay", c.alpha_decay);
  fill("control", c.control);
  fill("bootstrap", c.bootstrap);
  fill("episode_cap", c.episode_cap);
  fill("start_state", c.start_state);
  fill("log_every", c.log_every);
  fill("out_dir", c.out_dir);
  if (j.contains("seeds")) {
    c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  } else {
    c.seeds = {1};
    c.doc["seeds"] = c.seeds;
  }

  if (c.bootstrap != "on-policy" && c.bootstrap != "greedy")
    throw ConfigError("field 'bootstrap' must be 'on-policy' or 'greedy'");
  if (c.gamma < 0.0 || c.gamma >= 1.0)
    throw ConfigError("field 'gamma' must lie in [0, 1)");
  if (c.epsilon < 0.0 || c.epsilon > 1.0)
    throw ConfigError("field 'epsilon' must lie in [0, 1]");
  if (needs_steps && c.steps < 1)
    throw ConfigError("field 'steps' must be positive");
  if (phased && (c.phases < 1 || c.n < 1))
    throw ConfigError("fields 'phases' and 'n' must be positive");
  if (phased && (c.confidence_delta <= 0.0 || c.confidence_delta >= 1.0))
    throw ConfigError("field 'confidence_delta' must lie in (0, 1)");
  if (c.start_state < 0 || c.start_state >= c.mdp.n_states)
    throw ConfigError("field 'start_state' out of range");
  if (c.log_every < 1) throw ConfigError("field 'log_every' must be positive");
  if (c.episode_cap < 1)
    throw ConfigError("field 'episode_cap' must be positive");
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return config_from_json(doc);
}

void save_config(const ExperimentConfig& config, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out << config.doc.dump(2) << "\n";
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  return fnv1a64(config.doc.dump());
}

}  // namespace deltarl
