#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "retra/ddpg.hpp"
#include "retra/errors.hpp"
#include "retra/gru_train.hpp"
#include "retra/json_io.hpp"
#include "retra/pairs/johansen.hpp"
#include "retra/signal.hpp"

namespace retra {

struct eval_config {
    int episodes = 500;   // M
    int steps = 2000;     // n
    int grid_points = 21; // policy-grid resolution per axis
};

struct pairs_run_config {
    std::string first_message_file;
    std::string first_orderbook_file;
    std::string second_message_file;
    std::string second_orderbook_file;
    std::string pair_file;      // written by pairs-ingest, read downstream
    std::string portfolio_file; // written by pairs-coint, read by pairs-backtest
    double train_end_timestamp = std::nan("");
    double grid_seconds = 1.0;
    int zscore_window = 100;
    double lambda = 0.05;
    double i_max = 10.0;
    int w = 100;
    int hamilton_max_iter = 500;
    johansen_spec johansen;
    std::vector<std::string> strategies = {"zscore"};
};

struct run_config {
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    std::string setting = "theta"; // theta | theta_kappa | theta_kappa_sigma

    env_config env;
    filter_target target = filter_target::theta;
    gru_stack_spec gru;
    filter_train_config filter_train;
    std::string filter_dir; // defaults to <output_dir>/filter after resolve_paths

    pipeline_kind pipeline = pipeline_kind::prob;
    agent_arch arch;
    feature_bounds bounds;
    agent_train_config agent_train;
    std::string agent_dir; // defaults to <output_dir>/agent after resolve_paths

    eval_config eval;
    pairs_run_config pairs;
};

namespace detail {

inline void reject_unknown(const nlohmann::json& obj, const std::string& file, const std::string& section,
                           std::initializer_list<const char*> allowed) {
    if (obj.is_null()) return;
    if (!obj.is_object())
        throw config_error(file + ": section '" + section + "' must be a JSON object");
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* key : allowed)
            if (item.key() == key) {
                known = true;
                break;
            }
        if (!known)
            throw config_error(file + ": unknown key '" + (section.empty() ? "" : section + ".") + item.key() + "'");
    }
}

inline filter_target target_from_name(const std::string& name) {
    if (name == "theta") return filter_target::theta;
    if (name == "kappa") return filter_target::kappa;
    if (name == "sigma") return filter_target::sigma;
    throw config_error("config: unknown filter target '" + name + "' (theta|kappa|sigma)");
}

inline gate_kind gate_from_name(const std::string& name) {
    if (name == "logistic") return gate_kind::logistic;
    if (name == "tanh") return gate_kind::tanh_gate;
    throw config_error("config: unknown gate activation '" + name + "' (logistic|tanh)");
}

inline head_kind head_from_name(const std::string& name) {
    if (name == "classifier") return head_kind::classifier;
    if (name == "regressor") return head_kind::regressor;
    if (name == "feature") return head_kind::feature;
    throw config_error("config: unknown head '" + name + "' (classifier|regressor|feature)");
}

inline env_config env_for_setting(const std::string& setting) {
    if (setting == "theta") return theta_only_env();
    if (setting == "theta_kappa") return theta_kappa_env();
    if (setting == "theta_kappa_sigma") return theta_kappa_sigma_env();
    throw config_error("config: unknown env.setting '" + setting + "' (theta|theta_kappa|theta_kappa_sigma)");
}

// Look-back defaults: 10 everywhere except the regression filter (50) and
// the probability filter in the full three-chain setting (20).
inline int default_window(pipeline_kind pipeline, const std::string& setting) {
    if (pipeline == pipeline_kind::reg) return 50;
    if (pipeline == pipeline_kind::prob && setting == "theta_kappa_sigma") return 20;
    return 10;
}

}  // namespace detail

// Loads and validates the JSON run configuration. Architecture and training
// defaults depend on agent.pipeline and env.setting, so those two keys are
// read first and every explicit key then overrides its default.
inline run_config load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file '" + path + "'");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw config_error(path + ": " + e.what());
    }

    detail::reject_unknown(doc, path, "", {"seed", "output_dir", "env", "gru", "agent", "eval", "pairs"});
    run_config cfg;
    cfg.seed = doc.value("seed", std::uint64_t{1});
    cfg.output_dir = doc.value("output_dir", std::string("out"));

    const nlohmann::json env = doc.value("env", nlohmann::json::object());
    const nlohmann::json gru = doc.value("gru", nlohmann::json::object());
    const nlohmann::json agent = doc.value("agent", nlohmann::json::object());
    const nlohmann::json eval = doc.value("eval", nlohmann::json::object());
    const nlohmann::json pairs = doc.value("pairs", nlohmann::json::object());

    detail::reject_unknown(env, path, "env",
                           {"setting", "dt", "w", "i_min", "i_max", "lambda", "gamma", "mu_inv", "theta", "kappa",
                            "sigma"});
    detail::reject_unknown(gru, path, "gru",
                           {"layers", "hidden", "gate", "head", "classes", "head_layers", "head_width",
                            "scalar_feature", "target", "iterations", "batch", "lr", "weight_decay", "halve_every",
                            "model_dir"});
    detail::reject_unknown(agent, path, "agent",
                           {"pipeline", "layers", "width", "iterations", "batch", "critic_repeats", "actor_repeats",
                            "tau", "explore_a", "eps_min", "actor_lr", "critic_lr", "filter_lr", "weight_decay",
                            "halve_every", "s_lo", "s_hi", "model_dir"});
    detail::reject_unknown(eval, path, "eval", {"episodes", "steps", "grid_points"});
    detail::reject_unknown(pairs, path, "pairs",
                           {"first_message_file", "first_orderbook_file", "second_message_file",
                            "second_orderbook_file", "pair_file", "portfolio_file", "train_end_timestamp",
                            "grid_seconds", "zscore_window", "lambda", "i_max", "w", "hamilton_max_iter", "johansen",
                            "strategies"});

    // pipeline and setting steer the remaining defaults
    cfg.pipeline = pipeline_from_name(agent.value("pipeline", std::string("prob")));
    cfg.setting = env.value("setting", std::string("theta"));

    cfg.env = detail::env_for_setting(cfg.setting);
    cfg.env.w = detail::default_window(cfg.pipeline, cfg.setting);
    if (env.contains("dt")) cfg.env.dt = env.at("dt").get<double>();
    if (env.contains("w")) cfg.env.w = env.at("w").get<int>();
    if (env.contains("i_min")) cfg.env.i_min = env.at("i_min").get<double>();
    if (env.contains("i_max")) cfg.env.i_max = env.at("i_max").get<double>();
    if (env.contains("lambda")) cfg.env.lambda = env.at("lambda").get<double>();
    if (env.contains("gamma")) cfg.env.gamma = env.at("gamma").get<double>();
    if (env.contains("mu_inv")) cfg.env.mu_inv = env.at("mu_inv").get<double>();
    if (env.contains("theta")) cfg.env.theta = chain_from_json(env.at("theta"), "env.theta");
    if (env.contains("kappa")) cfg.env.kappa = chain_from_json(env.at("kappa"), "env.kappa");
    if (env.contains("sigma")) cfg.env.sigma = chain_from_json(env.at("sigma"), "env.sigma");
    cfg.env.validate();

    cfg.target = detail::target_from_name(gru.value("target", std::string("theta")));

    // filter architecture; the one-step pipeline carries a small GRU whose
    // hidden state is the feature, the two-step pipelines a deeper encoder
    if (cfg.pipeline == pipeline_kind::hid) {
        cfg.gru.gru.layers = cfg.setting == "theta_kappa_sigma" ? 2 : 1;
        cfg.gru.gru.hidden = 10;
        cfg.gru.head = head_kind::feature;
    } else {
        cfg.gru.gru.layers = 5;
        cfg.gru.gru.hidden = 20;
        cfg.gru.head = cfg.pipeline == pipeline_kind::prob ? head_kind::classifier : head_kind::regressor;
    }
    cfg.gru.gru.input = 1;
    cfg.gru.head_layers = 5;
    cfg.gru.head_width = 64;
    if (gru.contains("layers")) cfg.gru.gru.layers = gru.at("layers").get<int>();
    if (gru.contains("hidden")) cfg.gru.gru.hidden = gru.at("hidden").get<int>();
    if (gru.contains("gate")) cfg.gru.gru.gate = detail::gate_from_name(gru.at("gate").get<std::string>());
    if (gru.contains("head")) cfg.gru.head = detail::head_from_name(gru.at("head").get<std::string>());
    if (gru.contains("head_layers")) cfg.gru.head_layers = gru.at("head_layers").get<int>();
    if (gru.contains("head_width")) cfg.gru.head_width = gru.at("head_width").get<int>();
    if (gru.contains("scalar_feature")) cfg.gru.scalar_feature = gru.at("scalar_feature").get<bool>();
    cfg.gru.window = cfg.env.w; // one look-back for the filter and the features

    switch (cfg.target) {
    case filter_target::theta: cfg.gru.classes = static_cast<int>(cfg.env.theta.size()); break;
    case filter_target::kappa: cfg.gru.classes = static_cast<int>(cfg.env.kappa.size()); break;
    case filter_target::sigma: cfg.gru.classes = static_cast<int>(cfg.env.sigma.size()); break;
    }
    if (gru.contains("classes")) cfg.gru.classes = gru.at("classes").get<int>();

    cfg.filter_train.iterations = gru.value("iterations", 10000);
    cfg.filter_train.batch = gru.value("batch", 512);
    cfg.filter_train.opt.lr = gru.value("lr", 1e-3);
    cfg.filter_train.opt.weight_decay = gru.value("weight_decay", 1e-4);
    cfg.filter_train.opt.halve_every = gru.value("halve_every", 0L);
    cfg.filter_dir = gru.value("model_dir", std::string());

    cfg.arch = cfg.pipeline == pipeline_kind::hid ? agent_arch{4, 20} : agent_arch{5, 64};
    if (agent.contains("layers")) cfg.arch.layers = agent.at("layers").get<int>();
    if (agent.contains("width")) cfg.arch.width = agent.at("width").get<int>();
    if (agent.contains("s_lo")) cfg.bounds.s_lo = agent.at("s_lo").get<double>();
    if (agent.contains("s_hi")) cfg.bounds.s_hi = agent.at("s_hi").get<double>();
    cfg.bounds.validate();

    cfg.agent_train.iterations = agent.value("iterations", 10000);
    cfg.agent_train.batch = agent.value("batch", 512);
    cfg.agent_train.critic_repeats = agent.value("critic_repeats", 1);
    cfg.agent_train.actor_repeats = agent.value("actor_repeats", 5);
    cfg.agent_train.tau = agent.value("tau", 0.001);
    cfg.agent_train.explore_a = agent.value("explore_a", 100.0);
    cfg.agent_train.eps_min = agent.value("eps_min", 0.01);
    cfg.agent_train.actor_opt.lr = agent.value("actor_lr", 1e-3);
    cfg.agent_train.critic_opt.lr = agent.value("critic_lr", 1e-3);
    cfg.agent_train.filter_opt.lr = agent.value("filter_lr", 1e-3);
    const double agent_wd = agent.value("weight_decay", 1e-4);
    const long agent_halve = agent.value("halve_every", 0L);
    cfg.agent_train.actor_opt.weight_decay = agent_wd;
    cfg.agent_train.critic_opt.weight_decay = agent_wd;
    cfg.agent_train.filter_opt.weight_decay = agent_wd;
    cfg.agent_train.actor_opt.halve_every = agent_halve;
    cfg.agent_train.critic_opt.halve_every = agent_halve;
    cfg.agent_train.filter_opt.halve_every = agent_halve;
    cfg.agent_dir = agent.value("model_dir", std::string());

    cfg.eval.episodes = eval.value("episodes", 500);
    cfg.eval.steps = eval.value("steps", 2000);
    cfg.eval.grid_points = eval.value("grid_points", 21);
    if (cfg.eval.episodes < 1) throw config_error(path + ": eval.episodes must be at least 1");
    if (cfg.eval.steps < 1) throw config_error(path + ": eval.steps must be at least 1");
    if (cfg.eval.grid_points < 2) throw config_error(path + ": eval.grid_points must be at least 2");

    cfg.pairs.first_message_file = pairs.value("first_message_file", std::string());
    cfg.pairs.first_orderbook_file = pairs.value("first_orderbook_file", std::string());
    cfg.pairs.second_message_file = pairs.value("second_message_file", std::string());
    cfg.pairs.second_orderbook_file = pairs.value("second_orderbook_file", std::string());
    cfg.pairs.pair_file = pairs.value("pair_file", std::string());
    cfg.pairs.portfolio_file = pairs.value("portfolio_file", std::string());
    if (pairs.contains("train_end_timestamp"))
        cfg.pairs.train_end_timestamp = pairs.at("train_end_timestamp").get<double>();
    cfg.pairs.grid_seconds = pairs.value("grid_seconds", 1.0);
    cfg.pairs.zscore_window = pairs.value("zscore_window", 100);
    cfg.pairs.lambda = pairs.value("lambda", 0.05);
    cfg.pairs.i_max = pairs.value("i_max", 10.0);
    cfg.pairs.w = pairs.value("w", 100);
    cfg.pairs.hamilton_max_iter = pairs.value("hamilton_max_iter", 500);
    if (pairs.contains("johansen")) {
        const nlohmann::json jo = pairs.at("johansen");
        detail::reject_unknown(jo, path, "pairs.johansen", {"deterministic", "trace_critical", "max_eig_critical"});
        if (jo.contains("deterministic"))
            cfg.pairs.johansen.deterministic =
                johansen_deterministic_from_name(jo.at("deterministic").get<std::string>());
        cfg.pairs.johansen.trace_critical = jo.value("trace_critical", cfg.pairs.johansen.trace_critical);
        cfg.pairs.johansen.max_eig_critical = jo.value("max_eig_critical", cfg.pairs.johansen.max_eig_critical);
    }
    if (pairs.contains("strategies")) {
        cfg.pairs.strategies = pairs.at("strategies").get<std::vector<std::string>>();
        for (const std::string& s : cfg.pairs.strategies)
            if (s != "zscore" && s != "hid" && s != "prob" && s != "reg")
                throw config_error(path + ": pairs.strategies entry '" + s + "' (zscore|hid|prob|reg)");
    }
    if (cfg.pairs.grid_seconds <= 0.0) throw config_error(path + ": pairs.grid_seconds must be positive");
    if (cfg.pairs.zscore_window < 2) throw config_error(path + ": pairs.zscore_window must be at least 2");
    if (cfg.pairs.w < 1) throw config_error(path + ": pairs.w must be at least 1");

    if (cfg.filter_train.iterations < 0) throw config_error(path + ": gru.iterations must be non-negative");
    if (cfg.filter_train.batch < 1) throw config_error(path + ": gru.batch must be at least 1");
    if (cfg.agent_train.iterations < 0) throw config_error(path + ": agent.iterations must be non-negative");
    if (cfg.agent_train.batch < 1) throw config_error(path + ": agent.batch must be at least 1");
    return cfg;
}

// Fills the model directories from output_dir; runs after any command-line
// overrides so relative artifacts land together.
inline void resolve_paths(run_config& cfg) {
    if (cfg.filter_dir.empty()) cfg.filter_dir = cfg.output_dir + "/filter";
    if (cfg.agent_dir.empty()) cfg.agent_dir = cfg.output_dir + "/agent";
    if (cfg.pairs.pair_file.empty()) cfg.pairs.pair_file = cfg.output_dir + "/pair_series.csv";
    if (cfg.pairs.portfolio_file.empty()) cfg.pairs.portfolio_file = cfg.output_dir + "/portfolio.csv";
}

}  // namespace retra
