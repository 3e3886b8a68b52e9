#pragma once

// Command-line front end. Nine subcommands share one JSON config file; every
// run writes a manifest into the output directory naming the files it
// produced (paths relative to the output directory where possible), the
// config hash, the seed and the library version -- and nothing run-dependent
// beyond that, so a repeated run is byte-identical.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "retra/config.hpp"
#include "retra/ddpg.hpp"
#include "retra/eval.hpp"
#include "retra/grad_check.hpp"
#include "retra/gru_train.hpp"
#include "retra/json_io.hpp"
#include "retra/log.hpp"
#include "retra/pairs/coint.hpp"
#include "retra/pairs/hamilton.hpp"
#include "retra/pairs/johansen.hpp"
#include "retra/pairs/lobster.hpp"
#include "retra/pairs/strategy.hpp"
#include "retra/pairs/var.hpp"
#include "retra/signal.hpp"
#include "retra/version.hpp"

namespace retra {
namespace detail {

// FNV-1a over the raw config bytes.
inline std::string file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open " + path);
    std::uint64_t h = 14695981039346656037ull;
    char c;
    while (in.get(c)) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string relative_to_output(const run_config& cfg, const std::string& path) {
    const std::string prefix = cfg.output_dir + "/";
    if (path.rfind(prefix, 0) == 0) return path.substr(prefix.size());
    return path;
}

inline void write_manifest(const run_config& cfg, const std::string& command, const std::string& config_path,
                           const std::vector<std::string>& outputs) {
    nlohmann::json m;
    m["command"] = command;
    m["config_hash"] = file_hash(config_path);
    m["seed"] = cfg.seed;
    m["version"] = version_string;
    nlohmann::json names = nlohmann::json::array();
    for (const std::string& path : outputs) names.push_back(relative_to_output(cfg, path));
    m["outputs"] = names;
    std::ofstream out = open_output(cfg.output_dir + "/manifest.json");
    out << m.dump(2) << "\n";
}

inline void write_curve_csv(const std::string& path, const std::string& value_name,
                            const std::vector<double>& curve) {
    std::ofstream out = open_output(path);
    out << "iteration," << value_name << "\n";
    for (std::size_t i = 0; i < curve.size(); ++i) out << (i + 1) << ',' << format_g12(curve[i]) << '\n';
}

inline nlohmann::json vector_json(const std::vector<double>& v) { return nlohmann::json(v); }

// Environment stand-in for agents trained on a recorded normalized series.
// The regime chains are placeholders (batches come from the series, not the
// simulator); only the trading constants and the window matter.
inline env_config pairs_env(const pairs_run_config& p) {
    env_config env;
    env.theta = regime_chain{{0.5}, {}, 0};
    env.kappa = regime_chain{{1.0}, {}, 0};
    env.sigma = regime_chain{{0.1}, {}, 0};
    env.dt = 1.0;
    env.w = p.w;
    env.i_min = -p.i_max;
    env.i_max = p.i_max;
    env.lambda = p.lambda;
    env.validate();
    return env;
}

} // namespace detail

inline std::vector<std::string> run_simulate(const run_config& cfg) {
    rng r(cfg.seed);
    signal_path path = simulate_path(cfg.env, static_cast<std::size_t>(cfg.eval.steps), r);
    const std::string out = cfg.output_dir + "/signal_path.csv";
    write_signal_csv(out, path);
    log_info("simulate: %d steps, %zu regime switches in theta", cfg.eval.steps,
             [&] {
                 std::size_t switches = 0;
                 for (std::size_t t = 1; t < path.theta_regime.size(); ++t)
                     switches += path.theta_regime[t] != path.theta_regime[t - 1];
                 return switches;
             }());
    return {out};
}

inline std::vector<std::string> run_train_filter(const run_config& cfg) {
    if (cfg.gru.head == head_kind::feature)
        throw config_error("train-filter needs a classifier or regressor head; "
                           "the hid pipeline trains its recurrent block inside train-agent");
    rng r(cfg.seed);
    gru_stack stack = make_gru_stack(cfg.gru, r);
    filter_train_result result = train_first_step(stack, cfg.env, cfg.target, cfg.filter_train, r);
    filter_eval val = evaluate_filter(stack, cfg.env, cfg.target, 4, cfg.filter_train.batch, r);

    const std::string weights = cfg.filter_dir + "/filter.rtps";
    const std::string meta = cfg.filter_dir + "/filter.json";
    save_gru_stack(stack, weights, meta);

    const std::string curve = cfg.output_dir + "/train_filter_loss.csv";
    detail::write_curve_csv(curve, "loss", result.loss_curve);

    nlohmann::json metrics;
    metrics["iterations"] = cfg.filter_train.iterations;
    metrics["batch"] = cfg.filter_train.batch;
    if (!result.loss_curve.empty()) metrics["final_train_loss"] = result.loss_curve.back();
    if (cfg.gru.head == head_kind::classifier) {
        metrics["validation_cross_entropy"] = val.cross_entropy;
        metrics["validation_accuracy"] = val.accuracy;
        log_info("train-filter: validation cross-entropy %.6f accuracy %.4f", val.cross_entropy, val.accuracy);
    } else {
        metrics["validation_rmse"] = val.cross_entropy;
        log_info("train-filter: validation rmse %.6f", val.cross_entropy);
    }
    const std::string metrics_path = cfg.output_dir + "/filter_metrics.json";
    std::ofstream mout = open_output(metrics_path);
    mout << metrics.dump(2) << "\n";
    return {weights, meta, curve, metrics_path};
}

inline std::vector<std::string> run_train_agent(const run_config& cfg) {
    rng r(cfg.seed);
    gru_stack stack;
    if (cfg.pipeline == pipeline_kind::hid) {
        stack = make_gru_stack(cfg.gru, r);
    } else {
        const std::string weights = cfg.filter_dir + "/filter.rtps";
        const std::string meta = cfg.filter_dir + "/filter.json";
        require_file(weights, "trained filter weights (run train-filter first)");
        require_file(meta, "trained filter spec (run train-filter first)");
        stack = load_gru_stack(weights, meta);
        if (stack.spec.window != cfg.env.w)
            throw config_error("trained filter window " + std::to_string(stack.spec.window) +
                               " does not match env.w " + std::to_string(cfg.env.w));
    }

    agent_bundle bundle = make_agent_bundle(cfg.pipeline, cfg.env, cfg.arch, std::move(stack), cfg.bounds, r);
    train_diagnostics diag = train_agent(bundle, cfg.agent_train, r);
    save_agent(bundle, cfg.agent_dir);

    const std::string diag_path = cfg.output_dir + "/train_agent_diag.csv";
    {
        std::ofstream out = open_output(diag_path);
        const bool with_filter = !diag.filter_loss.empty();
        out << "iteration,critic_loss,actor_objective" << (with_filter ? ",filter_loss\n" : "\n");
        for (std::size_t i = 0; i < diag.critic_loss.size(); ++i) {
            out << (i + 1) << ',' << format_g12(diag.critic_loss[i]) << ',' << format_g12(diag.actor_objective[i]);
            if (with_filter) out << ',' << format_g12(diag.filter_loss[i]);
            out << '\n';
        }
    }
    if (!diag.critic_loss.empty())
        log_info("train-agent: %s pipeline, final critic loss %.6f", pipeline_name(cfg.pipeline).c_str(),
                 diag.critic_loss.back());
    return {cfg.agent_dir + "/actor.rtps",         cfg.agent_dir + "/critic.rtps",
            cfg.agent_dir + "/critic_target.rtps", cfg.agent_dir + "/filter.rtps",
            cfg.agent_dir + "/filter.json",        cfg.agent_dir + "/agent.json",
            diag_path};
}

inline std::vector<std::string> run_evaluate(const run_config& cfg) {
    agent_bundle bundle = load_agent(cfg.agent_dir);
    evaluation_result result = evaluate_agent(bundle, cfg.eval.episodes, cfg.eval.steps, cfg.seed);

    const std::string summary = cfg.output_dir + "/summary.csv";
    write_summary_csv(summary, pipeline_name(bundle.pipeline), cfg.setting, cfg.eval.episodes, cfg.eval.steps,
                      result);
    const std::string episodes = cfg.output_dir + "/episodes.csv";
    write_episode_csv(episodes, result, bundle.env.w);
    log_info("evaluate: %d episodes of %d steps, mean reward %.6f (sd %.6f)", cfg.eval.episodes, cfg.eval.steps,
             result.mean, result.stddev);
    return {summary, episodes};
}

inline std::vector<std::string> run_policy_grid(const run_config& cfg) {
    agent_bundle bundle = load_agent(cfg.agent_dir);
    const std::vector<double> s = linear_grid(bundle.bounds.s_lo, bundle.bounds.s_hi, cfg.eval.grid_points);
    const std::vector<double> i = linear_grid(bundle.env.i_min, bundle.env.i_max, cfg.eval.grid_points);
    tensor grid = policy_grid(bundle, s, i);
    const std::string out = cfg.output_dir + "/policy_grid.csv";
    write_policy_grid_csv(out, bundle, grid);
    return {out};
}

inline std::vector<std::string> run_pairs_ingest(const run_config& cfg) {
    const pairs_run_config& p = cfg.pairs;
    if (p.first_message_file.empty() || p.first_orderbook_file.empty() || p.second_message_file.empty() ||
        p.second_orderbook_file.empty())
        throw config_error("pairs-ingest needs pairs.first_message_file, pairs.first_orderbook_file, "
                           "pairs.second_message_file and pairs.second_orderbook_file");
    mid_series first = ingest_mid_series(p.first_message_file, p.first_orderbook_file, p.grid_seconds);
    mid_series second = ingest_mid_series(p.second_message_file, p.second_orderbook_file, p.grid_seconds);
    pair_series pair = align_pair(first, second, p.grid_seconds);
    write_pair_csv(p.pair_file, pair);
    log_info("pairs-ingest: %zu and %zu grid points aligned to %zu common points", first.timestamps.size(),
             second.timestamps.size(), pair.size());
    return {p.pair_file};
}

namespace detail {

inline std::size_t train_prefix_length(const std::vector<double>& timestamps, double boundary) {
    if (std::isnan(boundary)) throw config_error("pairs.train_end_timestamp must be set");
    std::size_t n = 0;
    while (n < timestamps.size() && timestamps[n] <= boundary) ++n;
    return n;
}

} // namespace detail

inline std::vector<std::string> run_pairs_coint(const run_config& cfg) {
    const pairs_run_config& p = cfg.pairs;
    require_file(p.pair_file, "aligned pair series (run pairs-ingest first)");
    pair_series series = read_pair_csv(p.pair_file);
    const std::size_t train_len = detail::train_prefix_length(series.timestamps, p.train_end_timestamp);
    if (train_len < 16)
        throw config_error("pairs-coint: only " + std::to_string(train_len) +
                           " points at or before pairs.train_end_timestamp; need at least 16");

    tensor levels = tensor::zeros(series.size(), 2);
    for (std::size_t t = 0; t < series.size(); ++t) {
        levels.at(t, 0) = series.first[t];
        levels.at(t, 1) = series.second[t];
    }
    tensor levels_train = tensor::zeros(train_len, 2);
    for (std::size_t t = 0; t < train_len; ++t) {
        levels_train.at(t, 0) = levels.at(t, 0);
        levels_train.at(t, 1) = levels.at(t, 1);
    }

    var_fit fit = fit_var(levels_train);
    coint_result coint = cointegrate(fit, 1.0);
    johansen_result jo = johansen_test(levels_train, p.johansen);

    std::vector<double> raw = build_portfolio(coint.weights, levels);
    minmax_transform box = minmax_fit({raw.begin(), raw.begin() + static_cast<std::ptrdiff_t>(train_len)});
    std::vector<double> normalized = box.apply(raw);

    std::vector<double> train_norm(normalized.begin(), normalized.begin() + static_cast<std::ptrdiff_t>(train_len));
    hamilton_fit regimes = hamilton_two_regime(train_norm, p.hamilton_max_iter);
    if (regimes.degenerate) log_info("pairs-coint: regime fit degenerate; probabilities fall back to 0.5");
    tensor probs = hamilton_smoothed(regimes, normalized);

    {
        std::ofstream out = open_output(p.portfolio_file);
        out << "t,raw,normalized,prob1,prob2\n";
        for (std::size_t t = 0; t < series.size(); ++t)
            out << format_g12(series.timestamps[t]) << ',' << format_g12(raw[t]) << ','
                << format_g12(normalized[t]) << ',' << format_g12(probs.at(t, 0)) << ','
                << format_g12(probs.at(t, 1)) << '\n';
    }

    nlohmann::json report;
    report["train_points"] = train_len;
    report["total_points"] = series.size();
    report["train_end_timestamp"] = p.train_end_timestamp;
    report["var"] = {{"intercept", std::vector<double>(fit.intercept.data)},
                     {"coeff", tensor_to_json(fit.coeff)},
                     {"residual_cov", tensor_to_json(fit.residual_cov)},
                     {"r_squared", fit.r_squared},
                     {"observations", fit.observations}};
    report["kappa"] = tensor_to_json(coint.kappa);
    report["theta"] = coint.theta;
    report["eigenvalues"] = coint.eigenvalues;
    report["u"] = tensor_to_json(coint.u);
    report["weights"] = coint.weights;
    report["reconstruction_error"] = reconstruction_error(coint);
    report["johansen"] = {{"deterministic", johansen_deterministic_name(p.johansen.deterministic)},
                          {"eigenvalues", jo.eigenvalues},
                          {"trace", jo.trace},
                          {"max_eig", jo.max_eig},
                          {"trace_critical", p.johansen.trace_critical},
                          {"max_eig_critical", p.johansen.max_eig_critical},
                          {"reject_trace", jo.reject_trace},
                          {"reject_max_eig", jo.reject_max_eig},
                          {"observations", jo.observations}};
    report["hamilton"] = {{"theta1", regimes.theta1},
                          {"theta2", regimes.theta2},
                          {"sigma2", regimes.sigma2},
                          {"transition", tensor_to_json(regimes.transition)},
                          {"initial", regimes.initial},
                          {"iterations", regimes.loglik.size()},
                          {"converged", regimes.converged},
                          {"degenerate", regimes.degenerate}};
    report["normalization"] = {{"lo", box.lo}, {"hi", box.hi}};

    const std::string report_path = cfg.output_dir + "/coint_report.json";
    std::ofstream rout = open_output(report_path);
    rout << report.dump(2) << "\n";

    log_info("pairs-coint: weights (%.6f, %.6f), trace %.3f (reject=%d)", coint.weights[0], coint.weights[1],
             jo.trace.empty() ? 0.0 : jo.trace[0], static_cast<int>(jo.reject_trace));
    return {p.portfolio_file, report_path};
}

namespace detail {

struct portfolio_rows {
    std::vector<double> timestamps;
    std::vector<double> raw;
    std::vector<double> normalized;
    std::vector<double> prob1;
    std::vector<double> prob2;
};

inline portfolio_rows read_portfolio_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "t,raw,normalized,prob1,prob2")
        throw config_error(path + ": expected header t,raw,normalized,prob1,prob2");
    portfolio_rows rows;
    std::size_t line_number = 1;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != 5)
            throw config_error(path + ": line " + std::to_string(line_number) + " has " +
                               std::to_string(fields.size()) + " fields, expected 5");
        try {
            rows.timestamps.push_back(std::stod(fields[0]));
            rows.raw.push_back(std::stod(fields[1]));
            rows.normalized.push_back(std::stod(fields[2]));
            rows.prob1.push_back(std::stod(fields[3]));
            rows.prob2.push_back(std::stod(fields[4]));
        } catch (const std::exception&) {
            throw config_error(path + ": line " + std::to_string(line_number) + " has a malformed number");
        }
    }
    if (rows.timestamps.empty()) throw config_error(path + ": no data rows");
    return rows;
}

inline void write_backtest_csv(const std::string& path, const backtest_result& result,
                               const std::vector<double>& timestamps) {
    std::ofstream out = open_output(path);
    out << "t,I,q,r,cum_r\n";
    for (std::size_t k = 0; k < result.step.size(); ++k)
        out << format_g12(timestamps[result.step[k]]) << ',' << format_g12(result.inventory[k]) << ','
            << format_g12(result.trade[k]) << ',' << format_g12(result.reward[k]) << ','
            << format_g12(result.cumulative[k]) << '\n';
}

// Wraps a trained agent as a walk-forward position rule: at decision time t
// the actor sees the last w+1 normalized values and the inventory held in.
inline position_fn agent_strategy(const agent_bundle& bundle) {
    const auto w = static_cast<std::size_t>(bundle.env.w);
    return [&bundle, w](std::size_t t, const std::vector<double>& series, double inventory) {
        tensor window = tensor::zeros(1, w + 1);
        for (std::size_t c = 0; c <= w; ++c) window.at(0, c) = series[t - w + c];
        tensor inv = tensor::zeros(1, 1);
        inv.at(0, 0) = inventory;
        return actor_forward(bundle, build_features(bundle, window, inv)).data[0];
    };
}

} // namespace detail

inline std::vector<std::string> run_pairs_backtest(const run_config& cfg) {
    const pairs_run_config& p = cfg.pairs;
    require_file(p.portfolio_file, "normalized portfolio series (run pairs-coint first)");
    detail::portfolio_rows rows = detail::read_portfolio_csv(p.portfolio_file);
    const std::size_t train_len = detail::train_prefix_length(rows.timestamps, p.train_end_timestamp);
    const std::size_t need = static_cast<std::size_t>(p.w) + 2;
    if (train_len < need || rows.timestamps.size() - train_len < need)
        throw config_error("pairs-backtest: need at least w+2 points on each side of "
                           "pairs.train_end_timestamp (train " +
                           std::to_string(train_len) + ", test " +
                           std::to_string(rows.timestamps.size() - train_len) + ")");

    const std::vector<double> train_norm(rows.normalized.begin(),
                                         rows.normalized.begin() + static_cast<std::ptrdiff_t>(train_len));
    const std::vector<double> test_norm(rows.normalized.begin() + static_cast<std::ptrdiff_t>(train_len),
                                        rows.normalized.end());
    const std::vector<double> test_times(rows.timestamps.begin() + static_cast<std::ptrdiff_t>(train_len),
                                         rows.timestamps.end());
    std::vector<int> train_labels(train_len);
    for (std::size_t t = 0; t < train_len; ++t) train_labels[t] = rows.prob2[t] > rows.prob1[t] ? 1 : 0;

    std::vector<std::string> outputs;
    rng root(cfg.seed);
    const env_config env = detail::pairs_env(p);
    feature_bounds bounds;
    bounds.s_lo = 0.0;
    bounds.s_hi = 1.0;

    for (const std::string& name : p.strategies) {
        backtest_result result;
        if (name == "zscore") {
            result = backtest(test_norm,
                              zscore_strategy(test_norm, static_cast<std::size_t>(p.zscore_window), p.i_max),
                              p.lambda, static_cast<std::size_t>(p.w));
        } else {
            const pipeline_kind pipeline = pipeline_from_name(name);
            gru_stack_spec spec;
            spec.gru.input = 1;
            spec.window = p.w;
            if (pipeline == pipeline_kind::hid) {
                spec.gru.layers = 1;
                spec.gru.hidden = 10;
                spec.head = head_kind::feature;
            } else {
                spec.gru.layers = 5;
                spec.gru.hidden = 20;
                spec.head = pipeline == pipeline_kind::prob ? head_kind::classifier : head_kind::regressor;
                spec.classes = 2;
            }

            rng r(root.next_u64());
            gru_stack stack = make_gru_stack(spec, r);
            batch_sampler sampler = series_sampler(train_norm, pipeline == pipeline_kind::prob ? train_labels
                                                                                               : std::vector<int>{},
                                                   p.w, env.i_min, env.i_max);
            if (pipeline != pipeline_kind::hid)
                train_first_step(stack, sampler, filter_target::theta, cfg.filter_train, r);

            agent_bundle bundle = make_agent_bundle(pipeline, env, cfg.arch, std::move(stack), bounds, r);
            train_agent(bundle, cfg.agent_train, sampler, r);
            const std::string agent_dir = cfg.output_dir + "/agent_" + name;
            save_agent(bundle, agent_dir);
            for (const char* file : {"/actor.rtps", "/critic.rtps", "/critic_target.rtps", "/filter.rtps",
                                     "/filter.json", "/agent.json"})
                outputs.push_back(agent_dir + file);

            result = backtest(test_norm, detail::agent_strategy(bundle), p.lambda, static_cast<std::size_t>(p.w));
        }
        const std::string path = cfg.output_dir + "/backtest_" + name + ".csv";
        detail::write_backtest_csv(path, result, test_times);
        outputs.push_back(path);
        log_info("pairs-backtest: %s total reward %.6f over %zu steps", name.c_str(), result.total,
                 result.step.size());
    }
    return outputs;
}

// Finite-difference verification of the three gradient paths the training
// loops rely on: filter loss through the recurrence, the temporal-difference
// critic loss, and the actor objective through the frozen critic.
inline int run_gradcheck() {
    bool ok = true;
    const auto report = [&ok](const char* label, double err) {
        const bool pass = err < 1e-4;
        ok = ok && pass;
        std::printf("gradcheck %-7s max_rel_err=%.3e %s\n", label, err, pass ? "PASS" : "FAIL");
    };

    {
        gru_stack_spec spec;
        spec.gru = {2, 4, 1, gate_kind::logistic};
        spec.head = head_kind::regressor;
        spec.classes = 3;
        spec.head_layers = 1;
        spec.head_width = 5;
        spec.window = 4;
        rng r(2024);
        gru_stack stack = make_gru_stack(spec, r);
        env_config env = detail::env_for_setting("theta");
        env.w = spec.window;
        rng sampler(9);
        training_batch batch = sample_training_batch(env, 3, sampler);
        report("filter", grad_check(stack.params, [&](graph& g, const bound_params& bound) {
                   return filter_loss(g, bound, stack, batch, filter_target::theta);
               }));
    }

    env_config env = detail::env_for_setting("theta");
    env.w = 4;
    const auto small_stack = [&](head_kind head, std::uint64_t seed) {
        gru_stack_spec spec;
        spec.gru = {1, 3, 1, gate_kind::logistic};
        spec.head = head;
        spec.classes = 3;
        spec.head_layers = 1;
        spec.head_width = 6;
        spec.window = env.w;
        rng r(seed);
        return make_gru_stack(spec, r);
    };

    {
        rng r(321);
        agent_bundle bundle = make_agent_bundle(pipeline_kind::prob, env, agent_arch{2, 8},
                                                small_stack(head_kind::classifier, 322), feature_bounds{}, r);
        rng data(13);
        const std::size_t b = 4;
        tensor features = tensor::zeros(b, bundle.feature_width());
        tensor actions = tensor::zeros(b, 1);
        tensor y = tensor::zeros(b, 1);
        for (std::size_t i = 0; i < b; ++i) {
            for (std::size_t c = 0; c < bundle.feature_width(); ++c) features.at(i, c) = data.uniform01();
            actions.data[i] = data.uniform(-10.0, 10.0);
            y.data[i] = data.uniform(-1.0, 1.0);
        }
        report("critic", grad_check(bundle.critic, [&](graph& g, const bound_params& bound) {
                   var q = critic_value(g, bound, bundle, g.leaf(features), g.leaf(actions));
                   return g.mse(q, g.leaf(y));
               }));
    }

    {
        rng r(654);
        agent_bundle bundle = make_agent_bundle(pipeline_kind::reg, env, agent_arch{2, 8},
                                                small_stack(head_kind::regressor, 655), feature_bounds{}, r);
        rng data(29);
        const std::size_t b = 4;
        tensor features = tensor::zeros(b, bundle.feature_width());
        for (std::size_t i = 0; i < features.size(); ++i) features.data[i] = data.uniform01();
        report("actor", grad_check(bundle.actor, [&](graph& g, const bound_params& bound) {
                   var feat = g.leaf(features);
                   var action = mlp_forward(g, bound, "actor", feat, bundle.actor_spec);
                   var q = frozen_critic(bundle)(g, feat, action);
                   return g.smul(-1.0 / static_cast<double>(b), g.sum(q));
               }));
    }

    return ok ? 0 : 2;
}

inline int run_command(int argc, char** argv) {
    CLI::App app{"regime-switching signal agents and cointegration pair trading"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output_override;
    std::uint64_t seed_override = 0;
    int threads = 1;
    auto* config_opt = app.add_option("--config", config_path, "JSON config file");
    auto* seed_opt = app.add_option("--seed", seed_override, "override the config seed");
    auto* output_opt = app.add_option("--output-dir", output_override, "override the config output directory");
    app.add_option("--threads", threads, "upper bound on worker threads")->check(CLI::Range(1, 4096));

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"simulate", "write one simulated regime-switching signal path"},
        {"train-filter", "train the recurrent regime filter on simulated windows"},
        {"train-agent", "train a trading agent (hid, prob or reg pipeline)"},
        {"evaluate", "run test episodes for a trained agent"},
        {"policy-grid", "tabulate the trained policy over a signal/inventory grid"},
        {"pairs-ingest", "build an aligned mid-quote pair series from exchange event files"},
        {"pairs-coint", "fit the cointegrated pair and write the normalized portfolio"},
        {"pairs-backtest", "walk-forward backtests on the normalized portfolio"},
        {"gradcheck", "verify analytic gradients against finite differences"},
    };
    for (const auto& [name, blurb] : commands) app.add_subcommand(name, blurb)->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        if (command == "gradcheck") return run_gradcheck();
        if (!*config_opt) throw config_error(command + " needs --config");

        run_config cfg = load_run_config(config_path);
        if (*seed_opt) cfg.seed = seed_override;
        if (*output_opt) cfg.output_dir = output_override;
        resolve_paths(cfg);
        (void)threads; // accepted as a cap; the implementation is single-threaded

        std::vector<std::string> outputs;
        if (command == "simulate") outputs = run_simulate(cfg);
        else if (command == "train-filter") outputs = run_train_filter(cfg);
        else if (command == "train-agent") outputs = run_train_agent(cfg);
        else if (command == "evaluate") outputs = run_evaluate(cfg);
        else if (command == "policy-grid") outputs = run_policy_grid(cfg);
        else if (command == "pairs-ingest") outputs = run_pairs_ingest(cfg);
        else if (command == "pairs-coint") outputs = run_pairs_coint(cfg);
        else if (command == "pairs-backtest") outputs = run_pairs_backtest(cfg);
        else throw config_error("unknown command " + command);

        detail::write_manifest(cfg, command, config_path, outputs);
        return 0;
    } catch (const numeric_error& e) {
        log_error("%s", e.what());
        return 2;
    } catch (const config_error& e) {
        log_error("%s", e.what());
        return 1;
    } catch (const std::exception& e) {
        log_error("%s", e.what());
        return 2;
    }
}

} // namespace retra
