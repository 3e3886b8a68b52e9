#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "retra/ddpg.hpp"
#include "retra/io.hpp"

namespace retra {

// One out-of-sample run: the signal starts at S = 1, inventory at 0, the
// policy watches a warm-up window of W values and then trades n steps.
// Index t (1-based) sees the window v_{t-1}..v_{t-1+W} and earns
// I_t (v_{t+W} - v_{t-1+W}) - lambda |I_t - I_{t-1}|.
struct episode_result {
    std::vector<double> path;      // v_0 .. v_{W+n}
    std::vector<double> inventory; // I_1 .. I_n
    std::vector<double> trade;     // q_1 .. q_n
    std::vector<double> reward;    // r_1 .. r_n
    double total = 0.0;
};

inline episode_result run_test_episode(const agent_bundle& bundle, int n, rng& r) {
    if (n <= 0) throw config_error("run_test_episode: need at least one step");
    const int w = bundle.env.w;
    episode_result episode;
    // w + n steps produce the values v_0 .. v_{w+n}
    signal_path path = simulate_path(bundle.env, static_cast<std::size_t>(w + n), r, 1.0);
    episode.path = path.values;

    // all n look-back windows share one batched filter pass; the recurrent
    // extras depend only on the signal, never on the inventory
    tensor windows = tensor::zeros(static_cast<std::size_t>(n), static_cast<std::size_t>(w) + 1);
    for (int t = 1; t <= n; ++t)
        for (int k = 0; k <= w; ++k) windows.at(t - 1, k) = episode.path[static_cast<std::size_t>(t - 1 + k)];
    const tensor extras = filter_extras(bundle, windows);

    const double s_span = bundle.bounds.s_hi - bundle.bounds.s_lo;
    const double i_span = bundle.env.i_max - bundle.env.i_min;
    episode.inventory.resize(n);
    episode.trade.resize(n);
    episode.reward.resize(n);

    std::vector<double> feature(bundle.feature_width());
    double inv = 0.0;
    for (int t = 1; t <= n; ++t) {
        const double s_now = episode.path[static_cast<std::size_t>(t - 1 + w)];
        const double s_next = episode.path[static_cast<std::size_t>(t + w)];
        feature[0] = (s_now - bundle.bounds.s_lo) / s_span;
        feature[1] = (inv - bundle.env.i_min) / i_span;
        for (std::size_t c = 0; c < extras.cols(); ++c) feature[2 + c] = extras.at(t - 1, c);

        const double action = mlp_eval(bundle.actor, "actor", feature, bundle.actor_spec)[0];
        episode.inventory[t - 1] = action;
        episode.trade[t - 1] = action - inv;
        episode.reward[t - 1] = compute_reward(action, s_now, s_next, inv, bundle.env.lambda);
        episode.total += episode.reward[t - 1];
        inv = action;
    }
    return episode;
}

struct evaluation_result {
    std::vector<episode_result> episodes;
    double mean = 0.0;
    double stddev = 0.0;          // sample standard deviation across episodes
    bool single_episode = false;  // one episode: no spread to report
};

// Episode e draws its own generator seeded seed + e, so any episode can be
// reproduced in isolation.
inline evaluation_result evaluate_agent(const agent_bundle& bundle, int episodes, int n, std::uint64_t seed) {
    if (episodes <= 0) throw config_error("evaluate_agent: need at least one episode");
    evaluation_result out;
    out.episodes.reserve(episodes);
    double total = 0.0;
    for (int e = 0; e < episodes; ++e) {
        rng r(seed + static_cast<std::uint64_t>(e));
        out.episodes.push_back(run_test_episode(bundle, n, r));
        total += out.episodes.back().total;
    }
    out.mean = total / episodes;
    if (episodes == 1) {
        out.single_episode = true;
    } else {
        double ss = 0.0;
        for (const episode_result& ep : out.episodes) ss += (ep.total - out.mean) * (ep.total - out.mean);
        out.stddev = std::sqrt(ss / (episodes - 1));
    }
    return out;
}

// episode,t,S,I,q,r rows; S is the value observed when the action was taken.
inline void write_episode_csv(const std::string& path, const evaluation_result& result, int window) {
    std::ofstream out = open_output(path);
    out << "episode,t,S,I,q,r\n";
    for (std::size_t e = 0; e < result.episodes.size(); ++e) {
        const episode_result& ep = result.episodes[e];
        for (std::size_t t = 1; t <= ep.inventory.size(); ++t) {
            out << e << "," << t << "," << format_g12(ep.path[t - 1 + static_cast<std::size_t>(window)]) << ","
                << format_g12(ep.inventory[t - 1]) << "," << format_g12(ep.trade[t - 1]) << ","
                << format_g12(ep.reward[t - 1]) << "\n";
        }
    }
}

inline void write_summary_csv(const std::string& path, const std::string& pipeline, const std::string& setting,
                              int episodes, int n, const evaluation_result& result) {
    std::ofstream out = open_output(path);
    out << "pipeline,setting,M,n,mean,std\n";
    out << pipeline << "," << setting << "," << episodes << "," << n << ","
        << format_g12(result.mean) << "," << format_g12(result.stddev) << "\n";
}

// Deterministic policy surface: for each (S, I) the filter sees a flat
// window pinned at S, so the extras are the policy's steady-state view.
// Rows are S-major; columns are S, I, extras..., the chosen next inventory
// and the implied trade.
inline tensor policy_grid(const agent_bundle& bundle, const std::vector<double>& s_values,
                          const std::vector<double>& i_values) {
    if (s_values.empty() || i_values.empty()) throw config_error("policy_grid: empty axis");
    const std::size_t w1 = static_cast<std::size_t>(bundle.env.w) + 1;
    tensor windows = tensor::zeros(s_values.size(), w1);
    for (std::size_t si = 0; si < s_values.size(); ++si)
        for (std::size_t k = 0; k < w1; ++k) windows.at(si, k) = s_values[si];
    const tensor extras = filter_extras(bundle, windows);

    const std::size_t width = bundle.feature_width();
    const double s_span = bundle.bounds.s_hi - bundle.bounds.s_lo;
    const double i_span = bundle.env.i_max - bundle.env.i_min;
    tensor features = tensor::zeros(s_values.size() * i_values.size(), width);
    std::size_t row = 0;
    for (std::size_t si = 0; si < s_values.size(); ++si) {
        for (std::size_t ii = 0; ii < i_values.size(); ++ii, ++row) {
            features.at(row, 0) = (s_values[si] - bundle.bounds.s_lo) / s_span;
            features.at(row, 1) = (i_values[ii] - bundle.env.i_min) / i_span;
            for (std::size_t c = 0; c + 2 < width; ++c) features.at(row, c + 2) = extras.at(si, c);
        }
    }
    const tensor actions = actor_forward(bundle, features);

    const std::size_t e = bundle.extras_width();
    tensor grid = tensor::zeros(features.rows(), 2 + e + 2);
    row = 0;
    for (std::size_t si = 0; si < s_values.size(); ++si) {
        for (std::size_t ii = 0; ii < i_values.size(); ++ii, ++row) {
            grid.at(row, 0) = s_values[si];
            grid.at(row, 1) = i_values[ii];
            for (std::size_t c = 0; c < e; ++c) grid.at(row, 2 + c) = extras.at(si, c);
            grid.at(row, 2 + e) = actions.at(row, 0);
            grid.at(row, 2 + e + 1) = actions.at(row, 0) - i_values[ii];
        }
    }
    return grid;
}

inline std::vector<double> linear_grid(double lo, double hi, int count) {
    if (count < 2 || !(hi > lo)) throw config_error("linear_grid: need count >= 2 and hi > lo");
    std::vector<double> values(count);
    for (int i = 0; i < count; ++i)
        values[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    return values;
}

inline void write_policy_grid_csv(const std::string& path, const agent_bundle& bundle, const tensor& grid) {
    std::ofstream out = open_output(path);
    out << "S,I";
    for (std::size_t c = 0; c < bundle.extras_width(); ++c) out << ",extra" << c;
    out << ",I_next,q\n";
    for (std::size_t r = 0; r < grid.rows(); ++r) {
        for (std::size_t c = 0; c < grid.cols(); ++c) {
            if (c) out << ",";
            out << format_g12(grid.at(r, c));
        }
        out << "\n";
    }
}

}
