#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "retra/errors.hpp"
#include "retra/io.hpp"
#include "retra/markov.hpp"
#include "retra/ou.hpp"
#include "retra/rng.hpp"
#include "retra/tensor.hpp"

namespace retra {

// Environment of the simulated experiments: three independent regime chains
// for theta/kappa/sigma plus the trading constants.
struct env_config {
    regime_chain theta{{1.0}, {}, 0};
    regime_chain kappa{{5.0}, {}, 0};
    regime_chain sigma{{0.2}, {}, 0};
    double dt = 0.2;
    int w = 10;           // look-back window
    double i_min = -10.0;
    double i_max = 10.0;
    double lambda = 0.05; // transaction cost per unit volume
    double gamma = 0.999; // discount
    double mu_inv = 1.0;  // batch start-level mean

    void validate() const {
        theta.validate();
        kappa.validate();
        sigma.validate();
        for (double k : kappa.values)
            if (k <= 0.0) throw config_error("env_config: kappa levels must be positive");
        for (double s : sigma.values)
            if (s <= 0.0) throw config_error("env_config: sigma levels must be positive");
        if (dt <= 0.0) throw config_error("env_config: dt must be positive");
        if (w < 1) throw config_error("env_config: window must be at least 1");
        if (i_min >= i_max) throw config_error("env_config: need i_min < i_max");
        if (lambda < 0.0) throw config_error("env_config: lambda must be non-negative");
        if (gamma <= 0.0 || gamma >= 1.0) throw config_error("env_config: gamma must lie in (0,1)");
    }

    // Anchors for batch starts; minimal levels when a parameter switches.
    double kappa_min() const { return *std::min_element(kappa.values.begin(), kappa.values.end()); }
    double sigma_min() const { return *std::min_element(sigma.values.begin(), sigma.values.end()); }
    double sigma_inv() const { return sigma_min() / (2.0 * kappa_min()); }
};

struct signal_path {
    std::vector<double> values;       // S_0..S_T
    std::vector<int> theta_regime;    // regime in force at each index
    std::vector<int> kappa_regime;
    std::vector<int> sigma_regime;
    double dt = 0.2;
};

namespace detail {

struct chain_runtime {
    regime_chain chain;
    tensor transition;
    rng stream;

    chain_runtime(const regime_chain& spec, double dt, rng stream_in, bool stationary_start)
        : chain(spec), transition(spec.transition_matrix(dt)), stream(std::move(stream_in)) {
        if (stationary_start && chain.size() > 1)
            chain.state = sample_index(stationary_distribution(transition), stream);
    }

    double value() const { return chain.values[static_cast<std::size_t>(chain.state)]; }
    int state() const { return chain.state; }
    void advance() { step_chain(chain, transition, stream); }
};

}

// Simulates `length` exact OU steps with piecewise-constant parameters frozen
// at their start-of-step regime values. Chain randomness comes from streams
// derived off the caller's rng, one per chain, independent of the noise
// stream, so adding a chain does not disturb the others.
inline signal_path simulate_path(const env_config& cfg, std::size_t length, rng& r,
                                 double s0 = std::numeric_limits<double>::quiet_NaN()) {
    cfg.validate();
    if (length < 1) throw config_error("simulate_path: length must be at least 1");

    // Fresh seeds off the master stream keep repeated calls independent while
    // staying reproducible; one stream per chain keeps chains independent.
    detail::chain_runtime theta(cfg.theta, cfg.dt, rng(r.next_u64()), true);
    detail::chain_runtime kappa(cfg.kappa, cfg.dt, rng(r.next_u64()), true);
    detail::chain_runtime sigma(cfg.sigma, cfg.dt, rng(r.next_u64()), true);

    signal_path path;
    path.dt = cfg.dt;
    path.values.reserve(length + 1);
    path.theta_regime.reserve(length + 1);
    path.kappa_regime.reserve(length + 1);
    path.sigma_regime.reserve(length + 1);

    double s = std::isnan(s0) ? theta.value() : s0;
    path.values.push_back(s);
    path.theta_regime.push_back(theta.state());
    path.kappa_regime.push_back(kappa.state());
    path.sigma_regime.push_back(sigma.state());

    for (std::size_t t = 0; t < length; ++t) {
        ou_params p{kappa.value(), theta.value(), sigma.value(), cfg.dt};
        s = ou_step(s, p, r);
        theta.advance();
        kappa.advance();
        sigma.advance();
        path.values.push_back(s);
        path.theta_regime.push_back(theta.state());
        path.kappa_regime.push_back(kappa.state());
        path.sigma_regime.push_back(sigma.state());
    }
    return path;
}

// One randomized training row: W+2 signal values (window plus the next value)
// and an inventory draw; regime labels are taken at the window end, i.e. the
// regimes that drive the step into the target value.
struct training_batch {
    tensor windows;            // b x (W+2)
    tensor inventories;        // b x 1, uniform on [i_min, i_max]
    std::vector<int> theta_label;
    std::vector<int> kappa_label;
    std::vector<int> sigma_label;

    std::size_t rows() const { return windows.rows(); }
    std::size_t window_width() const { return windows.cols() - 1; } // W+1 observed values
};

inline training_batch sample_training_batch(const env_config& cfg, std::size_t b, rng& r) {
    cfg.validate();
    if (b < 1) throw config_error("sample_training_batch: batch size must be at least 1");
    const auto w = static_cast<std::size_t>(cfg.w);

    training_batch batch;
    batch.windows = tensor::zeros(b, w + 2);
    batch.inventories = tensor::zeros(b, 1);
    batch.theta_label.resize(b);
    batch.kappa_label.resize(b);
    batch.sigma_label.resize(b);

    const double start_std = 3.0 * cfg.sigma_inv();
    for (std::size_t row = 0; row < b; ++row) {
        detail::chain_runtime theta(cfg.theta, cfg.dt, rng(r.next_u64()), true);
        detail::chain_runtime kappa(cfg.kappa, cfg.dt, rng(r.next_u64()), true);
        detail::chain_runtime sigma(cfg.sigma, cfg.dt, rng(r.next_u64()), true);

        double s = r.normal(cfg.mu_inv, start_std);
        batch.windows.at(row, 0) = s;
        for (std::size_t u = 0; u < w + 1; ++u) {
            if (u == w) {
                batch.theta_label[row] = theta.state();
                batch.kappa_label[row] = kappa.state();
                batch.sigma_label[row] = sigma.state();
            }
            ou_params p{kappa.value(), theta.value(), sigma.value(), cfg.dt};
            s = ou_step(s, p, r);
            theta.advance();
            kappa.advance();
            sigma.advance();
            batch.windows.at(row, u + 1) = s;
        }
        batch.inventories.at(row, 0) = r.uniform(cfg.i_min, cfg.i_max);
    }
    return batch;
}

// Training loops consume batches through this hook so the same code trains
// on simulated paths or on windows cut from a recorded series.
using batch_sampler = std::function<training_batch(std::size_t, rng&)>;

inline batch_sampler env_sampler(env_config cfg) {
    return [cfg = std::move(cfg)](std::size_t b, rng& r) { return sample_training_batch(cfg, b, r); };
}

inline void write_signal_csv(const std::string& path, const signal_path& sp) {
    std::ofstream out = open_output(path);
    out << "t,S,theta_regime,kappa_regime,sigma_regime\n";
    for (std::size_t t = 0; t < sp.values.size(); ++t)
        out << t << ',' << format_g12(sp.values[t]) << ',' << sp.theta_regime[t] << ',' << sp.kappa_regime[t]
            << ',' << sp.sigma_regime[t] << '\n';
}

// Table-style defaults used across the simulated experiments.
inline tensor default_theta_rates() {
    return tensor::matrix(3, 3, {-0.1, 0.05, 0.05, 0.05, -0.1, 0.05, 0.05, 0.05, -0.1});
}

inline tensor default_two_state_rates() {
    return tensor::matrix(2, 2, {-0.1, 0.1, 0.1, -0.1});
}

inline env_config theta_only_env() {
    env_config cfg;
    cfg.theta = regime_chain{{0.9, 1.0, 1.1}, default_theta_rates(), 0};
    cfg.kappa = regime_chain{{5.0}, {}, 0};
    cfg.sigma = regime_chain{{0.2}, {}, 0};
    return cfg;
}

inline env_config theta_kappa_env() {
    env_config cfg = theta_only_env();
    cfg.kappa = regime_chain{{3.0, 7.0}, default_two_state_rates(), 0};
    return cfg;
}

inline env_config theta_kappa_sigma_env() {
    env_config cfg = theta_kappa_env();
    cfg.sigma = regime_chain{{0.1, 0.3}, default_two_state_rates(), 0};
    return cfg;
}

}
