#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "retra/errors.hpp"
#include "retra/signal.hpp"

namespace retra {

// Affine map fitted on a training span: x -> (x - lo) / (hi - lo). Test data
// transformed with the training constants may leave [0, 1]; the inverse is
// exact.
struct minmax_transform {
    double lo = 0.0;
    double hi = 1.0;

    double apply(double x) const { return (x - lo) / (hi - lo); }
    double invert(double y) const { return lo + y * (hi - lo); }

    std::vector<double> apply(const std::vector<double>& xs) const {
        std::vector<double> out(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) out[i] = apply(xs[i]);
        return out;
    }
};

inline minmax_transform minmax_fit(const std::vector<double>& train) {
    if (train.empty()) throw config_error("minmax_fit: empty training span");
    minmax_transform t;
    t.lo = *std::min_element(train.begin(), train.end());
    t.hi = *std::max_element(train.begin(), train.end());
    if (!(t.hi > t.lo)) throw config_error("minmax_fit: constant training span");
    return t;
}

// Mean-reversion benchmark: position proportional to the negative rolling
// Z-score, full size at |z| = z_cap. The window is the trailing `window`
// values including the current one; the first window-1 steps and zero-spread
// windows give a flat position. Rolling std uses the sample (n-1) form.
inline std::vector<double> zscore_positions(const std::vector<double>& series, std::size_t window,
                                            double i_max, double z_cap = 3.0) {
    if (window < 2) throw config_error("zscore_positions: window must be at least 2");
    if (series.size() <= window) throw config_error("zscore_positions: series shorter than the window");
    std::vector<double> positions(series.size(), 0.0);
    for (std::size_t t = window - 1; t < series.size(); ++t) {
        double mean = 0.0;
        for (std::size_t k = t + 1 - window; k <= t; ++k) mean += series[k];
        mean /= static_cast<double>(window);
        double ss = 0.0;
        for (std::size_t k = t + 1 - window; k <= t; ++k) ss += (series[k] - mean) * (series[k] - mean);
        const double sd = std::sqrt(ss / static_cast<double>(window - 1));
        if (sd <= 0.0) continue;
        const double z = (series[t] - mean) / sd;
        positions[t] = std::clamp(-z * i_max / z_cap, -i_max, i_max);
    }
    return positions;
}

// A strategy chooses the inventory to hold over (t, t+1] from the normalized
// window {s_u}_{t-w..t} and the inventory held into t.
using position_fn = std::function<double(std::size_t t, const std::vector<double>& normalized, double inventory)>;

struct backtest_result {
    std::vector<std::size_t> step; // reward indices, w+1 .. T-1
    std::vector<double> inventory; // I_t held over (t-1, t]
    std::vector<double> trade;     // q_t = I_t - I_{t-1}
    std::vector<double> reward;    // I_t (s_t - s_{t-1}) - lambda |q_t|
    std::vector<double> cumulative;
    double total = 0.0;
};

// Book-value backtest on normalized units: decisions at t = w .. T-2 act on
// the move into t+1.
inline backtest_result backtest(const std::vector<double>& normalized, const position_fn& strategy,
                                double lambda, std::size_t w) {
    if (normalized.size() < w + 2) throw config_error("backtest: series needs w warm-up values plus one step");
    backtest_result result;
    const std::size_t steps = normalized.size() - w - 1;
    result.step.reserve(steps);
    result.inventory.reserve(steps);
    result.trade.reserve(steps);
    result.reward.reserve(steps);
    result.cumulative.reserve(steps);

    double inventory = 0.0;
    for (std::size_t t = w; t + 1 < normalized.size(); ++t) {
        const double next_inventory = strategy(t, normalized, inventory);
        const double q = next_inventory - inventory;
        const double r = next_inventory * (normalized[t + 1] - normalized[t]) - lambda * std::abs(q);
        result.step.push_back(t + 1);
        result.inventory.push_back(next_inventory);
        result.trade.push_back(q);
        result.reward.push_back(r);
        result.total += r;
        result.cumulative.push_back(result.total);
        inventory = next_inventory;
    }
    return result;
}

// Z-score strategy adapter: positions computed once from the series.
inline position_fn zscore_strategy(const std::vector<double>& normalized, std::size_t window, double i_max,
                                   double z_cap = 3.0) {
    auto positions = std::make_shared<std::vector<double>>(zscore_positions(normalized, window, i_max, z_cap));
    return [positions](std::size_t t, const std::vector<double>&, double) { return (*positions)[t]; };
}

// Training batches drawn from a recorded series instead of the simulator:
// windows of w+2 consecutive values starting at uniform offsets, inventories
// uniform in the box, labels (when provided) read at the window's decision
// point. Lets the agent pipelines train on real data unchanged.
inline batch_sampler series_sampler(std::vector<double> series, std::vector<int> labels, int w, double i_min,
                                    double i_max) {
    if (series.size() < static_cast<std::size_t>(w) + 2)
        throw config_error("series_sampler: series shorter than one window");
    if (!labels.empty() && labels.size() != series.size())
        throw config_error("series_sampler: label/series length mismatch");
    return [series = std::move(series), labels = std::move(labels), w, i_min, i_max](std::size_t b, rng& r) {
        const auto width = static_cast<std::size_t>(w) + 2;
        const std::size_t starts = series.size() - width + 1;
        training_batch batch;
        batch.windows = tensor::zeros(b, width);
        batch.inventories = tensor::zeros(b, 1);
        batch.theta_label.resize(b, 0);
        batch.kappa_label.resize(b, 0);
        batch.sigma_label.resize(b, 0);
        for (std::size_t row = 0; row < b; ++row) {
            const std::size_t start = r.uniform_int(starts);
            for (std::size_t k = 0; k < width; ++k) batch.windows.at(row, k) = series[start + k];
            batch.inventories.at(row, 0) = r.uniform(i_min, i_max);
            if (!labels.empty()) batch.theta_label[row] = labels[start + static_cast<std::size_t>(w)];
        }
        return batch;
    };
}

}
