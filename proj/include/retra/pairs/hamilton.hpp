#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "retra/errors.hpp"
#include "retra/tensor.hpp"

namespace retra {

// Two-regime Gaussian mean-switching model: y_t = theta_{s_t} + e_t with
// e_t ~ N(0, sigma2) and a first-order Markov regime s_t. Estimated by
// expectation-maximization over the filtered likelihood with smoothed
// probabilities from the backward pass. theta1 < theta2 by convention.
struct hamilton_fit {
    double theta1 = 0.0;
    double theta2 = 0.0;
    double sigma2 = 0.0;
    tensor transition;          // 2 x 2, rows sum to 1
    std::vector<double> initial; // regime distribution at t = 0
    tensor smoothed;            // T x 2 posterior regime probabilities
    std::vector<double> loglik; // one entry per EM iteration, non-decreasing
    bool converged = false;
    bool degenerate = false;    // regimes collapsed (e.g. constant input)
};

inline hamilton_fit hamilton_two_regime(const std::vector<double>& series, int max_iter = 500,
                                        double tol = 1e-8) {
    const std::size_t t_len = series.size();
    if (t_len < 4) throw config_error("hamilton_two_regime: need at least 4 observations");
    if (max_iter < 1) throw config_error("hamilton_two_regime: max_iter must be positive");

    hamilton_fit fit;
    fit.transition = tensor::zeros(2, 2);
    fit.smoothed = tensor::zeros(t_len, 2);
    fit.initial = {0.5, 0.5};

    double mean = 0.0;
    for (double v : series) mean += v;
    mean /= static_cast<double>(t_len);
    double variance = 0.0;
    for (double v : series) variance += (v - mean) * (v - mean);
    variance /= static_cast<double>(t_len);

    if (variance < 1e-14) {
        // nothing to separate: collapse to one regime and flag it
        fit.theta1 = fit.theta2 = mean;
        fit.sigma2 = 0.0;
        fit.transition.at(0, 0) = fit.transition.at(0, 1) = 0.5;
        fit.transition.at(1, 0) = fit.transition.at(1, 1) = 0.5;
        for (std::size_t t = 0; t < t_len; ++t) fit.smoothed.at(t, 0) = fit.smoothed.at(t, 1) = 0.5;
        fit.degenerate = true;
        fit.converged = true;
        return fit;
    }

    // moment-based start: lower and upper quartiles as the two means
    std::vector<double> sorted = series;
    std::sort(sorted.begin(), sorted.end());
    double theta[2] = {sorted[t_len / 4], sorted[(3 * t_len) / 4]};
    if (theta[1] - theta[0] < 1e-12) {
        theta[0] = mean - std::sqrt(variance);
        theta[1] = mean + std::sqrt(variance);
    }
    double sigma2 = variance;
    double p[2][2] = {{0.95, 0.05}, {0.05, 0.95}};
    double rho[2] = {0.5, 0.5};

    std::vector<double> alpha(2 * t_len), beta(2 * t_len), scale(t_len), shift(t_len);
    std::vector<double> b(2 * t_len);

    for (int iter = 0; iter < max_iter; ++iter) {
        // emission densities, scaled per step so the filter never underflows
        for (std::size_t t = 0; t < t_len; ++t) {
            double lb[2];
            for (int j = 0; j < 2; ++j) {
                const double d = series[t] - theta[j];
                lb[j] = -0.5 * d * d / sigma2 - 0.5 * std::log(2.0 * std::numbers::pi * sigma2);
            }
            const double mx = std::max(lb[0], lb[1]);
            shift[t] = mx;
            b[2 * t] = std::exp(lb[0] - mx);
            b[2 * t + 1] = std::exp(lb[1] - mx);
        }

        // forward pass with per-step normalization
        double ll = 0.0;
        for (int j = 0; j < 2; ++j) alpha[j] = rho[j] * b[j];
        scale[0] = alpha[0] + alpha[1];
        if (!(scale[0] > 0.0)) throw numeric_error("hamilton_two_regime: zero filter mass");
        alpha[0] /= scale[0];
        alpha[1] /= scale[0];
        ll += std::log(scale[0]) + shift[0];
        for (std::size_t t = 1; t < t_len; ++t) {
            for (int j = 0; j < 2; ++j)
                alpha[2 * t + j] = b[2 * t + j] * (alpha[2 * (t - 1)] * p[0][j] + alpha[2 * (t - 1) + 1] * p[1][j]);
            scale[t] = alpha[2 * t] + alpha[2 * t + 1];
            if (!(scale[t] > 0.0)) throw numeric_error("hamilton_two_regime: zero filter mass");
            alpha[2 * t] /= scale[t];
            alpha[2 * t + 1] /= scale[t];
            ll += std::log(scale[t]) + shift[t];
        }
        fit.loglik.push_back(ll);

        // backward pass sharing the forward scale factors
        beta[2 * (t_len - 1)] = beta[2 * (t_len - 1) + 1] = 1.0;
        for (std::size_t t = t_len - 1; t-- > 0;) {
            for (int i = 0; i < 2; ++i) {
                double acc = 0.0;
                for (int j = 0; j < 2; ++j) acc += p[i][j] * b[2 * (t + 1) + j] * beta[2 * (t + 1) + j];
                beta[2 * t + i] = acc / scale[t + 1];
            }
        }

        for (std::size_t t = 0; t < t_len; ++t) {
            const double g0 = alpha[2 * t] * beta[2 * t];
            const double g1 = alpha[2 * t + 1] * beta[2 * t + 1];
            const double total = g0 + g1;
            fit.smoothed.at(t, 0) = g0 / total;
            fit.smoothed.at(t, 1) = g1 / total;
        }

        // expected transition counts
        double xi[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
        for (std::size_t t = 0; t + 1 < t_len; ++t)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    xi[i][j] += alpha[2 * t + i] * p[i][j] * b[2 * (t + 1) + j] * beta[2 * (t + 1) + j] / scale[t + 1];

        // M step
        double occupancy[2] = {0.0, 0.0};
        double weighted[2] = {0.0, 0.0};
        for (std::size_t t = 0; t < t_len; ++t)
            for (int j = 0; j < 2; ++j) {
                occupancy[j] += fit.smoothed.at(t, j);
                weighted[j] += fit.smoothed.at(t, j) * series[t];
            }
        if (occupancy[0] < 1e-10 || occupancy[1] < 1e-10) {
            fit.degenerate = true;
            break;
        }
        for (int j = 0; j < 2; ++j) theta[j] = weighted[j] / occupancy[j];

        double ss = 0.0;
        for (std::size_t t = 0; t < t_len; ++t)
            for (int j = 0; j < 2; ++j) {
                const double d = series[t] - theta[j];
                ss += fit.smoothed.at(t, j) * d * d;
            }
        sigma2 = ss / static_cast<double>(t_len);
        if (sigma2 < 1e-14) {
            fit.degenerate = true;
            break;
        }

        for (int i = 0; i < 2; ++i) {
            const double row_mass = xi[i][0] + xi[i][1];
            if (row_mass < 1e-12) {
                fit.degenerate = true;
                break;
            }
            for (int j = 0; j < 2; ++j) p[i][j] = xi[i][j] / row_mass;
        }
        if (fit.degenerate) break;
        rho[0] = fit.smoothed.at(0, 0);
        rho[1] = fit.smoothed.at(0, 1);

        if (fit.loglik.size() >= 2 &&
            std::abs(fit.loglik.back() - fit.loglik[fit.loglik.size() - 2]) < tol) {
            fit.converged = true;
            break;
        }
    }

    fit.theta1 = theta[0];
    fit.theta2 = theta[1];
    fit.sigma2 = sigma2;
    fit.initial = {rho[0], rho[1]};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) fit.transition.at(i, j) = p[i][j];

    if (fit.theta1 > fit.theta2) {
        // relabel so regime 1 is the low-mean state everywhere
        std::swap(fit.theta1, fit.theta2);
        std::swap(fit.initial[0], fit.initial[1]);
        tensor swapped = tensor::zeros(2, 2);
        swapped.at(0, 0) = fit.transition.at(1, 1);
        swapped.at(0, 1) = fit.transition.at(1, 0);
        swapped.at(1, 0) = fit.transition.at(0, 1);
        swapped.at(1, 1) = fit.transition.at(0, 0);
        fit.transition = swapped;
        for (std::size_t t = 0; t < fit.smoothed.rows(); ++t)
            std::swap(fit.smoothed.at(t, 0), fit.smoothed.at(t, 1));
    }
    return fit;
}

// Smoothed regime probabilities for a new series under already-fitted
// parameters: one forward-backward pass, no re-estimation. Lets a model
// fitted on the training span label the full sample.
inline tensor hamilton_smoothed(const hamilton_fit& fit, const std::vector<double>& series) {
    const std::size_t t_len = series.size();
    if (t_len == 0) throw config_error("hamilton_smoothed: empty series");
    tensor smoothed = tensor::zeros(t_len, 2);
    if (fit.degenerate || fit.sigma2 < 1e-14) {
        for (std::size_t t = 0; t < t_len; ++t) smoothed.at(t, 0) = smoothed.at(t, 1) = 0.5;
        return smoothed;
    }

    const double theta[2] = {fit.theta1, fit.theta2};
    std::vector<double> alpha(2 * t_len), beta(2 * t_len), scale(t_len), b(2 * t_len);
    for (std::size_t t = 0; t < t_len; ++t) {
        double lb[2];
        for (int j = 0; j < 2; ++j) {
            const double d = series[t] - theta[j];
            lb[j] = -0.5 * d * d / fit.sigma2;
        }
        const double mx = std::max(lb[0], lb[1]);
        b[2 * t] = std::exp(lb[0] - mx);
        b[2 * t + 1] = std::exp(lb[1] - mx);
    }
    for (int j = 0; j < 2; ++j) alpha[j] = fit.initial[static_cast<std::size_t>(j)] * b[j];
    scale[0] = alpha[0] + alpha[1];
    if (!(scale[0] > 0.0)) throw numeric_error("hamilton_smoothed: zero filter mass");
    alpha[0] /= scale[0];
    alpha[1] /= scale[0];
    for (std::size_t t = 1; t < t_len; ++t) {
        for (int j = 0; j < 2; ++j)
            alpha[2 * t + j] = b[2 * t + j] * (alpha[2 * (t - 1)] * fit.transition.at(0, static_cast<std::size_t>(j))
                                               + alpha[2 * (t - 1) + 1] * fit.transition.at(1, static_cast<std::size_t>(j)));
        scale[t] = alpha[2 * t] + alpha[2 * t + 1];
        if (!(scale[t] > 0.0)) throw numeric_error("hamilton_smoothed: zero filter mass");
        alpha[2 * t] /= scale[t];
        alpha[2 * t + 1] /= scale[t];
    }
    beta[2 * (t_len - 1)] = beta[2 * (t_len - 1) + 1] = 1.0;
    for (std::size_t t = t_len - 1; t-- > 0;) {
        for (int i = 0; i < 2; ++i) {
            double acc = 0.0;
            for (int j = 0; j < 2; ++j)
                acc += fit.transition.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j))
                       * b[2 * (t + 1) + j] * beta[2 * (t + 1) + j];
            beta[2 * t + i] = acc / scale[t + 1];
        }
    }
    for (std::size_t t = 0; t < t_len; ++t) {
        const double g0 = alpha[2 * t] * beta[2 * t];
        const double g1 = alpha[2 * t + 1] * beta[2 * t + 1];
        smoothed.at(t, 0) = g0 / (g0 + g1);
        smoothed.at(t, 1) = g1 / (g0 + g1);
    }
    return smoothed;
}

// Most probable regime per step from a smoothed posterior.
inline std::vector<int> most_probable_regimes(const tensor& smoothed) {
    std::vector<int> labels(smoothed.rows());
    for (std::size_t t = 0; t < smoothed.rows(); ++t) labels[t] = smoothed.at(t, 1) > smoothed.at(t, 0) ? 1 : 0;
    return labels;
}

inline std::vector<int> most_probable_regimes(const hamilton_fit& fit) {
    return most_probable_regimes(fit.smoothed);
}

}
