#pragma once

#include <cmath>
#include <utility>

#include "retra/errors.hpp"
#include "retra/rng.hpp"

namespace retra {

struct ou_params {
    double kappa = 1.0; // mean-reversion speed, 1/time
    double theta = 0.0; // long-run level
    double sigma = 1.0; // volatility per sqrt(time)
    double dt = 1.0;

    void validate() const {
        if (kappa <= 0.0) throw config_error("ou_params: kappa must be positive");
        if (sigma <= 0.0) throw config_error("ou_params: sigma must be positive");
        if (dt <= 0.0) throw config_error("ou_params: dt must be positive");
    }
};

// Conditional mean of the exact one-step law.
inline double ou_step_mean(double s, const ou_params& p) {
    const double decay = std::exp(-p.kappa * p.dt);
    return decay * s + p.theta * (1.0 - decay);
}

// Conditional variance of the exact one-step law.
inline double ou_step_variance(const ou_params& p) {
    return p.sigma * p.sigma * (1.0 - std::exp(-2.0 * p.kappa * p.dt)) / (2.0 * p.kappa);
}

// Exact one-step draw with parameters frozen over the step.
inline double ou_step(double s, const ou_params& p, rng& r) {
    return ou_step_mean(s, p) + std::sqrt(ou_step_variance(p)) * r.normal();
}

// (mean, variance) of the stationary law.
inline std::pair<double, double> stationary_moments(const ou_params& p) {
    return {p.theta, p.sigma * p.sigma / (2.0 * p.kappa)};
}

}
