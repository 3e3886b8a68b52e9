#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "retra/errors.hpp"
#include "retra/tensor.hpp"

namespace retra {

// How deterministic terms enter the reduced-rank regression. The critical
// values shipped as defaults are config inputs, not recomputed asymptotics;
// unrestricted_constant is the default whose null rejection rate sits at the
// nominal 5% level against those defaults on driftless random walks.
enum class johansen_deterministic {
    none,                  // no constants anywhere
    restricted_constant,   // constant confined to the cointegrating relation
    unrestricted_constant, // constant in the VAR: demeaned differences and levels
    detrended              // linear trend removed from the levels first
};

inline johansen_deterministic johansen_deterministic_from_name(const std::string& name) {
    if (name == "none") return johansen_deterministic::none;
    if (name == "restricted_constant") return johansen_deterministic::restricted_constant;
    if (name == "unrestricted_constant") return johansen_deterministic::unrestricted_constant;
    if (name == "detrended") return johansen_deterministic::detrended;
    throw config_error("unknown johansen deterministic spec '" + name + "'");
}

inline std::string johansen_deterministic_name(johansen_deterministic d) {
    switch (d) {
    case johansen_deterministic::none: return "none";
    case johansen_deterministic::restricted_constant: return "restricted_constant";
    case johansen_deterministic::unrestricted_constant: return "unrestricted_constant";
    case johansen_deterministic::detrended: return "detrended";
    }
    return "?";
}

struct johansen_spec {
    johansen_deterministic deterministic = johansen_deterministic::unrestricted_constant;
    double trace_critical = 18.399;   // r = 0 threshold
    double max_eig_critical = 17.148; // r = 0 threshold
};

struct johansen_result {
    std::vector<double> eigenvalues; // descending, one per possible rank
    std::vector<double> trace;       // trace statistic for r = 0, 1, ...
    std::vector<double> max_eig;     // max-eigenvalue statistic for r = 0, 1, ...
    bool reject_trace = false;       // H0: no cointegrating vector, at r = 0
    bool reject_max_eig = false;
    std::size_t observations = 0;
};

namespace detail {

// Least-squares residual of each column of y on the columns of x.
inline Eigen::MatrixXd residual_on(const Eigen::MatrixXd& y, const Eigen::MatrixXd& x) {
    if (x.cols() == 0) return y;
    return y - x * Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(x).solve(y);
}

inline Eigen::MatrixXd with_ones(const Eigen::MatrixXd& x) {
    Eigen::MatrixXd out(x.rows(), x.cols() + 1);
    out << x, Eigen::MatrixXd::Ones(x.rows(), 1);
    return out;
}

// Remove a fitted linear trend (intercept + slope on the row index) from
// every column.
inline Eigen::MatrixXd remove_trend(const Eigen::MatrixXd& y) {
    Eigen::MatrixXd x(y.rows(), 2);
    for (Eigen::Index t = 0; t < y.rows(); ++t) {
        x(t, 0) = 1.0;
        x(t, 1) = static_cast<double>(t);
    }
    return residual_on(y, x);
}

}

// Rank-zero cointegration test with one lagged difference. The reduced-rank
// eigenvalues come from the product-moment matrices of the residuals of the
// differenced and lagged-level series on the lagged differences (plus the
// chosen deterministic terms); trace(r) = -T sum_{i>r} ln(1 - lambda_i).
inline johansen_result johansen_test(const tensor& levels, const johansen_spec& spec = {}) {
    const std::size_t rows = levels.rows();
    const std::size_t p = levels.cols();
    if (p < 2) throw config_error("johansen_test: need at least two series");
    if (rows < p + 12) throw config_error("johansen_test: insufficient data (" + std::to_string(rows) + " rows)");

    Eigen::MatrixXd y(rows, p);
    for (std::size_t t = 0; t < rows; ++t)
        for (std::size_t c = 0; c < p; ++c) y(t, c) = levels.at(t, c);
    if (spec.deterministic == johansen_deterministic::detrended) y = detail::remove_trend(y);

    // dy_t = y_t - y_{t-1}; regressions use dx = dy_2.. on z = dy_1.. and the
    // in-between levels lx = y_1..
    const Eigen::Index t_diff = static_cast<Eigen::Index>(rows) - 1;
    Eigen::MatrixXd dy = y.bottomRows(t_diff) - y.topRows(t_diff);
    Eigen::MatrixXd dx = dy.bottomRows(t_diff - 1);
    Eigen::MatrixXd z = dy.topRows(t_diff - 1);
    Eigen::MatrixXd lx = y.middleRows(1, t_diff - 1);
    const auto t_obs = static_cast<double>(dx.rows());

    Eigen::MatrixXd r0, rk;
    switch (spec.deterministic) {
    case johansen_deterministic::none:
        r0 = detail::residual_on(dx, z);
        rk = detail::residual_on(lx, z);
        break;
    case johansen_deterministic::restricted_constant:
        // the constant joins the levels, so the eigenproblem has p+1 roots
        r0 = detail::residual_on(dx, z);
        rk = detail::residual_on(detail::with_ones(lx), z);
        break;
    case johansen_deterministic::unrestricted_constant:
    case johansen_deterministic::detrended:
        r0 = detail::residual_on(dx, detail::with_ones(z));
        rk = detail::residual_on(lx, detail::with_ones(z));
        break;
    }

    const Eigen::MatrixXd s00 = r0.transpose() * r0 / t_obs;
    const Eigen::MatrixXd skk = rk.transpose() * rk / t_obs;
    const Eigen::MatrixXd sk0 = rk.transpose() * r0 / t_obs;
    const Eigen::MatrixXd target = skk.inverse() * sk0 * s00.inverse() * sk0.transpose();

    Eigen::EigenSolver<Eigen::MatrixXd> eigen(target);
    if (eigen.info() != Eigen::Success) throw numeric_error("johansen_test: eigen decomposition failed");
    std::vector<double> lambda(static_cast<std::size_t>(target.rows()));
    for (std::size_t i = 0; i < lambda.size(); ++i)
        lambda[i] = std::clamp(eigen.eigenvalues()(i).real(), 0.0, 1.0 - 1e-15);
    std::sort(lambda.begin(), lambda.end(), std::greater<>());
    lambda.resize(p); // restricted case appends one near-zero root; drop it

    johansen_result result;
    result.observations = static_cast<std::size_t>(t_obs);
    result.eigenvalues = lambda;
    result.trace.resize(p);
    result.max_eig.resize(p);
    for (std::size_t r = 0; r < p; ++r) {
        double acc = 0.0;
        for (std::size_t i = r; i < p; ++i) acc += std::log(1.0 - lambda[i]);
        result.trace[r] = -t_obs * acc;
        result.max_eig[r] = -t_obs * std::log(1.0 - lambda[r]);
    }
    result.reject_trace = result.trace[0] > spec.trace_critical;
    result.reject_max_eig = result.max_eig[0] > spec.max_eig_critical;
    return result;
}

}
