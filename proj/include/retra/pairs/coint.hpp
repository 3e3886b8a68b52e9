#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "retra/pairs/var.hpp"

namespace retra {

// Mean-reversion decomposition of a fitted VAR: kappa = (I - B) / dt with
// long-run mean theta = kappa^{-1} A dt. kappa = U^{-1} Lambda U where the
// rows of U are left eigenvectors; the row belonging to the largest
// eigenvalue is the portfolio most exposed to mean reversion.
struct coint_result {
    tensor kappa;                    // p x p
    std::vector<double> theta;       // p
    std::vector<double> eigenvalues; // ascending
    tensor u;                        // p x p, row i pairs with eigenvalues[i]
    std::vector<double> weights;     // last row of u, sign-normalized
};

inline coint_result cointegrate(const var_fit& fit, double dt = 1.0) {
    if (!(dt > 0.0)) throw config_error("cointegrate: dt must be positive");
    const std::size_t p = fit.coeff.rows();
    if (p < 2) throw config_error("cointegrate: need at least two assets");

    Eigen::MatrixXd b(p, p);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j) b(i, j) = fit.coeff.at(i, j);
    const Eigen::MatrixXd kappa = (Eigen::MatrixXd::Identity(p, p) - b) / dt;

    Eigen::FullPivLU<Eigen::MatrixXd> lu(kappa);
    if (!lu.isInvertible()) throw numeric_error("cointegrate: kappa is singular (no mean reversion)");

    Eigen::VectorXd a(p);
    for (std::size_t i = 0; i < p; ++i) a(i) = fit.intercept.at(0, i);
    const Eigen::VectorXd theta = lu.solve(a) * dt;

    Eigen::EigenSolver<Eigen::MatrixXd> eigen(kappa);
    if (eigen.info() != Eigen::Success) throw numeric_error("cointegrate: eigen decomposition failed");
    const Eigen::VectorXcd values = eigen.eigenvalues();
    for (std::size_t i = 0; i < p; ++i) {
        if (std::abs(values(i).imag()) > 1e-9 * (1.0 + std::abs(values(i).real()))) {
            std::string listing;
            for (std::size_t j = 0; j < p; ++j)
                listing += (j ? ", " : "") + std::to_string(values(j).real()) + "+" +
                           std::to_string(values(j).imag()) + "i";
            throw numeric_error("cointegrate: complex eigenvalues [" + listing + "]");
        }
    }

    std::vector<std::size_t> order(p);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return values(i).real() < values(j).real(); });

    coint_result result;
    result.kappa = tensor::zeros(p, p);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j) result.kappa.at(i, j) = kappa(i, j);
    result.theta.resize(p);
    for (std::size_t i = 0; i < p; ++i) result.theta[i] = theta(i);

    Eigen::MatrixXd v(p, p); // right eigenvectors as unit columns, ascending
    result.eigenvalues.resize(p);
    for (std::size_t i = 0; i < p; ++i) {
        result.eigenvalues[i] = values(order[i]).real();
        if (result.eigenvalues[i] <= 0.0)
            log_info("cointegrate: eigenvalue %zu is not positive (%g); the matching portfolio does not mean-revert",
                     i, result.eigenvalues[i]);
        Eigen::VectorXcd column = eigen.eigenvectors().col(order[i]);
        for (std::size_t j = 0; j < p; ++j) v(j, i) = column(j).real();
        v.col(i).normalize();
    }

    Eigen::FullPivLU<Eigen::MatrixXd> v_lu(v);
    if (!v_lu.isInvertible()) throw numeric_error("cointegrate: eigenvector matrix is singular");
    Eigen::MatrixXd u = v.inverse();
    for (std::size_t i = 0; i < p; ++i) {
        // rows are only defined up to sign; make the dominant entry positive
        std::size_t biggest = 0;
        for (std::size_t j = 1; j < p; ++j)
            if (std::abs(u(i, j)) > std::abs(u(i, biggest))) biggest = j;
        if (u(i, biggest) < 0.0) u.row(i) = -u.row(i);
    }

    result.u = tensor::zeros(p, p);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j) result.u.at(i, j) = u(i, j);
    result.weights.resize(p);
    for (std::size_t j = 0; j < p; ++j) result.weights[j] = u(p - 1, j);
    return result;
}

// || U^{-1} Lambda U - kappa ||_F / || kappa ||_F, the decomposition's
// self-consistency measure.
inline double reconstruction_error(const coint_result& result) {
    const std::size_t p = result.eigenvalues.size();
    Eigen::MatrixXd u(p, p), kappa(p, p);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j) {
            u(i, j) = result.u.at(i, j);
            kappa(i, j) = result.kappa.at(i, j);
        }
    Eigen::VectorXd lambda(p);
    for (std::size_t i = 0; i < p; ++i) lambda(i) = result.eigenvalues[i];
    const Eigen::MatrixXd rebuilt = u.inverse() * lambda.asDiagonal() * u;
    return (rebuilt - kappa).norm() / kappa.norm();
}

// Portfolio series from the selected weights.
inline std::vector<double> build_portfolio(const std::vector<double>& weights, const tensor& series) {
    if (weights.size() != series.cols()) throw dimension_error("build_portfolio: weight/asset mismatch");
    std::vector<double> portfolio(series.rows());
    for (std::size_t t = 0; t < series.rows(); ++t) {
        double acc = 0.0;
        for (std::size_t c = 0; c < weights.size(); ++c) acc += weights[c] * series.at(t, c);
        portfolio[t] = acc;
    }
    return portfolio;
}

}
