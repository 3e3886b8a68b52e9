#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "retra/errors.hpp"
#include "retra/log.hpp"
#include "retra/tensor.hpp"

namespace retra {

// First-order vector autoregression y_t = A + B y_{t-1} + e_t fitted by
// per-equation ordinary least squares. The caller chooses what y is (levels
// or differences); the arithmetic is the same.
struct var_fit {
    tensor intercept;    // 1 x p
    tensor coeff;        // p x p, row i = equation i
    tensor residual_cov; // p x p
    tensor t_intercept;  // 1 x p
    tensor t_coeff;      // p x p
    std::vector<double> r_squared;
    std::size_t observations = 0; // regression rows (T - 1)
};

// series: rows are time steps, columns are assets.
inline var_fit fit_var(const tensor& series) {
    const std::size_t t_total = series.rows();
    const std::size_t p = series.cols();
    if (p < 1) throw config_error("fit_var: need at least one column");
    if (t_total < p + 2 || t_total < 3) throw config_error("fit_var: need at least 3 observations");

    const std::size_t n = t_total - 1;
    const std::size_t k = p + 1; // intercept + lags
    Eigen::MatrixXd x(n, k);
    Eigen::MatrixXd y(n, p);
    for (std::size_t row = 0; row < n; ++row) {
        x(row, 0) = 1.0;
        for (std::size_t c = 0; c < p; ++c) {
            x(row, 1 + c) = series.at(row, c);
            y(row, c) = series.at(row + 1, c);
        }
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < static_cast<Eigen::Index>(k)) throw numeric_error("fit_var: singular design matrix");
    const Eigen::MatrixXd beta = qr.solve(y); // k x p, column j = equation j
    const Eigen::MatrixXd residuals = y - x * beta;

    const Eigen::MatrixXd xtx_inv = (x.transpose() * x).inverse();
    var_fit fit;
    fit.observations = n;
    fit.intercept = tensor::zeros(1, p);
    fit.coeff = tensor::zeros(p, p);
    fit.residual_cov = tensor::zeros(p, p);
    fit.t_intercept = tensor::zeros(1, p);
    fit.t_coeff = tensor::zeros(p, p);
    fit.r_squared.resize(p);

    for (std::size_t eq = 0; eq < p; ++eq) {
        const double ssr = residuals.col(eq).squaredNorm();
        const double sigma2 = ssr / static_cast<double>(n - k);
        const double mean = y.col(eq).mean();
        const double tss = (y.col(eq).array() - mean).matrix().squaredNorm();
        fit.r_squared[eq] = tss > 0.0 ? 1.0 - ssr / tss : 1.0;

        fit.intercept.at(0, eq) = beta(0, eq);
        const double se0 = std::sqrt(sigma2 * xtx_inv(0, 0));
        fit.t_intercept.at(0, eq) = se0 > 0.0 ? beta(0, eq) / se0 : 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            fit.coeff.at(eq, j) = beta(1 + j, eq);
            const double se = std::sqrt(sigma2 * xtx_inv(1 + j, 1 + j));
            fit.t_coeff.at(eq, j) = se > 0.0 ? beta(1 + j, eq) / se : 0.0;
        }
    }
    const Eigen::MatrixXd cov = residuals.transpose() * residuals / static_cast<double>(n - k);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j) fit.residual_cov.at(i, j) = cov(i, j);
    return fit;
}

}
