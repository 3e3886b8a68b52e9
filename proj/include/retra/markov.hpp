#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "retra/errors.hpp"
#include "retra/rng.hpp"
#include "retra/tensor.hpp"

namespace retra {

// e^{A tau} by scaling-and-squaring with a truncated Taylor series; terms are
// added until the largest one falls below 1e-16. A must have zero row sums
// (generator), so the result is row-stochastic.
inline tensor matrix_exponential(const tensor& a, double tau) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw dimension_error("matrix_exponential: matrix is not square");

    tensor b = a;
    for (double& v : b.data) v *= tau;

    double norm = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        double row = 0.0;
        for (std::size_t c = 0; c < n; ++c) row += std::fabs(b.at(r, c));
        norm = std::max(norm, row);
    }
    int squarings = 0;
    while (norm > 0.5) {
        norm *= 0.5;
        ++squarings;
    }
    const double scale = std::ldexp(1.0, -squarings);
    for (double& v : b.data) v *= scale;

    tensor result = tensor::zeros(n, n);
    for (std::size_t i = 0; i < n; ++i) result.at(i, i) = 1.0;
    tensor term = result;
    for (int k = 1; k <= 64; ++k) {
        tensor next = tensor::zeros(n, n);
        as_eigen(next).noalias() = as_eigen(term) * as_eigen(b);
        for (double& v : next.data) v /= static_cast<double>(k);
        term = std::move(next);
        double biggest = 0.0;
        for (double v : term.data) biggest = std::max(biggest, std::fabs(v));
        for (std::size_t i = 0; i < term.size(); ++i) result[i] += term[i];
        if (biggest < 1e-16) break;
    }
    for (int s = 0; s < squarings; ++s) {
        tensor sq = tensor::zeros(n, n);
        as_eigen(sq).noalias() = as_eigen(result) * as_eigen(result);
        result = std::move(sq);
    }
    return result;
}

// Parameter levels driven by a continuous-time Markov chain; a single state
// encodes a constant parameter.
struct regime_chain {
    std::vector<double> values;
    tensor rate_matrix; // square, zero row sums, off-diagonals >= 0
    int state = 0;

    std::size_t size() const { return values.size(); }

    void validate() const {
        const std::size_t n = values.size();
        if (n == 0) throw config_error("regime_chain: no parameter levels");
        if (n == 1) return; // constant parameter, matrix unused
        if (rate_matrix.rows() != n || rate_matrix.cols() != n)
            throw dimension_error("regime_chain: rate matrix shape does not match level count");
        for (std::size_t r = 0; r < n; ++r) {
            double row = 0.0;
            for (std::size_t c = 0; c < n; ++c) {
                row += rate_matrix.at(r, c);
                if (r != c && rate_matrix.at(r, c) < 0.0)
                    throw config_error("regime_chain: negative off-diagonal rate");
            }
            if (std::fabs(row) > 1e-12) throw config_error("regime_chain: rate matrix rows must sum to 0");
        }
    }

    tensor transition_matrix(double tau) const {
        if (size() == 1) return tensor::matrix(1, 1, {1.0});
        return matrix_exponential(rate_matrix, tau);
    }
};

// Draw the next state from row P[current]; updates the chain in place.
inline int step_chain(regime_chain& chain, const tensor& p, rng& r) {
    const std::size_t n = chain.size();
    if (n == 1) return chain.state;
    const double u = r.uniform01();
    double acc = 0.0;
    std::size_t next = n - 1;
    for (std::size_t c = 0; c < n; ++c) {
        acc += p.at(static_cast<std::size_t>(chain.state), c);
        if (u < acc) {
            next = c;
            break;
        }
    }
    chain.state = static_cast<int>(next);
    return chain.state;
}

// Stationary row of a stochastic matrix by repeated squaring (chains here are
// small and ergodic).
inline std::vector<double> stationary_distribution(const tensor& p) {
    tensor q = p;
    for (int iter = 0; iter < 64; ++iter) {
        tensor sq = tensor::zeros(q.rows(), q.cols());
        as_eigen(sq).noalias() = as_eigen(q) * as_eigen(q);
        double gap = 0.0;
        for (std::size_t c = 0; c < sq.cols(); ++c)
            for (std::size_t r = 1; r < sq.rows(); ++r)
                gap = std::max(gap, std::fabs(sq.at(r, c) - sq.at(0, c)));
        q = std::move(sq);
        if (gap < 1e-14) break;
    }
    std::vector<double> pi(q.cols());
    for (std::size_t c = 0; c < q.cols(); ++c) pi[c] = q.at(0, c);
    return pi;
}

inline int sample_index(const std::vector<double>& weights, rng& r) {
    const double u = r.uniform01();
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
}

}
