#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "retra/errors.hpp"

namespace retra {

// Dense row-major f64 tensor. Rank 0/1/2 are what the models need; the math
// engine views everything as rows x cols (rank 0 -> 1x1, rank 1 -> 1xn).
struct tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    tensor() = default;

    static tensor scalar(double v) {
        tensor t;
        t.data = {v};
        return t;
    }

    static tensor zeros(std::size_t rows, std::size_t cols) {
        tensor t;
        t.shape = {rows, cols};
        t.data.assign(rows * cols, 0.0);
        return t;
    }

    static tensor vec(std::vector<double> values) {
        tensor t;
        t.shape = {values.size()};
        t.data = std::move(values);
        return t;
    }

    static tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
        tensor t;
        t.shape = {rows, cols};
        t.data = std::move(values);
        if (t.data.size() != rows * cols)
            throw dimension_error("tensor::matrix: data length does not match shape");
        return t;
    }

    std::size_t rank() const { return shape.size(); }
    std::size_t size() const { return data.size(); }

    std::size_t rows() const { return rank() == 2 ? shape[0] : 1; }
    std::size_t cols() const {
        if (rank() == 2) return shape[1];
        if (rank() == 1) return shape[0];
        return 1;
    }

    double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    bool same_shape(const tensor& other) const {
        return rows() == other.rows() && cols() == other.cols();
    }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    std::string shape_string() const {
        std::string s = "(";
        for (std::size_t i = 0; i < shape.size(); ++i)
            s += (i ? "," : "") + std::to_string(shape[i]);
        return s + ")";
    }
};

using emap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ecmap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

inline emap as_eigen(tensor& t) {
    return emap(t.data.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

inline ecmap as_eigen(const tensor& t) {
    return ecmap(t.data.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

}
