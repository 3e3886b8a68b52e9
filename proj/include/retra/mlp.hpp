#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "retra/graph.hpp"
#include "retra/param_store.hpp"
#include "retra/rng.hpp"

namespace retra {

enum class activation { linear, tanh_act, logistic_act, silu_act, leaky_relu_act, softmax_act };

// Feed-forward stack: `layers` hidden layers of `width` nodes between input
// and output, SiLU by default in the hidden part. Weights are stored input
// x output so batched rows multiply without transposes.
struct mlp_spec {
    int input = 1;
    int output = 1;
    int layers = 1;
    int width = 8;
    activation hidden = activation::silu_act;
    activation final = activation::linear;
    double final_scale = 1.0; // applied after the final activation
};

inline tensor uniform_init(std::size_t rows, std::size_t cols, std::size_t fan_in, rng& r) {
    tensor t = tensor::zeros(rows, cols);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in > 0 ? fan_in : 1));
    for (double& v : t.data) v = r.uniform(-bound, bound);
    return t;
}

inline void mlp_init(param_store& params, const std::string& prefix, const mlp_spec& spec, rng& r) {
    int in = spec.input;
    for (int layer = 0; layer <= spec.layers; ++layer) {
        const int out = layer == spec.layers ? spec.output : spec.width;
        const std::string base = prefix + "/layer" + std::to_string(layer);
        params.insert(base + "/weight", uniform_init(static_cast<std::size_t>(in), static_cast<std::size_t>(out),
                                                     static_cast<std::size_t>(in), r));
        params.insert(base + "/bias", uniform_init(1, static_cast<std::size_t>(out), static_cast<std::size_t>(in), r));
        in = out;
    }
}

inline var apply_activation(graph& g, var x, activation act, double scale = 1.0) {
    var y = x;
    switch (act) {
    case activation::linear: break;
    case activation::tanh_act: y = g.tanh(x); break;
    case activation::logistic_act: y = g.logistic(x); break;
    case activation::silu_act: y = g.silu(x); break;
    case activation::leaky_relu_act: y = g.leaky_relu(x); break;
    case activation::softmax_act: y = g.softmax(x); break;
    }
    if (scale != 1.0) y = g.smul(scale, y);
    return y;
}

// x: batch x input rows. Returns batch x output.
inline var mlp_forward(graph& g, const bound_params& bound, const std::string& prefix, var x,
                       const mlp_spec& spec) {
    var h = x;
    for (int layer = 0; layer <= spec.layers; ++layer) {
        const std::string base = prefix + "/layer" + std::to_string(layer);
        h = g.add(g.matmul(h, bound[base + "/weight"]), bound[base + "/bias"]);
        if (layer < spec.layers)
            h = apply_activation(g, h, spec.hidden);
        else
            h = apply_activation(g, h, spec.final, spec.final_scale);
    }
    return h;
}

// Tape-free single-row evaluation, for tight per-step loops where gradients
// and batching are not needed. Must agree with mlp_forward exactly.
inline std::vector<double> mlp_eval(const param_store& params, const std::string& prefix,
                                    const std::vector<double>& input, const mlp_spec& spec) {
    const auto act_scalar = [](double v, activation act) {
        switch (act) {
        case activation::linear: return v;
        case activation::tanh_act: return std::tanh(v);
        case activation::logistic_act: return 1.0 / (1.0 + std::exp(-v));
        case activation::silu_act: return v / (1.0 + std::exp(-v));
        case activation::leaky_relu_act: return v >= 0.0 ? v : 0.01 * v;
        case activation::softmax_act: return v; // handled on the whole row
        }
        return v;
    };
    std::vector<double> h = input;
    for (int layer = 0; layer <= spec.layers; ++layer) {
        const std::string base = prefix + "/layer" + std::to_string(layer);
        const tensor& w = params.at(base + "/weight");
        const tensor& b = params.at(base + "/bias");
        if (h.size() != w.rows()) throw dimension_error("mlp_eval: input width " + std::to_string(h.size()) + " vs weight rows " + std::to_string(w.rows()));
        std::vector<double> next(w.cols());
        for (std::size_t c = 0; c < w.cols(); ++c) {
            double acc = b.data[c];
            for (std::size_t r = 0; r < w.rows(); ++r) acc += h[r] * w.at(r, c);
            next[c] = acc;
        }
        const activation act = layer < spec.layers ? spec.hidden : spec.final;
        if (act == activation::softmax_act) {
            double mx = next[0];
            for (double v : next) mx = std::max(mx, v);
            double total = 0.0;
            for (double& v : next) {
                v = std::exp(v - mx);
                total += v;
            }
            for (double& v : next) v /= total;
        } else {
            for (double& v : next) v = act_scalar(v, act);
        }
        if (layer == spec.layers && spec.final_scale != 1.0)
            for (double& v : next) v *= spec.final_scale;
        h = std::move(next);
    }
    return h;
}

}
