#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "retra/adamw.hpp"
#include "retra/gru.hpp"
#include "retra/io.hpp"
#include "retra/mlp.hpp"
#include "retra/signal.hpp"

#include "json.hpp"

namespace retra {

enum class head_kind { classifier, regressor, feature };

// Recurrent encoder plus one task head. classifier emits regime
// probabilities, regressor emits the next signal value, feature keeps the
// final hidden state as-is (with an optional scalar projection trained on
// next-value prediction).
struct gru_stack_spec {
    gru_spec gru;
    head_kind head = head_kind::classifier;
    int classes = 3;      // classifier output width
    int head_layers = 5;  // fc stack depth for classifier / regressor heads
    int head_width = 64;
    int window = 10;      // look-back W; networks consume W+1 values
    bool scalar_feature = false; // feature head: project h_W to one value

    mlp_spec head_spec() const {
        mlp_spec spec;
        spec.input = gru.hidden;
        spec.layers = head_layers;
        spec.width = head_width;
        spec.hidden = activation::silu_act;
        switch (head) {
        case head_kind::classifier:
            spec.output = classes;
            spec.final = activation::softmax_act;
            break;
        case head_kind::regressor:
            spec.output = 1;
            spec.final = activation::silu_act;
            break;
        case head_kind::feature:
            // single linear map with a LeakyReLU, used for the scalar
            // projection and for the inline next-value objective
            spec.output = 1;
            spec.layers = 0;
            spec.final = activation::leaky_relu_act;
            break;
        }
        return spec;
    }
};

struct gru_stack {
    gru_stack_spec spec;
    param_store params; // "gru/..." and "head/..."
};

inline gru_stack make_gru_stack(const gru_stack_spec& spec, rng& r) {
    gru_stack stack;
    stack.spec = spec;
    gru_init(stack.params, "gru", spec.gru, r);
    mlp_init(stack.params, "head", spec.head_spec(), r);
    return stack;
}

// Splits a batch of windows (batch x width) into per-step column leaves.
inline std::vector<var> window_columns(graph& g, const tensor& windows, std::size_t count) {
    if (windows.cols() < count) throw dimension_error("window_columns: need " + std::to_string(count) + " columns, have " + std::to_string(windows.cols()));
    std::vector<var> cols;
    cols.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        tensor col = tensor::zeros(windows.rows(), 1);
        for (std::size_t row = 0; row < windows.rows(); ++row) col.data[row] = windows.at(row, k);
        cols.push_back(g.leaf(col));
    }
    return cols;
}

// Head output for a batch of windows already split into column vars.
inline var gru_stack_forward(graph& g, const bound_params& bound, const gru_stack& stack,
                             const std::vector<var>& sequence) {
    gru_hidden hid = gru_forward(g, bound, "gru", sequence, stack.spec.gru);
    return mlp_forward(g, bound, "head", hid.last(), stack.spec.head_spec());
}

// Convenience single-window evaluations (no gradients).

inline std::vector<double> classify_regimes(const gru_stack& stack, const std::vector<double>& window) {
    graph g;
    g.taping = false;
    bound_params bound(g, stack.params);
    tensor row = tensor::zeros(1, window.size());
    row.data = window;
    var out = gru_stack_forward(g, bound, stack, window_columns(g, row, window.size()));
    return g.value(out).data;
}

inline double predict_next(const gru_stack& stack, const std::vector<double>& window) {
    return classify_regimes(stack, window)[0];
}

// feature head: the last hidden state, or its learned scalar projection
inline std::vector<double> hidden_feature(const gru_stack& stack, const std::vector<double>& window) {
    graph g;
    g.taping = false;
    bound_params bound(g, stack.params);
    tensor row = tensor::zeros(1, window.size());
    row.data = window;
    gru_hidden hid = gru_forward(g, bound, "gru", window_columns(g, row, window.size()), stack.spec.gru);
    if (!stack.spec.scalar_feature) return g.value(hid.last()).data;
    var proj = mlp_forward(g, bound, "head", hid.last(), stack.spec.head_spec());
    return g.value(proj).data;
}

// Supervised first step: fresh simulated batch per iteration, cross-entropy
// against the regime in force over the final transition (classifier) or mean
// squared error against the next value (regressor / feature projection).
struct filter_train_config {
    int iterations = 10000;
    int batch = 512;
    adamw_config opt;
};

enum class filter_target { theta, kappa, sigma };

inline const std::vector<int>& regime_label(const training_batch& batch, filter_target target) {
    switch (target) {
    case filter_target::theta: return batch.theta_label;
    case filter_target::kappa: return batch.kappa_label;
    case filter_target::sigma: return batch.sigma_label;
    }
    throw config_error("regime_label: bad target");
}

inline tensor one_hot(const std::vector<int>& labels, std::size_t classes) {
    tensor out = tensor::zeros(labels.size(), classes);
    for (std::size_t row = 0; row < labels.size(); ++row) {
        const auto idx = static_cast<std::size_t>(labels[row]);
        if (idx >= classes) throw dimension_error("one_hot: label out of range");
        out.at(row, idx) = 1.0;
    }
    return out;
}

// Loss for one batch. Windows carry W+2 values; the network sees the first
// W+1 and the final value is the regression target.
inline var filter_loss(graph& g, const bound_params& bound, const gru_stack& stack,
                       const training_batch& batch, filter_target target) {
    const auto width = static_cast<std::size_t>(stack.spec.window) + 1;
    std::vector<var> sequence = window_columns(g, batch.windows, width);
    var out = gru_stack_forward(g, bound, stack, sequence);
    if (stack.spec.head == head_kind::classifier) {
        var labels = g.leaf(one_hot(regime_label(batch, target), static_cast<std::size_t>(stack.spec.classes)));
        return g.cross_entropy(out, labels);
    }
    tensor next = tensor::zeros(batch.rows(), 1);
    for (std::size_t row = 0; row < batch.rows(); ++row) next.data[row] = batch.windows.at(row, width);
    return g.mse(out, g.leaf(next));
}

struct filter_train_result {
    std::vector<double> loss_curve;
};

inline filter_train_result train_first_step(gru_stack& stack, const batch_sampler& sample, filter_target target,
                                            const filter_train_config& cfg, rng& r) {
    adamw_state opt(cfg.opt);
    filter_train_result result;
    result.loss_curve.reserve(cfg.iterations);
    for (int it = 0; it < cfg.iterations; ++it) {
        training_batch batch = sample(cfg.batch, r);
        graph g;
        bound_params bound(g, stack.params);
        var loss = filter_loss(g, bound, stack, batch, target);
        g.backward(loss);
        opt.step(stack.params, bound.gradients());
        result.loss_curve.push_back(g.value(loss).data[0]);
    }
    return result;
}

inline filter_train_result train_first_step(gru_stack& stack, const env_config& env, filter_target target,
                                            const filter_train_config& cfg, rng& r) {
    return train_first_step(stack, env_sampler(env), target, cfg, r);
}

struct filter_eval {
    double cross_entropy = 0.0;
    double accuracy = 0.0; // argmax hit rate; regressor heads report rmse in cross_entropy and 0 here
};

inline filter_eval evaluate_filter(const gru_stack& stack, const batch_sampler& sample, filter_target target,
                                   int batches, int batch_size, rng& r) {
    filter_eval eval;
    std::size_t total = 0, hits = 0;
    double loss_sum = 0.0;
    for (int bi = 0; bi < batches; ++bi) {
        training_batch batch = sample(static_cast<std::size_t>(batch_size), r);
        graph g;
        g.taping = false;
        bound_params bound(g, stack.params);
        const auto width = static_cast<std::size_t>(stack.spec.window) + 1;
        var out = gru_stack_forward(g, bound, stack, window_columns(g, batch.windows, width));
        const tensor& probs = g.value(out);
        if (stack.spec.head == head_kind::classifier) {
            const std::vector<int>& labels = regime_label(batch, target);
            for (std::size_t row = 0; row < batch.rows(); ++row) {
                const auto truth = static_cast<std::size_t>(labels[row]);
                std::size_t best = 0;
                for (std::size_t k = 1; k < probs.cols(); ++k)
                    if (probs.at(row, k) > probs.at(row, best)) best = k;
                hits += best == truth;
                loss_sum += -std::log(std::max(probs.at(row, truth), 1e-12));
                ++total;
            }
        } else {
            for (std::size_t row = 0; row < batch.rows(); ++row) {
                const double err = probs.at(row, 0) - batch.windows.at(row, width);
                loss_sum += err * err;
                ++total;
            }
        }
    }
    eval.cross_entropy = stack.spec.head == head_kind::classifier ? loss_sum / static_cast<double>(total)
                                                                  : std::sqrt(loss_sum / static_cast<double>(total));
    eval.accuracy = total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
    return eval;
}

inline filter_eval evaluate_filter(const gru_stack& stack, const env_config& env, filter_target target,
                                   int batches, int batch_size, rng& r) {
    return evaluate_filter(stack, env_sampler(env), target, batches, batch_size, r);
}

// Architecture sidecar so saved weights can be reloaded without the config.

inline nlohmann::json gru_stack_meta(const gru_stack_spec& spec) {
    nlohmann::json meta;
    meta["layers"] = spec.gru.layers;
    meta["hidden"] = spec.gru.hidden;
    meta["input"] = spec.gru.input;
    meta["gate"] = spec.gru.gate == gate_kind::logistic ? "logistic" : "tanh";
    switch (spec.head) {
    case head_kind::classifier: meta["head"] = "classifier"; break;
    case head_kind::regressor: meta["head"] = "regressor"; break;
    case head_kind::feature: meta["head"] = "feature"; break;
    }
    meta["classes"] = spec.classes;
    meta["head_layers"] = spec.head_layers;
    meta["head_width"] = spec.head_width;
    meta["window"] = spec.window;
    meta["scalar_feature"] = spec.scalar_feature;
    return meta;
}

inline gru_stack_spec gru_stack_spec_from_meta(const nlohmann::json& meta) {
    gru_stack_spec spec;
    spec.gru.layers = meta.at("layers").get<int>();
    spec.gru.hidden = meta.at("hidden").get<int>();
    spec.gru.input = meta.at("input").get<int>();
    const std::string gate = meta.at("gate").get<std::string>();
    if (gate == "logistic") spec.gru.gate = gate_kind::logistic;
    else if (gate == "tanh") spec.gru.gate = gate_kind::tanh_gate;
    else throw config_error("gru meta: unknown gate '" + gate + "'");
    const std::string head = meta.at("head").get<std::string>();
    if (head == "classifier") spec.head = head_kind::classifier;
    else if (head == "regressor") spec.head = head_kind::regressor;
    else if (head == "feature") spec.head = head_kind::feature;
    else throw config_error("gru meta: unknown head '" + head + "'");
    spec.classes = meta.at("classes").get<int>();
    spec.head_layers = meta.at("head_layers").get<int>();
    spec.head_width = meta.at("head_width").get<int>();
    spec.window = meta.at("window").get<int>();
    spec.scalar_feature = meta.at("scalar_feature").get<bool>();
    return spec;
}

inline void save_gru_stack(const gru_stack& stack, const std::string& weights_path, const std::string& meta_path) {
    stack.params.save(weights_path);
    std::ofstream out = open_output(meta_path);
    out << gru_stack_meta(stack.spec).dump(2) << "\n";
}

inline gru_stack load_gru_stack(const std::string& weights_path, const std::string& meta_path) {
    std::ifstream in(meta_path);
    if (!in) throw config_error("cannot open " + meta_path);
    nlohmann::json meta = nlohmann::json::parse(in);
    gru_stack stack;
    stack.spec = gru_stack_spec_from_meta(meta);
    stack.params = param_store::load(weights_path);
    return stack;
}

}
