#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "retra/adamw.hpp"
#include "retra/gru_train.hpp"
#include "retra/json_io.hpp"
#include "retra/signal.hpp"

namespace retra {

// Which latent-state summary the actor and critic see next to (S_t, I_t):
//   hid  - the recurrent hidden state, trained online on next-value error
//   prob - regime probabilities from a pre-trained classifier
//   reg  - a next-value point estimate from a pre-trained regressor
enum class pipeline_kind { hid, prob, reg };

inline std::string pipeline_name(pipeline_kind p) {
    switch (p) {
    case pipeline_kind::hid: return "hid";
    case pipeline_kind::prob: return "prob";
    case pipeline_kind::reg: return "reg";
    }
    return "?";
}

inline pipeline_kind pipeline_from_name(const std::string& name) {
    if (name == "hid") return pipeline_kind::hid;
    if (name == "prob") return pipeline_kind::prob;
    if (name == "reg") return pipeline_kind::reg;
    throw config_error("unknown pipeline '" + name + "' (expected hid, prob or reg)");
}

// Min-max boxes for feature normalization. Signal values map through
// (s - lo) / (hi - lo); hidden-state components are tanh-bounded so (-1, 1)
// is exact; probabilities are already in [0, 1]. Inventory always uses the
// environment's [i_min, i_max].
struct feature_bounds {
    double s_lo = 0.5;
    double s_hi = 1.5;
    double h_lo = -1.0;
    double h_hi = 1.0;

    void validate() const {
        if (!(s_hi > s_lo)) throw config_error("feature bounds: s_hi must exceed s_lo");
        if (!(h_hi > h_lo)) throw config_error("feature bounds: h_hi must exceed h_lo");
    }
};

struct agent_bundle {
    pipeline_kind pipeline = pipeline_kind::prob;
    env_config env;
    feature_bounds bounds;
    mlp_spec actor_spec;
    mlp_spec critic_spec;
    param_store actor;
    param_store critic;
    param_store critic_target;
    gru_stack filter;
    long trained_iterations = 0; // exploration-schedule position m

    std::size_t extras_width() const {
        switch (pipeline) {
        case pipeline_kind::hid:
            return filter.spec.scalar_feature ? 1 : static_cast<std::size_t>(filter.spec.gru.hidden);
        case pipeline_kind::prob: return static_cast<std::size_t>(filter.spec.classes);
        case pipeline_kind::reg: return 1;
        }
        return 0;
    }

    std::size_t feature_width() const { return 2 + extras_width(); }
};

// Agent geometry. The two networks share depth and width; the critic takes
// the feature row plus the candidate action.
struct agent_arch {
    int layers = 5; // l_NN
    int width = 64; // d_NN
};

inline agent_bundle make_agent_bundle(pipeline_kind pipeline, const env_config& env, const agent_arch& arch,
                                      gru_stack filter, const feature_bounds& bounds, rng& r) {
    agent_bundle bundle;
    bundle.pipeline = pipeline;
    bundle.env = env;
    bundle.bounds = bounds;
    bundle.bounds.validate();
    bundle.filter = std::move(filter);

    const bool want_feature = pipeline == pipeline_kind::hid;
    const bool is_feature = bundle.filter.spec.head == head_kind::feature;
    if (want_feature != is_feature) throw config_error("agent filter head does not match pipeline " + pipeline_name(pipeline));
    if (pipeline == pipeline_kind::prob && bundle.filter.spec.head != head_kind::classifier)
        throw config_error("prob pipeline needs a classifier filter");
    if (pipeline == pipeline_kind::reg && bundle.filter.spec.head != head_kind::regressor)
        throw config_error("reg pipeline needs a regressor filter");

    bundle.actor_spec.input = static_cast<int>(bundle.feature_width());
    bundle.actor_spec.output = 1;
    bundle.actor_spec.layers = arch.layers;
    bundle.actor_spec.width = arch.width;
    bundle.actor_spec.hidden = activation::silu_act;
    bundle.actor_spec.final = activation::tanh_act;
    bundle.actor_spec.final_scale = env.i_max;

    bundle.critic_spec = bundle.actor_spec;
    bundle.critic_spec.input = static_cast<int>(bundle.feature_width()) + 1;
    bundle.critic_spec.final = activation::linear;
    bundle.critic_spec.final_scale = 1.0;

    mlp_init(bundle.actor, "actor", bundle.actor_spec, r);
    mlp_init(bundle.critic, "critic", bundle.critic_spec, r);
    bundle.critic_target = bundle.critic; // target starts as an exact copy
    return bundle;
}

inline tensor slice_cols(const tensor& t, std::size_t start, std::size_t count) {
    if (start + count > t.cols()) throw dimension_error("slice_cols: out of range");
    tensor out = tensor::zeros(t.rows(), count);
    for (std::size_t r = 0; r < t.rows(); ++r)
        for (std::size_t c = 0; c < count; ++c) out.at(r, c) = t.at(r, start + c);
    return out;
}

// Latent extras for a batch of windows (batch x (W+1) raw values), already
// normalized into the unit box. No gradients flow into the filter here.
inline tensor filter_extras(const agent_bundle& bundle, const tensor& windows) {
    graph g;
    g.taping = false;
    bound_params bound(g, bundle.filter.params);
    std::vector<var> sequence = window_columns(g, windows, windows.cols());
    gru_hidden hid = gru_forward(g, bound, "gru", sequence, bundle.filter.spec.gru);

    tensor raw;
    if (bundle.pipeline == pipeline_kind::hid && !bundle.filter.spec.scalar_feature)
        raw = g.value(hid.last());
    else
        raw = g.value(mlp_forward(g, bound, "head", hid.last(), bundle.filter.spec.head_spec()));

    switch (bundle.pipeline) {
    case pipeline_kind::hid:
        for (double& v : raw.data) v = (v - bundle.bounds.h_lo) / (bundle.bounds.h_hi - bundle.bounds.h_lo);
        break;
    case pipeline_kind::prob:
        break; // probabilities already live in [0, 1]
    case pipeline_kind::reg:
        for (double& v : raw.data) v = (v - bundle.bounds.s_lo) / (bundle.bounds.s_hi - bundle.bounds.s_lo);
        break;
    }
    return raw;
}

// Feature rows (normalized S_t, normalized I_t, extras...). windows carry the
// W+1 values ending at the decision time.
inline tensor build_features(const agent_bundle& bundle, const tensor& windows, const tensor& inventories) {
    if (windows.rows() != inventories.rows()) throw dimension_error("build_features: row mismatch");
    const tensor extras = filter_extras(bundle, windows);
    const std::size_t b = windows.rows();
    const std::size_t width = bundle.feature_width();
    if (extras.cols() != width - 2) throw dimension_error("build_features: extras width mismatch");

    const double s_span = bundle.bounds.s_hi - bundle.bounds.s_lo;
    const double i_span = bundle.env.i_max - bundle.env.i_min;
    tensor features = tensor::zeros(b, width);
    for (std::size_t r = 0; r < b; ++r) {
        features.at(r, 0) = (windows.at(r, windows.cols() - 1) - bundle.bounds.s_lo) / s_span;
        features.at(r, 1) = (inventories.at(r, 0) - bundle.env.i_min) / i_span;
        for (std::size_t c = 0; c + 2 < width; ++c) features.at(r, c + 2) = extras.at(r, c);
    }
    return features;
}

// Deterministic policy on a batch of feature rows, without gradients.
inline tensor actor_forward(const agent_bundle& bundle, const tensor& features) {
    graph g;
    g.taping = false;
    bound_params actor(g, bundle.actor);
    return g.value(mlp_forward(g, actor, "actor", g.leaf(features), bundle.actor_spec));
}

// Critic value with the action normalized into the inventory unit box inside
// the graph, so actor gradients pass through.
inline var critic_value(graph& g, const bound_params& critic, const agent_bundle& bundle, var features, var action) {
    const double span = bundle.env.i_max - bundle.env.i_min;
    var floor = g.leaf(tensor::scalar(bundle.env.i_min));
    var normalized = g.smul(1.0 / span, g.sub(action, floor));
    return mlp_forward(g, critic, "critic", g.concat(features, normalized), bundle.critic_spec);
}

// Exploration variance schedule: eps(m) = max(a / (a + m), eps_min).
inline double explore_variance(long iteration, double a, double eps_min) {
    if (iteration < 0) throw config_error("explore_variance: negative iteration");
    return std::max(a / (a + static_cast<double>(iteration)), eps_min);
}

// Policy actions plus Gaussian exploration noise. eps is a variance. The
// noise is deliberately not clipped to the inventory box: at a saturated
// policy the critic needs two-sided action coverage to learn the way out.
inline tensor explore_actions(const agent_bundle& bundle, const tensor& features, double eps, rng& r) {
    tensor actions = actor_forward(bundle, features);
    const double sd = std::sqrt(eps);
    for (double& v : actions.data) v += sd * r.normal();
    return actions;
}

// One-step trading reward: hold the new inventory over the next move, pay
// proportional cost on the change.
inline double compute_reward(double i_next, double s_now, double s_next, double i_prev, double lambda) {
    return i_next * (s_next - s_now) - lambda * std::abs(i_next - i_prev);
}

struct transition_batch {
    tensor features;      // b x w_G at decision time
    tensor actions;       // b x 1 inventory taken
    tensor rewards;       // b x 1
    tensor next_features; // b x w_G one step later
};

inline void soft_update(param_store& target, const param_store& source, double tau) {
    for (auto& [name, entry] : target) {
        const tensor& src = source.at(name);
        if (!entry.value.same_shape(src)) throw dimension_error("soft_update: shape mismatch on " + name);
        for (std::size_t i = 0; i < entry.value.size(); ++i)
            entry.value[i] = (1.0 - tau) * entry.value[i] + tau * src[i];
    }
}

// One temporal-difference step on the critic: fit Q(G, a) to
// r + gamma * Q_target(G', pi(G')), then blend the target toward the critic.
// The regression targets are held fixed (no gradient through them).
inline double critic_update(agent_bundle& bundle, const transition_batch& batch, adamw_state& opt, double tau) {
    const std::size_t b = batch.features.rows();
    tensor y = tensor::zeros(b, 1);
    {
        graph g;
        g.taping = false;
        bound_params actor(g, bundle.actor);
        bound_params target(g, bundle.critic_target);
        var next = g.leaf(batch.next_features);
        var pi_next = mlp_forward(g, actor, "actor", next, bundle.actor_spec);
        const tensor& q_next = g.value(critic_value(g, target, bundle, next, pi_next));
        for (std::size_t r = 0; r < b; ++r) y.data[r] = batch.rewards.at(r, 0) + bundle.env.gamma * q_next.at(r, 0);
    }

    graph g;
    bound_params critic(g, bundle.critic);
    var q = critic_value(g, critic, bundle, g.leaf(batch.features), g.leaf(batch.actions));
    var loss = g.mse(q, g.leaf(y));
    g.backward(loss);
    opt.step(bundle.critic, critic.gradients());
    soft_update(bundle.critic_target, bundle.critic, tau);
    return g.value(loss).data[0];
}

// Q surface the actor climbs; lets tests substitute a hand-wired critic.
using critic_builder = std::function<var(graph&, var features, var action)>;

inline critic_builder frozen_critic(const agent_bundle& bundle) {
    return [&bundle](graph& g, var features, var action) {
        bound_params critic(g, bundle.critic, /*freeze=*/true);
        return critic_value(g, critic, bundle, features, action);
    };
}

// One ascent step on the mean critic value of the policy's own actions. The
// critic stays frozen: only actor parameters receive gradient.
inline double actor_update(param_store& actor_params, const mlp_spec& actor_spec, const tensor& features,
                           const critic_builder& q, adamw_state& opt) {
    graph g;
    bound_params actor(g, actor_params);
    var feat = g.leaf(features);
    var action = mlp_forward(g, actor, "actor", feat, actor_spec);
    var objective = g.smul(-1.0 / static_cast<double>(features.rows()), g.sum(q(g, feat, action)));
    g.backward(objective);
    opt.step(actor_params, actor.gradients());
    return g.value(objective).data[0];
}

inline double actor_update(agent_bundle& bundle, const tensor& features, adamw_state& opt) {
    return actor_update(bundle.actor, bundle.actor_spec, features, frozen_critic(bundle), opt);
}

struct agent_train_config {
    int iterations = 10000;  // N optimization rounds
    int batch = 512;         // b rows per round
    int critic_repeats = 1;  // temporal-difference steps per round
    int actor_repeats = 5;   // policy steps per round
    double tau = 0.001;      // target blend rate
    double explore_a = 100.0;
    double eps_min = 0.01;
    adamw_config actor_opt;
    adamw_config critic_opt;
    adamw_config filter_opt; // hid pipeline's online recurrent step
};

struct train_diagnostics {
    std::vector<double> critic_loss;
    std::vector<double> actor_objective;
    std::vector<double> filter_loss; // hid pipeline only
};

// Full optimization loop. Every critic repeat and every actor repeat draws
// its own fresh batch, so one round touches (critic_repeats + actor_repeats)
// independent state samples. For the hid pipeline the recurrent filter takes
// one next-value gradient step per round on a batch of its own; prob / reg
// filters arrive pre-trained and stay fixed.
inline train_diagnostics train_agent(agent_bundle& bundle, const agent_train_config& cfg,
                                     const batch_sampler& sample, rng& r) {
    if (cfg.iterations < 0 || cfg.batch <= 0) throw config_error("train_agent: bad iteration/batch counts");
    adamw_state actor_opt(cfg.actor_opt);
    adamw_state critic_opt(cfg.critic_opt);
    adamw_state filter_opt(cfg.filter_opt);

    const auto width = static_cast<std::size_t>(bundle.env.w) + 1;
    train_diagnostics diag;
    diag.critic_loss.reserve(cfg.iterations);
    diag.actor_objective.reserve(cfg.iterations);

    for (int m = 0; m < cfg.iterations; ++m) {
        const double eps = explore_variance(bundle.trained_iterations + m, cfg.explore_a, cfg.eps_min);

        if (bundle.pipeline == pipeline_kind::hid) {
            training_batch batch = sample(static_cast<std::size_t>(cfg.batch), r);
            graph g;
            bound_params bound(g, bundle.filter.params);
            var loss = filter_loss(g, bound, bundle.filter, batch, filter_target::theta);
            g.backward(loss);
            filter_opt.step(bundle.filter.params, bound.gradients());
            diag.filter_loss.push_back(g.value(loss).data[0]);
        }

        double closs = 0.0;
        for (int k = 0; k < cfg.critic_repeats; ++k) {
            training_batch batch = sample(static_cast<std::size_t>(cfg.batch), r);
            transition_batch t;
            t.features = build_features(bundle, slice_cols(batch.windows, 0, width), batch.inventories);
            t.actions = explore_actions(bundle, t.features, eps, r);
            t.rewards = tensor::zeros(batch.rows(), 1);
            for (std::size_t row = 0; row < batch.rows(); ++row) {
                const double s_now = batch.windows.at(row, width - 1);
                const double s_next = batch.windows.at(row, width);
                t.rewards.data[row] = compute_reward(t.actions.at(row, 0), s_now, s_next,
                                                     batch.inventories.at(row, 0), bundle.env.lambda);
            }
            t.next_features = build_features(bundle, slice_cols(batch.windows, 1, width), t.actions);
            closs = critic_update(bundle, t, critic_opt, cfg.tau);
        }

        double aobj = 0.0;
        for (int k = 0; k < cfg.actor_repeats; ++k) {
            training_batch batch = sample(static_cast<std::size_t>(cfg.batch), r);
            tensor features = build_features(bundle, slice_cols(batch.windows, 0, width), batch.inventories);
            aobj = actor_update(bundle, features, actor_opt);
        }
        diag.critic_loss.push_back(closs);
        diag.actor_objective.push_back(aobj);
    }
    bundle.trained_iterations += cfg.iterations;
    return diag;
}

inline train_diagnostics train_agent(agent_bundle& bundle, const agent_train_config& cfg, rng& r) {
    return train_agent(bundle, cfg, env_sampler(bundle.env), r);
}

// Agent container on disk: three weight files plus the filter pair.
inline void save_agent(const agent_bundle& bundle, const std::string& dir) {
    std::filesystem::create_directories(dir);
    bundle.actor.save(dir + "/actor.rtps");
    bundle.critic.save(dir + "/critic.rtps");
    bundle.critic_target.save(dir + "/critic_target.rtps");
    save_gru_stack(bundle.filter, dir + "/filter.rtps", dir + "/filter.json");
    nlohmann::json meta;
    meta["pipeline"] = pipeline_name(bundle.pipeline);
    meta["actor_layers"] = bundle.actor_spec.layers;
    meta["actor_width"] = bundle.actor_spec.width;
    meta["bounds"] = {{"s_lo", bundle.bounds.s_lo}, {"s_hi", bundle.bounds.s_hi},
                      {"h_lo", bundle.bounds.h_lo}, {"h_hi", bundle.bounds.h_hi}};
    meta["env"] = env_to_json(bundle.env);
    meta["trained_iterations"] = bundle.trained_iterations;
    std::ofstream out = open_output(dir + "/agent.json");
    out << meta.dump(2) << "\n";
}

inline agent_bundle load_agent(const env_config& env, const std::string& dir) {
    std::ifstream in(dir + "/agent.json");
    if (!in) throw config_error("cannot open " + dir + "/agent.json");
    nlohmann::json meta = nlohmann::json::parse(in);

    agent_bundle bundle;
    bundle.pipeline = pipeline_from_name(meta.at("pipeline").get<std::string>());
    bundle.env = env;
    bundle.bounds.s_lo = meta.at("bounds").at("s_lo").get<double>();
    bundle.bounds.s_hi = meta.at("bounds").at("s_hi").get<double>();
    bundle.bounds.h_lo = meta.at("bounds").at("h_lo").get<double>();
    bundle.bounds.h_hi = meta.at("bounds").at("h_hi").get<double>();
    bundle.filter = load_gru_stack(dir + "/filter.rtps", dir + "/filter.json");

    agent_arch arch{meta.at("actor_layers").get<int>(), meta.at("actor_width").get<int>()};
    bundle.actor_spec.input = static_cast<int>(bundle.feature_width());
    bundle.actor_spec.output = 1;
    bundle.actor_spec.layers = arch.layers;
    bundle.actor_spec.width = arch.width;
    bundle.actor_spec.hidden = activation::silu_act;
    bundle.actor_spec.final = activation::tanh_act;
    bundle.actor_spec.final_scale = env.i_max;
    bundle.critic_spec = bundle.actor_spec;
    bundle.critic_spec.input = static_cast<int>(bundle.feature_width()) + 1;
    bundle.critic_spec.final = activation::linear;
    bundle.critic_spec.final_scale = 1.0;

    bundle.actor = param_store::load(dir + "/actor.rtps");
    bundle.critic = param_store::load(dir + "/critic.rtps");
    bundle.critic_target = param_store::load(dir + "/critic_target.rtps");
    bundle.trained_iterations = meta.value("trained_iterations", 0L);
    return bundle;
}

// Self-contained load: the environment comes from the sidecar.
inline agent_bundle load_agent(const std::string& dir) {
    std::ifstream in(dir + "/agent.json");
    if (!in) throw config_error("cannot open " + dir + "/agent.json");
    nlohmann::json meta = nlohmann::json::parse(in);
    return load_agent(env_from_json(meta.at("env")), dir);
}

}
