#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "retra/ddpg.hpp"
#include "retra/grad_check.hpp"

using namespace retra;

namespace {

void zero_params(param_store& params) {
    for (auto& [name, entry] : params) std::fill(entry.value.data.begin(), entry.value.data.end(), 0.0);
}

gru_stack small_filter(head_kind head, int window, int classes = 3, unsigned long long seed = 17) {
    gru_stack_spec spec;
    spec.gru = {1, 3, 1, gate_kind::logistic};
    spec.head = head;
    spec.classes = classes;
    spec.head_layers = 1;
    spec.head_width = 6;
    spec.window = window;
    rng r(seed);
    return make_gru_stack(spec, r);
}

agent_bundle small_bundle(pipeline_kind pipeline, unsigned long long seed = 99) {
    env_config env = theta_only_env();
    env.w = 4;
    head_kind head = pipeline == pipeline_kind::hid ? head_kind::feature
                     : pipeline == pipeline_kind::prob ? head_kind::classifier
                                                       : head_kind::regressor;
    rng r(seed);
    return make_agent_bundle(pipeline, env, agent_arch{2, 8}, small_filter(head, env.w, 3, seed + 1),
                             feature_bounds{}, r);
}

}

TEST_CASE("reward: hold gains the move, trades pay proportional cost") {
    REQUIRE(compute_reward(5.0, 1.00, 1.02, 5.0, 0.05) == Catch::Approx(0.10).margin(1e-15));
    REQUIRE(compute_reward(0.0, 1.00, 1.02, 3.0, 0.05) == Catch::Approx(-0.15).margin(1e-15));
    REQUIRE(compute_reward(0.0, 1.00, 1.05, 0.0, 0.05) == 0.0);
    // short inventory gains on a drop, cost is sign-free
    REQUIRE(compute_reward(-4.0, 1.00, 0.98, -1.0, 0.05) == Catch::Approx(-4.0 * -0.02 - 0.05 * 3.0).margin(1e-15));
}

TEST_CASE("exploration variance schedule") {
    REQUIRE(explore_variance(0, 100.0, 0.01) == 1.0);
    REQUIRE(explore_variance(100, 100.0, 0.01) == 0.5);
    REQUIRE(explore_variance(900, 100.0, 0.01) == Catch::Approx(0.1).epsilon(1e-12));
    REQUIRE(explore_variance(1000000, 100.0, 0.01) == 0.01); // floor
    REQUIRE_THROWS_AS(explore_variance(-1, 100.0, 0.01), config_error);
}

TEST_CASE("soft update blends toward the source at rate tau") {
    param_store target, source;
    target.insert("w", tensor::zeros(2, 2));
    tensor ones = tensor::zeros(2, 2);
    std::fill(ones.data.begin(), ones.data.end(), 1.0);
    source.insert("w", ones);

    soft_update(target, source, 0.001);
    for (double v : target.at("w").data) REQUIRE(v == Catch::Approx(0.001).margin(1e-15));
    soft_update(target, source, 0.001);
    for (double v : target.at("w").data) REQUIRE(v == Catch::Approx(1.0 - 0.999 * 0.999).margin(1e-15));

    // k updates leave a (1 - tau)^k gap
    for (int k = 2; k < 50; ++k) soft_update(target, source, 0.001);
    for (double v : target.at("w").data) REQUIRE(v == Catch::Approx(1.0 - std::pow(0.999, 50)).margin(1e-12));
}

TEST_CASE("feature rows pin: zero-weight filters give flat extras") {
    // S = 1.0 in a [0.5, 1.5] box -> 0.5; I = 0 in [-10, 10] -> 0.5
    tensor windows = tensor::zeros(1, 5);
    for (std::size_t c = 0; c < 5; ++c) windows.at(0, c) = 1.0;
    tensor inv = tensor::zeros(1, 1);

    agent_bundle hid = small_bundle(pipeline_kind::hid);
    zero_params(hid.filter.params);
    tensor f = build_features(hid, windows, inv);
    REQUIRE(f.cols() == 2 + 3); // d_h extras
    REQUIRE(f.at(0, 0) == Catch::Approx(0.5).margin(1e-15));
    REQUIRE(f.at(0, 1) == Catch::Approx(0.5).margin(1e-15));
    // zero hidden state maps to the middle of the (-1, 1) box
    for (std::size_t c = 2; c < 5; ++c) REQUIRE(f.at(0, c) == Catch::Approx(0.5).margin(1e-15));

    agent_bundle prob = small_bundle(pipeline_kind::prob);
    zero_params(prob.filter.params);
    f = build_features(prob, windows, inv);
    REQUIRE(f.cols() == 2 + 3); // class probabilities
    for (std::size_t c = 2; c < 5; ++c) REQUIRE(f.at(0, c) == Catch::Approx(1.0 / 3.0).epsilon(1e-12));

    agent_bundle reg = small_bundle(pipeline_kind::reg);
    zero_params(reg.filter.params);
    f = build_features(reg, windows, inv);
    REQUIRE(f.cols() == 2 + 1); // point estimate
    // zero net predicts 0, normalized into the signal box: (0 - 0.5) / 1
    REQUIRE(f.at(0, 2) == Catch::Approx(-0.5).margin(1e-15));
}

TEST_CASE("deterministic policy respects the inventory box; exploration noise is unclipped") {
    agent_bundle bundle = small_bundle(pipeline_kind::prob);
    rng r(5);
    training_batch batch = sample_training_batch(bundle.env, 64, r);
    tensor features = build_features(bundle, slice_cols(batch.windows, 0, 5), batch.inventories);

    tensor actions = actor_forward(bundle, features);
    for (double a : actions.data) {
        REQUIRE(a <= bundle.env.i_max);
        REQUIRE(a >= bundle.env.i_min);
    }

    // training-time exploration is Gaussian around the policy and deliberately
    // unclipped, so huge variance must overshoot the box on both sides
    tensor wild = explore_actions(bundle, features, 1e6, r);
    bool above = false;
    bool below = false;
    for (double a : wild.data) {
        if (a > bundle.env.i_max) above = true;
        if (a < bundle.env.i_min) below = true;
    }
    REQUIRE(above);
    REQUIRE(below);

    // vanishing noise stays near the deterministic policy
    tensor calm = explore_actions(bundle, features, 1e-12, r);
    for (std::size_t i = 0; i < calm.size(); ++i)
        REQUIRE(calm.data[i] == Catch::Approx(actions.data[i]).margin(1e-4));
}

TEST_CASE("target network starts as an exact copy of the critic") {
    agent_bundle bundle = small_bundle(pipeline_kind::reg);
    for (const auto& [name, entry] : bundle.critic) {
        const tensor& tgt = bundle.critic_target.at(name);
        REQUIRE(entry.value.data == tgt.data);
    }
}

TEST_CASE("first critic loss against a zeroed critic equals mean squared reward") {
    agent_bundle bundle = small_bundle(pipeline_kind::prob);
    zero_params(bundle.critic);
    zero_params(bundle.critic_target);

    rng r(7);
    transition_batch t;
    const std::size_t b = 32;
    t.features = tensor::zeros(b, bundle.feature_width());
    t.next_features = tensor::zeros(b, bundle.feature_width());
    t.actions = tensor::zeros(b, 1);
    t.rewards = tensor::zeros(b, 1);
    double sumsq = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t c = 0; c < bundle.feature_width(); ++c) {
            t.features.at(i, c) = r.uniform01();
            t.next_features.at(i, c) = r.uniform01();
        }
        t.actions.data[i] = r.uniform(-10.0, 10.0);
        t.rewards.data[i] = r.uniform(-1.0, 1.0);
        sumsq += t.rewards.data[i] * t.rewards.data[i];
    }

    adamw_state opt{adamw_config{}};
    // zeroed target values make y = r exactly, so the first loss is mean r^2
    const double loss = critic_update(bundle, t, opt, 0.001);
    REQUIRE(loss == Catch::Approx(sumsq / b).epsilon(1e-12));
}

TEST_CASE("repeated critic updates fit the rewards on a fixed batch") {
    agent_bundle bundle = small_bundle(pipeline_kind::prob, 123);
    rng r(11);
    transition_batch t;
    const std::size_t b = 64;
    t.features = tensor::zeros(b, bundle.feature_width());
    t.next_features = tensor::zeros(b, bundle.feature_width());
    t.actions = tensor::zeros(b, 1);
    t.rewards = tensor::zeros(b, 1);
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t c = 0; c < bundle.feature_width(); ++c) {
            t.features.at(i, c) = r.uniform01();
            t.next_features.at(i, c) = r.uniform01();
        }
        t.actions.data[i] = r.uniform(-10.0, 10.0);
        // learnable link between action and reward
        t.rewards.data[i] = 0.05 * t.actions.data[i] + 0.01 * r.normal();
    }

    adamw_config cfg;
    cfg.lr = 3e-3;
    adamw_state opt(cfg);
    double first = 0.0, last = 0.0;
    for (int k = 0; k < 200; ++k) {
        // tau = 0 keeps the target frozen at its initial weights
        last = critic_update(bundle, t, opt, 0.0);
        if (k == 0) first = last;
    }
    INFO("first " << first << " last " << last);
    REQUIRE(last < 0.5 * first);
    REQUIRE(std::isfinite(last));
}

TEST_CASE("actor climbs a hand-wired quadratic bowl to its peak") {
    // Q(G, a) = -(a - 3)^2 has its maximum at a = 3; the policy must settle
    // there from scratch within 500 steps
    mlp_spec actor_spec;
    actor_spec.input = 3;
    actor_spec.output = 1;
    actor_spec.layers = 2;
    actor_spec.width = 16;
    actor_spec.hidden = activation::silu_act;
    actor_spec.final = activation::tanh_act;
    actor_spec.final_scale = 10.0;

    rng r(2025);
    param_store actor;
    mlp_init(actor, "actor", actor_spec, r);

    tensor features = tensor::zeros(4, 3);
    for (double& v : features.data) v = r.uniform01();

    critic_builder bowl = [](graph& g, var, var action) {
        var center = g.leaf(tensor::scalar(3.0));
        var d = g.sub(action, center);
        return g.smul(-1.0, g.mul(d, d));
    };

    adamw_state opt{adamw_config{}};
    double objective = 0.0;
    for (int k = 0; k < 500; ++k) objective = actor_update(actor, actor_spec, features, bowl, opt);

    graph g;
    g.taping = false;
    bound_params bound(g, actor);
    const tensor& actions = g.value(mlp_forward(g, bound, "actor", g.leaf(features), actor_spec));
    for (double a : actions.data) {
        INFO("objective " << objective);
        REQUIRE(a == Catch::Approx(3.0).margin(0.1));
    }
}

TEST_CASE("constant critic sends zero gradient to the actor") {
    agent_bundle bundle = small_bundle(pipeline_kind::hid);
    tensor features = tensor::zeros(3, bundle.feature_width());
    for (std::size_t i = 0; i < features.size(); ++i) features.data[i] = 0.1 * static_cast<double>(i % 7);

    graph g;
    bound_params actor(g, bundle.actor);
    var feat = g.leaf(features);
    var action = mlp_forward(g, actor, "actor", feat, bundle.actor_spec);
    var objective = g.smul(-1.0 / 3.0, g.sum(g.smul(0.0, action)));
    g.backward(objective);
    for (const auto& [name, grad] : actor.gradients())
        for (double v : grad.data) REQUIRE(v == 0.0);
}

TEST_CASE("critic gradients through features and action match finite differences") {
    agent_bundle bundle = small_bundle(pipeline_kind::prob, 321);
    rng r(13);
    const std::size_t b = 4;
    tensor features = tensor::zeros(b, bundle.feature_width());
    tensor actions = tensor::zeros(b, 1);
    tensor y = tensor::zeros(b, 1);
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t c = 0; c < bundle.feature_width(); ++c) features.at(i, c) = r.uniform01();
        actions.data[i] = r.uniform(-10.0, 10.0);
        y.data[i] = r.uniform(-1.0, 1.0);
    }

    const double err = grad_check(bundle.critic, [&](graph& g, const bound_params& bound) {
        var q = critic_value(g, bound, bundle, g.leaf(features), g.leaf(actions));
        return g.mse(q, g.leaf(y));
    });
    REQUIRE(err < 1e-4);
}

TEST_CASE("actor gradients through the frozen critic match finite differences") {
    agent_bundle bundle = small_bundle(pipeline_kind::reg, 654);
    rng r(29);
    const std::size_t b = 4;
    tensor features = tensor::zeros(b, bundle.feature_width());
    for (std::size_t i = 0; i < features.size(); ++i) features.data[i] = r.uniform01();

    const double err = grad_check(bundle.actor, [&](graph& g, const bound_params& bound) {
        var feat = g.leaf(features);
        var action = mlp_forward(g, bound, "actor", feat, bundle.actor_spec);
        var q = frozen_critic(bundle)(g, feat, action);
        return g.smul(-1.0 / static_cast<double>(b), g.sum(q));
    });
    REQUIRE(err < 1e-4);
}

TEST_CASE("short training runs work for all three pipelines and stay bounded") {
    for (pipeline_kind pipeline : {pipeline_kind::hid, pipeline_kind::prob, pipeline_kind::reg}) {
        agent_bundle bundle = small_bundle(pipeline);
        agent_train_config cfg;
        cfg.iterations = 3;
        cfg.batch = 8;
        cfg.actor_repeats = 2;
        cfg.critic_repeats = 1;

        rng r(42);
        train_diagnostics diag = train_agent(bundle, cfg, r);
        REQUIRE(diag.critic_loss.size() == 3);
        REQUIRE(diag.actor_objective.size() == 3);
        if (pipeline == pipeline_kind::hid) REQUIRE(diag.filter_loss.size() == 3);
        for (double v : diag.critic_loss) REQUIRE(std::isfinite(v));
        for (double v : diag.actor_objective) REQUIRE(std::isfinite(v));

        rng probe(77);
        training_batch batch = sample_training_batch(bundle.env, 16, probe);
        tensor features = build_features(bundle, slice_cols(batch.windows, 0, 5), batch.inventories);
        tensor actions = actor_forward(bundle, features);
        for (double a : actions.data) {
            REQUIRE(a <= bundle.env.i_max);
            REQUIRE(a >= bundle.env.i_min);
        }
    }
}

TEST_CASE("training is bit-reproducible under the same seed") {
    auto run = [] {
        agent_bundle bundle = small_bundle(pipeline_kind::hid, 500);
        agent_train_config cfg;
        cfg.iterations = 4;
        cfg.batch = 8;
        rng r(31337);
        return train_agent(bundle, cfg, r);
    };
    train_diagnostics a = run();
    train_diagnostics b = run();
    REQUIRE(a.critic_loss == b.critic_loss);
    REQUIRE(a.actor_objective == b.actor_objective);
    REQUIRE(a.filter_loss == b.filter_loss);
}

TEST_CASE("agent save / load round-trips the policy") {
    agent_bundle bundle = small_bundle(pipeline_kind::prob, 777);
    const std::string dir = "agent_io_test";
    save_agent(bundle, dir);
    agent_bundle loaded = load_agent(bundle.env, dir);

    rng r(3);
    training_batch batch = sample_training_batch(bundle.env, 8, r);
    tensor features = build_features(bundle, slice_cols(batch.windows, 0, 5), batch.inventories);
    tensor features2 = build_features(loaded, slice_cols(batch.windows, 0, 5), batch.inventories);
    REQUIRE(features.data == features2.data);
    REQUIRE(actor_forward(bundle, features).data == actor_forward(loaded, features).data);
    std::filesystem::remove_all(dir);
}
