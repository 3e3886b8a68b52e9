#pragma once

#include <string>
#include <vector>

#include "retra/graph.hpp"
#include "retra/mlp.hpp"
#include "retra/param_store.hpp"
#include "retra/rng.hpp"

namespace retra {

enum class gate_kind { logistic, tanh_gate };

// One recurrent block: reset gate p, update gate z, candidate mixed into the
// running hidden state. Gates default to logistic; the tanh variant is kept
// behind a switch since (1-z)/z mixing presumes z in (0,1).
struct gru_spec {
    int layers = 1;  // d_l
    int hidden = 10; // d_h
    int input = 1;   // width of the first layer's x_k
    gate_kind gate = gate_kind::logistic;
};

// Parameter names and shapes follow the update equations: input maps H are
// d_h x input-width, recurrent maps U are d_h x d_h, biases are rows.
inline void gru_init(param_store& params, const std::string& prefix, const gru_spec& spec, rng& r) {
    for (int layer = 0; layer < spec.layers; ++layer) {
        const int in = layer == 0 ? spec.input : spec.hidden;
        const auto dh = static_cast<std::size_t>(spec.hidden);
        const auto din = static_cast<std::size_t>(in);
        const std::string base = prefix + "/layer" + std::to_string(layer);
        for (const char* gate : {"p", "z", "h"}) {
            params.insert(base + "/H" + gate, uniform_init(dh, din, din, r));
            params.insert(base + "/U" + gate, uniform_init(dh, dh, dh, r));
            params.insert(base + "/b" + gate, uniform_init(1, dh, dh, r));
        }
    }
}

// Hidden sequences of every layer over one window; sequence[k] is a
// batch x input column, h_{-1} = 0.
struct gru_hidden {
    std::vector<std::vector<var>> layers; // layers[L][k], each batch x d_h

    var last() const { return layers.back().back(); }
};

inline gru_hidden gru_forward(graph& g, const bound_params& bound, const std::string& prefix,
                              const std::vector<var>& sequence, const gru_spec& spec) {
    if (sequence.empty()) throw config_error("gru_forward: empty sequence");
    const std::size_t batch = g.value(sequence[0]).rows();
    const auto gate_act = [&](var x) { return spec.gate == gate_kind::logistic ? g.logistic(x) : g.tanh(x); };

    gru_hidden out;
    std::vector<var> inputs = sequence;
    for (int layer = 0; layer < spec.layers; ++layer) {
        const std::string base = prefix + "/layer" + std::to_string(layer);
        // one transpose per weight per pass; every step reuses the node
        var hp = g.transpose(bound[base + "/Hp"]);
        var hz = g.transpose(bound[base + "/Hz"]);
        var hh = g.transpose(bound[base + "/Hh"]);
        var up = g.transpose(bound[base + "/Up"]);
        var uz = g.transpose(bound[base + "/Uz"]);
        var uh = g.transpose(bound[base + "/Uh"]);
        var bp = bound[base + "/bp"];
        var bz = bound[base + "/bz"];
        var bh = bound[base + "/bh"];

        var h = g.leaf(tensor::zeros(batch, static_cast<std::size_t>(spec.hidden)));
        std::vector<var> states;
        states.reserve(inputs.size());
        for (var x : inputs) {
            var p = gate_act(g.add(g.add(g.matmul(x, hp), g.matmul(h, up)), bp));
            var z = gate_act(g.add(g.add(g.matmul(x, hz), g.matmul(h, uz)), bz));
            var cand = g.tanh(g.add(g.add(g.matmul(x, hh), g.matmul(g.mul(p, h), uh)), bh));
            h = g.add(g.sub(h, g.mul(z, h)), g.mul(z, cand));
            states.push_back(h);
        }
        out.layers.push_back(states);
        inputs = std::move(states);
    }
    return out;
}

}
