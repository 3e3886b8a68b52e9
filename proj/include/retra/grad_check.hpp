#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>

#include "retra/graph.hpp"
#include "retra/param_store.hpp"

namespace retra {

// Builds a scalar loss from bound parameters; must be deterministic in the
// parameter values (fixed inputs, no RNG inside).
using loss_builder = std::function<var(graph&, const bound_params&)>;

// Max over trainable parameter elements of the relative gap between the
// reverse-mode gradient and a central finite difference with step h.
inline double grad_check(param_store& params, const loss_builder& build, double h = 1e-5) {
    graph g;
    bound_params bound(g, params);
    var loss = build(g, bound);
    g.backward(loss);
    const std::map<std::string, tensor> analytic = bound.gradients();

    const auto eval = [&](param_store& p) {
        graph fg;
        fg.taping = false;
        bound_params fb(fg, p);
        return fg.value(build(fg, fb))[0];
    };

    double worst = 0.0;
    for (const auto& [name, grad] : analytic) {
        if (!params.trainable(name)) continue;
        tensor& p = params.at(name);
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double keep = p[i];
            p[i] = keep + h;
            const double up = eval(params);
            p[i] = keep - h;
            const double down = eval(params);
            p[i] = keep;
            const double numeric = (up - down) / (2.0 * h);
            const double a = grad[i];
            const double rel = std::fabs(a - numeric) / std::max({1.0, std::fabs(a), std::fabs(numeric)});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}
