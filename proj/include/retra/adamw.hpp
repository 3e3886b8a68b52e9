#pragma once

#include <cmath>
#include <map>
#include <string>

#include "retra/errors.hpp"
#include "retra/param_store.hpp"
#include "retra/tensor.hpp"

namespace retra {

// Adam with decoupled weight decay. The schedule multiplies the base learning
// rate by 0.5 every `halve_every` steps (0 disables the schedule).
struct adamw_config {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
    long halve_every = 0;
};

class adamw_state {
public:
    explicit adamw_state(adamw_config cfg = {}) : cfg_(cfg) {}

    adamw_config& config() { return cfg_; }
    const adamw_config& config() const { return cfg_; }
    long step_count() const { return step_; }

    double current_lr() const {
        double lr = cfg_.lr;
        if (cfg_.halve_every > 0) lr *= std::pow(0.5, static_cast<double>(step_ / cfg_.halve_every));
        return lr;
    }

    // One update over every gradient entry. Parameters without a gradient
    // this step (frozen or unused) keep their moments untouched.
    void step(param_store& params, const std::map<std::string, tensor>& grads) {
        const double lr = current_lr();
        ++step_;
        const double t = static_cast<double>(step_);
        const double bc1 = 1.0 - std::pow(cfg_.beta1, t);
        const double bc2 = 1.0 - std::pow(cfg_.beta2, t);
        for (const auto& [name, g] : grads) {
            if (!g.all_finite()) throw numeric_error("adamw: non-finite gradient for parameter '" + name + "'");
            tensor& p = params.at(name);
            if (!p.same_shape(g))
                throw dimension_error("adamw: gradient shape " + g.shape_string() +
                                      " does not match parameter '" + name + "'");
            tensor& m = moment(m_, name, p);
            tensor& v = moment(v_, name, p);
            for (std::size_t i = 0; i < p.size(); ++i) {
                m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
                v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                p[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * p[i]);
            }
        }
    }

private:
    static tensor& moment(std::map<std::string, tensor>& store, const std::string& name, const tensor& like) {
        auto it = store.find(name);
        if (it == store.end()) it = store.emplace(name, tensor::zeros(like.rows(), like.cols())).first;
        return it->second;
    }

    adamw_config cfg_;
    std::map<std::string, tensor> m_, v_;
    long step_ = 0;
};

}
