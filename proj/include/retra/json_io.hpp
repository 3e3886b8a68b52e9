#pragma once

#include <nlohmann/json.hpp>

#include "retra/errors.hpp"
#include "retra/signal.hpp"
#include "retra/tensor.hpp"

namespace retra {

// Row-major nested arrays; shape is implied by the nesting.
inline nlohmann::json tensor_to_json(const tensor& t) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < t.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t c = 0; c < t.cols(); ++c) row.push_back(t.at(r, c));
        rows.push_back(row);
    }
    return rows;
}

inline tensor tensor_from_json(const nlohmann::json& rows, const std::string& what) {
    if (!rows.is_array() || rows.empty() || !rows[0].is_array())
        throw config_error(what + ": expected an array of rows");
    const std::size_t r = rows.size();
    const std::size_t c = rows[0].size();
    tensor t = tensor::zeros(r, c);
    for (std::size_t i = 0; i < r; ++i) {
        if (!rows[i].is_array() || rows[i].size() != c) throw config_error(what + ": ragged rows");
        for (std::size_t j = 0; j < c; ++j) t.at(i, j) = rows[i][j].get<double>();
    }
    return t;
}

inline nlohmann::json chain_to_json(const regime_chain& chain) {
    nlohmann::json j;
    j["values"] = chain.values;
    if (chain.size() > 1) j["rates"] = tensor_to_json(chain.rate_matrix);
    j["state"] = chain.state;
    return j;
}

inline regime_chain chain_from_json(const nlohmann::json& j, const std::string& what) {
    regime_chain chain;
    chain.values = j.at("values").get<std::vector<double>>();
    if (j.contains("rates")) chain.rate_matrix = tensor_from_json(j.at("rates"), what + ".rates");
    chain.state = j.value("state", 0);
    chain.validate();
    return chain;
}

inline nlohmann::json env_to_json(const env_config& env) {
    nlohmann::json j;
    j["theta"] = chain_to_json(env.theta);
    j["kappa"] = chain_to_json(env.kappa);
    j["sigma"] = chain_to_json(env.sigma);
    j["dt"] = env.dt;
    j["w"] = env.w;
    j["i_min"] = env.i_min;
    j["i_max"] = env.i_max;
    j["lambda"] = env.lambda;
    j["gamma"] = env.gamma;
    j["mu_inv"] = env.mu_inv;
    return j;
}

inline env_config env_from_json(const nlohmann::json& j) {
    env_config env;
    env.theta = chain_from_json(j.at("theta"), "env.theta");
    env.kappa = chain_from_json(j.at("kappa"), "env.kappa");
    env.sigma = chain_from_json(j.at("sigma"), "env.sigma");
    env.dt = j.at("dt").get<double>();
    env.w = j.at("w").get<int>();
    env.i_min = j.at("i_min").get<double>();
    env.i_max = j.at("i_max").get<double>();
    env.lambda = j.at("lambda").get<double>();
    env.gamma = j.at("gamma").get<double>();
    env.mu_inv = j.at("mu_inv").get<double>();
    env.validate();
    return env;
}

}  // namespace retra
