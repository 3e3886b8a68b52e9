#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "retra/cli.hpp"
#include "retra/config.hpp"
#include "retra/pairs/fixture.hpp"

using namespace retra;

namespace {

// Drives the full front end in-process with a forged argv.
int run_cli(std::initializer_list<std::string> args) {
    std::vector<std::string> owned{"regime_trader"};
    owned.insert(owned.end(), args);
    std::vector<char*> argv;
    argv.reserve(owned.size());
    for (std::string& a : owned) argv.push_back(a.data());
    return run_command(static_cast<int>(argv.size()), argv.data());
}

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

// Scratch directory wiped at construction so reruns start clean.
std::string fresh_dir(const std::string& name) {
    const std::string path = "cli_scratch/" + name;
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
    return path;
}

std::string write_config(const std::string& dir, const std::string& body) {
    const std::string path = dir + "/config.json";
    std::ofstream out(path);
    out << body;
    return path;
}

} // namespace

TEST_CASE("config: unknown keys are rejected with their path") {
    const std::string dir = fresh_dir("cfg_unknown");
    const std::string top = write_config(dir, R"({"sead": 1})");
    REQUIRE_THROWS_WITH(load_run_config(top), Catch::Matchers::ContainsSubstring("sead"));

    std::ofstream(dir + "/env.json") << R"({"env": {"settin": "theta"}})";
    REQUIRE_THROWS_WITH(load_run_config(dir + "/env.json"),
                        Catch::Matchers::ContainsSubstring("env.settin"));

    std::ofstream(dir + "/pairs.json") << R"({"pairs": {"johansen": {"trase": 1.0}}})";
    REQUIRE_THROWS_WITH(load_run_config(dir + "/pairs.json"),
                        Catch::Matchers::ContainsSubstring("pairs.johansen.trase"));
}

TEST_CASE("config: defaults follow the pipeline and the setting") {
    const std::string dir = fresh_dir("cfg_defaults");

    // prob on theta-only: classifier filter, window 10, three classes
    run_config prob = load_run_config(write_config(dir, R"({"agent": {"pipeline": "prob"}})"));
    CHECK(prob.env.w == 10);
    CHECK(prob.gru.window == 10);
    CHECK(prob.gru.gru.layers == 5);
    CHECK(prob.gru.gru.hidden == 20);
    CHECK(prob.gru.head == head_kind::classifier);
    CHECK(prob.gru.classes == 3);
    CHECK(prob.arch.layers == 5);
    CHECK(prob.arch.width == 64);
    CHECK(prob.env.theta.values.size() == 3);
    CHECK(prob.env.kappa.values.size() == 1);

    // reg stretches the window to 50
    run_config reg = load_run_config(write_config(dir, R"({"agent": {"pipeline": "reg"}})"));
    CHECK(reg.env.w == 50);
    CHECK(reg.gru.window == 50);
    CHECK(reg.gru.head == head_kind::regressor);

    // prob with all three parameters switching widens the window to 20
    run_config prob3 = load_run_config(write_config(
        dir, R"({"env": {"setting": "theta_kappa_sigma"}, "agent": {"pipeline": "prob"}})"));
    CHECK(prob3.env.w == 20);
    CHECK(prob3.env.kappa.values.size() == 2);
    CHECK(prob3.env.sigma.values.size() == 2);

    // hid keeps a small recurrent block and the narrow nets
    run_config hid = load_run_config(write_config(dir, R"({"agent": {"pipeline": "hid"}})"));
    CHECK(hid.gru.gru.layers == 1);
    CHECK(hid.gru.gru.hidden == 10);
    CHECK(hid.gru.head == head_kind::feature);
    CHECK(hid.arch.layers == 4);
    CHECK(hid.arch.width == 20);

    run_config hid3 = load_run_config(write_config(
        dir, R"({"env": {"setting": "theta_kappa_sigma"}, "agent": {"pipeline": "hid"}})"));
    CHECK(hid3.gru.gru.layers == 2);

    // explicit keys win over the derived defaults
    run_config custom = load_run_config(write_config(
        dir, R"({"env": {"w": 7}, "gru": {"hidden": 9}, "agent": {"pipeline": "prob"}})"));
    CHECK(custom.env.w == 7);
    CHECK(custom.gru.window == 7);
    CHECK(custom.gru.gru.hidden == 9);
}

TEST_CASE("cli: bad invocations exit with the config error code") {
    CHECK(run_cli({"simulate"}) == 1);                       // no --config
    CHECK(run_cli({"no-such-command"}) == 1);                // parse error
    CHECK(run_cli({"simulate", "--config", "missing.json"}) == 1);
    const std::string dir = fresh_dir("cli_bad");
    const std::string bad = write_config(dir, R"({"sead": 1})");
    CHECK(run_cli({"simulate", "--config", bad}) == 1);
    CHECK(run_cli({"simulate", "--config", bad, "--threads", "0"}) == 1);
}

TEST_CASE("cli: gradcheck passes without a config") {
    CHECK(run_cli({"gradcheck"}) == 0);
}

TEST_CASE("cli: simulate writes the path, the manifest names it") {
    const std::string dir = fresh_dir("cli_sim");
    const std::string config = write_config(dir, R"({
        "seed": 11,
        "output_dir": ")" + dir + R"(/out",
        "env": {"setting": "theta_kappa_sigma"},
        "eval": {"steps": 60}
    })");
    REQUIRE(run_cli({"simulate", "--config", config}) == 0);

    const std::vector<std::string> lines = read_lines(dir + "/out/signal_path.csv");
    REQUIRE(lines.size() == 62); // header + steps + 1 values
    CHECK(lines[0] == "t,S,theta_regime,kappa_regime,sigma_regime");

    // regime columns carry indices inside each chain's range
    for (std::size_t i = 1; i < lines.size(); ++i) {
        std::istringstream row(lines[i]);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(row, field, ',')) fields.push_back(field);
        REQUIRE(fields.size() == 5);
        const int theta_idx = std::stoi(fields[2]);
        const int kappa_idx = std::stoi(fields[3]);
        CHECK(theta_idx >= 0);
        CHECK(theta_idx <= 2);
        CHECK((kappa_idx == 0 || kappa_idx == 1));
    }

    nlohmann::json manifest = nlohmann::json::parse(read_bytes(dir + "/out/manifest.json"));
    CHECK(manifest.at("command") == "simulate");
    CHECK(manifest.at("seed") == 11);
    CHECK(manifest.at("config_hash").get<std::string>().size() == 16);
    CHECK(manifest.at("outputs") == nlohmann::json::array({"signal_path.csv"}));
    CHECK_FALSE(manifest.contains("timestamp"));
}

TEST_CASE("cli: seed and output-dir flags override the config") {
    const std::string dir = fresh_dir("cli_override");
    const std::string config = write_config(dir, R"({
        "seed": 11,
        "output_dir": ")" + dir + R"(/base",
        "eval": {"steps": 40}
    })");
    REQUIRE(run_cli({"simulate", "--config", config}) == 0);
    REQUIRE(run_cli({"simulate", "--config", config, "--output-dir", dir + "/other", "--seed", "12"}) == 0);
    REQUIRE(run_cli({"simulate", "--config", config, "--output-dir", dir + "/same_seed"}) == 0);

    const std::string base = read_bytes(dir + "/base/signal_path.csv");
    CHECK(read_bytes(dir + "/other/signal_path.csv") != base); // new seed, new path
    CHECK(read_bytes(dir + "/same_seed/signal_path.csv") == base);
}

TEST_CASE("cli: filter, agent, evaluation and policy grid chain on a desk-size budget") {
    const std::string dir = fresh_dir("cli_chain");
    const std::string config = write_config(dir, R"({
        "seed": 7,
        "output_dir": ")" + dir + R"(/out",
        "env": {"setting": "theta", "w": 4},
        "gru": {"layers": 1, "hidden": 4, "head_layers": 1, "head_width": 6,
                 "iterations": 25, "batch": 16},
        "agent": {"pipeline": "prob", "layers": 2, "width": 8, "iterations": 15, "batch": 16,
                   "model_dir": ")" + dir + R"(/out/agent"},
        "eval": {"episodes": 3, "steps": 30, "grid_points": 5}
    })");

    // agent training refuses to start without the trained filter
    REQUIRE(run_cli({"train-agent", "--config", config}) == 1);

    REQUIRE(run_cli({"train-filter", "--config", config}) == 0);
    REQUIRE(std::filesystem::exists(dir + "/out/filter/filter.rtps"));
    REQUIRE(std::filesystem::exists(dir + "/out/filter/filter.json"));
    const std::vector<std::string> curve = read_lines(dir + "/out/train_filter_loss.csv");
    REQUIRE(curve.size() == 26);
    CHECK(curve[0] == "iteration,loss");
    nlohmann::json metrics = nlohmann::json::parse(read_bytes(dir + "/out/filter_metrics.json"));
    CHECK(metrics.at("validation_cross_entropy").get<double>() > 0.0);

    REQUIRE(run_cli({"train-agent", "--config", config}) == 0);
    for (const char* file : {"actor.rtps", "critic.rtps", "critic_target.rtps", "filter.rtps",
                             "filter.json", "agent.json"})
        REQUIRE(std::filesystem::exists(dir + "/out/agent/" + std::string(file)));
    const std::vector<std::string> diag = read_lines(dir + "/out/train_agent_diag.csv");
    REQUIRE(diag.size() == 16);
    CHECK(diag[0] == "iteration,critic_loss,actor_objective");

    REQUIRE(run_cli({"evaluate", "--config", config}) == 0);
    const std::vector<std::string> summary = read_lines(dir + "/out/summary.csv");
    REQUIRE(summary.size() == 2);
    CHECK(summary[0] == "pipeline,setting,M,n,mean,std");
    CHECK(summary[1].rfind("prob,theta,3,30,", 0) == 0);
    const std::vector<std::string> episodes = read_lines(dir + "/out/episodes.csv");
    REQUIRE(episodes.size() == 1 + 3 * 30);
    CHECK(episodes[0] == "episode,t,S,I,q,r");

    // manifest of the last run names both evaluation artifacts
    nlohmann::json manifest = nlohmann::json::parse(read_bytes(dir + "/out/manifest.json"));
    CHECK(manifest.at("outputs") == nlohmann::json::array({"summary.csv", "episodes.csv"}));

    // a rerun into a fresh directory reproduces every numeric artifact byte for byte
    REQUIRE(run_cli({"evaluate", "--config", config, "--output-dir", dir + "/rerun"}) == 0);
    CHECK(read_bytes(dir + "/rerun/summary.csv") == read_bytes(dir + "/out/summary.csv"));
    CHECK(read_bytes(dir + "/rerun/episodes.csv") == read_bytes(dir + "/out/episodes.csv"));
    CHECK(read_bytes(dir + "/rerun/manifest.json") == read_bytes(dir + "/out/manifest.json"));

    REQUIRE(run_cli({"policy-grid", "--config", config}) == 0);
    const std::vector<std::string> grid = read_lines(dir + "/out/policy_grid.csv");
    REQUIRE(grid.size() == 1 + 5 * 5);
    CHECK(grid[0].rfind("S,I,extra0", 0) == 0);
    CHECK(grid[0].find("I_next,q") != std::string::npos);
}

TEST_CASE("cli: hid agent trains without a separate filter step") {
    const std::string dir = fresh_dir("cli_hid");
    const std::string config = write_config(dir, R"({
        "seed": 5,
        "output_dir": ")" + dir + R"(/out",
        "env": {"setting": "theta", "w": 4},
        "gru": {"hidden": 4},
        "agent": {"pipeline": "hid", "layers": 2, "width": 8, "iterations": 10, "batch": 8},
        "eval": {"episodes": 2, "steps": 20, "grid_points": 3}
    })");
    REQUIRE(run_cli({"train-agent", "--config", config}) == 0);
    const std::vector<std::string> diag = read_lines(dir + "/out/train_agent_diag.csv");
    CHECK(diag[0] == "iteration,critic_loss,actor_objective,filter_loss");
    REQUIRE(run_cli({"evaluate", "--config", config}) == 0);
    CHECK(read_lines(dir + "/out/summary.csv")[1].rfind("hid,theta,", 0) == 0);
}

TEST_CASE("cli: train-filter refuses the hid pipeline's feature head") {
    const std::string dir = fresh_dir("cli_feature_head");
    const std::string config = write_config(dir, R"({
        "output_dir": ")" + dir + R"(/out",
        "agent": {"pipeline": "hid"}
    })");
    CHECK(run_cli({"train-filter", "--config", config}) == 1);
}

TEST_CASE("cli: exchange ingestion aligns the pair and reports malformed input") {
    const std::string dir = fresh_dir("cli_ingest");
    {
        std::ofstream msg_a(dir + "/a_message.csv");
        std::ofstream book_a(dir + "/a_orderbook.csv");
        std::ofstream msg_b(dir + "/b_message.csv");
        std::ofstream book_b(dir + "/b_orderbook.csv");
        for (int k = 0; k < 30; ++k) {
            msg_a << 34200.0 + k << ",4," << k + 1 << ",100," << 1000000 + 100 * k << ",1\n";
            book_a << 1000100 + 100 * k << ",50," << 999900 + 100 * k << ",50\n";
            msg_b << 34203.0 + k << ",4," << k + 1 << ",100," << 800000 + 50 * k << ",-1\n";
            book_b << 800100 + 50 * k << ",40," << 799900 + 50 * k << ",40\n";
        }
    }
    const std::string config = write_config(dir, R"({
        "output_dir": ")" + dir + R"(/out",
        "pairs": {
            "first_message_file": ")" + dir + R"(/a_message.csv",
            "first_orderbook_file": ")" + dir + R"(/a_orderbook.csv",
            "second_message_file": ")" + dir + R"(/b_message.csv",
            "second_orderbook_file": ")" + dir + R"(/b_orderbook.csv"
        }
    })");
    REQUIRE(run_cli({"pairs-ingest", "--config", config}) == 0);

    const std::vector<std::string> rows = read_lines(dir + "/out/pair_series.csv");
    CHECK(rows[0] == "t,S1,S2");
    // common span: 34203 .. 34229 on the one-second grid
    REQUIRE(rows.size() == 28);
    CHECK(rows[1].rfind("34203,", 0) == 0);

    // missing input file is a config error
    const std::string broken = write_config(dir, R"({
        "output_dir": ")" + dir + R"(/out",
        "pairs": {"first_message_file": ")" + dir + R"(/nope.csv",
                   "first_orderbook_file": ")" + dir + R"(/a_orderbook.csv",
                   "second_message_file": ")" + dir + R"(/b_message.csv",
                   "second_orderbook_file": ")" + dir + R"(/b_orderbook.csv"}
    })");
    CHECK(run_cli({"pairs-ingest", "--config", broken}) == 1);
}

TEST_CASE("cli: cointegration and walk-forward backtests on a simulated pair") {
    const std::string dir = fresh_dir("cli_pairs");
    pair_series series = simulate_pair_fixture({.steps = 2500});
    const std::string pair_file = dir + "/pair.csv";
    write_pair_csv(pair_file, series);

    const std::string config = write_config(dir, R"({
        "seed": 3,
        "output_dir": ")" + dir + R"(/out",
        "gru": {"iterations": 12, "batch": 8},
        "agent": {"pipeline": "prob", "layers": 2, "width": 8, "iterations": 8, "batch": 8},
        "pairs": {
            "pair_file": ")" + pair_file + R"(",
            "portfolio_file": ")" + dir + R"(/portfolio.csv",
            "train_end_timestamp": 1500,
            "zscore_window": 25,
            "w": 10,
            "strategies": ["zscore", "hid"]
        }
    })");

    // the backtest needs the portfolio file first
    REQUIRE(run_cli({"pairs-backtest", "--config", config}) == 1);

    REQUIRE(run_cli({"pairs-coint", "--config", config}) == 0);
    nlohmann::json report = nlohmann::json::parse(read_bytes(dir + "/out/coint_report.json"));
    CHECK(report.at("train_points") == 1501);
    CHECK(report.at("total_points") == 2501);
    CHECK(report.at("johansen").at("reject_trace") == true);
    CHECK(report.at("reconstruction_error").get<double>() < 1e-8);
    CHECK(report.at("theta")[0].get<double>() == Catch::Approx(10.0).margin(0.5));
    CHECK(report.at("theta")[1].get<double>() == Catch::Approx(8.0).margin(0.5));
    REQUIRE(report.at("weights").size() == 2);

    const std::vector<std::string> portfolio = read_lines(dir + "/portfolio.csv");
    CHECK(portfolio[0] == "t,raw,normalized,prob1,prob2");
    REQUIRE(portfolio.size() == 2502);

    REQUIRE(run_cli({"pairs-backtest", "--config", config}) == 0);
    for (const char* name : {"zscore", "hid"}) {
        const std::vector<std::string> rows = read_lines(dir + "/out/backtest_" + std::string(name) + ".csv");
        REQUIRE(rows.size() > 2);
        CHECK(rows[0] == "t,I,q,r,cum_r");

        // the running total telescopes: last cum_r equals the sum of rewards
        double sum = 0.0;
        double last_cum = 0.0;
        for (std::size_t i = 1; i < rows.size(); ++i) {
            std::istringstream row(rows[i]);
            std::string field;
            std::vector<double> vals;
            while (std::getline(row, field, ',')) vals.push_back(std::stod(field));
            REQUIRE(vals.size() == 5);
            sum += vals[3];
            last_cum = vals[4];
        }
        CHECK(last_cum == Catch::Approx(sum).margin(1e-9));
    }

    // the trained hid agent landed next to the backtest files
    CHECK(std::filesystem::exists(dir + "/out/agent_hid/agent.json"));
    nlohmann::json manifest = nlohmann::json::parse(read_bytes(dir + "/out/manifest.json"));
    bool names_zscore = false;
    for (const auto& entry : manifest.at("outputs"))
        names_zscore = names_zscore || entry == "backtest_zscore.csv";
    CHECK(names_zscore);

    // rerun reproduces the backtests byte for byte
    REQUIRE(run_cli({"pairs-backtest", "--config", config, "--output-dir", dir + "/rerun"}) == 0);
    CHECK(read_bytes(dir + "/rerun/backtest_hid.csv") == read_bytes(dir + "/out/backtest_hid.csv"));
}
