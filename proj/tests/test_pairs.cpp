#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "retra/pairs/coint.hpp"
#include "retra/pairs/fixture.hpp"
#include "retra/pairs/johansen.hpp"
#include "retra/pairs/lobster.hpp"
#include "retra/pairs/var.hpp"
#include "retra/rng.hpp"

using namespace retra;

namespace {

struct temp_csv {
    std::string path;
    temp_csv(const std::string& name, const std::string& body) : path(name) {
        std::ofstream out(path);
        out << body;
    }
    ~temp_csv() { std::remove(path.c_str()); }
};

// Random-walk levels with unit-variance increments, one column per asset.
tensor random_walk_levels(std::size_t steps, std::size_t assets, rng& r) {
    tensor levels = tensor::zeros(steps, assets);
    for (std::size_t j = 0; j < assets; ++j) {
        double level = 0.0;
        for (std::size_t t = 0; t < steps; ++t) {
            level += r.normal();
            levels.at(t, j) = level;
        }
    }
    return levels;
}

}  // namespace

TEST_CASE("a single execution maps the integer book quote to the 100.01 mid") {
    temp_csv msg("lob_msg_single.csv", "34200.5,4,11,100,1000100,1\n");
    temp_csv book("lob_book_single.csv", "1000200,40,1000000,60\n");
    mid_series series = ingest_mid_series(msg.path, book.path);
    REQUIRE(series.mid.size() == 1);
    REQUIRE(series.timestamps[0] == 34200.5);
    REQUIRE(series.mid[0] == Catch::Approx(100.01).epsilon(1e-12));
}

TEST_CASE("two executions three seconds apart fill a four-point grid by carry-forward") {
    temp_csv msg("lob_msg_two.csv",
                 "100.0,4,1,10,999000,1\n"
                 "101.5,1,2,10,999000,1\n"
                 "103.0,5,3,10,999000,-1\n");
    temp_csv book("lob_book_two.csv",
                  "1000100,5,999900,5\n"
                  "1000300,5,999900,5\n"
                  "1000500,5,1000300,5\n");
    mid_series series = ingest_mid_series(msg.path, book.path, 1.0);
    REQUIRE(series.mid.size() == 4);
    REQUIRE(series.timestamps == std::vector<double>{100.0, 101.0, 102.0, 103.0});
    REQUIRE(series.mid[0] == Catch::Approx(100.0).epsilon(1e-12));
    REQUIRE(series.mid[1] == Catch::Approx(100.0).epsilon(1e-12)); // type-1 row never prices
    REQUIRE(series.mid[2] == Catch::Approx(100.0).epsilon(1e-12));
    REQUIRE(series.mid[3] == Catch::Approx(100.04).epsilon(1e-12));
}

TEST_CASE("one execution per second yields exactly span-plus-one grid points") {
    std::string msg_body, book_body;
    for (int k = 0; k < 100; ++k) {
        msg_body += std::to_string(1000.0 + k) + ",4,7,25,500000,1\n";
        book_body += std::to_string(500000 + 100 * k) + ",9," + std::to_string(499800 + 100 * k) + ",9\n";
    }
    temp_csv msg("lob_msg_dense.csv", msg_body);
    temp_csv book("lob_book_dense.csv", book_body);
    mid_series series = ingest_mid_series(msg.path, book.path, 1.0);
    REQUIRE(series.mid.size() == 100);
    for (int k = 0; k < 100; ++k)
        REQUIRE(series.mid[static_cast<std::size_t>(k)]
                == Catch::Approx((500000 + 100 * k - 100) * 1e-4).epsilon(1e-12));
}

TEST_CASE("malformed numeric fields are reported with file and line") {
    temp_csv msg("lob_msg_bad.csv",
                 "100.0,4,1,10,999000,1\n"
                 "101.0,4,2,10,abc,1\n");
    temp_csv book("lob_book_bad.csv",
                  "1000100,5,999900,5\n"
                  "10002x0,5,999900,5\n");
    try {
        ingest_mid_series(msg.path, book.path);
        FAIL("expected config_error");
    } catch (const config_error& e) {
        REQUIRE(std::string(e.what()).find("lob_book_bad.csv:2") != std::string::npos);
    }
}

TEST_CASE("ingestion rejects inputs without any execution") {
    temp_csv msg("lob_msg_empty.csv", "100.0,1,1,10,999000,1\n");
    temp_csv book("lob_book_empty.csv", "1000100,5,999900,5\n");
    REQUIRE_THROWS_AS(ingest_mid_series(msg.path, book.path), config_error);
}

TEST_CASE("ingestion rejects decreasing execution timestamps and short book files") {
    temp_csv msg("lob_msg_dec.csv",
                 "100.0,4,1,10,999000,1\n"
                 "99.0,4,2,10,999000,1\n");
    temp_csv book("lob_book_dec.csv",
                  "1000100,5,999900,5\n"
                  "1000100,5,999900,5\n");
    REQUIRE_THROWS_AS(ingest_mid_series(msg.path, book.path), config_error);

    temp_csv msg2("lob_msg_short.csv",
                  "100.0,4,1,10,999000,1\n"
                  "101.0,4,2,10,999000,1\n");
    temp_csv book2("lob_book_short.csv", "1000100,5,999900,5\n");
    REQUIRE_THROWS_AS(ingest_mid_series(msg2.path, book2.path), config_error);
}

TEST_CASE("pair alignment trims to the common span and carries forward") {
    mid_series a;
    a.timestamps = {0.0, 1.0, 2.0, 3.0, 4.0};
    a.mid = {1.0, 1.1, 1.2, 1.3, 1.4};
    mid_series b;
    b.timestamps = {2.0, 3.5};
    b.mid = {5.0, 6.0};
    pair_series joined = align_pair(a, b, 1.0);
    REQUIRE(joined.size() == 2); // common span [2, 3.5] -> grid points 2, 3
    REQUIRE(joined.timestamps == std::vector<double>{2.0, 3.0});
    REQUIRE(joined.first == std::vector<double>{1.2, 1.3});
    REQUIRE(joined.second == std::vector<double>{5.0, 5.0});
}

TEST_CASE("pair csv round-trips through write and read") {
    pair_series series;
    series.timestamps = {0.0, 1.0, 2.0};
    series.first = {1.25, 1.5, 1.75};
    series.second = {100.01, 100.02, 100.0};
    const std::string path = "pair_roundtrip.csv";
    write_pair_csv(path, series);
    pair_series back = read_pair_csv(path);
    REQUIRE(back.timestamps == series.timestamps);
    REQUIRE(back.first == series.first);
    REQUIRE(back.second == series.second);
    std::remove(path.c_str());
}

TEST_CASE("the level regression recovers a known autoregression within three standard errors") {
    rng r(4021);
    const std::size_t steps = 100000;
    const tensor a_true = tensor::vec({0.02, 0.003});
    const tensor b_true = tensor::matrix(2, 2, {0.999, 0.0, 0.0, 0.996});
    tensor levels = tensor::zeros(steps, 2);
    double y1 = 20.0, y2 = 0.75; // start at the stationary means
    for (std::size_t t = 0; t < steps; ++t) {
        levels.at(t, 0) = y1;
        levels.at(t, 1) = y2;
        const double n1 = y1, n2 = y2;
        y1 = a_true.data[0] + b_true.at(0, 0) * n1 + b_true.at(0, 1) * n2 + 0.01 * r.normal();
        y2 = a_true.data[1] + b_true.at(1, 0) * n1 + b_true.at(1, 1) * n2 + 0.01 * r.normal();
    }
    var_fit fit = fit_var(levels);
    REQUIRE(fit.observations == steps - 1);
    for (std::size_t i = 0; i < 2; ++i) {
        const double se_a = std::abs(fit.intercept.at(0, i) / fit.t_intercept.at(0, i));
        REQUIRE(std::abs(fit.intercept.at(0, i) - a_true.data[i]) < 3.0 * se_a);
        for (std::size_t j = 0; j < 2; ++j) {
            const double est = fit.coeff.at(i, j);
            const double se = std::abs(est) > 0.0 && std::abs(fit.t_coeff.at(i, j)) > 0.0
                                  ? std::abs(est / fit.t_coeff.at(i, j))
                                  : 1.0;
            REQUIRE(std::abs(est - b_true.at(i, j)) < 3.0 * se + 1e-4);
        }
        REQUIRE(fit.r_squared[i] > 0.9);
        REQUIRE(fit.residual_cov.at(i, i) == Catch::Approx(1e-4).epsilon(0.10));
    }
}

TEST_CASE("a noiseless linear system is recovered exactly with unit r-squared") {
    const std::size_t steps = 200;
    tensor levels = tensor::zeros(steps, 2);
    double y1 = 5.0, y2 = -3.0;
    for (std::size_t t = 0; t < steps; ++t) {
        levels.at(t, 0) = y1;
        levels.at(t, 1) = y2;
        const double n1 = y1, n2 = y2;
        y1 = 0.1 + 0.99 * n1;
        y2 = 0.2 + 0.95 * n2;
    }
    var_fit fit = fit_var(levels);
    REQUIRE(fit.coeff.at(0, 0) == Catch::Approx(0.99).margin(1e-8));
    REQUIRE(fit.coeff.at(0, 1) == Catch::Approx(0.0).margin(1e-8));
    REQUIRE(fit.coeff.at(1, 1) == Catch::Approx(0.95).margin(1e-8));
    REQUIRE(fit.intercept.at(0, 0) == Catch::Approx(0.1).margin(1e-8));
    REQUIRE(fit.intercept.at(0, 1) == Catch::Approx(0.2).margin(1e-8));
    REQUIRE(fit.r_squared[0] == Catch::Approx(1.0).margin(1e-10));
    REQUIRE(fit.r_squared[1] == Catch::Approx(1.0).margin(1e-10));
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) REQUIRE(std::abs(fit.residual_cov.at(i, j)) < 1e-12);
}

TEST_CASE("a collinear design is rejected as singular") {
    tensor levels = tensor::zeros(50, 2);
    for (std::size_t t = 0; t < 50; ++t) {
        levels.at(t, 0) = 1.0;
        levels.at(t, 1) = 2.0;
    }
    REQUIRE_THROWS_AS(fit_var(levels), numeric_error);
}

TEST_CASE("reversion speed and long-run levels are read off a hand-built fit") {
    // coeff = I - kappa, intercept = kappa theta for theta = (1, 2).
    var_fit fit;
    fit.coeff = tensor::matrix(2, 2, {0.7, -0.1, -0.05, 0.8});
    const tensor kappa_true = tensor::matrix(2, 2, {0.3, 0.1, 0.05, 0.2});
    fit.intercept = tensor::matrix(1, 2, {0.3 * 1.0 + 0.1 * 2.0, 0.05 * 1.0 + 0.2 * 2.0});
    coint_result res = cointegrate(fit, 1.0);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            REQUIRE(res.kappa.at(i, j) == Catch::Approx(kappa_true.at(i, j)).margin(1e-12));
    REQUIRE(res.theta[0] == Catch::Approx(1.0).margin(1e-10));
    REQUIRE(res.theta[1] == Catch::Approx(2.0).margin(1e-10));
    REQUIRE(res.eigenvalues.size() == 2);
    REQUIRE(res.eigenvalues[0] < res.eigenvalues[1]);
    // trace and determinant of kappa survive the eigendecomposition
    REQUIRE(res.eigenvalues[0] + res.eigenvalues[1] == Catch::Approx(0.5).margin(1e-10));
    REQUIRE(res.eigenvalues[0] * res.eigenvalues[1] == Catch::Approx(0.3 * 0.2 - 0.1 * 0.05).margin(1e-10));
    REQUIRE(reconstruction_error(res) < 1e-10);
    REQUIRE(res.weights.size() == 2);
    REQUIRE(res.weights[0] == res.u.at(1, 0));
    REQUIRE(res.weights[1] == res.u.at(1, 1));
}

TEST_CASE("a unit-root autoregression cannot be inverted into reversion speeds") {
    var_fit fit;
    fit.coeff = tensor::matrix(2, 2, {1.0, 0.0, 0.0, 1.0});
    fit.intercept = tensor::matrix(1, 2, {0.0, 0.0});
    REQUIRE_THROWS_AS(cointegrate(fit), numeric_error);
}

TEST_CASE("rotational dynamics with complex eigenvalues are rejected") {
    var_fit fit;
    fit.coeff = tensor::matrix(2, 2, {1.0, -1.0, 1.0, 1.0}); // kappa = [[0,1],[-1,0]]
    fit.intercept = tensor::matrix(1, 2, {0.0, 0.0});
    REQUIRE_THROWS_AS(cointegrate(fit), numeric_error);
}

TEST_CASE("the synthetic pair recovers its reversion eigenvalues within two percent") {
    pair_series series = simulate_pair_fixture();
    var_fit fit = fit_var(pair_levels(series));
    coint_result res = cointegrate(fit, 1.0);

    REQUIRE(res.eigenvalues[0] == Catch::Approx(fixture_eigen_low()).epsilon(0.02));
    REQUIRE(res.eigenvalues[1] == Catch::Approx(fixture_eigen_high()).epsilon(0.02));
    REQUIRE(reconstruction_error(res) < 1e-8);

    // long-run levels sit near the configured equilibria
    REQUIRE(res.theta[0] == Catch::Approx(10.0).margin(0.05));
    REQUIRE(res.theta[1] == Catch::Approx(8.0).margin(0.05));

    // fastest-reverting combination: left eigenvector of kappa at the top
    // eigenvalue, dominant weight positive; u (kappa - lambda I) = 0 gives
    // u0/u1 = -kappa10 / (kappa00 - lambda)
    const double ratio_true = 0.12 / (0.20 - fixture_eigen_high());
    REQUIRE(std::abs(res.weights[0]) >= std::abs(res.weights[1]));
    REQUIRE(res.weights[0] > 0.0);
    REQUIRE(res.weights[0] / res.weights[1] == Catch::Approx(ratio_true).epsilon(0.02));
}

TEST_CASE("portfolio construction is the weighted sum of the level columns") {
    tensor levels = tensor::matrix(3, 2, {1.0, 2.0, 3.0, 4.0, 5.0, 6.0});
    std::vector<double> values = build_portfolio({2.0, -1.0}, levels);
    REQUIRE(values == std::vector<double>{0.0, 2.0, 4.0});
}

TEST_CASE("rank statistics nest: consecutive trace gaps equal the max-eigenvalue statistic") {
    pair_series series = simulate_pair_fixture();
    johansen_result res = johansen_test(pair_levels(series));
    REQUIRE(res.eigenvalues.size() == 2);
    REQUIRE(res.eigenvalues[0] >= res.eigenvalues[1]);
    REQUIRE(res.trace.size() == 2);
    REQUIRE(res.trace[0] > res.trace[1]);
    REQUIRE(res.trace[0] - res.trace[1] == Catch::Approx(res.max_eig[0]).margin(1e-8));
    const double expected = -static_cast<double>(res.observations)
                            * (std::log1p(-res.eigenvalues[0]) + std::log1p(-res.eigenvalues[1]));
    REQUIRE(res.trace[0] == Catch::Approx(expected).margin(1e-8));
}

TEST_CASE("the synthetic pair rejects the no-cointegration hypothesis") {
    pair_series series = simulate_pair_fixture();
    johansen_result res = johansen_test(pair_levels(series));
    REQUIRE(res.trace[0] > 18.399);
    REQUIRE(res.reject_trace);
    REQUIRE(res.reject_max_eig);
}

TEST_CASE("independent random walks are rejected at close to the nominal five percent rate") {
    const int runs = 200;
    int trace_rejections = 0;
    for (int s = 0; s < runs; ++s) {
        rng r(9000 + static_cast<std::uint64_t>(s));
        johansen_result res = johansen_test(random_walk_levels(500, 2, r));
        trace_rejections += res.reject_trace;
    }
    const double rate = static_cast<double>(trace_rejections) / runs;
    REQUIRE(rate >= 0.02);
    REQUIRE(rate <= 0.08);
}

TEST_CASE("a shared trend with tiny noise gives an eigenvalue near one and a huge trace") {
    rng r(777);
    tensor levels = tensor::zeros(2000, 2);
    double walk = 0.0;
    for (std::size_t t = 0; t < 2000; ++t) {
        walk += r.normal();
        levels.at(t, 0) = walk;
        levels.at(t, 1) = 2.0 * walk + 0.001 * r.normal();
    }
    johansen_result res = johansen_test(levels);
    REQUIRE(res.eigenvalues[0] > 0.25);
    REQUIRE(res.trace[0] > 100.0);
    REQUIRE(res.reject_trace);
}

TEST_CASE("rank tests demand a minimum sample and valid names") {
    tensor tiny = tensor::zeros(10, 2);
    REQUIRE_THROWS_AS(johansen_test(tiny), config_error);

    for (auto d : {johansen_deterministic::none, johansen_deterministic::restricted_constant,
                   johansen_deterministic::unrestricted_constant, johansen_deterministic::detrended})
        REQUIRE(johansen_deterministic_from_name(johansen_deterministic_name(d)) == d);
    REQUIRE_THROWS_AS(johansen_deterministic_from_name("cubic"), config_error);
}

TEST_CASE("deterministic-term variants all run and keep the statistic ordering") {
    pair_series series = simulate_pair_fixture({.steps = 20000});
    tensor levels = pair_levels(series);
    for (auto d : {johansen_deterministic::none, johansen_deterministic::restricted_constant,
                   johansen_deterministic::unrestricted_constant, johansen_deterministic::detrended}) {
        johansen_spec spec;
        spec.deterministic = d;
        johansen_result res = johansen_test(levels, spec);
        REQUIRE(res.eigenvalues.size() == 2);
        REQUIRE(res.trace[0] > res.trace[1]);
        REQUIRE(res.trace[1] >= 0.0);
        // the fixture reverts fast; every variant should still see it
        REQUIRE(res.trace[0] > 18.399);
    }
}
