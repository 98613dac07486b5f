#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ltfeas/errors.hpp"
#include "ltfeas/hyperopt.hpp"
#include "ltfeas/rng.hpp"

using namespace ltfeas;
using namespace ltfeas::hyperopt;

namespace {

SearchSpace planted_space() {
    SearchSpace space;
    space.dims = {continuous_dim("x", 0.0, 1.0), continuous_dim("y", 0.0, 1.0),
                  categorical_dim("c", {"a", "b", "c"})};
    return space;
}

// smooth objective peaking at (0.3, 0.7, "b") with value 0
double planted_objective(const Config& config) {
    const double x = config.at("x").get<double>();
    const double y = config.at("y").get<double>();
    const double dx = x - 0.3, dy = y - 0.7;
    const double cat_pen = config.at("c").get<std::string>() == "b" ? 0.0 : 0.5;
    return -(dx * dx + dy * dy) - cat_pen;
}

double encoded_distance_to_optimum(const SearchSpace& space, const Config& config) {
    const auto u = encode(space, config);
    const std::vector<double> target = {0.3, 0.7, 0.0, 1.0, 0.0};
    double d2 = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
        d2 += (u[i] - target[i]) * (u[i] - target[i]);
    return std::sqrt(d2);
}

}  // namespace

TEST_CASE("search space: tuning ranges and encoded width") {
    const auto space = dnn_search_space();
    space.validate();
    CHECK(space.dims.size() == 9);
    CHECK(space.encoded_width() == 11);  // 8 scalars + 3-way one-hot

    Config lo = {{"hidden_layers", 5},  {"hidden_width", 200}, {"activation", "relu"},
                 {"beta1", 0.85},       {"beta2", 0.9},        {"batch_size", 200},
                 {"eta", 0.001},        {"drop_period", 2},    {"drop_factor", 0.0}};
    const auto u = encode(space, lo);
    const std::vector<double> expect = {0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0};
    REQUIRE(u.size() == expect.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        CAPTURE(i);
        CHECK(u[i] == expect[i]);
    }
}

TEST_CASE("encode/decode: round-trip on a generic config") {
    const auto space = dnn_search_space();
    Config c = {{"hidden_layers", 7},   {"hidden_width", 384}, {"activation", "elu"},
                {"beta1", 0.9},         {"beta2", 0.95},       {"batch_size", 512},
                {"eta", 0.004},         {"drop_period", 5},    {"drop_factor", 0.4}};
    const auto back = decode(space, encode(space, c));
    CHECK(back.at("hidden_layers").get<long long>() == 7);
    CHECK(back.at("hidden_width").get<long long>() == 384);
    CHECK(back.at("activation").get<std::string>() == "elu");
    CHECK(back.at("batch_size").get<long long>() == 512);
    CHECK(back.at("drop_period").get<long long>() == 5);
    CHECK(back.at("beta1").get<double>() == Catch::Approx(0.9).margin(1e-12));
    CHECK(back.at("beta2").get<double>() == Catch::Approx(0.95).margin(1e-12));
    CHECK(back.at("eta").get<double>() == Catch::Approx(0.004).epsilon(1e-12));
    CHECK(back.at("drop_factor").get<double>() == Catch::Approx(0.4).margin(1e-12));
}

TEST_CASE("decode: log-scaled midpoint and integer rounding") {
    const auto space = dnn_search_space();
    std::vector<double> u(space.encoded_width(), 0.0);
    u[2] = 1.0;  // activation one-hot: relu
    u[8] = 0.5;  // eta coordinate (after 2 ints + 3-wide one-hot + 2 doubles + 1 int)
    u[0] = 0.5;  // hidden_layers in [5, 10]
    const auto c = decode(space, u);
    CHECK(c.at("eta").get<double>() ==
          Catch::Approx(std::sqrt(0.001 * 0.01)).epsilon(1e-12));
    CHECK(c.at("hidden_layers").get<long long>() == 8);  // round(7.5)
    CHECK(c.at("activation").get<std::string>() == "relu");

    // all-zero one-hot block falls back to the first choice
    std::vector<double> z(space.encoded_width(), 0.0);
    CHECK(decode(space, z).at("activation").get<std::string>() == "relu");
}

TEST_CASE("encode/decode: guards") {
    const auto space = planted_space();
    CHECK_THROWS_AS(encode(space, Config{{"x", 0.5}, {"y", 0.5}}), input_error);
    CHECK_THROWS_AS(
        encode(space, Config{{"x", 0.5}, {"y", 0.5}, {"c", "zzz"}}), input_error);
    CHECK_THROWS_AS(decode(space, std::vector<double>(3, 0.0)), shape_error);
    CHECK_THROWS_AS(continuous_dim("bad", 1.0, 1.0), input_error);
    CHECK_THROWS_AS(continuous_dim("bad", 0.0, 1.0, true), input_error);
    CHECK_THROWS_AS(integer_dim("bad", 5, 5), input_error);
    CHECK_THROWS_AS(categorical_dim("bad", {}), input_error);

    SearchSpace dup;
    dup.dims = {continuous_dim("x", 0.0, 1.0), continuous_dim("x", 0.0, 2.0)};
    CHECK_THROWS_AS(dup.validate(), input_error);
}

TEST_CASE("gp surrogate: regression quality on a 1-D quadratic") {
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    for (int i = 0; i < 20; ++i) {
        const double t = static_cast<double>(i) / 19.0;
        x.push_back({t});
        y.push_back((t - 0.4) * (t - 0.4));
    }
    const auto gp = fit_gp(x, y, 1);

    double sse = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double t = static_cast<double>(i) / 199.0;
        const auto post = gp_posterior(gp, {t});
        const double truth = (t - 0.4) * (t - 0.4);
        sse += (post.mean - truth) * (post.mean - truth);
        CHECK(post.var >= 0.0);
    }
    const double rmse = std::sqrt(sse / 200.0);
    const double range = 0.36;  // max - min of the quadratic on [0, 1]
    CHECK(rmse < 0.1 * range);
}

TEST_CASE("gp surrogate: interpolation and variance shrinkage") {
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    auto rng = make_rng(3);
    for (int i = 0; i < 12; ++i) {
        x.push_back({uniform01(rng), uniform01(rng)});
        y.push_back(std::sin(3.0 * x.back()[0]) + 0.5 * x.back()[1]);
    }
    const auto gp = fit_gp(x, y, 2);
    const double noise_std = std::sqrt(gp.noise_var);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto post = gp_posterior(gp, x[i]);
        CAPTURE(i, post.mean, y[i], noise_std);
        CHECK(std::abs(post.mean - y[i]) <= 3.0 * noise_std + 1e-9);
    }

    const auto far = gp_posterior(gp, {25.0, -25.0});
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(gp_posterior(gp, x[i]).var <= far.var + 1e-12);
}

TEST_CASE("gp surrogate: guards") {
    CHECK_THROWS_AS(fit_gp({{0.0}}, {1.0}), input_error);
    CHECK_THROWS_AS(fit_gp({{0.0}, {1.0}}, {1.0}), shape_error);
    CHECK_THROWS_AS(fit_gp({{0.0}, {1.0, 2.0}}, {1.0, 2.0}), shape_error);
    const auto gp = fit_gp({{0.0}, {0.5}, {1.0}}, {0.0, 1.0, 0.0});
    CHECK_THROWS_AS(gp_posterior(gp, {0.0, 0.0}), shape_error);
}

TEST_CASE("expected improvement: closed-form spot values") {
    CHECK(expected_improvement(0.5, 0.0, 0.7) == 0.0);
    CHECK(expected_improvement(0.7, 0.0, 0.7) == 0.0);
    CHECK(expected_improvement(0.9, 0.0, 0.7) == Catch::Approx(0.2).margin(1e-15));
    // mu = best, sigma = 1: EI = pdf(0) = 1/sqrt(2 pi)
    CHECK(expected_improvement(0.7, 1.0, 0.7) ==
          Catch::Approx(1.0 / std::sqrt(2.0 * M_PI)).margin(1e-12));
    // symmetric tails stay non-negative
    auto rng = make_rng(4);
    for (int i = 0; i < 200; ++i) {
        const double ei = expected_improvement(uniform(rng, -2.0, 2.0),
                                               uniform(rng, 0.0, 4.0),
                                               uniform(rng, -2.0, 2.0));
        CHECK(ei >= 0.0);
    }
}

TEST_CASE("bo_run: finds the planted optimum in most seeds") {
    const auto space = planted_space();
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        BoOptions opts;
        opts.budget = 30;
        opts.init = 8;
        opts.seed = seed;
        const auto result = bo_run(planted_objective, space, opts);
        CHECK(result.history.size() == 30);
        const double dist = encoded_distance_to_optimum(space, result.best.config);
        CAPTURE(seed, dist, result.best.value);
        if (dist <= 0.05) ++hits;
    }
    CHECK(hits >= 8);
}

TEST_CASE("bo_run: budget equal to init degenerates to random search") {
    const auto space = planted_space();
    BoOptions opts;
    opts.budget = 12;
    opts.init = 12;
    opts.seed = 5;
    const auto result = bo_run(planted_objective, space, opts);
    CHECK(result.history.size() == 12);
    for (const auto& t : result.history) CHECK(t.ok);
}

TEST_CASE("bo_run: best-so-far trace is monotone non-decreasing") {
    const auto space = planted_space();
    BoOptions opts;
    opts.budget = 20;
    opts.init = 6;
    opts.seed = 9;
    const auto result = bo_run(planted_objective, space, opts);
    const auto trace = best_so_far_trace(result.history);
    REQUIRE(trace.size() == result.history.size());
    double prev = -std::numeric_limits<double>::infinity();
    for (double v : trace) {
        if (!std::isfinite(v)) continue;
        CHECK(v >= prev);
        prev = v;
    }
    CHECK(trace.back() == result.best.value);
}

TEST_CASE("bo_run: deterministic for a fixed seed at batch 1") {
    const auto space = planted_space();
    BoOptions opts;
    opts.budget = 16;
    opts.init = 5;
    opts.seed = 123;
    const auto a = bo_run(planted_objective, space, opts);
    const auto b = bo_run(planted_objective, space, opts);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].config == b.history[i].config);
        CHECK(a.history[i].value == b.history[i].value);
    }
}

TEST_CASE("bo_run: beats random search in the median over 10 seeds") {
    const auto space = planted_space();
    std::vector<double> bo_best, rs_best;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        BoOptions bo;
        bo.budget = 30;
        bo.init = 8;
        bo.seed = seed;
        bo_best.push_back(bo_run(planted_objective, space, bo).best.value);
        BoOptions rs;
        rs.budget = 30;
        rs.init = 30;  // pure random
        rs.seed = seed;
        rs_best.push_back(bo_run(planted_objective, space, rs).best.value);
    }
    std::sort(bo_best.begin(), bo_best.end());
    std::sort(rs_best.begin(), rs_best.end());
    const double bo_median = 0.5 * (bo_best[4] + bo_best[5]);
    const double rs_median = 0.5 * (rs_best[4] + rs_best[5]);
    CAPTURE(bo_median, rs_median);
    CHECK(bo_median >= rs_median);
}

TEST_CASE("bo_run: failed trials are recorded and the search continues") {
    const auto space = planted_space();
    auto objective = [](const Config& config) {
        if (config.at("c").get<std::string>() == "c")
            throw std::runtime_error("deliberate failure");
        return planted_objective(config);
    };
    BoOptions opts;
    opts.budget = 25;
    opts.init = 8;
    opts.seed = 2;
    const auto result = bo_run(objective, space, opts);
    CHECK(result.history.size() == 25);
    std::size_t failed = 0;
    for (const auto& t : result.history) {
        if (!t.ok) {
            ++failed;
            CHECK(t.config.at("c").get<std::string>() == "c");
        }
    }
    CHECK(result.best.ok);
    CHECK(result.best.config.at("c").get<std::string>() != "c");
    CAPTURE(failed);

    auto always_fail = [](const Config&) -> double {
        throw std::runtime_error("nope");
    };
    BoOptions tiny;
    tiny.budget = 4;
    tiny.init = 4;
    CHECK_THROWS_AS(bo_run(always_fail, space, tiny), experiment_error);
}

TEST_CASE("bo_run: batched proposals with the constant liar") {
    const auto space = planted_space();
    BoOptions opts;
    opts.budget = 18;
    opts.init = 6;
    opts.batch = 3;
    opts.seed = 77;
    const auto result = bo_run(planted_objective, space, opts);
    CHECK(result.history.size() == 18);
    CHECK(result.best.ok);

    CHECK_THROWS_AS(bo_run(planted_objective, space, BoOptions{5, 8, 1, 0}),
                    input_error);
    CHECK_THROWS_AS(bo_run(planted_objective, space, BoOptions{10, 0, 1, 0}),
                    input_error);
    CHECK_THROWS_AS(bo_run(planted_objective, space, BoOptions{10, 4, 0, 0}),
                    input_error);
}
