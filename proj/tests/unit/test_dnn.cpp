#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "ltfeas/dnn.hpp"
#include "ltfeas/errors.hpp"
#include "ltfeas/rng.hpp"

using namespace ltfeas;
using namespace ltfeas::dnn;

namespace {

Matrix random_inputs(std::size_t n, std::size_t d, std::uint64_t seed,
                     double lo = -1.0, double hi = 1.0) {
    auto rng = make_rng(seed);
    Matrix x(n, std::vector<double>(d));
    for (auto& row : x)
        for (auto& v : row) v = uniform(rng, lo, hi);
    return x;
}

std::vector<int> random_labels(std::size_t n, std::uint64_t seed) {
    auto rng = make_rng(seed);
    std::vector<int> y(n);
    for (auto& label : y) label = uniform01(rng) < 0.5 ? 0 : 1;
    return y;
}

MLPParams zero_params(const MLPConfig& config) {
    MLPParams p = init_network(config, 0);
    for (auto& w : p.w) w.setZero();
    for (auto& b : p.b) b.setZero();
    return p;
}

// flatten parameters for the finite-difference sweep
std::vector<double*> param_slots(MLPParams& p) {
    std::vector<double*> slots;
    for (auto& w : p.w)
        for (Eigen::Index i = 0; i < w.size(); ++i) slots.push_back(w.data() + i);
    for (auto& b : p.b)
        for (Eigen::Index i = 0; i < b.size(); ++i) slots.push_back(b.data() + i);
    return slots;
}

std::vector<double> flat_grads(const MLPParams& g) {
    std::vector<double> out;
    for (const auto& w : g.w)
        for (Eigen::Index i = 0; i < w.size(); ++i) out.push_back(*(w.data() + i));
    for (const auto& b : g.b)
        for (Eigen::Index i = 0; i < b.size(); ++i) out.push_back(*(b.data() + i));
    return out;
}

std::string temp_path(const std::string& stem) {
    return (std::filesystem::temp_directory_path() / stem).string();
}

// 200-sample, 2-feature, linearly separable toy problem
void toy_problem(Matrix& x, std::vector<int>& y, std::uint64_t seed) {
    x = random_inputs(200, 2, seed, 0.0, 1.0);
    y.clear();
    for (const auto& row : x) y.push_back(row[0] + row[1] > 1.0 ? 1 : 0);
}

double set_accuracy(const MLPModel& model, const Matrix& x,
                    const std::vector<int>& y) {
    const auto probs = predict_proba(model, x);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < y.size(); ++i)
        hits += static_cast<std::size_t>((probs[i][1] >= 0.5 ? 1 : 0) == y[i]);
    return static_cast<double>(hits) / static_cast<double>(y.size());
}

}  // namespace

TEST_CASE("init_network: deterministic, zero biases, He-scaled weights") {
    MLPConfig config;
    config.input_width = 300;
    config.hidden_layers = 1;
    config.hidden_width = 200;

    const auto a = init_network(config, 42);
    const auto b = init_network(config, 42);
    REQUIRE(a.w.size() == 2);
    for (std::size_t l = 0; l < a.w.size(); ++l) {
        CHECK((a.w[l] - b.w[l]).cwiseAbs().maxCoeff() == 0.0);
        CHECK(a.b[l].cwiseAbs().maxCoeff() == 0.0);
    }

    // 200x300 draws: empirical variance should sit near 2 / fan_in
    const double target = 2.0 / 300.0;
    const double mean = a.w[0].mean();
    const double var =
        (a.w[0].array() - mean).square().sum() / (a.w[0].size() - 1.0);
    CHECK(var > 0.8 * target);
    CHECK(var < 1.2 * target);

    const auto c = init_network(config, 43);
    CHECK((a.w[0] - c.w[0]).cwiseAbs().maxCoeff() > 0.0);

    MLPConfig bad = config;
    bad.hidden_layers = 0;
    CHECK_THROWS_AS(init_network(bad, 0), input_error);
}

TEST_CASE("forward_loss: softmax rows are distributions") {
    MLPConfig config;
    config.input_width = 4;
    config.hidden_layers = 2;
    config.hidden_width = 8;
    const auto params = init_network(config, 7);
    const auto x = random_inputs(20, 4, 8);
    const auto y = random_labels(20, 9);
    const auto [loss, probs] = forward_loss(params, config, x, y);
    CHECK(std::isfinite(loss));
    CHECK(loss > 0.0);
    for (const auto& p : probs) {
        CHECK(p[0] >= 0.0);
        CHECK(p[1] >= 0.0);
        CHECK(std::abs(p[0] + p[1] - 1.0) < 1e-12);
    }
}

TEST_CASE("forward_loss: confident correct output has zero loss") {
    MLPConfig config;
    config.input_width = 2;
    config.hidden_layers = 1;
    config.hidden_width = 3;
    auto params = zero_params(config);
    params.b[1](0) = 500.0;  // logits (500, -500) -> p = (1, 0) exactly
    params.b[1](1) = -500.0;

    const Matrix x = {{0.3, -0.2}, {0.0, 0.1}};
    const auto [loss0, probs0] = forward_loss(params, config, x, {0, 0});
    CHECK(probs0[0][0] == 1.0);
    CHECK(loss0 == 0.0);

    // same confidence on the wrong class pays the clamped-log penalty
    const auto [loss1, probs1] = forward_loss(params, config, x, {1, 1});
    CHECK(loss1 == Catch::Approx(-2.0 * std::log(1e-12)).epsilon(1e-12));
    CHECK(probs1[0][1] == 0.0);
}

TEST_CASE("forward_loss: uniform output costs ln 2 per sample") {
    MLPConfig config;
    config.input_width = 3;
    config.hidden_layers = 1;
    config.hidden_width = 5;
    const auto params = zero_params(config);
    const auto x = random_inputs(17, 3, 10);
    const auto y = random_labels(17, 11);
    const auto [loss, probs] = forward_loss(params, config, x, y);
    CHECK(loss == Catch::Approx(17.0 * std::log(2.0)).margin(1e-12));
    CHECK(probs[5][0] == 0.5);
}

TEST_CASE("forward_loss: rejects non-finite and misshapen input") {
    MLPConfig config;
    config.input_width = 2;
    config.hidden_layers = 1;
    config.hidden_width = 2;
    const auto params = init_network(config, 1);
    CHECK_THROWS_AS(forward_loss(params, config, {}, {}), input_error);
    CHECK_THROWS_AS(
        forward_loss(params, config,
                     {{1.0, std::numeric_limits<double>::quiet_NaN()}}, {0}),
        input_error);
    CHECK_THROWS_AS(forward_loss(params, config, {{1.0, 2.0, 3.0}}, {0}),
                    shape_error);
    CHECK_THROWS_AS(forward_loss(params, config, {{1.0, 2.0}}, {0, 1}), shape_error);
    CHECK_THROWS_AS(forward_loss(params, config, {{1.0, 2.0}}, {2}), input_error);
}

TEST_CASE("softmax: invariant to a common logit shift") {
    MLPConfig config;
    config.input_width = 3;
    config.hidden_layers = 1;
    config.hidden_width = 4;
    auto params = init_network(config, 3);
    auto shifted = params;
    shifted.b[1](0) += 37.5;
    shifted.b[1](1) += 37.5;

    const auto x = random_inputs(9, 3, 4);
    const auto y = random_labels(9, 5);
    const auto [la, pa] = forward_loss(params, config, x, y);
    const auto [lb, pb] = forward_loss(shifted, config, x, y);
    CHECK(la == Catch::Approx(lb).margin(1e-12));
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(std::abs(pa[i][0] - pb[i][0]) < 1e-12);
        CHECK(std::abs(pa[i][1] - pb[i][1]) < 1e-12);
    }
}

TEST_CASE("backward: matches central finite differences for every activation") {
    for (Activation a : {Activation::relu, Activation::leaky_relu, Activation::elu}) {
        MLPConfig config;
        config.input_width = 5;
        config.hidden_layers = 2;
        config.hidden_width = 8;
        config.activation = a;

        auto params = init_network(config, 101);
        const auto x = random_inputs(6, 5, 102);
        const auto y = random_labels(6, 103);
        const auto analytic = flat_grads(backward(params, config, x, y));

        auto slots = param_slots(params);
        REQUIRE(slots.size() == analytic.size());
        const double h = 1e-5;
        for (std::size_t i = 0; i < slots.size(); ++i) {
            const double keep = *slots[i];
            *slots[i] = keep + h;
            const double fp = forward_loss(params, config, x, y).first;
            *slots[i] = keep - h;
            const double fm = forward_loss(params, config, x, y).first;
            *slots[i] = keep;
            const double fd = (fp - fm) / (2.0 * h);
            const double err = std::abs(fd - analytic[i]) /
                               std::max({std::abs(fd), std::abs(analytic[i]), 1e-6});
            CAPTURE(activation_name(a), i, fd, analytic[i]);
            CHECK(err < 1e-5);
        }
    }
}

TEST_CASE("backward: zero net reduces to the softmax-residual bias gradient") {
    MLPConfig config;
    config.input_width = 3;
    config.hidden_layers = 1;
    config.hidden_width = 4;
    const auto params = zero_params(config);
    const Matrix x(3, std::vector<double>(3, 0.0));
    const std::vector<int> y = {0, 1, 1};
    const auto grads = backward(params, config, x, y);

    // p = (0.5, 0.5) for every sample; sum of (p - onehot) over the batch
    CHECK(grads.b[1](0) == Catch::Approx(0.5).margin(1e-15));
    CHECK(grads.b[1](1) == Catch::Approx(-0.5).margin(1e-15));
    CHECK(grads.b[0].cwiseAbs().maxCoeff() == 0.0);
    for (const auto& w : grads.w) CHECK(w.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward: duplicating the batch doubles every gradient") {
    MLPConfig config;
    config.input_width = 4;
    config.hidden_layers = 2;
    config.hidden_width = 6;
    const auto params = init_network(config, 55);
    auto x = random_inputs(5, 4, 56);
    auto y = random_labels(5, 57);
    const auto g1 = flat_grads(backward(params, config, x, y));

    Matrix x2 = x;
    std::vector<int> y2 = y;
    x2.insert(x2.end(), x.begin(), x.end());
    y2.insert(y2.end(), y.begin(), y.end());
    const auto g2 = flat_grads(backward(params, config, x2, y2));

    for (std::size_t i = 0; i < g1.size(); ++i)
        CHECK(g2[i] == Catch::Approx(2.0 * g1[i]).margin(1e-12));
}

TEST_CASE("adam_step: first step moves by roughly -eta * sign(g)") {
    MLPConfig config;
    config.input_width = 1;
    config.hidden_layers = 1;
    config.hidden_width = 1;
    auto params = zero_params(config);
    params.w[0](0, 0) = 0.7;

    MLPParams grads = zero_params(config);
    grads.w[0](0, 0) = 2.0;

    auto state = init_adam(params);
    adam_step(params, grads, state, AdamParams{}, 0.1);
    CHECK(params.w[0](0, 0) == Catch::Approx(0.7 - 0.1).margin(1e-8));
    CHECK(state.t == 1);
    CHECK(state.eta_t == 0.1);
    CHECK(params.b[0](0) == 0.0);  // zero gradient with zero moments: no motion
}

TEST_CASE("adam_step: three steps match the hand-unrolled recurrence") {
    MLPConfig config;
    config.input_width = 1;
    config.hidden_layers = 1;
    config.hidden_width = 1;
    auto params = zero_params(config);
    params.w[0](0, 0) = 0.5;
    MLPParams grads = zero_params(config);
    grads.w[0](0, 0) = 1.0;
    auto state = init_adam(params);

    // independent scalar unroll of the moment recurrences
    double theta = 0.5, m = 0.0, v = 0.0;
    const double b1 = 0.9, b2 = 0.999, eta = 0.1, eps = 1e-8;
    for (int t = 1; t <= 3; ++t) {
        adam_step(params, grads, state, AdamParams{}, eta);
        m = b1 * m + (1.0 - b1) * 1.0;
        v = b2 * v + (1.0 - b2) * 1.0;
        const double mhat = m / (1.0 - std::pow(b1, t));
        const double vhat = v / (1.0 - std::pow(b2, t));
        theta -= eta * mhat / (std::sqrt(vhat) + eps);
        CAPTURE(t);
        CHECK(params.w[0](0, 0) == Catch::Approx(theta).margin(1e-12));
    }
}

TEST_CASE("train_mlp: fits a linearly separable toy set") {
    Matrix x;
    std::vector<int> y;
    toy_problem(x, y, 201);
    const Matrix x_val(x.begin() + 160, x.end());
    const std::vector<int> y_val(y.begin() + 160, y.end());
    const Matrix x_tr(x.begin(), x.begin() + 160);
    const std::vector<int> y_tr(y.begin(), y.begin() + 160);

    MLPConfig config;
    config.input_width = 2;
    config.hidden_layers = 2;
    config.hidden_width = 16;
    TrainSchedule schedule;
    schedule.batch_size = 32;
    schedule.max_epochs = 50;
    schedule.drop_period = 25;
    schedule.drop_factor = 0.5;
    schedule.patience = 50;
    AdamParams adam;
    adam.eta = 0.01;

    const auto result = train_mlp(x_tr, y_tr, x_val, y_val, config, schedule, adam, 5);
    CHECK(set_accuracy(result.model, x_tr, y_tr) >= 0.99);
    REQUIRE(!result.history.epochs.empty());

    // returned parameters are the best-validation ones
    double best = std::numeric_limits<double>::infinity();
    for (const auto& e : result.history.epochs) best = std::min(best, e.val_loss);
    const double model_val =
        forward_loss(result.model.params, config, x_val, y_val).first /
        static_cast<double>(x_val.size());
    CHECK(model_val == Catch::Approx(best).margin(1e-12));
    CHECK(result.history.best_epoch >= 0);

    // scheduled learning-rate trace: halves at epoch 25
    CHECK(result.history.epochs[0].eta == Catch::Approx(0.01));
    if (result.history.epochs.size() > 25)
        CHECK(result.history.epochs[25].eta == Catch::Approx(0.005));
}

TEST_CASE("train_mlp: one epoch reduces the training loss") {
    Matrix x;
    std::vector<int> y;
    toy_problem(x, y, 202);
    MLPConfig config;
    config.input_width = 2;
    config.hidden_layers = 1;
    config.hidden_width = 8;
    TrainSchedule schedule;
    schedule.batch_size = 20;
    schedule.max_epochs = 1;
    AdamParams adam;
    adam.eta = 0.01;

    const double initial =
        forward_loss(init_network(config, 9), config, x, y).first /
        static_cast<double>(x.size());
    const auto result = train_mlp(x, y, x, y, config, schedule, adam, 9);
    const double final_loss = forward_loss(result.model.params, config, x, y).first /
                              static_cast<double>(x.size());
    CHECK(final_loss < initial);
}

TEST_CASE("train_mlp: drop factor 1 keeps the learning rate constant") {
    Matrix x;
    std::vector<int> y;
    toy_problem(x, y, 203);
    MLPConfig config;
    config.input_width = 2;
    config.hidden_layers = 1;
    config.hidden_width = 4;
    TrainSchedule schedule;
    schedule.batch_size = 50;
    schedule.max_epochs = 8;
    schedule.drop_period = 2;
    schedule.drop_factor = 1.0;
    schedule.patience = 8;
    const auto result = train_mlp(x, y, x, y, config, schedule, AdamParams{}, 1);
    for (const auto& e : result.history.epochs)
        CHECK(e.eta == Catch::Approx(1e-3).margin(0.0));
}

TEST_CASE("train_mlp: bit-identical reruns for fixed seeds") {
    Matrix x;
    std::vector<int> y;
    toy_problem(x, y, 204);
    const Matrix x_val(x.begin() + 150, x.end());
    const std::vector<int> y_val(y.begin() + 150, y.end());
    MLPConfig config;
    config.input_width = 2;
    config.hidden_layers = 2;
    config.hidden_width = 8;
    TrainSchedule schedule;
    schedule.batch_size = 25;
    schedule.max_epochs = 6;
    schedule.shuffle_seed = 77;

    const auto a = train_mlp(x, y, x_val, y_val, config, schedule, AdamParams{}, 3);
    const auto b = train_mlp(x, y, x_val, y_val, config, schedule, AdamParams{}, 3);
    REQUIRE(a.history.epochs.size() == b.history.epochs.size());
    for (std::size_t e = 0; e < a.history.epochs.size(); ++e) {
        CHECK(a.history.epochs[e].train_loss == b.history.epochs[e].train_loss);
        CHECK(a.history.epochs[e].val_loss == b.history.epochs[e].val_loss);
        CHECK(a.history.epochs[e].val_accuracy == b.history.epochs[e].val_accuracy);
    }
    for (std::size_t l = 0; l < a.model.params.w.size(); ++l)
        CHECK((a.model.params.w[l] - b.model.params.w[l]).cwiseAbs().maxCoeff() ==
              0.0);
}

TEST_CASE("train_mlp: early stopping and input guards") {
    Matrix x;
    std::vector<int> y;
    toy_problem(x, y, 205);
    MLPConfig config;
    config.input_width = 2;
    config.hidden_layers = 1;
    config.hidden_width = 4;
    TrainSchedule schedule;
    schedule.batch_size = 40;
    schedule.max_epochs = 30;
    schedule.patience = 2;

    const auto result = train_mlp(x, y, x, y, config, schedule, AdamParams{}, 2);
    const auto n_epochs = static_cast<int>(result.history.epochs.size());
    CHECK(n_epochs <= schedule.max_epochs);
    if (n_epochs < schedule.max_epochs)
        CHECK(n_epochs == result.history.best_epoch + 1 + schedule.patience);

    CHECK_THROWS_AS(train_mlp({}, {}, x, y, config, schedule, AdamParams{}, 0),
                    input_error);
    CHECK_THROWS_AS(train_mlp(x, y, {}, {}, config, schedule, AdamParams{}, 0),
                    input_error);
    TrainSchedule bad = schedule;
    bad.drop_factor = 1.5;
    CHECK_THROWS_AS(train_mlp(x, y, x, y, config, bad, AdamParams{}, 0), input_error);
}

TEST_CASE("predict_proba: matches forward_loss probabilities") {
    MLPConfig config;
    config.input_width = 6;
    config.hidden_layers = 2;
    config.hidden_width = 10;
    MLPModel model;
    model.config = config;
    model.params = init_network(config, 11);
    const auto x = random_inputs(15, 6, 12);
    const auto probs = predict_proba(model, x);
    const auto [loss, ref] = forward_loss(model.params, config, x,
                                          std::vector<int>(x.size(), 0));
    (void)loss;
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(probs[i][0] == ref[i][0]);
        CHECK(probs[i][1] == ref[i][1]);
        CHECK(std::abs(probs[i][0] + probs[i][1] - 1.0) < 1e-12);
    }
}

TEST_CASE("model JSON: round-trip preserves predictions exactly") {
    MLPConfig config;
    config.input_width = 5;
    config.hidden_layers = 2;
    config.hidden_width = 7;
    config.activation = Activation::elu;
    MLPModel model;
    model.config = config;
    model.params = init_network(config, 21);
    model.scaler_ref = "scaler.json";

    const auto path = temp_path("ltfeas_mlp_test.json");
    save_model(model, path);
    const auto back = load_model(path);
    std::remove(path.c_str());

    CHECK(back.config.input_width == 5);
    CHECK(back.config.hidden_layers == 2);
    CHECK(back.config.hidden_width == 7);
    CHECK(back.config.activation == Activation::elu);
    CHECK(back.scaler_ref == "scaler.json");

    const auto x = random_inputs(10, 5, 22);
    const auto pa = predict_proba(model, x);
    const auto pb = predict_proba(back, x);
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(pa[i][0] == pb[i][0]);
        CHECK(pa[i][1] == pb[i][1]);
    }
}

TEST_CASE("model JSON: malformed inputs are rejected") {
    CHECK_THROWS_AS(load_model(temp_path("ltfeas_no_mlp.json")), io_error);
    CHECK_THROWS_AS(model_from_json(nlohmann::json{{"kind", "knn"}}), io_error);

    MLPConfig config;
    config.input_width = 2;
    config.hidden_layers = 1;
    config.hidden_width = 2;
    MLPModel model;
    model.config = config;
    model.params = init_network(config, 1);
    auto j = model_to_json(model);

    auto truncated = j;
    truncated["layers"].erase(1);
    CHECK_THROWS_AS(model_from_json(truncated), io_error);

    auto badbias = j;
    badbias["layers"][0]["b"].erase(0);
    CHECK_THROWS_AS(model_from_json(badbias), io_error);

    auto badact = j;
    badact["config"]["activation"] = "tanh";
    CHECK_THROWS_AS(model_from_json(badact), io_error);
}
