// From-scratch fully connected feasibility classifier.
//
// Architecture: `layers` hidden blocks of shared width (affine + activation)
// followed by an affine map to 2 logits and a softmax. The loss is the
// cross-entropy summed over the batch (not averaged), so gradients scale
// linearly with batch size. Training uses Adam with bias-corrected moments
// and a step-drop learning-rate schedule, validates every epoch, stops early
// on stalled validation loss, and returns the best-validation parameters.
//
// All arithmetic is 64-bit and single-threaded, which keeps runs bit
// reproducible for fixed seeds and makes finite-difference gradient checks
// meaningful.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "ltfeas/errors.hpp"
#include "ltfeas/rng.hpp"

namespace ltfeas::dnn {

using Matrix = std::vector<std::vector<double>>;

enum class Activation { relu, leaky_relu, elu };

inline std::string activation_name(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::leaky_relu: return "leaky_relu";
        case Activation::elu: return "elu";
    }
    throw input_error("activation_name: unknown activation");
}

inline Activation activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "leaky_relu") return Activation::leaky_relu;
    if (name == "elu") return Activation::elu;
    throw input_error("activation_from_name: unknown activation " + name);
}

struct MLPConfig {
    int input_width = 103;
    int hidden_layers = 2;   // number of hidden affine+activation blocks
    int hidden_width = 100;  // shared width of every hidden block
    Activation activation = Activation::relu;

    void validate() const {
        if (input_width < 1) throw input_error("MLPConfig: input_width must be >= 1");
        if (hidden_layers < 1)
            throw input_error("MLPConfig: hidden_layers must be >= 1");
        if (hidden_width < 1)
            throw input_error("MLPConfig: hidden_width must be >= 1");
    }
};

// Weight matrices are (fan_out x fan_in); w[i], b[i] feed layer i's output.
// Index layers: 0..hidden_layers-1 hidden, hidden_layers = output (2 rows).
struct MLPParams {
    std::vector<Eigen::MatrixXd> w;
    std::vector<Eigen::VectorXd> b;
};

struct AdamParams {
    double eta = 1e-3;  // base learning rate before scheduling
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<Eigen::MatrixXd> mw, vw;
    std::vector<Eigen::VectorXd> mb, vb;
    long t = 0;          // completed steps
    double eta_t = 0.0;  // learning rate used by the most recent step
};

struct TrainSchedule {
    int batch_size = 200;
    int max_epochs = 30;
    int drop_period = 10;      // epochs between learning-rate drops
    double drop_factor = 0.5;  // multiplier applied at each drop; 1 = constant
    int patience = 5;          // epochs of stalled validation loss before stopping
    std::uint64_t shuffle_seed = 0;

    void validate() const {
        if (batch_size < 1) throw input_error("TrainSchedule: batch_size must be >= 1");
        if (max_epochs < 1) throw input_error("TrainSchedule: max_epochs must be >= 1");
        if (drop_period < 1)
            throw input_error("TrainSchedule: drop_period must be >= 1");
        if (!(drop_factor >= 0.0 && drop_factor <= 1.0))
            throw input_error("TrainSchedule: drop_factor must be in [0, 1]");
        if (patience < 1) throw input_error("TrainSchedule: patience must be >= 1");
    }
};

struct EpochStats {
    double train_loss = 0.0;  // mean per-sample training loss over the epoch
    double val_loss = 0.0;    // mean per-sample validation loss
    double val_accuracy = 0.0;
    double eta = 0.0;  // learning rate in effect during the epoch
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    int best_epoch = -1;  // epoch whose parameters the model keeps
};

struct MLPModel {
    MLPConfig config;
    MLPParams params;
    std::string scaler_ref;  // path of the standardizer the inputs expect
    // class_order is fixed: column 0 = infeasible, column 1 = feasible
};

// ---------------------------------------------------------------------------
// initialization

inline MLPParams init_network(const MLPConfig& config, std::uint64_t seed) {
    config.validate();
    MLPParams params;
    Rng rng = make_rng(seed);
    int fan_in = config.input_width;
    for (int layer = 0; layer <= config.hidden_layers; ++layer) {
        const int fan_out = layer == config.hidden_layers ? 2 : config.hidden_width;
        const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
        Eigen::MatrixXd w(fan_out, fan_in);
        for (int r = 0; r < fan_out; ++r)
            for (int c = 0; c < fan_in; ++c) w(r, c) = stddev * normal01(rng);
        params.w.push_back(std::move(w));
        params.b.push_back(Eigen::VectorXd::Zero(fan_out));
        fan_in = fan_out;
    }
    return params;
}

// ---------------------------------------------------------------------------
// forward / loss / backward

namespace detail {

inline double act(Activation a, double z) {
    switch (a) {
        case Activation::relu: return z > 0.0 ? z : 0.0;
        case Activation::leaky_relu: return z > 0.0 ? z : 0.01 * z;
        case Activation::elu: return z > 0.0 ? z : std::expm1(z);
    }
    return z;
}

inline double act_deriv(Activation a, double z) {
    switch (a) {
        case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::leaky_relu: return z > 0.0 ? 1.0 : 0.01;
        case Activation::elu: return z > 0.0 ? 1.0 : std::exp(z);
    }
    return 1.0;
}

inline Eigen::MatrixXd to_eigen(const Matrix& x, int expected_width) {
    if (x.empty()) throw input_error("dnn: empty sample matrix");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(x.size()),
                      static_cast<Eigen::Index>(expected_width));
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i].size() != static_cast<std::size_t>(expected_width))
            throw shape_error("dnn: sample width does not match network input");
        for (int j = 0; j < expected_width; ++j) {
            if (!std::isfinite(x[i][j]))
                throw input_error("dnn: non-finite feature value");
            m(static_cast<Eigen::Index>(i), j) = x[i][j];
        }
    }
    return m;
}

// Forward pass keeping pre-activations and activations for backprop.
struct ForwardCache {
    std::vector<Eigen::MatrixXd> z;  // pre-activation per layer
    std::vector<Eigen::MatrixXd> a;  // a[0] = input, a[l+1] = activation of z[l]
    Eigen::MatrixXd probs;           // n x 2 softmax output
};

inline ForwardCache forward_pass(const MLPParams& params, Activation activation,
                                 const Eigen::MatrixXd& x) {
    ForwardCache cache;
    cache.a.push_back(x);
    const std::size_t n_layers = params.w.size();
    for (std::size_t l = 0; l < n_layers; ++l) {
        Eigen::MatrixXd z = cache.a.back() * params.w[l].transpose();
        z.rowwise() += params.b[l].transpose();
        cache.z.push_back(z);
        if (l + 1 < n_layers) {
            Eigen::MatrixXd a = z;
            for (Eigen::Index i = 0; i < a.rows(); ++i)
                for (Eigen::Index j = 0; j < a.cols(); ++j)
                    a(i, j) = act(activation, a(i, j));
            cache.a.push_back(std::move(a));
        }
    }
    // softmax with the log-sum-exp shift for stability
    const Eigen::MatrixXd& logits = cache.z.back();
    cache.probs.resize(logits.rows(), 2);
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double zmax = std::max(logits(i, 0), logits(i, 1));
        const double e0 = std::exp(logits(i, 0) - zmax);
        const double e1 = std::exp(logits(i, 1) - zmax);
        const double denom = e0 + e1;
        cache.probs(i, 0) = e0 / denom;
        cache.probs(i, 1) = e1 / denom;
    }
    return cache;
}

inline double batch_loss(const Eigen::MatrixXd& probs, const std::vector<int>& y) {
    double loss = 0.0;
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        const int label = y[static_cast<std::size_t>(i)];
        loss -= std::log(std::max(probs(i, label), 1e-12));
    }
    return loss;
}

inline void check_labels(const std::vector<int>& y, std::size_t n) {
    if (y.size() != n)
        throw shape_error("dnn: label count does not match sample count");
    for (int label : y)
        if (label != 0 && label != 1)
            throw input_error("dnn: labels must be 0 or 1");
}

}  // namespace detail

// Loss is the cross-entropy summed over the batch; probabilities come back
// one row per sample, columns ordered [infeasible, feasible].
inline std::pair<double, Matrix> forward_loss(const MLPParams& params,
                                              const MLPConfig& config,
                                              const Matrix& x,
                                              const std::vector<int>& y) {
    const Eigen::MatrixXd xe = detail::to_eigen(x, config.input_width);
    detail::check_labels(y, x.size());
    const auto cache = detail::forward_pass(params, config.activation, xe);
    Matrix probs(x.size(), std::vector<double>(2));
    for (std::size_t i = 0; i < x.size(); ++i) {
        probs[i][0] = cache.probs(static_cast<Eigen::Index>(i), 0);
        probs[i][1] = cache.probs(static_cast<Eigen::Index>(i), 1);
    }
    return {detail::batch_loss(cache.probs, y), std::move(probs)};
}

// Exact gradients of the summed batch loss for every weight and bias.
inline MLPParams backward(const MLPParams& params, const MLPConfig& config,
                          const Matrix& x, const std::vector<int>& y) {
    const Eigen::MatrixXd xe = detail::to_eigen(x, config.input_width);
    detail::check_labels(y, x.size());
    const auto cache = detail::forward_pass(params, config.activation, xe);

    MLPParams grads;
    grads.w.resize(params.w.size());
    grads.b.resize(params.b.size());

    // softmax + cross-entropy: dL/dlogits = probs - onehot(labels)
    Eigen::MatrixXd delta = cache.probs;
    for (Eigen::Index i = 0; i < delta.rows(); ++i)
        delta(i, y[static_cast<std::size_t>(i)]) -= 1.0;

    for (std::size_t l = params.w.size(); l-- > 0;) {
        grads.w[l] = delta.transpose() * cache.a[l];
        grads.b[l] = delta.colwise().sum().transpose();
        if (l == 0) break;
        Eigen::MatrixXd next = delta * params.w[l];
        const Eigen::MatrixXd& z = cache.z[l - 1];
        for (Eigen::Index i = 0; i < next.rows(); ++i)
            for (Eigen::Index j = 0; j < next.cols(); ++j)
                next(i, j) *= detail::act_deriv(config.activation, z(i, j));
        delta = std::move(next);
    }
    return grads;
}

// ---------------------------------------------------------------------------
// Adam

inline AdamState init_adam(const MLPParams& params) {
    AdamState state;
    for (const auto& w : params.w) {
        state.mw.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
        state.vw.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    }
    for (const auto& b : params.b) {
        state.mb.push_back(Eigen::VectorXd::Zero(b.size()));
        state.vb.push_back(Eigen::VectorXd::Zero(b.size()));
    }
    return state;
}

// One Adam update with bias-corrected first and second moments:
//   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
//   theta <- theta - eta * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
inline void adam_step(MLPParams& params, const MLPParams& grads, AdamState& state,
                      const AdamParams& hyper, double eta) {
    if (grads.w.size() != params.w.size() || grads.b.size() != params.b.size())
        throw shape_error("adam_step: gradient layout does not match parameters");
    state.t += 1;
    state.eta_t = eta;
    const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.t));
    for (std::size_t l = 0; l < params.w.size(); ++l) {
        state.mw[l] = hyper.beta1 * state.mw[l] + (1.0 - hyper.beta1) * grads.w[l];
        state.vw[l] = hyper.beta2 * state.vw[l] +
                      (1.0 - hyper.beta2) * grads.w[l].array().square().matrix();
        params.w[l].array() -= eta * (state.mw[l].array() / c1) /
                               ((state.vw[l].array() / c2).sqrt() + hyper.eps);

        state.mb[l] = hyper.beta1 * state.mb[l] + (1.0 - hyper.beta1) * grads.b[l];
        state.vb[l] = hyper.beta2 * state.vb[l] +
                      (1.0 - hyper.beta2) * grads.b[l].array().square().matrix();
        params.b[l].array() -= eta * (state.mb[l].array() / c1) /
                               ((state.vb[l].array() / c2).sqrt() + hyper.eps);
    }
}

// ---------------------------------------------------------------------------
// training loop

struct TrainResult {
    MLPModel model;
    TrainHistory history;
};

// Epoch e runs at eta * drop_factor^(e / drop_period) (integer division), so
// drop_factor = 1 keeps it constant and 0 freezes learning after the first
// drop period. Early stopping watches validation loss with the schedule's
// patience; the returned parameters are those of the best validation epoch.
inline TrainResult train_mlp(const Matrix& x, const std::vector<int>& y,
                             const Matrix& x_val, const std::vector<int>& y_val,
                             const MLPConfig& config, const TrainSchedule& schedule,
                             const AdamParams& adam, std::uint64_t init_seed = 0) {
    config.validate();
    schedule.validate();
    if (x.empty()) throw input_error("train_mlp: empty training set");
    if (x_val.empty()) throw input_error("train_mlp: empty validation set");
    detail::check_labels(y, x.size());
    detail::check_labels(y_val, x_val.size());

    MLPParams params = init_network(config, init_seed);
    AdamState state = init_adam(params);

    const std::size_t n = x.size();
    Matrix batch_x;
    std::vector<int> batch_y;

    TrainResult out;
    out.model.config = config;
    MLPParams best_params = params;
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = -1;
    int stalled = 0;

    for (int epoch = 0; epoch < schedule.max_epochs; ++epoch) {
        const double eta =
            adam.eta * std::pow(schedule.drop_factor, epoch / schedule.drop_period);

        Rng rng = make_rng(schedule.shuffle_seed, static_cast<std::uint64_t>(epoch));
        const auto order = shuffled_indices(n, rng);

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n;
             start += static_cast<std::size_t>(schedule.batch_size)) {
            const std::size_t stop =
                std::min(n, start + static_cast<std::size_t>(schedule.batch_size));
            batch_x.clear();
            batch_y.clear();
            for (std::size_t r = start; r < stop; ++r) {
                batch_x.push_back(x[order[r]]);
                batch_y.push_back(y[order[r]]);
            }
            epoch_loss += forward_loss(params, config, batch_x, batch_y).first;
            const MLPParams grads = backward(params, config, batch_x, batch_y);
            adam_step(params, grads, state, adam, eta);
        }

        const auto [val_loss_sum, val_probs] =
            forward_loss(params, config, x_val, y_val);
        std::size_t hits = 0;
        for (std::size_t i = 0; i < y_val.size(); ++i)
            hits += static_cast<std::size_t>((val_probs[i][1] >= 0.5 ? 1 : 0) ==
                                             y_val[i]);

        EpochStats stats;
        stats.train_loss = epoch_loss / static_cast<double>(n);
        stats.val_loss = val_loss_sum / static_cast<double>(x_val.size());
        stats.val_accuracy =
            static_cast<double>(hits) / static_cast<double>(y_val.size());
        stats.eta = eta;
        out.history.epochs.push_back(stats);

        if (stats.val_loss < best_val) {
            best_val = stats.val_loss;
            best_params = params;
            best_epoch = epoch;
            stalled = 0;
        } else if (++stalled >= schedule.patience) {
            break;
        }
    }

    out.model.params = std::move(best_params);
    out.history.best_epoch = best_epoch;
    return out;
}

// Forward pass only; column 1 is the feasible-class probability.
inline Matrix predict_proba(const MLPModel& model, const Matrix& x) {
    const Eigen::MatrixXd xe = detail::to_eigen(x, model.config.input_width);
    const auto cache = detail::forward_pass(model.params, model.config.activation, xe);
    Matrix probs(x.size(), std::vector<double>(2));
    for (std::size_t i = 0; i < x.size(); ++i) {
        probs[i][0] = cache.probs(static_cast<Eigen::Index>(i), 0);
        probs[i][1] = cache.probs(static_cast<Eigen::Index>(i), 1);
    }
    return probs;
}

// ---------------------------------------------------------------------------
// JSON persistence

inline nlohmann::ordered_json model_to_json(const MLPModel& model) {
    nlohmann::ordered_json j;
    j["kind"] = "mlp";
    j["config"] = {{"input_width", model.config.input_width},
                   {"hidden_layers", model.config.hidden_layers},
                   {"hidden_width", model.config.hidden_width},
                   {"activation", activation_name(model.config.activation)}};
    j["scaler_ref"] = model.scaler_ref;
    j["class_order"] = {"infeasible", "feasible"};
    nlohmann::ordered_json layers = nlohmann::ordered_json::array();
    for (std::size_t l = 0; l < model.params.w.size(); ++l) {
        const auto& w = model.params.w[l];
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            nlohmann::ordered_json row = nlohmann::ordered_json::array();
            for (Eigen::Index c = 0; c < w.cols(); ++c) row.push_back(w(r, c));
            rows.push_back(std::move(row));
        }
        nlohmann::ordered_json layer;
        layer["W"] = std::move(rows);
        nlohmann::ordered_json bias = nlohmann::ordered_json::array();
        for (Eigen::Index r = 0; r < model.params.b[l].size(); ++r)
            bias.push_back(model.params.b[l](r));
        layer["b"] = std::move(bias);
        layers.push_back(std::move(layer));
    }
    j["layers"] = std::move(layers);
    return j;
}

inline MLPModel model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("kind").get<std::string>() != "mlp")
            throw io_error("model_from_json: kind is not mlp");
        MLPModel model;
        const auto& cfg = j.at("config");
        model.config.input_width = cfg.at("input_width").get<int>();
        model.config.hidden_layers = cfg.at("hidden_layers").get<int>();
        model.config.hidden_width = cfg.at("hidden_width").get<int>();
        model.config.activation =
            activation_from_name(cfg.at("activation").get<std::string>());
        model.config.validate();
        model.scaler_ref = j.at("scaler_ref").get<std::string>();

        const auto& layers = j.at("layers");
        if (static_cast<int>(layers.size()) != model.config.hidden_layers + 1)
            throw io_error("model_from_json: layer count does not match config");
        for (const auto& layer : layers) {
            const auto& rows = layer.at("W");
            if (rows.empty()) throw io_error("model_from_json: empty weight matrix");
            Eigen::MatrixXd w(static_cast<Eigen::Index>(rows.size()),
                              static_cast<Eigen::Index>(rows.at(0).size()));
            for (std::size_t r = 0; r < rows.size(); ++r) {
                if (rows.at(r).size() != static_cast<std::size_t>(w.cols()))
                    throw io_error("model_from_json: ragged weight matrix");
                for (std::size_t c = 0; c < rows.at(r).size(); ++c)
                    w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                        rows.at(r).at(c).get<double>();
            }
            const auto& bias = layer.at("b");
            if (bias.size() != static_cast<std::size_t>(w.rows()))
                throw io_error("model_from_json: bias length does not match weights");
            Eigen::VectorXd b(static_cast<Eigen::Index>(bias.size()));
            for (std::size_t r = 0; r < bias.size(); ++r)
                b(static_cast<Eigen::Index>(r)) = bias.at(r).get<double>();
            model.params.w.push_back(std::move(w));
            model.params.b.push_back(std::move(b));
        }
        if (model.params.w.back().rows() != 2)
            throw io_error("model_from_json: output layer must have 2 units");
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw io_error(std::string("model_from_json: ") + e.what());
    } catch (const input_error& e) {
        throw io_error(std::string("model_from_json: ") + e.what());
    }
}

inline void save_model(const MLPModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("save_model: cannot open " + path);
    out << model_to_json(model).dump(2) << "\n";
}

inline MLPModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("load_model: cannot open " + path);
    try {
        return model_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw io_error(std::string("load_model: ") + e.what());
    }
}

}  // namespace ltfeas::dnn
