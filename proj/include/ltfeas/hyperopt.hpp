// Bayesian optimization over mixed hyperparameter spaces.
//
// Configurations are JSON objects keyed by dimension name. Continuous
// dimensions map to [0, 1] by min-max (optionally on a log scale), integer
// dimensions are scaled the same way and rounded on decode, and categorical
// dimensions occupy a one-hot block, so the search itself runs on the unit
// cube. The surrogate is a zero-mean Gaussian process with a Matern-5/2
// kernel, per-coordinate length scales, and an observation-noise term whose
// hyperparameters are refit between proposals by multi-start Nelder-Mead on
// the marginal likelihood. Proposals maximize expected improvement over a
// random candidate sweep plus local refinement; batched proposals use the
// constant-liar imputation so pending points repel each other.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "ltfeas/errors.hpp"
#include "ltfeas/rng.hpp"

namespace ltfeas::hyperopt {

using Config = nlohmann::json;  // object: dimension name -> value

// ---------------------------------------------------------------------------
// search space

struct Dimension {
    enum class Kind { continuous, integer, categorical };

    std::string name;
    Kind kind = Kind::continuous;
    double lo = 0.0, hi = 1.0;  // continuous bounds
    bool log_scale = false;
    long long ilo = 0, ihi = 1;        // integer bounds
    std::vector<std::string> choices;  // categorical values

    std::size_t encoded_width() const {
        return kind == Kind::categorical ? choices.size() : 1;
    }

    void validate() const {
        if (name.empty()) throw input_error("Dimension: empty name");
        switch (kind) {
            case Kind::continuous:
                if (!(lo < hi)) throw input_error("Dimension " + name + ": lo < hi required");
                if (log_scale && !(lo > 0.0))
                    throw input_error("Dimension " + name + ": log scale needs lo > 0");
                break;
            case Kind::integer:
                if (!(ilo < ihi))
                    throw input_error("Dimension " + name + ": ilo < ihi required");
                break;
            case Kind::categorical:
                if (choices.empty())
                    throw input_error("Dimension " + name + ": no choices");
                break;
        }
    }
};

inline Dimension continuous_dim(std::string name, double lo, double hi,
                                bool log_scale = false) {
    Dimension d;
    d.name = std::move(name);
    d.kind = Dimension::Kind::continuous;
    d.lo = lo;
    d.hi = hi;
    d.log_scale = log_scale;
    d.validate();
    return d;
}

inline Dimension integer_dim(std::string name, long long lo, long long hi) {
    Dimension d;
    d.name = std::move(name);
    d.kind = Dimension::Kind::integer;
    d.ilo = lo;
    d.ihi = hi;
    d.validate();
    return d;
}

inline Dimension categorical_dim(std::string name, std::vector<std::string> choices) {
    Dimension d;
    d.name = std::move(name);
    d.kind = Dimension::Kind::categorical;
    d.choices = std::move(choices);
    d.validate();
    return d;
}

struct SearchSpace {
    std::vector<Dimension> dims;

    std::size_t encoded_width() const {
        std::size_t w = 0;
        for (const auto& d : dims) w += d.encoded_width();
        return w;
    }

    void validate() const {
        if (dims.empty()) throw input_error("SearchSpace: no dimensions");
        for (const auto& d : dims) d.validate();
        for (std::size_t i = 0; i < dims.size(); ++i)
            for (std::size_t j = i + 1; j < dims.size(); ++j)
                if (dims[i].name == dims[j].name)
                    throw input_error("SearchSpace: duplicate dimension " + dims[i].name);
    }
};

// Hyperparameter ranges of the classifier tuning problem: depth and width of
// the hidden stack, activation, Adam moments, batch size, learning rate
// (log-scaled), and the step-drop schedule.
inline SearchSpace dnn_search_space() {
    SearchSpace space;
    space.dims = {
        integer_dim("hidden_layers", 5, 10),
        integer_dim("hidden_width", 200, 500),
        categorical_dim("activation", {"relu", "leaky_relu", "elu"}),
        continuous_dim("beta1", 0.85, 0.95),
        continuous_dim("beta2", 0.9, 0.999),
        integer_dim("batch_size", 200, 800),
        continuous_dim("eta", 0.001, 0.01, true),
        integer_dim("drop_period", 2, 8),
        continuous_dim("drop_factor", 0.0, 0.8),
    };
    return space;
}

// ---------------------------------------------------------------------------
// encode / decode

inline std::vector<double> encode(const SearchSpace& space, const Config& config) {
    if (!config.is_object()) throw input_error("encode: config must be a JSON object");
    std::vector<double> u;
    u.reserve(space.encoded_width());
    for (const auto& d : space.dims) {
        if (!config.contains(d.name))
            throw input_error("encode: config missing dimension " + d.name);
        const auto& v = config.at(d.name);
        switch (d.kind) {
            case Dimension::Kind::continuous: {
                const double x = v.get<double>();
                const double t = d.log_scale
                                     ? (std::log(x) - std::log(d.lo)) /
                                           (std::log(d.hi) - std::log(d.lo))
                                     : (x - d.lo) / (d.hi - d.lo);
                u.push_back(std::clamp(t, 0.0, 1.0));
                break;
            }
            case Dimension::Kind::integer: {
                const double x = static_cast<double>(v.get<long long>());
                const double t = (x - static_cast<double>(d.ilo)) /
                                 static_cast<double>(d.ihi - d.ilo);
                u.push_back(std::clamp(t, 0.0, 1.0));
                break;
            }
            case Dimension::Kind::categorical: {
                const std::string c = v.get<std::string>();
                const auto it = std::find(d.choices.begin(), d.choices.end(), c);
                if (it == d.choices.end())
                    throw input_error("encode: unknown choice '" + c + "' for " + d.name);
                for (std::size_t i = 0; i < d.choices.size(); ++i)
                    u.push_back(it - d.choices.begin() == static_cast<std::ptrdiff_t>(i)
                                    ? 1.0
                                    : 0.0);
                break;
            }
        }
    }
    return u;
}

inline Config decode(const SearchSpace& space, const std::vector<double>& u) {
    if (u.size() != space.encoded_width())
        throw shape_error("decode: vector width does not match the space");
    Config config = Config::object();
    std::size_t at = 0;
    for (const auto& d : space.dims) {
        switch (d.kind) {
            case Dimension::Kind::continuous: {
                const double t = std::clamp(u[at++], 0.0, 1.0);
                config[d.name] = d.log_scale
                                     ? std::exp(std::log(d.lo) +
                                                t * (std::log(d.hi) - std::log(d.lo)))
                                     : d.lo + t * (d.hi - d.lo);
                break;
            }
            case Dimension::Kind::integer: {
                const double t = std::clamp(u[at++], 0.0, 1.0);
                const long long v = std::llround(
                    static_cast<double>(d.ilo) + t * static_cast<double>(d.ihi - d.ilo));
                config[d.name] = std::clamp(v, d.ilo, d.ihi);
                break;
            }
            case Dimension::Kind::categorical: {
                std::size_t best = 0;
                for (std::size_t i = 1; i < d.choices.size(); ++i)
                    if (u[at + i] > u[at + best]) best = i;
                config[d.name] = d.choices[best];
                at += d.choices.size();
                break;
            }
        }
    }
    return config;
}

// ---------------------------------------------------------------------------
// Gaussian-process surrogate (Matern-5/2, per-coordinate length scales)

struct GpModel {
    Eigen::MatrixXd x;              // n x d training inputs
    Eigen::VectorXd alpha;          // K^{-1} (y - y_mean)
    Eigen::MatrixXd chol_lower;     // L with L L^T = K
    Eigen::VectorXd length_scales;  // one per encoded coordinate
    double signal_var = 1.0;
    double noise_var = 1e-6;
    double y_mean = 0.0;
};

struct GpPosterior {
    double mean = 0.0;
    double var = 0.0;  // latent-function variance, observation noise excluded
};

namespace detail {

inline double matern52(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                       const Eigen::VectorXd& ell) {
    double r2 = 0.0;
    for (Eigen::Index d = 0; d < a.size(); ++d) {
        const double z = (a(d) - b(d)) / ell(d);
        r2 += z * z;
    }
    const double s = std::sqrt(5.0 * r2);
    return (1.0 + s + s * s / 3.0) * std::exp(-s);
}

// Derivative-free Nelder-Mead minimization with standard coefficients.
inline std::pair<std::vector<double>, double> nelder_mead(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& x0, double step, int max_iter) {
    const std::size_t n = x0.size();
    std::vector<std::vector<double>> pts(n + 1, x0);
    std::vector<double> vals(n + 1);
    for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += step;
    for (std::size_t i = 0; i <= n; ++i) vals[i] = f(pts[i]);

    std::vector<std::size_t> order(n + 1);
    for (int it = 0; it < max_iter; ++it) {
        for (std::size_t i = 0; i <= n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
        const std::size_t lo = order[0], hi = order[n], second_hi = order[n - 1];

        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == hi) continue;
            for (std::size_t d = 0; d < n; ++d) centroid[d] += pts[i][d];
        }
        for (auto& c : centroid) c /= static_cast<double>(n);

        auto blend = [&](double t) {
            std::vector<double> p(n);
            for (std::size_t d = 0; d < n; ++d)
                p[d] = centroid[d] + t * (pts[hi][d] - centroid[d]);
            return p;
        };

        const auto reflected = blend(-1.0);
        const double fr = f(reflected);
        if (fr < vals[lo]) {
            const auto expanded = blend(-2.0);
            const double fe = f(expanded);
            if (fe < fr) {
                pts[hi] = expanded;
                vals[hi] = fe;
            } else {
                pts[hi] = reflected;
                vals[hi] = fr;
            }
        } else if (fr < vals[second_hi]) {
            pts[hi] = reflected;
            vals[hi] = fr;
        } else {
            const auto contracted = blend(fr < vals[hi] ? -0.5 : 0.5);
            const double fc = f(contracted);
            if (fc < std::min(fr, vals[hi])) {
                pts[hi] = contracted;
                vals[hi] = fc;
            } else {
                for (std::size_t i = 0; i <= n; ++i) {
                    if (i == lo) continue;
                    for (std::size_t d = 0; d < n; ++d)
                        pts[i][d] = pts[lo][d] + 0.5 * (pts[i][d] - pts[lo][d]);
                    vals[i] = f(pts[i]);
                }
            }
        }
        if (std::abs(vals[hi] - vals[lo]) <
            1e-10 * (1.0 + std::abs(vals[lo])))
            break;
    }
    std::size_t lo = 0;
    for (std::size_t i = 1; i <= n; ++i)
        if (vals[i] < vals[lo]) lo = i;
    return {pts[lo], vals[lo]};
}

struct GpThetaBox {
    double l_lo, l_hi, sf_lo, sf_hi, sn_lo, sn_hi;  // all in log space
};

// negative log marginal likelihood of theta = [log ell.., log sf2, log sn2],
// with a quadratic penalty pulling coordinates back into the box
inline double neg_lml(const Eigen::MatrixXd& x, const Eigen::VectorXd& yc,
                      const std::vector<double>& theta, const GpThetaBox& box) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    double penalty = 0.0;
    auto boxed = [&penalty](double v, double lo, double hi) {
        const double c = std::clamp(v, lo, hi);
        penalty += 1e4 * (v - c) * (v - c);
        return c;
    };
    Eigen::VectorXd ell(d);
    for (Eigen::Index i = 0; i < d; ++i)
        ell(i) = std::exp(boxed(theta[static_cast<std::size_t>(i)], box.l_lo, box.l_hi));
    const double sf2 =
        std::exp(boxed(theta[static_cast<std::size_t>(d)], box.sf_lo, box.sf_hi));
    const double sn2 =
        std::exp(boxed(theta[static_cast<std::size_t>(d) + 1], box.sn_lo, box.sn_hi));

    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double v = sf2 * matern52(x.row(i), x.row(j), ell);
            k(i, j) = v;
            k(j, i) = v;
        }
        k(i, i) += sn2;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    if (llt.info() != Eigen::Success) return 1e100;
    const Eigen::VectorXd a = llt.solve(yc);
    double logdet = 0.0;
    // the packed LLT matrix holds L in its lower triangle
    for (Eigen::Index i = 0; i < n; ++i) logdet += std::log(llt.matrixLLT()(i, i));
    return 0.5 * yc.dot(a) + logdet +
           0.5 * static_cast<double>(n) * std::log(2.0 * M_PI) + penalty;
}

}  // namespace detail

inline GpModel fit_gp(const std::vector<std::vector<double>>& points,
                      const std::vector<double>& values, std::uint64_t seed = 0) {
    if (points.size() < 2)
        throw input_error("fit_gp: at least 2 observations required");
    if (values.size() != points.size())
        throw shape_error("fit_gp: point/value count mismatch");
    const std::size_t d = points.front().size();
    if (d == 0) throw input_error("fit_gp: zero-width points");

    Eigen::MatrixXd x(static_cast<Eigen::Index>(points.size()),
                      static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (points[i].size() != d) throw shape_error("fit_gp: ragged points");
        for (std::size_t j = 0; j < d; ++j) {
            if (!std::isfinite(points[i][j]) || !std::isfinite(values[i]))
                throw input_error("fit_gp: non-finite observation");
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                points[i][j];
        }
    }
    Eigen::VectorXd y(static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i)
        y(static_cast<Eigen::Index>(i)) = values[i];

    const double y_mean = y.mean();
    const Eigen::VectorXd yc = y.array() - y_mean;
    const double vy = std::max(yc.squaredNorm() / std::max<double>(1.0, y.size() - 1.0),
                               1e-12);

    const detail::GpThetaBox box{std::log(1e-2), std::log(1e2),
                                 std::log(1e-6 * vy), std::log(1e3 * vy),
                                 std::log(1e-9 * vy), std::log(10.0 * vy)};
    auto objective = [&](const std::vector<double>& theta) {
        return detail::neg_lml(x, yc, theta, box);
    };

    // multi-start: three heuristic starts plus one seeded random start
    std::vector<std::vector<double>> starts;
    for (const auto& [ell0, sn_frac] :
         std::vector<std::pair<double, double>>{{0.5, 1e-2}, {0.2, 1e-4}, {1.0, 1e-1}}) {
        std::vector<double> t(d + 2, std::log(ell0));
        t[d] = std::log(vy);
        t[d + 1] = std::log(sn_frac * vy);
        starts.push_back(std::move(t));
    }
    {
        Rng rng = make_rng(seed, 0x6B);
        std::vector<double> t(d + 2);
        for (std::size_t i = 0; i < d; ++i)
            t[i] = uniform(rng, std::log(0.1), std::log(2.0));
        t[d] = std::log(vy * std::exp(uniform(rng, -1.0, 1.0)));
        t[d + 1] = std::log(vy * std::exp(uniform(rng, -9.0, -2.0)));
        starts.push_back(std::move(t));
    }

    std::vector<double> best_theta;
    double best_val = std::numeric_limits<double>::infinity();
    for (const auto& start : starts) {
        const auto [theta, val] = detail::nelder_mead(objective, start, 0.4, 300);
        if (val < best_val) {
            best_val = val;
            best_theta = theta;
        }
    }
    if (!std::isfinite(best_val)) {
        best_theta.assign(d + 2, std::log(0.5));
        best_theta[d] = std::log(vy);
        best_theta[d + 1] = std::log(std::max(1e-4 * vy, 1e-10));
    }

    GpModel model;
    model.x = x;
    model.y_mean = y_mean;
    model.length_scales.resize(static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i)
        model.length_scales(static_cast<Eigen::Index>(i)) =
            std::exp(std::clamp(best_theta[i], box.l_lo, box.l_hi));
    model.signal_var = std::exp(std::clamp(best_theta[d], box.sf_lo, box.sf_hi));
    model.noise_var = std::exp(std::clamp(best_theta[d + 1], box.sn_lo, box.sn_hi));

    const Eigen::Index n = x.rows();
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double v = model.signal_var *
                             detail::matern52(x.row(i), x.row(j), model.length_scales);
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    // duplicated inputs can push K to the singular edge; escalate the noise
    // floor until the factorization holds
    for (int attempt = 0;; ++attempt) {
        Eigen::MatrixXd kn = k;
        kn.diagonal().array() += model.noise_var;
        Eigen::LLT<Eigen::MatrixXd> llt(kn);
        if (llt.info() == Eigen::Success) {
            model.chol_lower = llt.matrixL();
            model.alpha = llt.solve(yc);
            return model;
        }
        if (attempt >= 8)
            throw numerical_error("fit_gp: covariance not positive definite");
        model.noise_var = std::max(model.noise_var * 10.0, 1e-10);
    }
}

inline GpPosterior gp_posterior(const GpModel& model, const std::vector<double>& point) {
    if (static_cast<Eigen::Index>(point.size()) != model.x.cols())
        throw shape_error("gp_posterior: point width does not match model");
    Eigen::VectorXd xs(model.x.cols());
    for (std::size_t i = 0; i < point.size(); ++i)
        xs(static_cast<Eigen::Index>(i)) = point[i];

    Eigen::VectorXd kstar(model.x.rows());
    for (Eigen::Index i = 0; i < model.x.rows(); ++i)
        kstar(i) = model.signal_var *
                   detail::matern52(model.x.row(i), xs, model.length_scales);

    GpPosterior post;
    post.mean = model.y_mean + kstar.dot(model.alpha);
    const Eigen::VectorXd w =
        model.chol_lower.triangularView<Eigen::Lower>().solve(kstar);
    post.var = std::max(model.signal_var - w.squaredNorm(), 0.0);
    return post;
}

// ---------------------------------------------------------------------------
// expected improvement (maximization form)

inline double expected_improvement(double mean, double var, double best) {
    const double sigma = std::sqrt(std::max(var, 0.0));
    if (sigma < 1e-12) return std::max(mean - best, 0.0);
    const double z = (mean - best) / sigma;
    const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
    const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
    return std::max((mean - best) * cdf + sigma * phi, 0.0);
}

// ---------------------------------------------------------------------------
// optimization loop

struct Trial {
    Config config;
    double value = std::numeric_limits<double>::quiet_NaN();
    bool ok = false;
    double seconds = 0.0;
};

struct BoOptions {
    int budget = 30;  // total objective evaluations
    int init = 8;     // low-discrepancy warm-up evaluations
    int batch = 1;    // proposals per surrogate refit (constant liar if > 1)
    std::uint64_t seed = 0;
};

struct BoResult {
    Trial best;
    std::vector<Trial> history;
};

namespace detail {

inline double radical_inverse(std::uint64_t index, std::uint64_t base) {
    double f = 1.0, r = 0.0;
    while (index > 0) {
        f /= static_cast<double>(base);
        r += f * static_cast<double>(index % base);
        index /= base;
    }
    return r;
}

inline std::vector<std::uint64_t> first_primes(std::size_t count) {
    std::vector<std::uint64_t> primes;
    for (std::uint64_t v = 2; primes.size() < count; ++v) {
        bool prime = true;
        for (std::uint64_t p : primes) {
            if (p * p > v) break;
            if (v % p == 0) {
                prime = false;
                break;
            }
        }
        if (prime) primes.push_back(v);
    }
    return primes;
}

// Halton point with a seeded Cranley-Patterson rotation
inline std::vector<double> halton_point(std::uint64_t index,
                                        const std::vector<std::uint64_t>& primes,
                                        const std::vector<double>& shift) {
    std::vector<double> u(shift.size());
    for (std::size_t d = 0; d < shift.size(); ++d) {
        const double v = radical_inverse(index, primes[d]) + shift[d];
        u[d] = v - std::floor(v);
    }
    return u;
}

}  // namespace detail

// best objective value seen so far at each history position (NaN before the
// first successful trial); non-decreasing over the successful entries
inline std::vector<double> best_so_far_trace(const std::vector<Trial>& history) {
    std::vector<double> trace;
    trace.reserve(history.size());
    double best = std::numeric_limits<double>::quiet_NaN();
    for (const auto& t : history) {
        if (t.ok && (!std::isfinite(best) || t.value > best)) best = t.value;
        trace.push_back(best);
    }
    return trace;
}

inline BoResult bo_run(const std::function<double(const Config&)>& objective,
                       const SearchSpace& space, const BoOptions& opts = {}) {
    space.validate();
    if (opts.init < 1) throw input_error("bo_run: init must be >= 1");
    if (opts.budget < opts.init)
        throw input_error("bo_run: budget must be >= init");
    if (opts.batch < 1) throw input_error("bo_run: batch must be >= 1");

    const std::size_t width = space.encoded_width();
    const auto primes = detail::first_primes(width);
    std::vector<double> shift(width);
    {
        Rng rng = make_rng(opts.seed, 0xB0);
        for (auto& v : shift) v = uniform01(rng);
    }

    BoResult result;
    auto evaluate = [&](const Config& config) {
        Trial trial;
        trial.config = config;
        const auto start = std::chrono::steady_clock::now();
        try {
            const double v = objective(config);
            trial.ok = std::isfinite(v);
            if (trial.ok) trial.value = v;
        } catch (const std::exception&) {
            trial.ok = false;
        }
        trial.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                .count();
        result.history.push_back(std::move(trial));
    };

    for (int i = 0; i < opts.init; ++i)
        evaluate(decode(space, detail::halton_point(
                                   static_cast<std::uint64_t>(i) + 1, primes, shift)));

    while (static_cast<int>(result.history.size()) < opts.budget) {
        const auto round_id = static_cast<std::uint64_t>(result.history.size());
        Rng rng = make_rng(opts.seed, 0xC000 + round_id);

        double best_val = -std::numeric_limits<double>::infinity();
        double worst_val = std::numeric_limits<double>::infinity();
        int n_ok = 0;
        for (const auto& t : result.history) {
            if (!t.ok) continue;
            ++n_ok;
            best_val = std::max(best_val, t.value);
            worst_val = std::min(worst_val, t.value);
        }
        if (n_ok < 2) {
            // surrogate unavailable; fall back to random sampling
            std::vector<double> u(width);
            for (auto& v : u) v = uniform01(rng);
            evaluate(decode(space, u));
            continue;
        }

        // surrogate data: failed trials sit at the worst observed value so
        // the search is pushed away from them without aborting
        std::vector<std::vector<double>> gx;
        std::vector<double> gy;
        gx.reserve(result.history.size());
        for (const auto& t : result.history) {
            gx.push_back(encode(space, t.config));
            gy.push_back(t.ok ? t.value : worst_val);
        }

        auto propose = [&](const GpModel& gp) {
            std::vector<std::pair<double, std::vector<double>>> top;
            auto score = [&](const std::vector<double>& u) {
                const auto post = gp_posterior(gp, u);
                return expected_improvement(post.mean, post.var, best_val);
            };
            for (int c = 0; c < 2000; ++c) {
                std::vector<double> u(width);
                for (auto& v : u) v = uniform01(rng);
                top.emplace_back(score(u), std::move(u));
                std::push_heap(top.begin(), top.end(),
                               [](const auto& a, const auto& b) { return a.first > b.first; });
                if (top.size() > 10) {
                    std::pop_heap(top.begin(), top.end(),
                                  [](const auto& a, const auto& b) { return a.first > b.first; });
                    top.pop_back();
                }
            }
            // local refinement of the best candidates
            std::vector<double> best_u = top.front().second;
            double best_ei = top.front().first;
            for (auto& [ei, u] : top) {
                double cur_ei = ei;
                std::vector<double> cur = u;
                double sigma = 0.08;
                for (int it = 0; it < 60; ++it) {
                    std::vector<double> cand = cur;
                    for (auto& v : cand)
                        v = std::clamp(v + sigma * normal01(rng), 0.0, 1.0);
                    const double cand_ei = score(cand);
                    if (cand_ei > cur_ei) {
                        cur_ei = cand_ei;
                        cur = std::move(cand);
                    }
                    sigma *= 0.95;
                }
                if (cur_ei > best_ei) {
                    best_ei = cur_ei;
                    best_u = cur;
                }
            }
            return best_u;
        };

        const int room = opts.budget - static_cast<int>(result.history.size());
        const int n_props = std::min(opts.batch, room);
        std::vector<Config> pending;
        auto liar_x = gx;
        auto liar_y = gy;
        for (int p = 0; p < n_props; ++p) {
            const GpModel gp =
                fit_gp(liar_x, liar_y, mix_seed(opts.seed, round_id + 31 * p));
            const auto u = propose(gp);
            pending.push_back(decode(space, u));
            // constant liar: pretend the pending point scored the current best
            liar_x.push_back(encode(space, pending.back()));
            liar_y.push_back(best_val);
        }
        for (const auto& config : pending) evaluate(config);
    }

    const Trial* best = nullptr;
    for (const auto& t : result.history)
        if (t.ok && (best == nullptr || t.value > best->value)) best = &t;
    if (best == nullptr)
        throw experiment_error("bo_run: every trial failed");
    result.best = *best;
    return result;
}

}  // namespace ltfeas::hyperopt
