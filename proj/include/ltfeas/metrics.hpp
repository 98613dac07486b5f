// Confusion-based classification metrics, ROC curves with trapezoidal AUC,
// and evaluation reports (JSON summary plus ROC point CSV).
//
// Conventions: labels are 0 (infeasible) / 1 (feasible); feasible is the
// positive class throughout. Precision, recall, and F_k are reported as
// absent (std::nullopt, serialized as JSON null) when their denominators
// vanish, rather than coerced to 0, so degenerate classifiers are visible.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ltfeas/errors.hpp"

namespace ltfeas::metrics {

struct ConfusionCounts {
    std::int64_t n_tp = 0;
    std::int64_t n_tn = 0;
    std::int64_t n_fp = 0;
    std::int64_t n_fn = 0;

    std::int64_t total() const { return n_tp + n_tn + n_fp + n_fn; }
};

inline void check_labels(const std::vector<int>& y, const char* who) {
    for (int v : y) {
        if (v != 0 && v != 1)
            throw input_error(std::string(who) + ": labels must be 0 or 1");
    }
}

inline ConfusionCounts confusion(const std::vector<int>& y_true,
                                 const std::vector<int>& y_pred_class) {
    if (y_true.size() != y_pred_class.size())
        throw shape_error("confusion: y_true and y_pred_class sizes differ");
    if (y_true.empty()) throw input_error("confusion: empty input");
    check_labels(y_true, "confusion");
    check_labels(y_pred_class, "confusion");
    ConfusionCounts c;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] == 1)
            (y_pred_class[i] == 1 ? c.n_tp : c.n_fn)++;
        else
            (y_pred_class[i] == 1 ? c.n_fp : c.n_tn)++;
    }
    return c;
}

// Accuracy, precision, recall, and the recall-weighted F_k score
//   F_k = (1 + k^2) * P * R / (k^2 * P + R),
// where k expresses how much more recall matters than precision (k = 1 is
// the harmonic mean; k = 10 leans almost entirely on recall).
struct ScoreSet {
    double k = 1.0;
    double accuracy = 0.0;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f_k;
};

inline std::optional<double> f_score(std::optional<double> precision,
                                     std::optional<double> recall, double k) {
    if (!precision || !recall) return std::nullopt;
    const double denom = k * k * *precision + *recall;
    if (denom <= 0.0) return std::nullopt;  // P = R = 0: F_k undefined
    return (1.0 + k * k) * *precision * *recall / denom;
}

inline ScoreSet scores(const ConfusionCounts& c, double k) {
    if (!(k > 0.0)) throw input_error("scores: k must be positive");
    if (c.n_tp < 0 || c.n_tn < 0 || c.n_fp < 0 || c.n_fn < 0)
        throw input_error("scores: negative count");
    const std::int64_t total = c.total();
    if (total <= 0) throw input_error("scores: empty confusion counts");
    ScoreSet s;
    s.k = k;
    s.accuracy = static_cast<double>(c.n_tp + c.n_tn) / static_cast<double>(total);
    if (c.n_tp + c.n_fp > 0)
        s.precision = static_cast<double>(c.n_tp) / static_cast<double>(c.n_tp + c.n_fp);
    if (c.n_tp + c.n_fn > 0)
        s.recall = static_cast<double>(c.n_tp) / static_cast<double>(c.n_tp + c.n_fn);
    s.f_k = f_score(s.precision, s.recall, k);
    return s;
}

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;  // classify positive when score >= threshold
};

// Sweeps the decision threshold over the descending unique scores, emitting
// one (FPR, TPR) point per threshold, bracketed by sentinel points at
// threshold +inf (nothing positive, (0,0)) and -inf (everything positive,
// (1,1)). FPR and TPR are both non-decreasing along the returned curve.
inline std::vector<RocPoint> roc_curve(const std::vector<double>& score,
                                       const std::vector<int>& y_true) {
    if (score.size() != y_true.size())
        throw shape_error("roc_curve: score and y_true sizes differ");
    if (score.empty()) throw input_error("roc_curve: empty input");
    check_labels(y_true, "roc_curve");
    for (double s : score) {
        if (!std::isfinite(s)) throw input_error("roc_curve: non-finite score");
    }
    std::int64_t n_pos = 0;
    for (int v : y_true) n_pos += v;
    const std::int64_t n_neg = static_cast<std::int64_t>(y_true.size()) - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw input_error("roc_curve: both classes must be present");

    std::vector<std::size_t> order(score.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<RocPoint> points;
    points.push_back({0.0, 0.0, inf});
    std::int64_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double t = score[order[i]];
        // absorb the whole tie group: score >= t flips them all at once
        while (i < order.size() && score[order[i]] == t) {
            (y_true[order[i]] == 1 ? tp : fp)++;
            ++i;
        }
        points.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                          static_cast<double>(tp) / static_cast<double>(n_pos), t});
    }
    points.push_back({1.0, 1.0, -inf});
    return points;
}

// Trapezoidal area under the ROC curve; with the sweep above this equals the
// probability that a random positive outranks a random negative (ties 1/2).
inline double auc(const std::vector<RocPoint>& points) {
    if (points.size() < 2) throw input_error("auc: need at least two ROC points");
    double area = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) {
        const double dx = points[i].fpr - points[i - 1].fpr;
        if (dx < 0.0) throw input_error("auc: FPR must be non-decreasing");
        area += dx * 0.5 * (points[i].tpr + points[i - 1].tpr);
    }
    return area;
}

inline std::vector<int> predict_labels(const std::vector<double>& feasible_prob,
                                       double threshold = 0.5) {
    std::vector<int> out(feasible_prob.size());
    for (std::size_t i = 0; i < feasible_prob.size(); ++i)
        out[i] = feasible_prob[i] >= threshold ? 1 : 0;
    return out;
}

struct EvalReport {
    ConfusionCounts counts;
    double threshold = 0.5;
    double accuracy = 0.0;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
    std::optional<double> f10;
    double auc_value = 0.0;
    std::vector<RocPoint> roc;
};

inline EvalReport evaluate(const std::vector<int>& y_true,
                           const std::vector<double>& feasible_prob,
                           double threshold = 0.5) {
    if (y_true.size() != feasible_prob.size())
        throw shape_error("evaluate: y_true and feasible_prob sizes differ");
    EvalReport r;
    r.threshold = threshold;
    r.counts = confusion(y_true, predict_labels(feasible_prob, threshold));
    const ScoreSet s1 = scores(r.counts, 1.0);
    r.accuracy = s1.accuracy;
    r.precision = s1.precision;
    r.recall = s1.recall;
    r.f1 = s1.f_k;
    r.f10 = scores(r.counts, 10.0).f_k;
    r.roc = roc_curve(feasible_prob, y_true);
    r.auc_value = auc(r.roc);
    return r;
}

inline nlohmann::json opt_to_json(const std::optional<double>& v) {
    if (v) return *v;
    return nullptr;
}

inline nlohmann::ordered_json report_to_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["counts"] = {{"n_tp", r.counts.n_tp},
                   {"n_tn", r.counts.n_tn},
                   {"n_fp", r.counts.n_fp},
                   {"n_fn", r.counts.n_fn}};
    j["threshold"] = r.threshold;
    j["accuracy"] = r.accuracy;
    j["precision"] = opt_to_json(r.precision);
    j["recall"] = opt_to_json(r.recall);
    j["f1"] = opt_to_json(r.f1);
    j["f10"] = opt_to_json(r.f10);
    j["auc"] = r.auc_value;
    return j;
}

inline void write_roc_csv(const std::vector<RocPoint>& points, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("write_roc_csv: cannot open " + path);
    out << "fpr,tpr,threshold\n";
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const RocPoint& p : points)
        out << p.fpr << ',' << p.tpr << ',' << p.threshold << '\n';
    if (!out) throw io_error("write_roc_csv: write failure on " + path);
}

}  // namespace ltfeas::metrics
