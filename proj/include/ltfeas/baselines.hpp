// Comparison classifiers: a CART decision tree, a bagged-tree ensemble with
// embedded risk-reduction feature importance, and a k-nearest-neighbor model.
//
// Conventions shared by all three:
//   - samples are rows of a rectangular double matrix, labels are int 0/1;
//   - predictions are per-sample class-probability rows [p0, p1];
//   - "risk" of a tree node is its training-mass fraction times its Gini
//     impurity, so the root of a balanced binary problem has risk 0.5.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ltfeas/errors.hpp"
#include "ltfeas/rng.hpp"

namespace ltfeas::baselines {

using Matrix = std::vector<std::vector<double>>;

// ---------------------------------------------------------------------------
// shared input validation

inline void check_dataset(const Matrix& x, const std::vector<int>& y) {
    if (x.empty()) throw input_error("check_dataset: empty sample matrix");
    const std::size_t width = x.front().size();
    if (width == 0) throw input_error("check_dataset: zero-width samples");
    for (const auto& row : x)
        if (row.size() != width)
            throw shape_error("check_dataset: ragged sample matrix");
    if (y.size() != x.size())
        throw shape_error("check_dataset: label count does not match sample count");
    for (int label : y)
        if (label != 0 && label != 1)
            throw input_error("check_dataset: labels must be 0 or 1");
}

// ---------------------------------------------------------------------------
// CART decision tree

struct CartParams {
    int max_depth = 20;
    int min_leaf = 5;  // minimum samples on each side of an accepted split
};

// One node of a trained tree. Leaves use {probs}; branches add the split and
// child links. `mass` (training-mass fraction) and `risk` (mass * Gini) are
// kept on every node because importance needs the risk of leaf children too.
struct TreeNode {
    bool leaf = true;
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double mass = 0.0;
    double risk = 0.0;
    std::array<double, 2> probs = {0.0, 0.0};
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    bool empty() const { return nodes.empty(); }
};

namespace detail {

struct NodeStats {
    std::size_t n = 0;
    std::size_t n1 = 0;
    double mass = 0.0;  // n / n_total
    double gini = 0.0;
    double risk = 0.0;  // mass * gini
    std::array<double, 2> probs = {0.0, 0.0};
};

inline NodeStats node_stats(const std::vector<int>& y,
                            const std::vector<std::size_t>& idx,
                            std::size_t n_total) {
    NodeStats s;
    s.n = idx.size();
    for (std::size_t i : idx) s.n1 += static_cast<std::size_t>(y[i]);
    const double p1 = static_cast<double>(s.n1) / static_cast<double>(s.n);
    const double p0 = 1.0 - p1;
    s.probs = {p0, p1};
    s.gini = 1.0 - p0 * p0 - p1 * p1;
    s.mass = static_cast<double>(s.n) / static_cast<double>(n_total);
    s.risk = s.mass * s.gini;
    return s;
}

struct SplitChoice {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double child_risk = std::numeric_limits<double>::infinity();
};

// Exhaustive scan over midpoint thresholds of every feature. The best split
// minimizes the summed child risk; ties resolve to the lowest feature index,
// then the lowest threshold (guaranteed by scan order and strict comparison).
// Splits that do not reduce impurity are still eligible — parity problems
// need two zero-gain levels before any impurity drops.
inline SplitChoice best_split(const Matrix& x, const std::vector<int>& y,
                              const std::vector<std::size_t>& idx,
                              std::size_t n_total, int min_leaf) {
    SplitChoice best;
    const std::size_t n = idx.size();
    const std::size_t width = x.front().size();
    std::vector<std::pair<double, int>> col(n);

    for (std::size_t j = 0; j < width; ++j) {
        for (std::size_t r = 0; r < n; ++r)
            col[r] = {x[idx[r]][j], y[idx[r]]};
        std::sort(col.begin(), col.end());

        std::size_t left_n1 = 0;
        std::size_t total_n1 = 0;
        for (const auto& [v, label] : col) {
            (void)v;
            total_n1 += static_cast<std::size_t>(label);
        }

        for (std::size_t r = 0; r + 1 < n; ++r) {
            left_n1 += static_cast<std::size_t>(col[r].second);
            if (col[r].first == col[r + 1].first) continue;  // not a boundary
            const std::size_t nl = r + 1;
            const std::size_t nr = n - nl;
            if (nl < static_cast<std::size_t>(min_leaf) ||
                nr < static_cast<std::size_t>(min_leaf))
                continue;
            double t = 0.5 * (col[r].first + col[r + 1].first);
            if (!(t < col[r + 1].first)) t = col[r].first;  // midpoint rounded up

            const double pl1 = static_cast<double>(left_n1) / static_cast<double>(nl);
            const double pr1 = static_cast<double>(total_n1 - left_n1) /
                               static_cast<double>(nr);
            const double gini_l = 2.0 * pl1 * (1.0 - pl1);
            const double gini_r = 2.0 * pr1 * (1.0 - pr1);
            const double child_risk =
                (static_cast<double>(nl) * gini_l + static_cast<double>(nr) * gini_r) /
                static_cast<double>(n_total);
            if (child_risk < best.child_risk - 1e-12) {
                best.found = true;
                best.feature = static_cast<int>(j);
                best.threshold = t;
                best.child_risk = child_risk;
            }
        }
    }
    return best;
}

inline int grow_tree(Tree& tree, const Matrix& x, const std::vector<int>& y,
                     std::vector<std::size_t> idx, std::size_t n_total, int depth,
                     const CartParams& params) {
    const NodeStats stats = node_stats(y, idx, n_total);
    const int self = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    {
        TreeNode& node = tree.nodes[static_cast<std::size_t>(self)];
        node.mass = stats.mass;
        node.risk = stats.risk;
        node.probs = stats.probs;
    }

    const bool can_split = stats.gini > 0.0 && depth < params.max_depth &&
                           idx.size() >= 2 * static_cast<std::size_t>(params.min_leaf);
    if (!can_split) return self;

    const SplitChoice split = best_split(x, y, idx, n_total, params.min_leaf);
    if (!split.found) return self;

    std::vector<std::size_t> left_idx, right_idx;
    left_idx.reserve(idx.size());
    right_idx.reserve(idx.size());
    for (std::size_t i : idx)
        (x[i][static_cast<std::size_t>(split.feature)] <= split.threshold
             ? left_idx
             : right_idx)
            .push_back(i);
    idx.clear();
    idx.shrink_to_fit();

    const int left = grow_tree(tree, x, y, std::move(left_idx), n_total,
                               depth + 1, params);
    const int right = grow_tree(tree, x, y, std::move(right_idx), n_total,
                                depth + 1, params);
    TreeNode& node = tree.nodes[static_cast<std::size_t>(self)];
    node.leaf = false;
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left;
    node.right = right;
    return self;
}

}  // namespace detail

inline Tree train_cart(const Matrix& x, const std::vector<int>& y,
                       const CartParams& params = {}) {
    check_dataset(x, y);
    if (params.max_depth < 0) throw input_error("train_cart: negative max_depth");
    if (params.min_leaf < 1) throw input_error("train_cart: min_leaf must be >= 1");

    std::vector<std::size_t> idx(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) idx[i] = i;
    Tree tree;
    detail::grow_tree(tree, x, y, std::move(idx), x.size(), 0, params);
    return tree;
}

inline std::array<double, 2> predict_tree(const Tree& tree,
                                          const std::vector<double>& row) {
    if (tree.empty()) throw input_error("predict_tree: empty tree");
    int at = 0;
    while (!tree.nodes[static_cast<std::size_t>(at)].leaf) {
        const TreeNode& node = tree.nodes[static_cast<std::size_t>(at)];
        if (static_cast<std::size_t>(node.feature) >= row.size())
            throw shape_error("predict_tree: sample narrower than split feature");
        at = row[static_cast<std::size_t>(node.feature)] <= node.threshold
                 ? node.left
                 : node.right;
    }
    return tree.nodes[static_cast<std::size_t>(at)].probs;
}

inline Matrix predict_tree(const Tree& tree, const Matrix& x) {
    Matrix out;
    out.reserve(x.size());
    for (const auto& row : x) {
        const auto p = predict_tree(tree, row);
        out.push_back({p[0], p[1]});
    }
    return out;
}

// ---------------------------------------------------------------------------
// bagged-tree ensemble

struct BaggedParams {
    int n_trees = 50;
    CartParams tree;
    // Test hook: train every tree on the original sample instead of a
    // bootstrap resample, making a 1-tree ensemble identical to train_cart.
    bool identity_resample = false;
};

struct EnsembleModel {
    std::vector<Tree> trees;
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> tree_seeds;  // mixed per-tree bootstrap seeds

    int n_trees() const { return static_cast<int>(trees.size()); }
};

inline EnsembleModel train_bagged(const Matrix& x, const std::vector<int>& y,
                                  const BaggedParams& params = {},
                                  std::uint64_t seed = 0) {
    check_dataset(x, y);
    if (params.n_trees < 1) throw input_error("train_bagged: n_trees must be >= 1");

    const std::size_t n = x.size();
    EnsembleModel model;
    model.seed = seed;
    model.trees.reserve(static_cast<std::size_t>(params.n_trees));
    model.tree_seeds.reserve(static_cast<std::size_t>(params.n_trees));

    Matrix bx;
    std::vector<int> by;
    for (int t = 0; t < params.n_trees; ++t) {
        model.tree_seeds.push_back(mix_seed(seed, static_cast<std::uint64_t>(t)));
        if (params.identity_resample) {
            model.trees.push_back(train_cart(x, y, params.tree));
            continue;
        }
        Rng rng = make_rng(seed, static_cast<std::uint64_t>(t));
        bx.clear();
        by.clear();
        bx.reserve(n);
        by.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto pick = static_cast<std::size_t>(
                uniform_int(rng, 0, static_cast<std::int64_t>(n) - 1));
            bx.push_back(x[pick]);
            by.push_back(y[pick]);
        }
        model.trees.push_back(train_cart(bx, by, params.tree));
    }
    return model;
}

inline std::array<double, 2> predict_ensemble(const EnsembleModel& model,
                                              const std::vector<double>& row) {
    if (model.trees.empty()) throw input_error("predict_ensemble: no trees");
    std::array<double, 2> acc = {0.0, 0.0};
    for (const auto& tree : model.trees) {
        const auto p = predict_tree(tree, row);
        acc[0] += p[0];
        acc[1] += p[1];
    }
    const double inv = 1.0 / static_cast<double>(model.trees.size());
    return {acc[0] * inv, acc[1] * inv};
}

inline Matrix predict_ensemble(const EnsembleModel& model, const Matrix& x) {
    Matrix out;
    out.reserve(x.size());
    for (const auto& row : x) {
        const auto p = predict_ensemble(model, row);
        out.push_back({p[0], p[1]});
    }
    return out;
}

// ---------------------------------------------------------------------------
// embedded feature importance

struct ImportanceResult {
    std::vector<double> importance;  // one non-negative slot per feature
    std::vector<int> ranking;        // feature indices, most important first
};

// Risk-reduction importance. Per tree, every branch contributes its risk drop
// (parent risk minus summed child risk) to the split feature's slot; the
// tree's vector is then divided by its branch count, and trees are averaged
// with uniform weights. A tree that is a single leaf contributes zeros.
inline ImportanceResult ensemble_importance(const EnsembleModel& model,
                                            std::size_t n_features) {
    if (n_features == 0)
        throw input_error("ensemble_importance: n_features must be >= 1");
    if (model.trees.empty())
        throw input_error("ensemble_importance: no trees");

    std::vector<double> total(n_features, 0.0);
    std::vector<double> per_tree(n_features, 0.0);
    for (const auto& tree : model.trees) {
        std::fill(per_tree.begin(), per_tree.end(), 0.0);
        int branches = 0;
        for (const auto& node : tree.nodes) {
            if (node.leaf) continue;
            if (static_cast<std::size_t>(node.feature) >= n_features)
                throw shape_error("ensemble_importance: split feature out of range");
            const double drop =
                node.risk - tree.nodes[static_cast<std::size_t>(node.left)].risk -
                tree.nodes[static_cast<std::size_t>(node.right)].risk;
            per_tree[static_cast<std::size_t>(node.feature)] += drop;
            ++branches;
        }
        if (branches == 0) continue;  // pure-leaf tree: all-zero contribution
        for (std::size_t j = 0; j < n_features; ++j)
            total[j] += per_tree[j] / static_cast<double>(branches);
    }

    ImportanceResult out;
    out.importance.resize(n_features);
    const double inv = 1.0 / static_cast<double>(model.trees.size());
    for (std::size_t j = 0; j < n_features; ++j)
        // risk drops are non-negative in exact arithmetic; clamp off the
        // round-off of near-zero-gain splits
        out.importance[j] = std::max(total[j] * inv, 0.0);

    out.ranking.resize(n_features);
    for (std::size_t j = 0; j < n_features; ++j)
        out.ranking[j] = static_cast<int>(j);
    std::stable_sort(out.ranking.begin(), out.ranking.end(), [&](int a, int b) {
        const double ia = out.importance[static_cast<std::size_t>(a)];
        const double ib = out.importance[static_cast<std::size_t>(b)];
        if (ia != ib) return ia > ib;
        return a < b;
    });
    return out;
}

// ---------------------------------------------------------------------------
// k-nearest neighbors

struct KnnModel {
    Matrix x;            // stored training samples (standardized upstream)
    std::vector<int> y;  // matching 0/1 labels
    int k = 5;
};

inline KnnModel train_knn(const Matrix& x, const std::vector<int>& y, int k) {
    check_dataset(x, y);
    if (k < 1 || static_cast<std::size_t>(k) > x.size())
        throw input_error("train_knn: k must be in [1, n_samples]");
    return KnnModel{x, y, k};
}

inline std::array<double, 2> predict_knn(const KnnModel& model,
                                         const std::vector<double>& row) {
    if (model.x.empty()) throw input_error("predict_knn: empty model");
    if (row.size() != model.x.front().size())
        throw shape_error("predict_knn: sample width does not match model");

    // (squared distance, training index); lexicographic order breaks distance
    // ties in favor of the lower sample index.
    std::vector<std::pair<double, std::size_t>> dist(model.x.size());
    for (std::size_t i = 0; i < model.x.size(); ++i) {
        double d2 = 0.0;
        const auto& xi = model.x[i];
        for (std::size_t j = 0; j < row.size(); ++j) {
            const double d = xi[j] - row[j];
            d2 += d * d;
        }
        dist[i] = {d2, i};
    }
    const auto kth = dist.begin() + (model.k - 1);
    std::nth_element(dist.begin(), kth, dist.end());
    std::sort(dist.begin(), kth + 1);

    std::size_t n1 = 0;
    for (int r = 0; r < model.k; ++r)
        n1 += static_cast<std::size_t>(model.y[dist[static_cast<std::size_t>(r)].second]);
    const double p1 = static_cast<double>(n1) / static_cast<double>(model.k);
    return {1.0 - p1, p1};
}

inline Matrix predict_knn(const KnnModel& model, const Matrix& x) {
    Matrix out;
    out.reserve(x.size());
    for (const auto& row : x) {
        const auto p = predict_knn(model, row);
        out.push_back({p[0], p[1]});
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON persistence

inline nlohmann::ordered_json tree_to_json(const Tree& tree) {
    nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
    for (const auto& n : tree.nodes) {
        nlohmann::ordered_json rec;
        rec["leaf"] = n.leaf;
        rec["mass"] = n.mass;
        rec["risk"] = n.risk;
        rec["probs"] = {n.probs[0], n.probs[1]};
        if (!n.leaf) {
            rec["feature"] = n.feature;
            rec["threshold"] = n.threshold;
            rec["left"] = n.left;
            rec["right"] = n.right;
        }
        nodes.push_back(std::move(rec));
    }
    return nlohmann::ordered_json{{"nodes", std::move(nodes)}};
}

inline Tree tree_from_json(const nlohmann::json& j) {
    try {
        Tree tree;
        for (const auto& rec : j.at("nodes")) {
            TreeNode n;
            n.leaf = rec.at("leaf").get<bool>();
            n.mass = rec.at("mass").get<double>();
            n.risk = rec.at("risk").get<double>();
            n.probs[0] = rec.at("probs").at(0).get<double>();
            n.probs[1] = rec.at("probs").at(1).get<double>();
            if (!n.leaf) {
                n.feature = rec.at("feature").get<int>();
                n.threshold = rec.at("threshold").get<double>();
                n.left = rec.at("left").get<int>();
                n.right = rec.at("right").get<int>();
            }
            tree.nodes.push_back(n);
        }
        if (tree.empty()) throw io_error("tree_from_json: no nodes");
        for (const auto& n : tree.nodes)
            if (!n.leaf &&
                (n.left < 0 || n.right < 0 ||
                 n.left >= static_cast<int>(tree.nodes.size()) ||
                 n.right >= static_cast<int>(tree.nodes.size())))
                throw io_error("tree_from_json: child index out of range");
        return tree;
    } catch (const nlohmann::json::exception& e) {
        throw io_error(std::string("tree_from_json: ") + e.what());
    }
}

inline nlohmann::ordered_json ensemble_to_json(const EnsembleModel& model) {
    nlohmann::ordered_json j;
    j["kind"] = "bagged_cart";
    j["n_trees"] = model.n_trees();
    j["seed"] = model.seed;
    j["tree_seeds"] = model.tree_seeds;
    nlohmann::ordered_json trees = nlohmann::ordered_json::array();
    for (const auto& tree : model.trees) trees.push_back(tree_to_json(tree));
    j["trees"] = std::move(trees);
    return j;
}

inline EnsembleModel ensemble_from_json(const nlohmann::json& j) {
    try {
        if (j.at("kind").get<std::string>() != "bagged_cart")
            throw io_error("ensemble_from_json: kind is not bagged_cart");
        EnsembleModel model;
        model.seed = j.at("seed").get<std::uint64_t>();
        model.tree_seeds = j.at("tree_seeds").get<std::vector<std::uint64_t>>();
        for (const auto& tj : j.at("trees")) model.trees.push_back(tree_from_json(tj));
        if (model.trees.empty()) throw io_error("ensemble_from_json: no trees");
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw io_error(std::string("ensemble_from_json: ") + e.what());
    }
}

inline nlohmann::ordered_json knn_to_json(const KnnModel& model) {
    nlohmann::ordered_json j;
    j["kind"] = "knn";
    j["k"] = model.k;
    j["x"] = model.x;  // neighbor store embedded so the file is self-contained
    j["y"] = model.y;
    return j;
}

inline KnnModel knn_from_json(const nlohmann::json& j) {
    try {
        if (j.at("kind").get<std::string>() != "knn")
            throw io_error("knn_from_json: kind is not knn");
        KnnModel model;
        model.k = j.at("k").get<int>();
        model.x = j.at("x").get<Matrix>();
        model.y = j.at("y").get<std::vector<int>>();
        check_dataset(model.x, model.y);
        if (model.k < 1 || static_cast<std::size_t>(model.k) > model.x.size())
            throw io_error("knn_from_json: k out of range");
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw io_error(std::string("knn_from_json: ") + e.what());
    } catch (const input_error& e) {  // also covers shape_error
        throw io_error(std::string("knn_from_json: ") + e.what());
    }
}

inline void save_model_json(const nlohmann::ordered_json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("save_model_json: cannot open " + path);
    out << j.dump(2) << "\n";
}

inline nlohmann::json load_model_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("load_model_json: cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw io_error(std::string("load_model_json: ") + e.what());
    }
}

}  // namespace ltfeas::baselines
