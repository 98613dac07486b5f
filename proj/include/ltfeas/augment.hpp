// ADASYN oversampling: synthesizes minority-class samples along segments
// between minority points, weighted toward points whose neighborhoods are
// dominated by the majority class, until the class ratio reaches `beta`.
//
// Determinism: every synthetic draw comes from a generator derived from
// (seed, minority point index), so results do not depend on evaluation
// order and per-point generation could run concurrently.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "ltfeas/errors.hpp"
#include "ltfeas/rng.hpp"

namespace ltfeas::augment {

using Matrix = std::vector<std::vector<double>>;

struct AdasynParams {
    int k = 5;          // neighborhood size; must stay below the minority count
    double beta = 1.0;  // target minority/majority balance after augmentation
    std::uint64_t seed = 0;
};

struct AugmentResult {
    Matrix x;            // originals in input order, then synthetics
    std::vector<int> y;  // matching labels
    std::size_t n_synthetic = 0;
    int minority_label = 0;
};

namespace detail {

// indices of the k nearest members of `pool` to x[self], self excluded;
// distance ties resolve to the lower pool index
inline std::vector<std::size_t> k_nearest(const Matrix& x, std::size_t self,
                                          const std::vector<std::size_t>& pool,
                                          int k) {
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(pool.size());
    for (std::size_t i : pool) {
        if (i == self) continue;
        double d2 = 0.0;
        for (std::size_t j = 0; j < x[self].size(); ++j) {
            const double d = x[i][j] - x[self][j];
            d2 += d * d;
        }
        dist.emplace_back(d2, i);
    }
    std::sort(dist.begin(), dist.end());
    std::vector<std::size_t> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int r = 0; r < k && static_cast<std::size_t>(r) < dist.size(); ++r)
        out.push_back(dist[static_cast<std::size_t>(r)].second);
    return out;
}

// Integer apportionment of `total` by `shares` (non-negative, summing to 1):
// floor the quotas, then hand the leftover units to the largest remainders,
// ties to the lower index.
inline std::vector<long long> largest_remainder(const std::vector<double>& shares,
                                                long long total) {
    const std::size_t n = shares.size();
    std::vector<long long> out(n, 0);
    std::vector<std::pair<double, std::size_t>> rem(n);
    long long assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double quota = shares[i] * static_cast<double>(total);
        out[i] = static_cast<long long>(std::floor(quota));
        assigned += out[i];
        rem[i] = {quota - std::floor(quota), i};
    }
    std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (long long u = 0; u < total - assigned; ++u)
        out[rem[static_cast<std::size_t>(u)].second] += 1;
    return out;
}

}  // namespace detail

inline AugmentResult adasyn(const Matrix& x, const std::vector<int>& y,
                            const AdasynParams& params) {
    if (x.empty()) throw input_error("adasyn: empty sample matrix");
    const std::size_t width = x.front().size();
    for (const auto& row : x)
        if (row.size() != width) throw shape_error("adasyn: ragged sample matrix");
    if (y.size() != x.size())
        throw shape_error("adasyn: label count does not match sample count");
    for (int label : y)
        if (label != 0 && label != 1)
            throw input_error("adasyn: labels must be 0 or 1");
    if (params.k < 1) throw input_error("adasyn: k must be >= 1");
    if (!(params.beta > 0.0 && params.beta <= 1.0))
        throw input_error("adasyn: beta must be in (0, 1]");

    std::size_t n1 = 0;
    for (int label : y) n1 += static_cast<std::size_t>(label);
    const std::size_t n0 = y.size() - n1;
    if (n0 == 0 || n1 == 0) throw input_error("adasyn: both classes must be present");
    if (n0 == n1)
        throw input_error("adasyn: classes already balanced; minority must be smaller");
    const int minority = n1 < n0 ? 1 : 0;
    const std::size_t m_s = std::min(n0, n1);
    const std::size_t m_l = std::max(n0, n1);
    if (static_cast<std::size_t>(params.k) >= m_s)
        throw input_error("adasyn: k must be below the minority count");

    std::vector<std::size_t> minority_idx, all_idx(x.size());
    std::iota(all_idx.begin(), all_idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < y.size(); ++i)
        if (y[i] == minority) minority_idx.push_back(i);

    const long long g_total = std::llround(
        static_cast<double>(m_l - m_s) * params.beta);

    AugmentResult out;
    out.x = x;
    out.y = y;
    out.minority_label = minority;
    if (g_total <= 0) return out;

    // difficulty weights: majority share of each minority point's
    // k-nearest neighborhood over the full sample
    std::vector<double> r(minority_idx.size(), 0.0);
    double r_sum = 0.0;
    for (std::size_t m = 0; m < minority_idx.size(); ++m) {
        const auto nbrs = detail::k_nearest(x, minority_idx[m], all_idx, params.k);
        std::size_t majority_hits = 0;
        for (std::size_t i : nbrs)
            majority_hits += static_cast<std::size_t>(y[i] != minority);
        r[m] = static_cast<double>(majority_hits) / static_cast<double>(params.k);
        r_sum += r[m];
    }

    std::vector<double> shares(minority_idx.size());
    if (r_sum > 0.0) {
        for (std::size_t m = 0; m < shares.size(); ++m) shares[m] = r[m] / r_sum;
    } else {
        // perfectly isolated minority: no neighborhood is contested, so
        // spread the synthetics uniformly instead of generating none
        std::fill(shares.begin(), shares.end(),
                  1.0 / static_cast<double>(shares.size()));
    }
    const auto per_point = detail::largest_remainder(shares, g_total);

    for (std::size_t m = 0; m < minority_idx.size(); ++m) {
        if (per_point[m] == 0) continue;
        const std::size_t self = minority_idx[m];
        const auto donors = detail::k_nearest(x, self, minority_idx, params.k);
        Rng rng = make_rng(params.seed, static_cast<std::uint64_t>(m));
        for (long long s = 0; s < per_point[m]; ++s) {
            const auto pick = static_cast<std::size_t>(uniform_int(
                rng, 0, static_cast<std::int64_t>(donors.size()) - 1));
            const std::size_t donor = donors[pick];
            const double lambda = uniform01(rng);
            std::vector<double> synth(width);
            for (std::size_t j = 0; j < width; ++j)
                synth[j] = x[self][j] + lambda * (x[donor][j] - x[self][j]);
            out.x.push_back(std::move(synth));
            out.y.push_back(minority);
            ++out.n_synthetic;
        }
    }
    return out;
}

}  // namespace ltfeas::augment
