#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "ltfeas/augment.hpp"
#include "ltfeas/errors.hpp"
#include "ltfeas/rng.hpp"

using namespace ltfeas;
using namespace ltfeas::augment;

namespace {

// 10 minority points near the origin, 30 majority points shifted away,
// with a little seeded jitter
void skewed_clusters(Matrix& x, std::vector<int>& y, std::uint64_t seed,
                     std::size_t minority = 10, std::size_t majority = 30) {
    auto rng = make_rng(seed);
    x.clear();
    y.clear();
    for (std::size_t i = 0; i < minority; ++i) {
        x.push_back({uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0)});
        y.push_back(1);
    }
    for (std::size_t i = 0; i < majority; ++i) {
        x.push_back({uniform(rng, 2.0, 5.0), uniform(rng, 2.0, 5.0)});
        y.push_back(0);
    }
}

std::size_t count_label(const std::vector<int>& y, int label) {
    return static_cast<std::size_t>(std::count(y.begin(), y.end(), label));
}

// true when s lies on the segment between a and b within tol
bool on_segment(const std::vector<double>& s, const std::vector<double>& a,
                const std::vector<double>& b, double tol) {
    double lambda = 0.0;
    bool pinned = false;
    for (std::size_t j = 0; j < s.size(); ++j) {
        const double span = b[j] - a[j];
        if (std::abs(span) > tol) {
            lambda = (s[j] - a[j]) / span;
            pinned = true;
            break;
        }
    }
    if (!pinned) {
        // a == b: s must equal both
        for (std::size_t j = 0; j < s.size(); ++j)
            if (std::abs(s[j] - a[j]) > tol) return false;
        return true;
    }
    if (lambda < -tol || lambda > 1.0 + tol) return false;
    for (std::size_t j = 0; j < s.size(); ++j)
        if (std::abs(s[j] - (a[j] + lambda * (b[j] - a[j]))) > tol) return false;
    return true;
}

}  // namespace

TEST_CASE("adasyn: beta=1 balances a 10/30 split with exactly 20 synthetics") {
    Matrix x;
    std::vector<int> y;
    skewed_clusters(x, y, 1);

    AdasynParams params;
    params.k = 5;
    params.beta = 1.0;
    params.seed = 7;
    const auto out = adasyn(x, y, params);

    CHECK(out.n_synthetic == 20);
    CHECK(out.minority_label == 1);
    CHECK(out.x.size() == 60);
    CHECK(count_label(out.y, 1) == 30);
    CHECK(count_label(out.y, 0) == 30);
}

TEST_CASE("adasyn: originals pass through unmodified and in order") {
    Matrix x;
    std::vector<int> y;
    skewed_clusters(x, y, 2);
    const auto out = adasyn(x, y, {5, 1.0, 3});
    REQUIRE(out.x.size() >= x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(out.x[i] == x[i]);
        CHECK(out.y[i] == y[i]);
    }
    for (std::size_t i = x.size(); i < out.y.size(); ++i) CHECK(out.y[i] == 1);
}

TEST_CASE("adasyn: tiny beta that rounds to zero returns the input") {
    Matrix x;
    std::vector<int> y;
    skewed_clusters(x, y, 3);
    const auto out = adasyn(x, y, {5, 0.01, 1});  // G = round(20 * 0.01) = 0
    CHECK(out.n_synthetic == 0);
    CHECK(out.x == x);
    CHECK(out.y == y);
}

TEST_CASE("adasyn: every synthetic lies between two minority points") {
    Matrix x;
    std::vector<int> y;
    skewed_clusters(x, y, 4, 12, 40);
    const auto out = adasyn(x, y, {5, 1.0, 11});
    REQUIRE(out.n_synthetic > 0);

    std::vector<std::size_t> minority_idx;
    for (std::size_t i = 0; i < y.size(); ++i)
        if (y[i] == 1) minority_idx.push_back(i);

    for (std::size_t s = x.size(); s < out.x.size(); ++s) {
        bool found = false;
        for (std::size_t a = 0; a < minority_idx.size() && !found; ++a)
            for (std::size_t b = 0; b < minority_idx.size() && !found; ++b)
                found = on_segment(out.x[s], x[minority_idx[a]], x[minority_idx[b]],
                                   1e-9);
        CAPTURE(s);
        CHECK(found);
    }
}

TEST_CASE("adasyn: deterministic for a fixed seed, different across seeds") {
    Matrix x;
    std::vector<int> y;
    skewed_clusters(x, y, 5);
    const auto a = adasyn(x, y, {5, 1.0, 42});
    const auto b = adasyn(x, y, {5, 1.0, 42});
    CHECK(a.x == b.x);
    CHECK(a.y == b.y);
    const auto c = adasyn(x, y, {5, 1.0, 43});
    CHECK(a.x != c.x);
}

TEST_CASE("adasyn: isolated minority falls back to uniform apportionment") {
    // minority far from the majority: every k-neighborhood is pure minority,
    // so the difficulty weights vanish and synthetics spread uniformly
    Matrix x;
    std::vector<int> y;
    auto rng = make_rng(6);
    for (int i = 0; i < 8; ++i) {
        x.push_back({uniform(rng, 0.0, 0.5), uniform(rng, 0.0, 0.5)});
        y.push_back(1);
    }
    for (int i = 0; i < 24; ++i) {
        x.push_back({uniform(rng, 100.0, 101.0), uniform(rng, 100.0, 101.0)});
        y.push_back(0);
    }
    const auto out = adasyn(x, y, {3, 1.0, 9});
    CHECK(out.n_synthetic == 16);
    CHECK(count_label(out.y, 1) == 24);
    // synthetics interpolate minority points, so they stay inside the
    // minority cluster's bounding box
    for (std::size_t s = x.size(); s < out.x.size(); ++s)
        for (double v : out.x[s]) {
            CHECK(v >= 0.0);
            CHECK(v <= 0.5);
        }
}

TEST_CASE("adasyn: partial beta hits the rounded target count") {
    Matrix x;
    std::vector<int> y;
    skewed_clusters(x, y, 7, 10, 50);  // gap of 40
    const auto out = adasyn(x, y, {4, 0.5, 2});
    CHECK(out.n_synthetic == 20);  // round(40 * 0.5)
    CHECK(count_label(out.y, 1) == 30);
}

TEST_CASE("adasyn: input guards") {
    Matrix x;
    std::vector<int> y;
    skewed_clusters(x, y, 8);

    CHECK_THROWS_AS(adasyn({}, {}, {5, 1.0, 0}), input_error);
    CHECK_THROWS_AS(adasyn(x, y, {0, 1.0, 0}), input_error);
    CHECK_THROWS_AS(adasyn(x, y, {10, 1.0, 0}), input_error);  // k >= minority
    CHECK_THROWS_AS(adasyn(x, y, {5, 0.0, 0}), input_error);
    CHECK_THROWS_AS(adasyn(x, y, {5, 1.5, 0}), input_error);

    std::vector<int> ones(x.size(), 1);
    CHECK_THROWS_AS(adasyn(x, ones, {5, 1.0, 0}), input_error);

    Matrix xb = {{0.0}, {1.0}, {2.0}, {3.0}};
    std::vector<int> yb = {0, 0, 1, 1};
    CHECK_THROWS_AS(adasyn(xb, yb, {1, 1.0, 0}), input_error);  // already balanced

    auto ragged = x;
    ragged[2].push_back(0.0);
    CHECK_THROWS_AS(adasyn(ragged, y, {5, 1.0, 0}), shape_error);
}
