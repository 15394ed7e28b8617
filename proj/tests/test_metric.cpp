#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "reference.hpp"
#include "vapc/metric.hpp"

using namespace vapc;

namespace {

EmbeddingSet points_1d(std::initializer_list<double> xs) {
    EmbeddingSet set;
    set.n = xs.size();
    set.d = 1;
    set.data.assign(xs.begin(), xs.end());
    return set;
}

EmbeddingSet random_points(std::size_t n, std::size_t d, std::mt19937_64& rng,
                           bool normalized = false) {
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    EmbeddingSet set;
    set.n = n;
    set.d = d;
    set.data.resize(n * d);
    for (double& x : set.data) x = unif(rng);
    return normalized ? normalize_rows(set) : set;
}

}  // namespace

TEST_CASE("squared euclidean distance basics") {
    EmbeddingSet a;
    a.n = 2;
    a.d = 2;
    a.data = {0.0, 0.0, 0.6, 0.8};
    const DistanceMatrix d = pairwise_sq_euclidean(a);
    CHECK(d.at(0, 0) == 0.0);
    CHECK(d.at(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(d.at(1, 0) == d.at(0, 1));

    EmbeddingSet b = a;
    const DistanceMatrix cross = pairwise_sq_euclidean(a, b);
    CHECK(cross.at(0, 0) == 0.0);  // identical vectors
    CHECK(cross.at(1, 1) == 0.0);
}

TEST_CASE("squared euclidean rejects dimension mismatch") {
    EmbeddingSet a;
    a.n = 1;
    a.d = 2;
    a.data = {1.0, 0.0};
    EmbeddingSet b;
    b.n = 1;
    b.d = 3;
    b.data = {1.0, 0.0, 0.0};
    CHECK_THROWS_AS(pairwise_sq_euclidean(a, b), std::invalid_argument);
}

TEST_CASE("squared euclidean matches the inner-product-route oracle") {
    std::mt19937_64 rng(42);
    const EmbeddingSet set = random_points(10, 4, rng);
    const DistanceMatrix d = pairwise_sq_euclidean(set);
    for (std::size_t i = 0; i < set.n; ++i) {
        for (std::size_t j = 0; j < set.n; ++j) {
            const double expected =
                reference::sq_euclidean(set.row(i), set.row(j));
            CHECK(std::abs(d.at(i, j) - expected) <= 1e-9);
        }
    }
}

TEST_CASE("self-distance matrices are symmetric with zero diagonal") {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 10; ++trial) {
        const EmbeddingSet set = random_points(1 + rng() % 30, 3, rng);
        const DistanceMatrix d = pairwise_sq_euclidean(set);
        for (std::size_t i = 0; i < set.n; ++i) {
            CHECK(d.at(i, i) == 0.0);
            for (std::size_t j = 0; j < set.n; ++j) {
                CHECK(std::abs(d.at(i, j) - d.at(j, i)) <= 1e-9);
                CHECK(d.at(i, j) >= 0.0);
            }
        }
    }
}

TEST_CASE("unit-norm rows keep squared distances below 4") {
    std::mt19937_64 rng(44);
    for (int trial = 0; trial < 10; ++trial) {
        const EmbeddingSet set = random_points(20, 8, rng, true);
        const DistanceMatrix d = pairwise_sq_euclidean(set);
        for (double v : d.values) CHECK(v <= 4.0 + 1e-9);
    }
}

TEST_CASE("knn: single sample keeps only itself") {
    const EmbeddingSet set = points_1d({0.5});
    const auto lists = knn(pairwise_sq_euclidean(set), 1).lists;
    REQUIRE(lists.size() == 1);
    CHECK(lists[0] == std::vector<std::uint32_t>{0});
}

TEST_CASE("knn on the 1-D line {0,1,2,10} with k=2") {
    const EmbeddingSet set = points_1d({0, 1, 2, 10});
    const auto lists = knn(pairwise_sq_euclidean(set), 2).lists;
    // the tie at point 1 (0 and 2 equidistant) resolves to the lower index
    CHECK(lists[0] == std::vector<std::uint32_t>{0, 1});
    CHECK(lists[1] == std::vector<std::uint32_t>{1, 0});
    CHECK(lists[2] == std::vector<std::uint32_t>{2, 1});
    CHECK(lists[3] == std::vector<std::uint32_t>{3, 2});
}

TEST_CASE("knn ties on an equidistant triple pick the lowest index") {
    // the three basis vectors are pairwise at squared distance exactly 2
    EmbeddingSet set;
    set.n = 3;
    set.d = 3;
    set.data = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    const auto lists = knn(pairwise_sq_euclidean(set), 2).lists;
    CHECK(lists[0] == std::vector<std::uint32_t>{0, 1});
    CHECK(lists[1] == std::vector<std::uint32_t>{1, 0});
    CHECK(lists[2] == std::vector<std::uint32_t>{2, 0});
}

TEST_CASE("knn rejects k out of range") {
    const EmbeddingSet set = points_1d({0, 1});
    const DistanceMatrix d = pairwise_sq_euclidean(set);
    CHECK_THROWS_AS(knn(d, 3), std::invalid_argument);
    CHECK_THROWS_AS(knn(d, 0), std::invalid_argument);
}

TEST_CASE("knn lists start at self with non-decreasing distances") {
    std::mt19937_64 rng(45);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + rng() % 30;
        const EmbeddingSet set = random_points(n, 2, rng);
        const DistanceMatrix d = pairwise_sq_euclidean(set);
        const int k = 1 + static_cast<int>(rng() % n);
        const auto nbrs = knn(d, k);
        for (std::size_t i = 0; i < n; ++i) {
            REQUIRE(nbrs.lists[i].size() == static_cast<std::size_t>(k));
            CHECK(nbrs.lists[i][0] == i);
            for (std::size_t t = 1; t + 1 < nbrs.lists[i].size(); ++t) {
                CHECK(d.at(i, nbrs.lists[i][t]) <=
                      d.at(i, nbrs.lists[i][t + 1]));
            }
        }
    }
}

TEST_CASE("expanded sets on the 1-D line {0,1,2,10} with k=2") {
    const EmbeddingSet set = points_1d({0, 1, 2, 10});
    const DistanceMatrix d = pairwise_sq_euclidean(set);
    const auto sets = k_reciprocal_expand(knn(d, 2), 2).sets;
    CHECK(sets[0] == std::vector<std::uint32_t>{0, 1});
    CHECK(sets[3] == std::vector<std::uint32_t>{2, 3});
}

TEST_CASE("expanded sets of two identical points coincide") {
    const EmbeddingSet set = points_1d({0.3, 0.3});
    const auto sets =
        k_reciprocal_expand(knn(pairwise_sq_euclidean(set), 2), 2).sets;
    CHECK(sets[0] == std::vector<std::uint32_t>{0, 1});
    CHECK(sets[1] == std::vector<std::uint32_t>{0, 1});
}

TEST_CASE("expanded sets always contain self and the base neighbors") {
    std::mt19937_64 rng(46);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 3 + rng() % 28;
        const EmbeddingSet set = random_points(n, 3, rng);
        const DistanceMatrix d = pairwise_sq_euclidean(set);
        const int k = 2 + static_cast<int>(rng() % (n - 2));
        const auto nbrs = knn(d, k);
        const auto sets = k_reciprocal_expand(nbrs, k);
        for (std::size_t i = 0; i < n; ++i) {
            const std::set<std::uint32_t> s(sets.sets[i].begin(),
                                            sets.sets[i].end());
            CHECK(s.count(static_cast<std::uint32_t>(i)) == 1);
            for (std::uint32_t j : nbrs.lists[i]) CHECK(s.count(j) == 1);
        }
    }
}

TEST_CASE("expanded sets match the exhaustive oracle") {
    std::mt19937_64 rng(47);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 4 + rng() % 27;
        const EmbeddingSet set = random_points(n, 3, rng);
        const DistanceMatrix d = pairwise_sq_euclidean(set);
        const int k = 2 + static_cast<int>(rng() % std::min<std::size_t>(n - 1, 9));
        const auto sets = k_reciprocal_expand(knn(d, k), k);
        const auto expected = reference::k_reciprocal_expand(d, k);
        for (std::size_t i = 0; i < n; ++i) {
            const std::set<std::uint32_t> got(sets.sets[i].begin(),
                                              sets.sets[i].end());
            CHECK(got == expected[i]);
        }
    }
}

TEST_CASE("growing an even k never shrinks the expanded sets") {
    // The analogous claim at odd k -> even k+1 is false: the half
    // neighborhood grows there and the 2/3 threshold can newly disqualify a
    // neighbor whose half-set was previously unioned in.
    std::mt19937_64 rng(48);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 8 + rng() % 23;
        const EmbeddingSet set = random_points(n, 3, rng);
        const DistanceMatrix d = pairwise_sq_euclidean(set);
        for (int k = 2; k + 1 <= static_cast<int>(n) && k <= 10; k += 2) {
            const auto small = k_reciprocal_expand(knn(d, k), k);
            const auto big = k_reciprocal_expand(knn(d, k + 1), k + 1);
            for (std::size_t i = 0; i < n; ++i) {
                const std::set<std::uint32_t> superset(big.sets[i].begin(),
                                                       big.sets[i].end());
                for (std::uint32_t v : small.sets[i]) {
                    CHECK(superset.count(v) == 1);
                }
            }
        }
    }
}

TEST_CASE("reweight assigns exp(-d) inside the set and zero outside") {
    const EmbeddingSet set = points_1d({0, 1, 2, 10});
    const DistanceMatrix d = pairwise_sq_euclidean(set);
    const auto sets = k_reciprocal_expand(knn(d, 2), 2);
    const SparseWeights w = reweight(d, sets);
    // self weight is exp(0) = 1
    for (std::size_t i = 0; i < w.n; ++i) {
        bool found_self = false;
        for (const auto& [j, value] : w.rows[i]) {
            if (j == i) {
                CHECK(value == 1.0);
                found_self = true;
            }
        }
        CHECK(found_self);
    }
    // d = 1.0 inside the set
    bool found = false;
    for (const auto& [j, value] : w.rows[0]) {
        if (j == 1) {
            CHECK(value == doctest::Approx(0.367879).epsilon(1e-5));
            found = true;
        }
    }
    CHECK(found);
    // index 3 is outside S_0: no entry means weight zero
    for (const auto& [j, value] : w.rows[0]) CHECK(j != 3);
}

TEST_CASE("jaccard distance of hand-built rows") {
    SparseWeights w;
    w.n = 2;
    w.rows = {{{0, 1.0}, {1, 0.5}}, {{0, 0.5}, {1, 1.0}}};
    const DistanceMatrix d = jaccard_distance(w);
    CHECK(d.at(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(d.at(0, 0) == 0.0);

    SUBCASE("identical rows have distance zero") {
        w.rows[1] = w.rows[0];
        CHECK(jaccard_distance(w).at(0, 1) == doctest::Approx(0.0));
    }
    SUBCASE("disjoint supports have distance one") {
        w.rows = {{{0, 1.0}}, {{1, 1.0}}};
        CHECK(jaccard_distance(w).at(0, 1) == 1.0);
    }
    SUBCASE("a pair of all-zero rows has distance one") {
        w.rows = {{}, {}};
        CHECK(jaccard_distance(w).at(0, 1) == 1.0);
    }
}

TEST_CASE("jaccard distance matches the dense oracle and stays in range") {
    std::mt19937_64 rng(49);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 3 + rng() % 28;
        const EmbeddingSet set = random_points(n, 3, rng);
        const DistanceMatrix d = pairwise_sq_euclidean(set);
        const int k = 2 + static_cast<int>(rng() % std::min<std::size_t>(n - 1, 9));
        const SparseWeights w = reweight(d, k_reciprocal_expand(knn(d, k), k));
        const DistanceMatrix jac = jaccard_distance(w);
        const DistanceMatrix expected = reference::jaccard_distance(w);
        CHECK(jac.metric == MetricTag::jaccard);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(jac.at(i, i) == 0.0);
            for (std::size_t j = 0; j < n; ++j) {
                CHECK(jac.at(i, j) >= 0.0);
                CHECK(jac.at(i, j) <= 1.0);
                CHECK(std::abs(jac.at(i, j) - jac.at(j, i)) == 0.0);
                CHECK(std::abs(jac.at(i, j) - expected.at(i, j)) <= 1e-9);
            }
        }
    }
}
