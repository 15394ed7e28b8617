#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "vapc/core.hpp"
#include "vapc/metric.hpp"
#include "vapc/synth.hpp"

using namespace vapc;

namespace {

double median(std::vector<double> v) {
    REQUIRE(!v.empty());
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
}

// Medians of same-viewpoint cross-identity and cross-viewpoint
// same-identity squared distances, over all pairs.
std::pair<double, double> dilemma_medians(const SynthDataset& ds) {
    std::vector<double> same_vp_cross_id;
    std::vector<double> cross_vp_same_id;
    for (std::size_t i = 0; i < ds.embeddings.n; ++i) {
        for (std::size_t j = i + 1; j < ds.embeddings.n; ++j) {
            const bool same_id = ds.meta[i].gt_id == ds.meta[j].gt_id;
            const bool same_vp = ds.meta[i].viewpoint == ds.meta[j].viewpoint;
            if (same_id == same_vp) continue;
            const double d =
                sq_euclidean(ds.embeddings.row(i), ds.embeddings.row(j));
            if (same_vp) {
                same_vp_cross_id.push_back(d);
            } else {
                cross_vp_same_id.push_back(d);
            }
        }
    }
    return {median(std::move(same_vp_cross_id)),
            median(std::move(cross_vp_same_id))};
}

}  // namespace

TEST_CASE("a degenerate config collapses to near-identical samples") {
    SynthConfig cfg;
    cfg.identities = 1;
    cfg.viewpoints = {Viewpoint::front};
    cfg.identity_spread = 1e-7;
    cfg.viewpoint_offset_scale = 1.0;
    cfg.within_cluster_noise = 1e-9;
    cfg.samples_per_identity_viewpoint = 10;
    const SynthDataset ds = generate(cfg);
    REQUIRE(ds.embeddings.n == 10);
    for (std::size_t i = 1; i < ds.embeddings.n; ++i) {
        for (std::size_t t = 0; t < ds.embeddings.d; ++t) {
            CHECK(std::abs(ds.embeddings.row(i)[t] - ds.embeddings.row(0)[t]) <=
                  1e-6);
        }
    }
}

TEST_CASE("generated datasets pass validation and carry full metadata") {
    SynthConfig cfg;
    cfg.seed = 7;
    const SynthDataset ds = generate(cfg);
    CHECK(ds.embeddings.n == 2500);
    CHECK(ds.embeddings.d == 64);
    CHECK(validate_dataset(ds.embeddings, ds.meta).ok());
    for (const SampleMeta& m : ds.meta) {
        CHECK(m.split == Split::train);
        CHECK(m.gt_id.has_value());
        CHECK(m.viewpoint.has_value());
    }
    for (std::size_t i = 0; i < ds.embeddings.n; ++i) {
        double sq = 0.0;
        for (double x : ds.embeddings.row(i)) sq += x * x;
        CHECK(std::abs(std::sqrt(sq) - 1.0) <= 1e-9);
    }
}

TEST_CASE("the default config exhibits the similarity dilemma") {
    SynthConfig cfg;
    cfg.seed = 7;
    const auto [same_vp_cross_id, cross_vp_same_id] =
        dilemma_medians(generate(cfg));
    CHECK(same_vp_cross_id < cross_vp_same_id);
}

TEST_CASE("the dilemma holds across ten seeds") {
    // Smaller datasets keep the all-pairs scan fast; geometry is unchanged.
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        SynthConfig cfg;
        cfg.identities = 12;
        cfg.samples_per_identity_viewpoint = 6;
        cfg.seed = seed;
        const auto [same_vp_cross_id, cross_vp_same_id] =
            dilemma_medians(generate(cfg));
        CHECK(same_vp_cross_id < cross_vp_same_id);
    }
}

TEST_CASE("generation is deterministic per seed and differs across seeds") {
    SynthConfig cfg;
    cfg.identities = 5;
    cfg.samples_per_identity_viewpoint = 6;
    cfg.seed = 3;
    const SynthDataset a = generate(cfg);
    const SynthDataset b = generate(cfg);
    CHECK(a.embeddings.data == b.embeddings.data);

    cfg.seed = 4;
    const SynthDataset c = generate(cfg);
    CHECK(a.embeddings.data != c.embeddings.data);
}

TEST_CASE("config validation enforces the scale ordering") {
    SynthConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.identity_spread = 1.5;  // above the viewpoint scale
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

    SynthConfig cfg2;
    cfg2.within_cluster_noise = cfg2.identity_spread;
    CHECK_THROWS_AS(cfg2.validate(), std::invalid_argument);

    SynthConfig cfg3;
    cfg3.viewpoints = {Viewpoint::front, Viewpoint::front};
    CHECK_THROWS_AS(cfg3.validate(), std::invalid_argument);

    SynthConfig cfg4;
    cfg4.identities = 0;
    CHECK_THROWS_AS(cfg4.validate(), std::invalid_argument);
}

TEST_CASE("viewpoint subsets restrict the generated labels") {
    SynthConfig cfg;
    cfg.identities = 4;
    cfg.viewpoints = {Viewpoint::rear, Viewpoint::front};
    cfg.samples_per_identity_viewpoint = 6;
    const SynthDataset ds = generate(cfg);
    CHECK(ds.embeddings.n == 4 * 2 * 6);
    for (const SampleMeta& m : ds.meta) {
        CHECK((m.viewpoint == Viewpoint::front || m.viewpoint == Viewpoint::rear));
    }
}

TEST_CASE("error injection flips an exact count of train labels") {
    SynthConfig cfg;
    cfg.identities = 10;
    cfg.samples_per_identity_viewpoint = 10;  // n = 500
    const SynthDataset ds = generate(cfg);

    SUBCASE("rate zero changes nothing") {
        const auto meta = inject_viewpoint_errors(ds.meta, 0.0, 9);
        for (std::size_t i = 0; i < meta.size(); ++i) {
            CHECK(meta[i].viewpoint == ds.meta[i].viewpoint);
        }
    }
    SUBCASE("rate one changes every train label") {
        const auto meta = inject_viewpoint_errors(ds.meta, 1.0, 9);
        for (std::size_t i = 0; i < meta.size(); ++i) {
            CHECK(meta[i].viewpoint != ds.meta[i].viewpoint);
        }
    }
    SUBCASE("fractional rates flip floor(rate * n) labels exactly") {
        for (double rate : {0.5, 0.3, 0.1}) {
            const auto meta = inject_viewpoint_errors(ds.meta, rate, 11);
            std::size_t flipped = 0;
            for (std::size_t i = 0; i < meta.size(); ++i) {
                if (meta[i].viewpoint != ds.meta[i].viewpoint) ++flipped;
            }
            CHECK(flipped ==
                  static_cast<std::size_t>(rate * 500.0 + 1e-9));
        }
    }
    SUBCASE("injection is deterministic per seed") {
        const auto a = inject_viewpoint_errors(ds.meta, 0.25, 13);
        const auto b = inject_viewpoint_errors(ds.meta, 0.25, 13);
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].viewpoint == b[i].viewpoint);
        }
    }
}

TEST_CASE("error injection only touches train samples") {
    SynthConfig cfg;
    cfg.identities = 4;
    cfg.samples_per_identity_viewpoint = 6;
    SynthDataset ds = generate(cfg);
    for (std::size_t i = 0; i < 20; ++i) ds.meta[i].split = Split::gallery;
    const auto meta = inject_viewpoint_errors(ds.meta, 1.0, 17);
    for (std::size_t i = 0; i < 20; ++i) {
        CHECK(meta[i].viewpoint == ds.meta[i].viewpoint);
    }
    for (std::size_t i = 20; i < meta.size(); ++i) {
        CHECK(meta[i].viewpoint != ds.meta[i].viewpoint);
    }
}
