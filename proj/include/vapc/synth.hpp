#pragma once

#include <cstdint>
#include <vector>

#include "vapc/core.hpp"

namespace vapc {

// Synthetic embedding generator. The scale ordering
// viewpoint_offset_scale > identity_spread > within_cluster_noise builds
// the regime where cross-viewpoint same-identity gaps exceed same-viewpoint
// cross-identity gaps.
struct SynthConfig {
    int identities = 50;
    std::vector<Viewpoint> viewpoints{all_viewpoints.begin(),
                                      all_viewpoints.end()};
    int dim = 64;
    double identity_spread = 0.95;        // sigma_id
    double viewpoint_offset_scale = 1.0;  // sigma_vp
    double within_cluster_noise = 0.2;    // sigma_w
    int samples_per_identity_viewpoint = 10;
    std::uint64_t seed = 7;

    // Throws std::invalid_argument on bad counts or a broken sigma ordering.
    void validate() const;
};

struct SynthDataset {
    EmbeddingSet embeddings;
    std::vector<SampleMeta> meta;
};

// Each sample is normalize(identity_center + viewpoint_anchor + noise) with
// anchors fixed per viewpoint and centers fixed per identity. Deterministic
// given the seed. All samples are train-split with ground-truth ids.
SynthDataset generate(const SynthConfig& cfg);

// Reassigns a uniformly chosen exact-count fraction of train samples to a
// uniformly random wrong viewpoint. floor(rate * n_train) labels change;
// deterministic given the seed.
std::vector<SampleMeta> inject_viewpoint_errors(std::vector<SampleMeta> meta,
                                                double error_rate,
                                                std::uint64_t seed);

}  // namespace vapc
