#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include "vapc/core.hpp"
#include "vapc/metric.hpp"

namespace vapc {

struct DbscanParams {
    double eps = 0.5;
    int min_pts = 4;  // neighborhood size including the point itself
};

// Density clustering over a precomputed symmetric distance matrix. Core
// points have at least min_pts samples (self included) within eps; border
// points attach to the first core cluster discovered in ascending-index
// scan order; unreachable points get label -1. viewpoint_of is left empty.
ClusterState dbscan(const DistanceMatrix& dist, const DbscanParams& params);

struct FirstPeriodResult {
    ClusterState state;  // labels globally disjoint across viewpoints
    // Per-viewpoint matrices, indexed in the local order of the partition
    // list for that viewpoint: the Jaccard re-metric DBSCAN ran on, and the
    // squared-Euclidean matrix it was derived from (the similarity noise
    // selection uses; the Jaccard scale systematically demotes exactly the
    // samples DBSCAN rejected, so it cannot rank rescue candidates).
    std::map<Viewpoint, DistanceMatrix> jaccard;
    std::map<Viewpoint, DistanceMatrix> euclidean;
};

// Per-viewpoint clustering: squared-Euclidean -> k-reciprocal expansion ->
// Jaccard re-metric -> dbscan, independently per viewpoint (k clamped to
// the viewpoint size; single-sample viewpoints become singleton clusters).
// The partition must cover every row of `embeddings` exactly once.
FirstPeriodResult first_period(
    const EmbeddingSet& embeddings,
    const std::map<Viewpoint, std::vector<std::size_t>>& partition,
    const PipelineConfig& cfg);

// Resolves every noise sample per viewpoint: pairs each noise sample with
// its nearest same-viewpoint sample under the given per-viewpoint distance
// matrices, processes pairs by ascending pair distance, and either joins
// the partner's cluster, seeds a new cluster grown over mutually
// k̃-reciprocal noise samples, or becomes a singleton. Output has no -1
// labels and is compacted.
ClusterState noise_select(
    const ClusterState& state,
    const std::map<Viewpoint, std::vector<std::size_t>>& partition,
    const std::map<Viewpoint, DistanceMatrix>& distances, int k_tilde);

// Ablation arm: every noise sample becomes its own singleton cluster.
ClusterState noise_to_singletons(const ClusterState& state);

struct TauResult {
    double tau = 0.0;
    std::size_t rank = 0;        // 1-indexed rank actually used
    std::size_t pair_count = 0;  // number of cross-viewpoint pairs
    bool clamped = false;        // ti exceeded the pair count
};

// tau = the ti-th smallest squared-Euclidean distance over all pairs of
// samples from different viewpoints (1-indexed). Requires at least two
// viewpoints; ti beyond the pair count clamps to the largest pair.
TauResult compute_tau(
    const EmbeddingSet& embeddings,
    const std::map<Viewpoint, std::vector<std::size_t>>& partition, long ti);

struct SecondPeriodResult {
    ClusterState state;
    std::size_t merge_count = 0;  // unions that joined two distinct clusters
};

// Merges clusters across viewpoints: every cross-viewpoint sample pair with
// squared distance strictly below tau unions the containing clusters
// (transitively). Input must have no noise labels; output is compacted.
SecondPeriodResult second_period(const ClusterState& state,
                                 const EmbeddingSet& embeddings, double tau);

}  // namespace vapc
