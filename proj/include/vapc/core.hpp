#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vapc {

// Coarse camera-relative orientation of a vehicle. Exactly five values; the
// clustering stages key every per-viewpoint structure off this enum, in this
// order.
enum class Viewpoint : std::uint8_t {
    front = 0,
    front_side,
    side,
    rear_side,
    rear,
};

inline constexpr std::array<Viewpoint, 5> all_viewpoints{
    Viewpoint::front, Viewpoint::front_side, Viewpoint::side,
    Viewpoint::rear_side, Viewpoint::rear};

std::string_view to_string(Viewpoint v);
std::optional<Viewpoint> parse_viewpoint(std::string_view s);

enum class Split : std::uint8_t { train = 0, query, gallery };

std::string_view to_string(Split s);
std::optional<Split> parse_split(std::string_view s);

enum class AmiNormalizer : std::uint8_t { arithmetic = 0, max };

// Dense row-major matrix of n feature vectors of dimension d. Values are
// held in double precision; the on-disk format is float32 (see io).
struct EmbeddingSet {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<double> data;  // n * d, row-major

    std::span<const double> row(std::size_t i) const {
        return {data.data() + i * d, d};
    }
    std::span<double> row(std::size_t i) {
        return {data.data() + i * d, d};
    }
};

EmbeddingSet make_embedding_set(std::size_t n, std::size_t d,
                                std::vector<double> data);

// Returns a copy with every row scaled to unit L2 norm. Idempotent to
// ~1e-15 per component. Throws std::domain_error on a zero-norm row.
EmbeddingSet normalize_rows(const EmbeddingSet& set);

EmbeddingSet subset_rows(const EmbeddingSet& set,
                         std::span<const std::size_t> indices);

struct SampleMeta {
    std::size_t index = 0;
    std::string camera;
    std::optional<Viewpoint> viewpoint;  // required for train samples
    std::optional<std::string> gt_id;
    Split split = Split::train;
};

enum class IssueKind : std::uint8_t {
    empty_dataset,
    count_mismatch,
    duplicate_index,
    noncontiguous_index,
    missing_viewpoint,
    nonfinite_value,
    zero_norm_row,
};

std::string_view to_string(IssueKind k);

struct ValidationIssue {
    IssueKind kind;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;

    bool ok() const { return issues.empty(); }
    bool has(IssueKind kind) const;
    std::string summary() const;
};

// Reports every violated dataset invariant: row/meta count mismatch,
// duplicate or non-contiguous indices, missing viewpoint on a train sample,
// non-finite or zero-norm rows. Empty report iff the dataset is admissible.
ValidationReport validate_dataset(const EmbeddingSet& embeddings,
                                  const std::vector<SampleMeta>& meta);

// Groups train-sample indices by viewpoint. Lists are ascending and
// disjoint; their union is exactly the train indices. Viewpoints with no
// samples are absent from the map.
std::map<Viewpoint, std::vector<std::size_t>> partition_by_viewpoint(
    const std::vector<SampleMeta>& meta);

// Partition of samples into pseudo-label clusters plus a noise set (-1).
// viewpoint_of may be empty when the state was produced by a bare dbscan
// run; the period operations always fill it.
struct ClusterState {
    std::vector<int> labels;
    std::vector<Viewpoint> viewpoint_of;
};

int cluster_count(const ClusterState& state);
std::size_t noise_count(const ClusterState& state);
std::map<int, std::vector<std::size_t>> cluster_members(
    const ClusterState& state);

// Relabels clusters to dense 0..C-1 by order of first appearance in
// ascending sample order. Noise markers are preserved. Idempotent.
ClusterState compact(ClusterState state);

struct PipelineConfig {
    int k = 20;                 // neighbor count for the expanded sets
    int k_tilde = 2;            // reciprocal-check count in noise selection
    long ti = 1200;             // rank of the cross-viewpoint pair fixing tau
    std::optional<double> ti_quantile;  // overrides ti as a pair-count fraction
    double beta = 0.1;          // softmax temperature
    double eps = 0.5;           // density radius on the Jaccard scale
    int min_pts = 4;            // density count, self included
    // Off by default: the instance-discrimination warm-up repels
    // same-identity samples apart, which erases the local structure the
    // clustering stages need when the input embeddings already come from a
    // trained extractor. Enable for raw features.
    int recognition_epochs = 0;
    int iterations = 10;
    double refine_rate = 0.5;
    int refine_passes = 1;
    std::uint64_t seed = 0;
    AmiNormalizer ami_normalizer = AmiNormalizer::arithmetic;
    bool noise_select_enabled = true;  // ablation arm: false sends noise to singletons

    // Throws std::invalid_argument on an out-of-range field.
    void validate() const;
};

struct EventLog {
    std::vector<std::string> entries;
    void note(std::string entry) { entries.push_back(std::move(entry)); }
};

}  // namespace vapc
