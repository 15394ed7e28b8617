#include "vapc/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace vapc {

std::string_view to_string(Viewpoint v) {
    switch (v) {
        case Viewpoint::front: return "front";
        case Viewpoint::front_side: return "front_side";
        case Viewpoint::side: return "side";
        case Viewpoint::rear_side: return "rear_side";
        case Viewpoint::rear: return "rear";
    }
    return "?";
}

std::optional<Viewpoint> parse_viewpoint(std::string_view s) {
    for (Viewpoint v : all_viewpoints) {
        if (s == to_string(v)) return v;
    }
    return std::nullopt;
}

std::string_view to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::query: return "query";
        case Split::gallery: return "gallery";
    }
    return "?";
}

std::optional<Split> parse_split(std::string_view s) {
    for (Split v : {Split::train, Split::query, Split::gallery}) {
        if (s == to_string(v)) return v;
    }
    return std::nullopt;
}

std::string_view to_string(IssueKind k) {
    switch (k) {
        case IssueKind::empty_dataset: return "empty_dataset";
        case IssueKind::count_mismatch: return "count_mismatch";
        case IssueKind::duplicate_index: return "duplicate_index";
        case IssueKind::noncontiguous_index: return "noncontiguous_index";
        case IssueKind::missing_viewpoint: return "missing_viewpoint";
        case IssueKind::nonfinite_value: return "nonfinite_value";
        case IssueKind::zero_norm_row: return "zero_norm_row";
    }
    return "?";
}

EmbeddingSet make_embedding_set(std::size_t n, std::size_t d,
                                std::vector<double> data) {
    if (data.size() != n * d) {
        throw std::invalid_argument("embedding data size does not match n*d");
    }
    return EmbeddingSet{n, d, std::move(data)};
}

EmbeddingSet normalize_rows(const EmbeddingSet& set) {
    EmbeddingSet out = set;
    for (std::size_t i = 0; i < out.n; ++i) {
        auto row = out.row(i);
        double sq = 0.0;
        for (double x : row) sq += x * x;
        const double norm = std::sqrt(sq);
        if (norm == 0.0) {
            throw std::domain_error("cannot normalize zero-norm row " +
                                    std::to_string(i));
        }
        for (double& x : row) x /= norm;
    }
    return out;
}

EmbeddingSet subset_rows(const EmbeddingSet& set,
                         std::span<const std::size_t> indices) {
    EmbeddingSet out;
    out.n = indices.size();
    out.d = set.d;
    out.data.reserve(out.n * out.d);
    for (std::size_t idx : indices) {
        if (idx >= set.n) {
            throw std::out_of_range("subset index out of range");
        }
        auto row = set.row(idx);
        out.data.insert(out.data.end(), row.begin(), row.end());
    }
    return out;
}

bool ValidationReport::has(IssueKind kind) const {
    return std::any_of(issues.begin(), issues.end(),
                       [kind](const ValidationIssue& i) { return i.kind == kind; });
}

std::string ValidationReport::summary() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < issues.size(); ++i) {
        if (i > 0) os << "; ";
        os << to_string(issues[i].kind) << ": " << issues[i].detail;
    }
    return os.str();
}

ValidationReport validate_dataset(const EmbeddingSet& embeddings,
                                  const std::vector<SampleMeta>& meta) {
    ValidationReport report;
    auto add = [&report](IssueKind kind, std::string detail) {
        report.issues.push_back({kind, std::move(detail)});
    };

    if (embeddings.n == 0 || embeddings.d == 0) {
        add(IssueKind::empty_dataset,
            "need n >= 1 and d >= 1, got n=" + std::to_string(embeddings.n) +
                " d=" + std::to_string(embeddings.d));
    }
    if (meta.size() != embeddings.n) {
        add(IssueKind::count_mismatch,
            std::to_string(embeddings.n) + " embedding rows vs " +
                std::to_string(meta.size()) + " metadata entries");
    }

    std::set<std::size_t> seen;
    for (const SampleMeta& m : meta) {
        if (!seen.insert(m.index).second) {
            add(IssueKind::duplicate_index,
                "index " + std::to_string(m.index) + " appears more than once");
        }
        if (m.split == Split::train && !m.viewpoint.has_value()) {
            add(IssueKind::missing_viewpoint,
                "train sample " + std::to_string(m.index) + " has no viewpoint");
        }
    }
    // Unique indices must cover exactly 0..count-1 (duplicates were already
    // reported above).
    if (!meta.empty() && seen.size() == meta.size() &&
        (*seen.begin() != 0 || *seen.rbegin() != meta.size() - 1)) {
        add(IssueKind::noncontiguous_index,
            "indices do not cover 0.." + std::to_string(meta.size() - 1));
    }

    for (std::size_t i = 0; i < embeddings.n; ++i) {
        auto row = embeddings.row(i);
        bool finite = true;
        double sq = 0.0;
        for (double x : row) {
            if (!std::isfinite(x)) {
                finite = false;
                break;
            }
            sq += x * x;
        }
        if (!finite) {
            add(IssueKind::nonfinite_value,
                "row " + std::to_string(i) + " contains a non-finite value");
        } else if (sq == 0.0) {
            add(IssueKind::zero_norm_row,
                "row " + std::to_string(i) + " has zero norm");
        }
    }
    return report;
}

std::map<Viewpoint, std::vector<std::size_t>> partition_by_viewpoint(
    const std::vector<SampleMeta>& meta) {
    std::map<Viewpoint, std::vector<std::size_t>> partition;
    for (const SampleMeta& m : meta) {
        if (m.split != Split::train) continue;
        if (!m.viewpoint.has_value()) {
            throw std::invalid_argument("train sample " +
                                        std::to_string(m.index) +
                                        " has no viewpoint");
        }
        partition[*m.viewpoint].push_back(m.index);
    }
    for (auto& [vp, indices] : partition) {
        std::sort(indices.begin(), indices.end());
    }
    return partition;
}

int cluster_count(const ClusterState& state) {
    std::set<int> distinct;
    for (int label : state.labels) {
        if (label >= 0) distinct.insert(label);
    }
    return static_cast<int>(distinct.size());
}

std::size_t noise_count(const ClusterState& state) {
    return static_cast<std::size_t>(
        std::count(state.labels.begin(), state.labels.end(), -1));
}

std::map<int, std::vector<std::size_t>> cluster_members(
    const ClusterState& state) {
    std::map<int, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < state.labels.size(); ++i) {
        if (state.labels[i] >= 0) members[state.labels[i]].push_back(i);
    }
    return members;
}

ClusterState compact(ClusterState state) {
    std::map<int, int> remap;
    int next = 0;
    for (int& label : state.labels) {
        if (label < 0) continue;
        auto [it, inserted] = remap.try_emplace(label, next);
        if (inserted) ++next;
        label = it->second;
    }
    return state;
}

void PipelineConfig::validate() const {
    auto fail = [](const std::string& msg) {
        throw std::invalid_argument("config: " + msg);
    };
    if (k < 2) fail("k must be >= 2");
    if (k_tilde < 1) fail("k_tilde must be >= 1");
    if (ti < 1) fail("ti must be >= 1");
    if (ti_quantile && (*ti_quantile <= 0.0 || *ti_quantile > 1.0)) {
        fail("ti_quantile must lie in (0,1]");
    }
    if (!(beta > 0.0)) fail("beta must be positive");
    if (!(eps > 0.0) || eps > 1.0) fail("eps must lie in (0,1]");
    if (min_pts < 2) fail("min_pts must be >= 2");
    if (recognition_epochs < 0) fail("recognition epochs must be >= 0");
    if (iterations < 0) fail("iterations must be >= 0");
    if (refine_rate < 0.0 || refine_rate > 1.0) {
        fail("refine_rate must lie in [0,1]");
    }
    if (refine_passes < 0) fail("refine_passes must be >= 0");
}

}  // namespace vapc
