#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "vapc/core.hpp"

namespace vapc {

enum class RetrievalMode : std::uint8_t { cross_camera = 0, all_gallery };

std::string_view to_string(RetrievalMode m);
std::optional<RetrievalMode> parse_retrieval_mode(std::string_view s);

struct RetrievalProtocol {
    RetrievalMode mode = RetrievalMode::cross_camera;
};

// Gallery positions sorted by ascending squared-Euclidean distance to the
// query (ties by ascending position) after protocol filtering: the query's
// own index is always dropped; cross_camera additionally drops entries
// sharing both the query's camera and identity. Throws std::runtime_error
// when the filtered gallery is empty.
std::vector<std::size_t> rank_gallery(std::span<const double> query_feature,
                                      const SampleMeta& query_meta,
                                      const EmbeddingSet& gallery,
                                      const std::vector<SampleMeta>& gallery_meta,
                                      RetrievalProtocol protocol);

// AP = mean over relevant ranks r of (relevant within top-r) / r. Throws
// std::invalid_argument when no flag is set.
double average_precision(const std::vector<bool>& relevance);

// CMC@r = fraction of queries whose first relevant item lies within the top
// r. Every query needs at least one relevant flag.
std::vector<double> cmc(const std::vector<std::vector<bool>>& rankings,
                        const std::vector<int>& ranks);

// Adjusted mutual information with the exact hypergeometric expected-MI
// correction. 1.0 for identical partitions (including the two-trivial
// case); symmetric in its arguments.
double ami(const std::vector<int>& labels_a, const std::vector<int>& labels_b,
           AmiNormalizer normalizer = AmiNormalizer::arithmetic);

struct MetricsReport {
    double map = 0.0;
    std::map<int, double> cmc;  // rank -> value
    std::optional<double> ami;
    int iteration = 0;
    std::size_t skipped_queries = 0;  // queries with no relevant gallery item
};

// Full query-vs-gallery evaluation over a dataset's query/gallery splits.
// Embeddings must be normalized; queries without a ground-truth identity or
// without any relevant gallery entry are skipped and counted.
MetricsReport evaluate_retrieval(const EmbeddingSet& embeddings,
                                 const std::vector<SampleMeta>& meta,
                                 RetrievalProtocol protocol,
                                 const std::vector<int>& ranks = {1, 5, 20},
                                 EventLog* events = nullptr);

}  // namespace vapc
