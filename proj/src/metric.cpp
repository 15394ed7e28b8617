#include "vapc/metric.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace vapc {

DistanceMatrix make_distance_matrix(std::size_t n, std::vector<double> values,
                                    MetricTag tag) {
    if (values.size() != n * n) {
        throw std::invalid_argument("distance values size does not match n*n");
    }
    return DistanceMatrix{n, n, tag, std::move(values)};
}

double sq_euclidean(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("dimension mismatch in sq_euclidean");
    }
    double acc = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t) {
        const double diff = a[t] - b[t];
        acc += diff * diff;
    }
    return acc;
}

DistanceMatrix pairwise_sq_euclidean(const EmbeddingSet& a,
                                     const EmbeddingSet& b) {
    if (a.d != b.d) {
        throw std::invalid_argument("dimension mismatch: " +
                                    std::to_string(a.d) + " vs " +
                                    std::to_string(b.d));
    }
    DistanceMatrix out;
    out.rows = a.n;
    out.cols = b.n;
    out.metric = MetricTag::sq_euclidean;
    out.values.resize(a.n * b.n);
    for (std::size_t i = 0; i < a.n; ++i) {
        const auto ra = a.row(i);
        for (std::size_t j = 0; j < b.n; ++j) {
            out.values[i * b.n + j] = sq_euclidean(ra, b.row(j));
        }
    }
    return out;
}

DistanceMatrix pairwise_sq_euclidean(const EmbeddingSet& a) {
    DistanceMatrix out;
    out.rows = a.n;
    out.cols = a.n;
    out.metric = MetricTag::sq_euclidean;
    out.values.assign(a.n * a.n, 0.0);
    for (std::size_t i = 0; i < a.n; ++i) {
        const auto ra = a.row(i);
        for (std::size_t j = i + 1; j < a.n; ++j) {
            const double d = sq_euclidean(ra, a.row(j));
            out.values[i * a.n + j] = d;
            out.values[j * a.n + i] = d;
        }
    }
    return out;
}

NeighborLists knn(const DistanceMatrix& dist, int k) {
    if (!dist.square()) {
        throw std::invalid_argument("knn needs a square distance matrix");
    }
    const std::size_t n = dist.n();
    if (k < 1 || static_cast<std::size_t>(k) > n) {
        throw std::invalid_argument("knn: k=" + std::to_string(k) +
                                    " out of range for n=" + std::to_string(n));
    }
    NeighborLists out;
    out.k = k;
    out.lists.resize(n);

    std::vector<std::pair<double, std::uint32_t>> order;
    for (std::size_t i = 0; i < n; ++i) {
        order.clear();
        order.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            order.emplace_back(dist.at(i, j), static_cast<std::uint32_t>(j));
        }
        const std::size_t take = static_cast<std::size_t>(k) - 1;
        std::partial_sort(order.begin(), order.begin() + take, order.end());

        auto& list = out.lists[i];
        list.reserve(k);
        list.push_back(static_cast<std::uint32_t>(i));  // self first
        for (std::size_t t = 0; t < take; ++t) list.push_back(order[t].second);
    }
    return out;
}

ExpandedSets k_reciprocal_expand(const NeighborLists& nbrs, int k) {
    if (k < 2) {
        throw std::invalid_argument("k_reciprocal_expand needs k >= 2");
    }
    if (nbrs.k != k) {
        throw std::invalid_argument("neighbor lists were built with k=" +
                                    std::to_string(nbrs.k) + ", expected " +
                                    std::to_string(k));
    }
    const std::size_t n = nbrs.lists.size();
    const std::size_t half = static_cast<std::size_t>(k) / 2;

    ExpandedSets out;
    out.sets.resize(n);
    std::vector<std::uint8_t> in_base(n, 0);
    std::vector<std::uint8_t> in_set(n, 0);

    for (std::size_t i = 0; i < n; ++i) {
        const auto& base = nbrs.lists[i];
        for (std::uint32_t j : base) in_base[j] = 1;

        auto& set = out.sets[i];
        set.assign(base.begin(), base.end());
        for (std::uint32_t j : base) in_set[j] = 1;

        for (std::uint32_t ind : base) {
            const auto& half_list = nbrs.lists[ind];
            std::size_t overlap = 0;
            for (std::size_t t = 0; t < half; ++t) {
                if (in_base[half_list[t]]) ++overlap;
            }
            // |K_k(i) ∩ K_{k/2}(ind)| >= (2/3) |K_{k/2}(ind)|, integer-exact.
            if (3 * overlap >= 2 * half) {
                for (std::size_t t = 0; t < half; ++t) {
                    const std::uint32_t cand = half_list[t];
                    if (!in_set[cand]) {
                        in_set[cand] = 1;
                        set.push_back(cand);
                    }
                }
            }
        }

        std::sort(set.begin(), set.end());
        for (std::uint32_t j : set) in_set[j] = 0;
        for (std::uint32_t j : base) in_base[j] = 0;
    }
    return out;
}

double SparseWeights::row_sum(std::size_t i) const {
    double acc = 0.0;
    for (const auto& [idx, w] : rows[i]) acc += w;
    return acc;
}

SparseWeights reweight(const DistanceMatrix& dist, const ExpandedSets& sets) {
    if (!dist.square() || dist.n() != sets.sets.size()) {
        throw std::invalid_argument("reweight: matrix and sets disagree");
    }
    SparseWeights out;
    out.n = dist.n();
    out.rows.resize(out.n);
    for (std::size_t i = 0; i < out.n; ++i) {
        auto& row = out.rows[i];
        row.reserve(sets.sets[i].size());
        for (std::uint32_t j : sets.sets[i]) {
            row.emplace_back(j, std::exp(-dist.at(i, j)));
        }
    }
    return out;
}

DistanceMatrix jaccard_distance(const SparseWeights& weights) {
    const std::size_t n = weights.n;
    DistanceMatrix out;
    out.rows = n;
    out.cols = n;
    out.metric = MetricTag::jaccard;
    out.values.assign(n * n, 0.0);

    std::vector<double> row_sums(n);
    for (std::size_t i = 0; i < n; ++i) row_sums[i] = weights.row_sum(i);

    for (std::size_t i = 0; i < n; ++i) {
        const auto& ri = weights.rows[i];
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto& rj = weights.rows[j];
            // Off-support weights are zero, so only the overlap contributes
            // to sum(min) and sum(max) = sum_i + sum_j - sum(min).
            double sum_min = 0.0;
            std::size_t a = 0;
            std::size_t b = 0;
            while (a < ri.size() && b < rj.size()) {
                if (ri[a].first < rj[b].first) {
                    ++a;
                } else if (rj[b].first < ri[a].first) {
                    ++b;
                } else {
                    sum_min += std::min(ri[a].second, rj[b].second);
                    ++a;
                    ++b;
                }
            }
            const double sum_max = row_sums[i] + row_sums[j] - sum_min;
            double d = 1.0;
            if (sum_max > 0.0) {
                d = 1.0 - sum_min / sum_max;
                d = std::clamp(d, 0.0, 1.0);
            }
            out.values[i * n + j] = d;
            out.values[j * n + i] = d;
        }
    }
    return out;
}

}  // namespace vapc
