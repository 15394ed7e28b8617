#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "vapc/core.hpp"

namespace vapc {

enum class MetricTag : std::uint8_t { sq_euclidean = 0, jaccard };

// Dense distance matrix. Square self-distance matrices are symmetric with a
// zero diagonal; the rectangular form only appears for two-set distances.
struct DistanceMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    MetricTag metric = MetricTag::sq_euclidean;
    std::vector<double> values;  // rows * cols, row-major

    bool square() const { return rows == cols; }
    std::size_t n() const { return rows; }
    double at(std::size_t i, std::size_t j) const {
        return values[i * cols + j];
    }
    double& at(std::size_t i, std::size_t j) { return values[i * cols + j]; }
};

DistanceMatrix make_distance_matrix(std::size_t n, std::vector<double> values,
                                    MetricTag tag);

// values[i][j] = ||a_i - b_j||^2, accumulated in double. Throws
// std::invalid_argument on a dimension mismatch.
DistanceMatrix pairwise_sq_euclidean(const EmbeddingSet& a,
                                     const EmbeddingSet& b);

// Self-distance variant: exactly symmetric, zero diagonal.
DistanceMatrix pairwise_sq_euclidean(const EmbeddingSet& a);

double sq_euclidean(std::span<const double> a, std::span<const double> b);

// Ordered neighbor lists of length k. Each list starts with the sample
// itself; ties beyond that break by ascending index.
struct NeighborLists {
    int k = 0;
    std::vector<std::vector<std::uint32_t>> lists;
};

NeighborLists knn(const DistanceMatrix& dist, int k);

// Per-sample expanded neighbor sets (ascending index order).
struct ExpandedSets {
    std::vector<std::vector<std::uint32_t>> sets;
};

// Expands each K_k list by unioning in the half-length lists of neighbors
// whose half-neighborhood overlaps K_k(i) in at least two thirds of its
// size. k/2 rounds down; lists must have been built with the same k.
ExpandedSets k_reciprocal_expand(const NeighborLists& nbrs, int k);

// Sparse weight rows: weight exp(-d_ij) for j in S_i, zero elsewhere.
struct SparseWeights {
    std::size_t n = 0;
    std::vector<std::vector<std::pair<std::uint32_t, double>>> rows;

    double row_sum(std::size_t i) const;
};

SparseWeights reweight(const DistanceMatrix& dist, const ExpandedSets& sets);

// d_J(i,j) = 1 - sum_l min(w_il, w_jl) / sum_l max(w_il, w_jl). Output is
// symmetric, in [0,1], zero diagonal. A pair of rows with no mass at all is
// assigned distance 1.
DistanceMatrix jaccard_distance(const SparseWeights& weights);

}  // namespace vapc
