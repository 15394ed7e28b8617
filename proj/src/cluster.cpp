#include "vapc/cluster.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <stdexcept>

namespace vapc {

namespace {

constexpr int kUnclassified = -2;
constexpr int kNoise = -1;

struct DisjointSet {
    std::vector<std::size_t> parent;

    explicit DisjointSet(std::size_t n) : parent(n) {
        std::iota(parent.begin(), parent.end(), std::size_t{0});
    }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    // Returns true when two distinct sets were joined.
    bool unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        if (a > b) std::swap(a, b);
        parent[b] = a;
        return true;
    }
};

void check_partition_covers(
    std::size_t n,
    const std::map<Viewpoint, std::vector<std::size_t>>& partition) {
    std::vector<std::uint8_t> seen(n, 0);
    std::size_t total = 0;
    for (const auto& [vp, indices] : partition) {
        for (std::size_t idx : indices) {
            if (idx >= n || seen[idx]) {
                throw std::invalid_argument(
                    "viewpoint partition does not form a disjoint cover");
            }
            seen[idx] = 1;
            ++total;
        }
    }
    if (total != n) {
        throw std::invalid_argument(
            "viewpoint partition does not cover all samples");
    }
}

// First max(k_tilde, 1) same-group neighbors of every local sample under
// `dist`, self excluded, ties by ascending index.
std::vector<std::vector<std::uint32_t>> top_neighbors(
    const DistanceMatrix& dist, int k_tilde) {
    const std::size_t m = dist.n();
    const std::size_t take =
        std::min<std::size_t>(static_cast<std::size_t>(std::max(k_tilde, 1)),
                              m > 0 ? m - 1 : 0);
    std::vector<std::vector<std::uint32_t>> tops(m);
    std::vector<std::pair<double, std::uint32_t>> order;
    for (std::size_t i = 0; i < m; ++i) {
        order.clear();
        for (std::size_t j = 0; j < m; ++j) {
            if (j == i) continue;
            order.emplace_back(dist.at(i, j), static_cast<std::uint32_t>(j));
        }
        std::partial_sort(order.begin(), order.begin() + take, order.end());
        tops[i].reserve(take);
        for (std::size_t t = 0; t < take; ++t) tops[i].push_back(order[t].second);
    }
    return tops;
}

bool contains(const std::vector<std::uint32_t>& list, std::uint32_t value) {
    return std::find(list.begin(), list.end(), value) != list.end();
}

}  // namespace

ClusterState dbscan(const DistanceMatrix& dist, const DbscanParams& params) {
    if (!dist.square()) {
        throw std::invalid_argument("dbscan needs a square distance matrix");
    }
    if (!(params.eps > 0.0) || params.min_pts < 2) {
        throw std::invalid_argument("dbscan: bad eps or min_pts");
    }
    const std::size_t n = dist.n();

    std::vector<std::vector<std::uint32_t>> neighbors(n);
    std::vector<std::uint8_t> core(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        auto& nb = neighbors[i];
        for (std::size_t j = 0; j < n; ++j) {
            if (dist.at(i, j) <= params.eps) {
                nb.push_back(static_cast<std::uint32_t>(j));  // includes self
            }
        }
        core[i] = nb.size() >= static_cast<std::size_t>(params.min_pts);
    }

    ClusterState state;
    state.labels.assign(n, kUnclassified);
    int next = 0;
    std::deque<std::uint32_t> frontier;
    for (std::size_t i = 0; i < n; ++i) {
        if (state.labels[i] != kUnclassified) continue;
        if (!core[i]) {
            state.labels[i] = kNoise;
            continue;
        }
        const int cid = next++;
        state.labels[i] = cid;
        frontier.assign(1, static_cast<std::uint32_t>(i));
        while (!frontier.empty()) {
            const std::uint32_t p = frontier.front();
            frontier.pop_front();
            for (std::uint32_t q : neighbors[p]) {
                if (state.labels[q] == kUnclassified) {
                    state.labels[q] = cid;
                    if (core[q]) frontier.push_back(q);
                } else if (state.labels[q] == kNoise) {
                    state.labels[q] = cid;  // border point rescued
                }
            }
        }
    }
    return state;
}

FirstPeriodResult first_period(
    const EmbeddingSet& embeddings,
    const std::map<Viewpoint, std::vector<std::size_t>>& partition,
    const PipelineConfig& cfg) {
    check_partition_covers(embeddings.n, partition);

    FirstPeriodResult result;
    result.state.labels.assign(embeddings.n, kNoise);
    result.state.viewpoint_of.assign(embeddings.n, Viewpoint::front);

    int label_base = 0;
    for (const auto& [vp, indices] : partition) {
        for (std::size_t idx : indices) result.state.viewpoint_of[idx] = vp;
        const std::size_t m = indices.size();
        if (m == 1) {
            result.state.labels[indices[0]] = label_base++;
            continue;
        }

        const EmbeddingSet local = subset_rows(embeddings, indices);
        DistanceMatrix dist = pairwise_sq_euclidean(local);
        const int k_eff = std::min<int>(cfg.k, static_cast<int>(m));
        const NeighborLists nbrs = knn(dist, k_eff);
        const ExpandedSets sets = k_reciprocal_expand(nbrs, k_eff);
        const SparseWeights weights = reweight(dist, sets);
        DistanceMatrix jac = jaccard_distance(weights);

        const ClusterState local_state =
            dbscan(jac, DbscanParams{cfg.eps, cfg.min_pts});
        int local_max = -1;
        for (std::size_t t = 0; t < m; ++t) {
            const int label = local_state.labels[t];
            if (label >= 0) {
                result.state.labels[indices[t]] = label_base + label;
                local_max = std::max(local_max, label);
            }
        }
        label_base += local_max + 1;
        result.jaccard.emplace(vp, std::move(jac));
        result.euclidean.emplace(vp, std::move(dist));
    }
    return result;
}

ClusterState noise_select(
    const ClusterState& state,
    const std::map<Viewpoint, std::vector<std::size_t>>& partition,
    const std::map<Viewpoint, DistanceMatrix>& distances, int k_tilde) {
    if (k_tilde < 1) {
        throw std::invalid_argument("noise_select needs k_tilde >= 1");
    }
    ClusterState out = state;
    int next_label = cluster_count(out) == 0
                         ? 0
                         : *std::max_element(out.labels.begin(), out.labels.end()) + 1;

    for (const auto& [vp, indices] : partition) {
        const std::size_t m = indices.size();
        if (m < 2) continue;
        const auto dist_it = distances.find(vp);
        if (dist_it == distances.end()) {
            // Single-sample viewpoints have no matrix and no noise.
            bool has_noise = false;
            for (std::size_t idx : indices) {
                has_noise |= out.labels[idx] == kNoise;
            }
            if (has_noise) {
                throw std::invalid_argument(
                    "missing distance matrix for a viewpoint with noise");
            }
            continue;
        }
        const DistanceMatrix& dist = dist_it->second;
        if (dist.n() != m) {
            throw std::invalid_argument("distance matrix size mismatch");
        }

        const auto tops = top_neighbors(dist, k_tilde);

        // Similar-sample pairs (noise, nearest same-viewpoint sample),
        // processed from most to least similar.
        struct Pair {
            double dist;
            std::uint32_t s;
            std::uint32_t p;
        };
        std::vector<Pair> pairs;
        for (std::size_t s = 0; s < m; ++s) {
            if (out.labels[indices[s]] != kNoise) continue;
            if (tops[s].empty()) continue;
            const std::uint32_t p = tops[s][0];
            pairs.push_back({dist.at(s, p), static_cast<std::uint32_t>(s), p});
        }
        std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
            if (a.dist != b.dist) return a.dist < b.dist;
            return a.s < b.s;
        });

        std::deque<std::uint32_t> members;
        for (const Pair& pr : pairs) {
            if (out.labels[indices[pr.s]] != kNoise) continue;  // resolved earlier
            const bool reciprocal = contains(tops[pr.p], pr.s);
            if (!reciprocal) {
                // Hard negative: isolate it so its feature stays distinct.
                out.labels[indices[pr.s]] = next_label++;
                continue;
            }
            const int partner_label = out.labels[indices[pr.p]];
            if (partner_label != kNoise) {
                out.labels[indices[pr.s]] = partner_label;
                continue;
            }
            // Both noise: seed a fresh cluster and grow it over mutually
            // reciprocal noise neighbors. Absorbed members never move again.
            const int cid = next_label++;
            out.labels[indices[pr.s]] = cid;
            out.labels[indices[pr.p]] = cid;
            members.assign({pr.s, pr.p});
            while (!members.empty()) {
                const std::uint32_t c = members.front();
                members.pop_front();
                for (std::uint32_t q : tops[c]) {
                    if (out.labels[indices[q]] != kNoise) continue;
                    if (!contains(tops[q], c)) continue;
                    out.labels[indices[q]] = cid;
                    members.push_back(q);
                }
            }
        }
    }
    return compact(std::move(out));
}

ClusterState noise_to_singletons(const ClusterState& state) {
    ClusterState out = state;
    int next_label = cluster_count(out) == 0
                         ? 0
                         : *std::max_element(out.labels.begin(), out.labels.end()) + 1;
    for (int& label : out.labels) {
        if (label == kNoise) label = next_label++;
    }
    return compact(std::move(out));
}

TauResult compute_tau(
    const EmbeddingSet& embeddings,
    const std::map<Viewpoint, std::vector<std::size_t>>& partition, long ti) {
    if (partition.size() < 2) {
        throw std::invalid_argument("compute_tau needs at least two viewpoints");
    }
    if (ti < 1) {
        throw std::invalid_argument("compute_tau needs ti >= 1");
    }

    std::vector<double> distances;
    auto outer = partition.begin();
    for (; outer != partition.end(); ++outer) {
        auto inner = std::next(outer);
        for (; inner != partition.end(); ++inner) {
            for (std::size_t i : outer->second) {
                const auto ri = embeddings.row(i);
                for (std::size_t j : inner->second) {
                    distances.push_back(sq_euclidean(ri, embeddings.row(j)));
                }
            }
        }
    }

    TauResult result;
    result.pair_count = distances.size();
    std::size_t rank = static_cast<std::size_t>(ti);
    if (rank > result.pair_count) {
        rank = result.pair_count;
        result.clamped = true;
    }
    result.rank = rank;
    std::nth_element(distances.begin(), distances.begin() + (rank - 1),
                     distances.end());
    result.tau = distances[rank - 1];
    return result;
}

SecondPeriodResult second_period(const ClusterState& state,
                                 const EmbeddingSet& embeddings, double tau) {
    if (state.labels.size() != embeddings.n ||
        state.viewpoint_of.size() != embeddings.n) {
        throw std::invalid_argument("state does not match embeddings");
    }
    if (noise_count(state) != 0) {
        throw std::invalid_argument("second_period needs a noise-free state");
    }

    struct Edge {
        double dist;
        std::uint32_t i;
        std::uint32_t j;
    };
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < embeddings.n; ++i) {
        const auto ri = embeddings.row(i);
        for (std::size_t j = i + 1; j < embeddings.n; ++j) {
            if (state.viewpoint_of[i] == state.viewpoint_of[j]) continue;
            const double d = sq_euclidean(ri, embeddings.row(j));
            if (d < tau) {
                edges.push_back({d, static_cast<std::uint32_t>(i),
                                 static_cast<std::uint32_t>(j)});
            }
        }
    }
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
        if (a.dist != b.dist) return a.dist < b.dist;
        if (a.i != b.i) return a.i < b.i;
        return a.j < b.j;
    });

    const int classes = cluster_count(state);
    DisjointSet clusters(static_cast<std::size_t>(classes));
    SecondPeriodResult result;
    result.state = state;
    for (const Edge& e : edges) {
        const auto a = static_cast<std::size_t>(result.state.labels[e.i]);
        const auto b = static_cast<std::size_t>(result.state.labels[e.j]);
        if (clusters.unite(a, b)) ++result.merge_count;
    }
    for (int& label : result.state.labels) {
        label = static_cast<int>(
            clusters.find(static_cast<std::size_t>(label)));
    }
    result.state = compact(std::move(result.state));
    return result;
}

}  // namespace vapc
