#include "vapc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "vapc/metric.hpp"

namespace vapc {

std::string_view to_string(RetrievalMode m) {
    switch (m) {
        case RetrievalMode::cross_camera: return "cross_camera";
        case RetrievalMode::all_gallery: return "all_gallery";
    }
    return "?";
}

std::optional<RetrievalMode> parse_retrieval_mode(std::string_view s) {
    for (RetrievalMode m :
         {RetrievalMode::cross_camera, RetrievalMode::all_gallery}) {
        if (s == to_string(m)) return m;
    }
    return std::nullopt;
}

std::vector<std::size_t> rank_gallery(std::span<const double> query_feature,
                                      const SampleMeta& query_meta,
                                      const EmbeddingSet& gallery,
                                      const std::vector<SampleMeta>& gallery_meta,
                                      RetrievalProtocol protocol) {
    if (gallery_meta.size() != gallery.n) {
        throw std::invalid_argument("gallery metadata count mismatch");
    }
    if (query_feature.size() != gallery.d) {
        throw std::invalid_argument("query dimension mismatch");
    }

    std::vector<std::pair<double, std::size_t>> order;
    order.reserve(gallery.n);
    for (std::size_t g = 0; g < gallery.n; ++g) {
        const SampleMeta& m = gallery_meta[g];
        if (m.index == query_meta.index) continue;  // never match the query itself
        if (protocol.mode == RetrievalMode::cross_camera &&
            m.camera == query_meta.camera && m.gt_id.has_value() &&
            query_meta.gt_id.has_value() && *m.gt_id == *query_meta.gt_id) {
            continue;  // same-camera true match is junk under this protocol
        }
        order.emplace_back(sq_euclidean(query_feature, gallery.row(g)), g);
    }
    if (order.empty()) {
        throw std::runtime_error("empty gallery after protocol filtering");
    }
    std::sort(order.begin(), order.end());
    std::vector<std::size_t> ranked;
    ranked.reserve(order.size());
    for (const auto& [d, g] : order) ranked.push_back(g);
    return ranked;
}

double average_precision(const std::vector<bool>& relevance) {
    std::size_t relevant = 0;
    double acc = 0.0;
    for (std::size_t r = 0; r < relevance.size(); ++r) {
        if (!relevance[r]) continue;
        ++relevant;
        acc += static_cast<double>(relevant) / static_cast<double>(r + 1);
    }
    if (relevant == 0) {
        throw std::invalid_argument("average_precision needs a relevant item");
    }
    return acc / static_cast<double>(relevant);
}

std::vector<double> cmc(const std::vector<std::vector<bool>>& rankings,
                        const std::vector<int>& ranks) {
    if (rankings.empty()) {
        throw std::invalid_argument("cmc needs at least one query");
    }
    std::vector<std::size_t> first_hits;
    first_hits.reserve(rankings.size());
    for (const auto& flags : rankings) {
        const auto it = std::find(flags.begin(), flags.end(), true);
        if (it == flags.end()) {
            throw std::invalid_argument("cmc query has no relevant item");
        }
        first_hits.push_back(
            static_cast<std::size_t>(it - flags.begin()) + 1);
    }
    std::vector<double> values;
    values.reserve(ranks.size());
    for (int r : ranks) {
        const auto hits = std::count_if(
            first_hits.begin(), first_hits.end(),
            [r](std::size_t h) { return h <= static_cast<std::size_t>(r); });
        values.push_back(static_cast<double>(hits) /
                         static_cast<double>(rankings.size()));
    }
    return values;
}

namespace {

struct Contingency {
    std::size_t n = 0;
    std::vector<std::size_t> row_sums;  // class sizes of labeling a
    std::vector<std::size_t> col_sums;  // class sizes of labeling b
    // Nonzero joint counts only.
    std::vector<std::pair<std::pair<int, int>, std::size_t>> joint;
};

std::vector<int> densify(const std::vector<int>& labels) {
    std::unordered_map<int, int> remap;
    std::vector<int> out;
    out.reserve(labels.size());
    int next = 0;
    for (int l : labels) {
        auto [it, inserted] = remap.try_emplace(l, next);
        if (inserted) ++next;
        out.push_back(it->second);
    }
    return out;
}

Contingency build_contingency(const std::vector<int>& a,
                              const std::vector<int>& b) {
    Contingency c;
    c.n = a.size();
    const int ra = *std::max_element(a.begin(), a.end()) + 1;
    const int rb = *std::max_element(b.begin(), b.end()) + 1;
    c.row_sums.assign(static_cast<std::size_t>(ra), 0);
    c.col_sums.assign(static_cast<std::size_t>(rb), 0);
    std::unordered_map<std::int64_t, std::size_t> joint;
    for (std::size_t i = 0; i < c.n; ++i) {
        ++c.row_sums[static_cast<std::size_t>(a[i])];
        ++c.col_sums[static_cast<std::size_t>(b[i])];
        const std::int64_t key =
            (static_cast<std::int64_t>(a[i]) << 32) | static_cast<std::int64_t>(b[i]);
        ++joint[key];
    }
    c.joint.reserve(joint.size());
    for (const auto& [key, count] : joint) {
        c.joint.push_back({{static_cast<int>(key >> 32),
                            static_cast<int>(key & 0xffffffff)},
                           count});
    }
    std::sort(c.joint.begin(), c.joint.end());
    return c;
}

double entropy(const std::vector<std::size_t>& sizes, std::size_t n) {
    double h = 0.0;
    for (std::size_t s : sizes) {
        if (s == 0) continue;
        const double p = static_cast<double>(s) / static_cast<double>(n);
        h -= p * std::log(p);
    }
    return h;
}

double mutual_information(const Contingency& c) {
    const double n = static_cast<double>(c.n);
    double mi = 0.0;
    for (const auto& [cell, count] : c.joint) {
        const double nij = static_cast<double>(count);
        const double ai = static_cast<double>(
            c.row_sums[static_cast<std::size_t>(cell.first)]);
        const double bj = static_cast<double>(
            c.col_sums[static_cast<std::size_t>(cell.second)]);
        mi += (nij / n) * std::log((n * nij) / (ai * bj));
    }
    return std::max(mi, 0.0);
}

// Exact expectation of MI over the hypergeometric null that fixes both
// marginals (Vinh et al. style), via log-factorials.
double expected_mutual_information(const Contingency& c) {
    const std::size_t n = c.n;
    std::vector<double> lf(n + 1, 0.0);
    for (std::size_t i = 1; i <= n; ++i) {
        lf[i] = lf[i - 1] + std::log(static_cast<double>(i));
    }
    const double logn = std::log(static_cast<double>(n));
    double emi = 0.0;
    for (std::size_t ai : c.row_sums) {
        if (ai == 0) continue;
        for (std::size_t bj : c.col_sums) {
            if (bj == 0) continue;
            const std::size_t lo = ai + bj > n ? ai + bj - n : 1;
            const std::size_t hi = std::min(ai, bj);
            const double log_ab =
                std::log(static_cast<double>(ai)) + std::log(static_cast<double>(bj));
            for (std::size_t nij = lo; nij <= hi; ++nij) {
                const double log_prob = lf[ai] + lf[bj] + lf[n - ai] + lf[n - bj] -
                                        lf[n] - lf[nij] - lf[ai - nij] -
                                        lf[bj - nij] - lf[n - ai - bj + nij];
                const double term = (static_cast<double>(nij) /
                                     static_cast<double>(n)) *
                                    (logn + std::log(static_cast<double>(nij)) -
                                     log_ab);
                emi += std::exp(log_prob) * term;
            }
        }
    }
    return emi;
}

}  // namespace

double ami(const std::vector<int>& labels_a, const std::vector<int>& labels_b,
           AmiNormalizer normalizer) {
    if (labels_a.size() != labels_b.size()) {
        throw std::invalid_argument("labelings differ in length");
    }
    if (labels_a.size() < 2) {
        throw std::invalid_argument("ami needs at least two samples");
    }
    std::vector<int> a = densify(labels_a);
    std::vector<int> b = densify(labels_b);
    // Canonical argument order: makes ami(a,b) and ami(b,a) run the exact
    // same float program.
    if (b < a) std::swap(a, b);

    const Contingency c = build_contingency(a, b);
    const double ha = entropy(c.row_sums, c.n);
    const double hb = entropy(c.col_sums, c.n);
    if (c.row_sums.size() == 1 && c.col_sums.size() == 1) {
        return 1.0;  // two trivial single-cluster partitions agree
    }

    const double mi = mutual_information(c);
    const double emi = expected_mutual_information(c);
    const double norm = normalizer == AmiNormalizer::arithmetic
                            ? 0.5 * (ha + hb)
                            : std::max(ha, hb);
    const double denom = norm - emi;
    if (std::abs(denom) < 1e-15) {
        return mi >= norm ? 1.0 : 0.0;
    }
    return (mi - emi) / denom;
}

MetricsReport evaluate_retrieval(const EmbeddingSet& embeddings,
                                 const std::vector<SampleMeta>& meta,
                                 RetrievalProtocol protocol,
                                 const std::vector<int>& ranks,
                                 EventLog* events) {
    if (meta.size() != embeddings.n) {
        throw std::invalid_argument("metadata count mismatch");
    }
    std::vector<std::size_t> query_idx;
    std::vector<std::size_t> gallery_idx;
    for (std::size_t i = 0; i < meta.size(); ++i) {
        if (meta[i].split == Split::query) query_idx.push_back(i);
        if (meta[i].split == Split::gallery) gallery_idx.push_back(i);
    }
    if (query_idx.empty() || gallery_idx.empty()) {
        throw std::invalid_argument("dataset has no query/gallery splits");
    }

    EmbeddingSet gallery = subset_rows(embeddings, gallery_idx);
    std::vector<SampleMeta> gallery_meta;
    gallery_meta.reserve(gallery_idx.size());
    for (std::size_t g : gallery_idx) gallery_meta.push_back(meta[g]);

    MetricsReport report;
    std::vector<double> aps;
    std::vector<std::vector<bool>> rankings;
    for (std::size_t q : query_idx) {
        const SampleMeta& qm = meta[q];
        if (!qm.gt_id.has_value()) {
            ++report.skipped_queries;
            if (events) {
                events->note("eval: query " + std::to_string(qm.index) +
                             " skipped (no ground-truth id)");
            }
            continue;
        }
        const auto ranked = rank_gallery(embeddings.row(q), qm, gallery,
                                         gallery_meta, protocol);
        std::vector<bool> flags;
        flags.reserve(ranked.size());
        bool any = false;
        for (std::size_t g : ranked) {
            const bool rel = gallery_meta[g].gt_id.has_value() &&
                             *gallery_meta[g].gt_id == *qm.gt_id;
            flags.push_back(rel);
            any |= rel;
        }
        if (!any) {
            ++report.skipped_queries;
            if (events) {
                events->note("eval: query " + std::to_string(qm.index) +
                             " skipped (no relevant gallery item)");
            }
            continue;
        }
        aps.push_back(average_precision(flags));
        rankings.push_back(std::move(flags));
    }
    if (aps.empty()) {
        throw std::runtime_error("no evaluable query has a relevant match");
    }
    report.map = std::accumulate(aps.begin(), aps.end(), 0.0) /
                 static_cast<double>(aps.size());
    const auto cmc_values = cmc(rankings, ranks);
    for (std::size_t t = 0; t < ranks.size(); ++t) {
        report.cmc[ranks[t]] = cmc_values[t];
    }
    return report;
}

}  // namespace vapc
