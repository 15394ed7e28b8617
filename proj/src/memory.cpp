#include "vapc/memory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace vapc {

namespace {

constexpr double kProbFloor = 1e-30;

void renormalize(std::span<double> v) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    const double norm = std::sqrt(sq);
    for (double& x : v) x /= norm;
}

// Softmax over slot·f/beta into `probs` (resized by caller), with
// max-subtraction so extreme temperatures stay finite.
void softmax_into(const FeatureMemory& mem, std::span<const double> f,
                  std::span<double> probs) {
    const std::size_t c = mem.slot_count;
    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < c; ++s) {
        const auto slot = mem.slot(s);
        double dot = 0.0;
        for (std::size_t t = 0; t < mem.d; ++t) dot += slot[t] * f[t];
        probs[s] = dot / mem.beta;
        max_logit = std::max(max_logit, probs[s]);
    }
    double sum = 0.0;
    for (std::size_t s = 0; s < c; ++s) {
        probs[s] = std::exp(probs[s] - max_logit);
        sum += probs[s];
    }
    for (std::size_t s = 0; s < c; ++s) probs[s] /= sum;
}

// (sum_c p_c slot_c - slot_y) / beta into `grad`.
void gradient_into(const FeatureMemory& mem, std::span<const double> probs,
                   std::size_t y, std::span<double> grad) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t s = 0; s < mem.slot_count; ++s) {
        const auto slot = mem.slot(s);
        const double p = probs[s];
        for (std::size_t t = 0; t < mem.d; ++t) grad[t] += p * slot[t];
    }
    const auto target = mem.slot(y);
    for (std::size_t t = 0; t < mem.d; ++t) {
        grad[t] = (grad[t] - target[t]) / mem.beta;
    }
}

void update_slot_in_place(FeatureMemory& mem, std::size_t y,
                          std::span<const double> f, EventLog* events) {
    auto slot = mem.slot(y);
    double sq = 0.0;
    std::vector<double> avg(mem.d);
    for (std::size_t t = 0; t < mem.d; ++t) {
        avg[t] = 0.5 * (slot[t] + f[t]);
        sq += avg[t] * avg[t];
    }
    if (sq == 0.0) {
        if (events) {
            events->note("update_slot: zero-norm average for slot " +
                         std::to_string(y) + ", slot kept");
        }
        return;
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (std::size_t t = 0; t < mem.d; ++t) slot[t] = avg[t] * inv;
}

void check_feature(const FeatureMemory& mem, std::span<const double> f) {
    if (f.size() != mem.d) {
        throw std::invalid_argument("feature dimension " +
                                    std::to_string(f.size()) +
                                    " does not match memory dimension " +
                                    std::to_string(mem.d));
    }
}

}  // namespace

FeatureMemory memory_from_embeddings(const EmbeddingSet& embeddings,
                                     double beta) {
    FeatureMemory mem;
    mem.slot_count = embeddings.n;
    mem.d = embeddings.d;
    mem.beta = beta;
    mem.slots = embeddings.data;
    for (std::size_t s = 0; s < mem.slot_count; ++s) renormalize(mem.slot(s));
    return mem;
}

FeatureMemory memory_from_clusters(const EmbeddingSet& embeddings,
                                   const ClusterState& state, double beta,
                                   EventLog* events) {
    if (state.labels.size() != embeddings.n) {
        throw std::invalid_argument("label count does not match embeddings");
    }
    const int classes = cluster_count(state);
    FeatureMemory mem;
    mem.slot_count = static_cast<std::size_t>(classes);
    mem.d = embeddings.d;
    mem.beta = beta;
    mem.slots.assign(mem.slot_count * mem.d, 0.0);

    std::vector<std::size_t> counts(mem.slot_count, 0);
    for (std::size_t i = 0; i < embeddings.n; ++i) {
        const int label = state.labels[i];
        if (label < 0 || label >= classes) {
            throw std::invalid_argument(
                "memory_from_clusters needs dense labels with no noise");
        }
        auto slot = mem.slot(static_cast<std::size_t>(label));
        const auto row = embeddings.row(i);
        for (std::size_t t = 0; t < mem.d; ++t) slot[t] += row[t];
        ++counts[static_cast<std::size_t>(label)];
    }
    for (std::size_t s = 0; s < mem.slot_count; ++s) {
        auto slot = mem.slot(s);
        double sq = 0.0;
        for (double x : slot) sq += x * x;
        if (sq == 0.0) {
            // Members cancelled exactly; fall back to the first member.
            for (std::size_t i = 0; i < embeddings.n; ++i) {
                if (state.labels[i] == static_cast<int>(s)) {
                    const auto row = embeddings.row(i);
                    std::copy(row.begin(), row.end(), slot.begin());
                    break;
                }
            }
            if (events) {
                events->note("memory_from_clusters: zero-norm centroid for "
                             "class " + std::to_string(s));
            }
        }
        renormalize(slot);
    }
    return mem;
}

std::vector<double> predict_prob(const FeatureMemory& mem,
                                 std::span<const double> f) {
    check_feature(mem, f);
    std::vector<double> probs(mem.slot_count);
    softmax_into(mem, f, probs);
    return probs;
}

double repelled_loss(std::span<const double> probs, std::size_t y,
                     EventLog* events) {
    if (y >= probs.size()) {
        throw std::invalid_argument("class index out of range");
    }
    double p = probs[y];
    if (p < kProbFloor) {
        if (events) {
            events->note("repelled_loss: probability floored at 1e-30 for "
                         "class " + std::to_string(y));
        }
        p = kProbFloor;
    }
    return -std::log(p);
}

std::vector<double> loss_gradient(const FeatureMemory& mem,
                                  std::span<const double> f, std::size_t y) {
    check_feature(mem, f);
    if (y >= mem.slot_count) {
        throw std::invalid_argument("class index out of range");
    }
    std::vector<double> probs(mem.slot_count);
    softmax_into(mem, f, probs);
    std::vector<double> grad(mem.d);
    gradient_into(mem, probs, y, grad);
    return grad;
}

FeatureMemory update_slot(FeatureMemory mem, std::size_t y,
                          std::span<const double> f, EventLog* events) {
    check_feature(mem, f);
    if (y >= mem.slot_count) {
        throw std::invalid_argument("class index out of range");
    }
    update_slot_in_place(mem, y, f, events);
    return mem;
}

RecognitionResult recognition_stage(const EmbeddingSet& embeddings,
                                    int epochs, double beta, double step_rate,
                                    EventLog* events) {
    RecognitionResult result;
    result.embeddings = embeddings;
    result.memory = memory_from_embeddings(embeddings, beta);

    const std::size_t n = embeddings.n;
    const std::size_t d = embeddings.d;
    std::vector<double> probs(n);
    std::vector<double> grad(d);

    for (int epoch = 0; epoch < epochs; ++epoch) {
        double loss_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            auto f = result.embeddings.row(i);
            softmax_into(result.memory, f, probs);
            loss_sum += repelled_loss(probs, i, events);
            gradient_into(result.memory, probs, i, grad);
            for (std::size_t t = 0; t < d; ++t) f[t] -= step_rate * grad[t];
            renormalize(f);
            update_slot_in_place(result.memory, i, f, events);
        }
        result.epoch_mean_loss.push_back(loss_sum / static_cast<double>(n));
    }
    return result;
}

EmbeddingSet refine_features(const EmbeddingSet& embeddings,
                             const ClusterState& state,
                             const FeatureMemory& mem, double rate) {
    if (state.labels.size() != embeddings.n) {
        throw std::invalid_argument("label count does not match embeddings");
    }
    if (mem.d != embeddings.d) {
        throw std::invalid_argument("memory dimension mismatch");
    }
    EmbeddingSet out = embeddings;
    std::vector<double> probs(mem.slot_count);
    std::vector<double> grad(mem.d);
    for (std::size_t i = 0; i < out.n; ++i) {
        const int label = state.labels[i];
        if (label < 0 || static_cast<std::size_t>(label) >= mem.slot_count) {
            throw std::invalid_argument("sample " + std::to_string(i) +
                                        " has no valid pseudo-class");
        }
        auto f = out.row(i);
        softmax_into(mem, f, probs);
        gradient_into(mem, probs, static_cast<std::size_t>(label), grad);
        for (std::size_t t = 0; t < mem.d; ++t) f[t] -= rate * grad[t];
        renormalize(f);
    }
    return out;
}

}  // namespace vapc
