#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vapc/core.hpp"

namespace vapc {

// Per-class feature store. One slot per current pseudo-class, every slot
// unit-norm after construction and after each update.
struct FeatureMemory {
    std::size_t slot_count = 0;
    std::size_t d = 0;
    double beta = 0.1;
    std::vector<double> slots;  // slot_count * d, row-major

    std::span<const double> slot(std::size_t c) const {
        return {slots.data() + c * d, d};
    }
    std::span<double> slot(std::size_t c) {
        return {slots.data() + c * d, d};
    }
};

// One slot per sample (instance discrimination setup).
FeatureMemory memory_from_embeddings(const EmbeddingSet& embeddings,
                                     double beta);

// One slot per pseudo-class: the renormalized member centroid. Labels must
// be dense with no noise markers.
FeatureMemory memory_from_clusters(const EmbeddingSet& embeddings,
                                   const ClusterState& state, double beta,
                                   EventLog* events = nullptr);

// Softmax over slot similarities, p_c ∝ exp(slot_c · f / beta), computed
// with max-subtraction. Components sum to 1.
std::vector<double> predict_prob(const FeatureMemory& mem,
                                 std::span<const double> f);

// -log p_y, floored at p_y = 1e-30 (floor hits are reported via events).
double repelled_loss(std::span<const double> probs, std::size_t y,
                     EventLog* events = nullptr);

// d(-log p_y)/df = (sum_c p_c slot_c - slot_y) / beta.
std::vector<double> loss_gradient(const FeatureMemory& mem,
                                  std::span<const double> f, std::size_t y);

// Slot y <- renormalize((slot_y + f) / 2); other slots untouched. A zero-norm
// average keeps the previous slot and notes an event.
FeatureMemory update_slot(FeatureMemory mem, std::size_t y,
                          std::span<const double> f,
                          EventLog* events = nullptr);

struct RecognitionResult {
    EmbeddingSet embeddings;
    FeatureMemory memory;
    std::vector<double> epoch_mean_loss;
};

// Instance-discrimination pass: memory starts as the samples themselves,
// then for `epochs` rounds every sample (ascending index) takes one
// negative-gradient step of the repelled loss against its own slot and the
// slot absorbs the moved feature. Deterministic.
RecognitionResult recognition_stage(const EmbeddingSet& embeddings,
                                    int epochs, double beta, double step_rate,
                                    EventLog* events = nullptr);

// One negative-gradient step per sample toward its pseudo-class slot,
// f <- normalize(f - rate * dL/df), against a fixed memory snapshot.
EmbeddingSet refine_features(const EmbeddingSet& embeddings,
                             const ClusterState& state,
                             const FeatureMemory& mem, double rate);

}  // namespace vapc
