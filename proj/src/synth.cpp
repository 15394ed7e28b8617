#include "vapc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

namespace vapc {

void SynthConfig::validate() const {
    auto fail = [](const std::string& msg) {
        throw std::invalid_argument("synth config: " + msg);
    };
    if (identities < 1) fail("identities must be >= 1");
    if (dim < 1) fail("dim must be >= 1");
    if (samples_per_identity_viewpoint < 1) fail("samples per cell must be >= 1");
    if (viewpoints.empty()) fail("at least one viewpoint is required");
    std::set<Viewpoint> unique(viewpoints.begin(), viewpoints.end());
    if (unique.size() != viewpoints.size()) fail("duplicate viewpoint");
    if (!(viewpoint_offset_scale > identity_spread &&
          identity_spread > within_cluster_noise &&
          within_cluster_noise > 0.0)) {
        fail("scales must satisfy viewpoint > identity > noise > 0");
    }
}

namespace {

// A fraction of identity/viewpoint cells carries an outlier filament: the
// last three samples of the cell drift along a shared random direction at
// graded magnitudes (the occlusion/misalignment picture, where a run of
// shots degrades progressively). The far members fall out of the density
// neighborhood while staying nearest to their own cluster, so they are
// recoverable in principle.
constexpr double kFilamentCellProb = 0.6;
constexpr double kFilamentScale = 6.0;
constexpr int kFilamentLength = 3;
constexpr int kFilamentMinCell = 6;

// Random directions made mutually orthogonal (Gram-Schmidt over gaussian
// draws), each scaled to magnitude sigma * sqrt(dim). Orthogonality keeps
// the separation between groups uniform instead of leaving it to the luck
// of the draw; directions beyond the dimension stay plain gaussians.
std::vector<std::vector<double>> orthogonal_directions(
    std::size_t count, std::size_t dim, double sigma, std::mt19937_64& rng,
    std::normal_distribution<double>& gauss) {
    const double target = sigma * std::sqrt(static_cast<double>(dim));
    std::vector<std::vector<double>> dirs;
    dirs.reserve(count);
    for (std::size_t c = 0; c < count; ++c) {
        std::vector<double> v(dim);
        for (double& x : v) x = gauss(rng);
        if (c < dim) {
            for (const auto& prev : dirs) {
                double dot = 0.0;
                for (std::size_t t = 0; t < dim; ++t) dot += v[t] * prev[t];
                const double scale = dot / (target * target);
                for (std::size_t t = 0; t < dim; ++t) v[t] -= scale * prev[t];
            }
        }
        double sq = 0.0;
        for (double x : v) sq += x * x;
        const double rescale = target / std::sqrt(sq);
        for (double& x : v) x *= rescale;
        dirs.push_back(std::move(v));
    }
    return dirs;
}

}  // namespace

SynthDataset generate(const SynthConfig& cfg) {
    cfg.validate();
    std::vector<Viewpoint> vps = cfg.viewpoints;
    std::sort(vps.begin(), vps.end());

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto dim = static_cast<std::size_t>(cfg.dim);

    // One fixed offset direction per viewpoint, shared by all identities.
    const auto anchors = orthogonal_directions(
        vps.size(), dim, cfg.viewpoint_offset_scale, rng, gauss);
    const auto centers =
        orthogonal_directions(static_cast<std::size_t>(cfg.identities), dim,
                              cfg.identity_spread, rng, gauss);

    SynthDataset ds;
    const std::size_t total = static_cast<std::size_t>(cfg.identities) *
                              vps.size() *
                              static_cast<std::size_t>(
                                  cfg.samples_per_identity_viewpoint);
    ds.embeddings.n = total;
    ds.embeddings.d = dim;
    ds.embeddings.data.reserve(total * dim);
    ds.meta.reserve(total);

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const int per_cell = cfg.samples_per_identity_viewpoint;
    const bool filaments_possible = per_cell >= kFilamentMinCell;
    std::vector<double> filament_dir(dim);
    std::size_t index = 0;
    for (std::size_t id = 0; id < centers.size(); ++id) {
        for (std::size_t v = 0; v < vps.size(); ++v) {
            bool filament = false;
            if (filaments_possible) {
                filament = unif(rng) < kFilamentCellProb;
                if (filament) {
                    for (double& x : filament_dir) {
                        x = cfg.within_cluster_noise * kFilamentScale *
                            gauss(rng);
                    }
                }
            }
            // Graded magnitudes: the innermost member stays within the
            // cluster's reciprocal neighborhood and anchors the rescue
            // chain; each step is smaller than the previous drift so every
            // member stays nearest to its predecessor.
            static constexpr double kDriftSteps[kFilamentLength] = {0.25, 0.5,
                                                                    0.95};
            for (int s = 0; s < per_cell; ++s) {
                const int tail = per_cell - s;  // 1 for the last sample
                const double drift = filament && tail <= kFilamentLength
                                         ? kDriftSteps[kFilamentLength - tail]
                                         : 0.0;
                double sq = 0.0;
                std::vector<double> x(dim);
                for (std::size_t t = 0; t < dim; ++t) {
                    x[t] = centers[id][t] + anchors[v][t] +
                           drift * filament_dir[t] +
                           cfg.within_cluster_noise * gauss(rng);
                    sq += x[t] * x[t];
                }
                const double inv = 1.0 / std::sqrt(sq);
                for (double& c : x) c *= inv;
                ds.embeddings.data.insert(ds.embeddings.data.end(), x.begin(),
                                          x.end());

                SampleMeta m;
                m.index = index++;
                m.camera = "cam_" + std::string(to_string(vps[v]));
                m.viewpoint = vps[v];
                m.gt_id = "id_" + std::to_string(id);
                m.split = Split::train;
                ds.meta.push_back(std::move(m));
            }
        }
    }
    return ds;
}

std::vector<SampleMeta> inject_viewpoint_errors(std::vector<SampleMeta> meta,
                                                double error_rate,
                                                std::uint64_t seed) {
    if (error_rate < 0.0 || error_rate > 1.0) {
        throw std::invalid_argument("error_rate must lie in [0,1]");
    }
    std::vector<std::size_t> train_positions;
    for (std::size_t i = 0; i < meta.size(); ++i) {
        if (meta[i].split == Split::train) train_positions.push_back(i);
    }
    // floor(rate * n), nudged so decimal rates like 0.3 hit the intended
    // integer despite binary rounding.
    const auto flips = static_cast<std::size_t>(std::floor(
        error_rate * static_cast<double>(train_positions.size()) + 1e-9));
    if (flips == 0) return meta;

    std::mt19937_64 rng(seed);
    // Partial Fisher-Yates: the first `flips` entries are a uniform sample.
    for (std::size_t t = 0; t < flips; ++t) {
        std::uniform_int_distribution<std::size_t> pick(
            t, train_positions.size() - 1);
        std::swap(train_positions[t], train_positions[pick(rng)]);
    }
    for (std::size_t t = 0; t < flips; ++t) {
        SampleMeta& m = meta[train_positions[t]];
        if (!m.viewpoint.has_value()) {
            throw std::invalid_argument("train sample " +
                                        std::to_string(m.index) +
                                        " has no viewpoint");
        }
        std::vector<Viewpoint> wrong;
        for (Viewpoint v : all_viewpoints) {
            if (v != *m.viewpoint) wrong.push_back(v);
        }
        std::uniform_int_distribution<std::size_t> pick(0, wrong.size() - 1);
        m.viewpoint = wrong[pick(rng)];
    }
    return meta;
}

}  // namespace vapc
