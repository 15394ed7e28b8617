#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vapc/cluster.hpp"
#include "vapc/core.hpp"
#include "vapc/eval.hpp"
#include "vapc/io.hpp"

namespace vapc {

enum class PipelineMode : std::uint8_t { viewpoint = 0, global };

std::string_view to_string(PipelineMode m);

struct IterationStats {
    int iteration = 0;  // 1-based loop iteration
    int cluster_count = 0;
    std::size_t noise_before_selection = 0;
    std::size_t merge_count = 0;
    std::optional<double> ami;  // vs ground truth, when available
};

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct RunManifest {
    PipelineConfig config;
    PipelineMode mode = PipelineMode::viewpoint;
    std::size_t train_count = 0;
    std::size_t viewpoint_count = 0;
    // tau is computed once after the recognition stage and stays fixed for
    // every iteration; absent when the second period cannot run.
    std::optional<TauResult> tau;
    std::vector<IterationStats> iterations;
    int best_iteration = 0;  // 0 = post-recognition index labeling
    std::optional<MetricsReport> final_metrics;
    std::vector<std::string> events;
    std::vector<StageTiming> timings;
};

struct RunResult {
    RunManifest manifest;
    // Final chosen labeling, keyed by original dataset index.
    std::vector<std::pair<std::size_t, int>> final_labels;
    // Labels per iteration for persistence (iteration 0 is the index
    // labeling produced by the recognition stage).
    std::vector<LabelRow> label_history;
    // Per-iteration AMI trajectory, loop iterations 1..N (empty without gt).
    std::vector<double> ami_trajectory;
};

struct ValidationError : std::runtime_error {
    ValidationReport report;
    ValidationError(ValidationReport r, const std::string& message)
        : std::runtime_error(message), report(std::move(r)) {}
};

// Full progressive-clustering run over the train split: validate ->
// normalize -> viewpoint partition -> recognition stage -> tau (frozen) ->
// iterate { first period -> noise selection -> second period -> memory
// rebuild -> feature refinement }. Keeps the best-AMI labeling when ground
// truth exists, otherwise the last one.
RunResult run_pipeline(const EmbeddingSet& raw,
                       const std::vector<SampleMeta>& meta,
                       const PipelineConfig& cfg);

// Comparison arm: identical loop without the viewpoint partition (one
// global group, no cross-viewpoint merge period).
RunResult run_baseline_global(const EmbeddingSet& raw,
                              const std::vector<SampleMeta>& meta,
                              const PipelineConfig& cfg);

// Runs the pipeline from files and writes labels.csv, labels_best.csv and
// manifest.json into out_dir.
RunResult run_and_write(const std::filesystem::path& embeddings_path,
                        const std::filesystem::path& meta_path,
                        const std::filesystem::path& out_dir,
                        const PipelineConfig& cfg, PipelineMode mode);

std::string manifest_to_json(const RunManifest& manifest);
std::string metrics_to_json(const MetricsReport& report);

}  // namespace vapc
