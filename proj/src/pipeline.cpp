#include "vapc/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <type_traits>
#include <unordered_map>

#include <json.hpp>

#include "vapc/memory.hpp"
#include "vapc/metric.hpp"

namespace vapc {

namespace {

using Clock = std::chrono::steady_clock;

class StageClock {
public:
    explicit StageClock(std::vector<StageTiming>& sink) : sink_(sink) {}

    template <typename F>
    auto time(const std::string& stage, F&& fn) {
        const auto start = Clock::now();
        if constexpr (std::is_void_v<decltype(fn())>) {
            fn();
            record(stage, start);
        } else {
            auto result = fn();
            record(stage, start);
            return result;
        }
    }

private:
    void record(const std::string& stage, Clock::time_point start) {
        const std::chrono::duration<double> elapsed = Clock::now() - start;
        sink_.push_back({stage, elapsed.count()});
    }
    std::vector<StageTiming>& sink_;
};

// Ground-truth ids mapped to dense ints, in train order; empty when any
// train sample lacks an id.
std::vector<int> gt_labels(const std::vector<SampleMeta>& train_meta) {
    std::vector<int> labels;
    labels.reserve(train_meta.size());
    std::unordered_map<std::string, int> remap;
    for (const SampleMeta& m : train_meta) {
        if (!m.gt_id.has_value()) return {};
        auto [it, inserted] =
            remap.try_emplace(*m.gt_id, static_cast<int>(remap.size()));
        labels.push_back(it->second);
    }
    return labels;
}

long resolve_ti(const PipelineConfig& cfg, std::size_t pair_count,
                EventLog& events) {
    if (!cfg.ti_quantile.has_value()) return cfg.ti;
    const auto scaled = static_cast<long>(std::llround(
        *cfg.ti_quantile * static_cast<double>(pair_count)));
    const long ti = std::clamp<long>(scaled, 1,
                                     static_cast<long>(pair_count));
    events.note("ti resolved from quantile " +
                std::to_string(*cfg.ti_quantile) + " to rank " +
                std::to_string(ti) + " of " + std::to_string(pair_count) +
                " cross-viewpoint pairs");
    return ti;
}

RunResult run_impl(const EmbeddingSet& raw,
                   const std::vector<SampleMeta>& meta,
                   const PipelineConfig& cfg, PipelineMode mode) {
    cfg.validate();

    RunResult result;
    RunManifest& manifest = result.manifest;
    manifest.config = cfg;
    manifest.mode = mode;
    EventLog events;
    StageClock clock(manifest.timings);

    const ValidationReport report = clock.time(
        "validate", [&] { return validate_dataset(raw, meta); });
    if (!report.ok()) {
        throw ValidationError(report, "dataset rejected: " + report.summary());
    }

    std::vector<SampleMeta> ordered = meta;
    std::sort(ordered.begin(), ordered.end(),
              [](const SampleMeta& a, const SampleMeta& b) {
                  return a.index < b.index;
              });

    std::vector<std::size_t> train_rows;
    std::vector<SampleMeta> train_meta;
    for (const SampleMeta& m : ordered) {
        if (m.split != Split::train) continue;
        train_rows.push_back(m.index);
        SampleMeta local = m;
        local.index = train_meta.size();  // renumber into the train subspace
        train_meta.push_back(std::move(local));
    }
    if (train_meta.empty()) {
        throw std::invalid_argument("dataset has no train samples");
    }
    manifest.train_count = train_meta.size();

    EmbeddingSet train = clock.time("normalize", [&] {
        return normalize_rows(subset_rows(raw, train_rows));
    });

    std::map<Viewpoint, std::vector<std::size_t>> partition =
        partition_by_viewpoint(train_meta);
    manifest.viewpoint_count = partition.size();
    if (mode == PipelineMode::global) {
        // One flat group; the grouping viewpoint key is arbitrary.
        std::vector<std::size_t> everything(train_meta.size());
        std::iota(everything.begin(), everything.end(), std::size_t{0});
        partition = {{Viewpoint::front, std::move(everything)}};
    }

    const std::vector<int> truth = gt_labels(train_meta);
    if (truth.empty()) {
        events.note("ami skipped: ground-truth ids are not complete");
    }

    RecognitionResult rec = clock.time("recognition", [&] {
        return recognition_stage(train, cfg.recognition_epochs, cfg.beta,
                                 cfg.refine_rate, &events);
    });
    EmbeddingSet emb = std::move(rec.embeddings);

    const bool mergeable = mode == PipelineMode::viewpoint &&
                           partition.size() >= 2;
    if (!mergeable) {
        events.note(mode == PipelineMode::global
                        ? "second period skipped: global mode"
                        : "second period skipped: fewer than two viewpoints");
    } else {
        manifest.tau = clock.time("tau", [&] {
            std::size_t pair_count =
                train.n * (train.n - 1) / 2;
            for (const auto& [vp, indices] : partition) {
                pair_count -= indices.size() * (indices.size() - 1) / 2;
            }
            const long ti = resolve_ti(cfg, pair_count, events);
            return compute_tau(emb, partition, ti);
        });
        if (manifest.tau->clamped) {
            events.note("tau rank clamped to the largest cross-viewpoint "
                        "pair (" + std::to_string(manifest.tau->rank) + ")");
        }
    }

    // Iteration 0: the index labeling from the recognition stage.
    auto record_labels = [&](const ClusterState& state, int iteration) {
        for (std::size_t i = 0; i < state.labels.size(); ++i) {
            result.label_history.push_back(
                {train_rows[i], state.labels[i], iteration});
        }
    };
    ClusterState initial;
    initial.labels.resize(train.n);
    std::iota(initial.labels.begin(), initial.labels.end(), 0);
    initial.viewpoint_of.reserve(train.n);
    for (const SampleMeta& m : train_meta) {
        initial.viewpoint_of.push_back(*m.viewpoint);
    }
    record_labels(initial, 0);

    ClusterState best_state = initial;
    double best_ami = truth.empty()
                          ? 0.0
                          : ami(initial.labels, truth, cfg.ami_normalizer);
    manifest.best_iteration = 0;
    ClusterState last_state = initial;

    const auto loop_start = Clock::now();
    for (int it = 1; it <= cfg.iterations; ++it) {
        IterationStats stats;
        stats.iteration = it;

        FirstPeriodResult fp = first_period(emb, partition, cfg);
        stats.noise_before_selection = noise_count(fp.state);

        ClusterState state =
            cfg.noise_select_enabled
                ? noise_select(fp.state, partition, fp.euclidean, cfg.k_tilde)
                : noise_to_singletons(fp.state);

        if (manifest.tau.has_value()) {
            SecondPeriodResult sp = second_period(state, emb, manifest.tau->tau);
            state = std::move(sp.state);
            stats.merge_count = sp.merge_count;
        }
        stats.cluster_count = cluster_count(state);

        if (!truth.empty()) {
            stats.ami = ami(state.labels, truth, cfg.ami_normalizer);
            result.ami_trajectory.push_back(*stats.ami);
            if (*stats.ami > best_ami) {
                best_ami = *stats.ami;
                best_state = state;
                manifest.best_iteration = it;
            }
        }
        record_labels(state, it);
        manifest.iterations.push_back(stats);
        last_state = state;

        FeatureMemory mem = memory_from_clusters(emb, state, cfg.beta, &events);
        for (int pass = 0; pass < cfg.refine_passes; ++pass) {
            if (pass > 0) mem = memory_from_clusters(emb, state, cfg.beta, &events);
            emb = refine_features(emb, state, mem, cfg.refine_rate);
        }
    }
    {
        const std::chrono::duration<double> elapsed = Clock::now() - loop_start;
        manifest.timings.push_back({"clustering_loop", elapsed.count()});
    }

    const ClusterState& chosen = truth.empty() ? last_state : best_state;
    result.final_labels.reserve(chosen.labels.size());
    for (std::size_t i = 0; i < chosen.labels.size(); ++i) {
        result.final_labels.emplace_back(train_rows[i], chosen.labels[i]);
    }

    // Final metrics: the chosen labeling's AMI, plus retrieval metrics when
    // the dataset carries query/gallery splits.
    MetricsReport final_metrics;
    final_metrics.iteration = manifest.best_iteration;
    if (!truth.empty()) {
        final_metrics.ami = ami(chosen.labels, truth, cfg.ami_normalizer);
    }
    const bool has_query = std::any_of(
        ordered.begin(), ordered.end(),
        [](const SampleMeta& m) { return m.split == Split::query; });
    const bool has_gallery = std::any_of(
        ordered.begin(), ordered.end(),
        [](const SampleMeta& m) { return m.split == Split::gallery; });
    if (has_query && has_gallery) {
        const MetricsReport retrieval = clock.time("retrieval_eval", [&] {
            return evaluate_retrieval(normalize_rows(raw), ordered,
                                      RetrievalProtocol{}, {1, 5, 20}, &events);
        });
        final_metrics.map = retrieval.map;
        final_metrics.cmc = retrieval.cmc;
        final_metrics.skipped_queries = retrieval.skipped_queries;
    }
    manifest.final_metrics = final_metrics;
    manifest.events = std::move(events.entries);
    return result;
}

}  // namespace

std::string_view to_string(PipelineMode m) {
    switch (m) {
        case PipelineMode::viewpoint: return "viewpoint";
        case PipelineMode::global: return "global";
    }
    return "?";
}

RunResult run_pipeline(const EmbeddingSet& raw,
                       const std::vector<SampleMeta>& meta,
                       const PipelineConfig& cfg) {
    return run_impl(raw, meta, cfg, PipelineMode::viewpoint);
}

RunResult run_baseline_global(const EmbeddingSet& raw,
                              const std::vector<SampleMeta>& meta,
                              const PipelineConfig& cfg) {
    return run_impl(raw, meta, cfg, PipelineMode::global);
}

RunResult run_and_write(const std::filesystem::path& embeddings_path,
                        const std::filesystem::path& meta_path,
                        const std::filesystem::path& out_dir,
                        const PipelineConfig& cfg, PipelineMode mode) {
    const EmbeddingSet raw = read_embeddings(embeddings_path);
    const std::vector<SampleMeta> meta = read_metadata(meta_path);
    RunResult result = mode == PipelineMode::viewpoint
                           ? run_pipeline(raw, meta, cfg)
                           : run_baseline_global(raw, meta, cfg);

    std::filesystem::create_directories(out_dir);
    write_labels(out_dir / "labels.csv", result.label_history);
    std::vector<LabelRow> best;
    best.reserve(result.final_labels.size());
    for (const auto& [index, label] : result.final_labels) {
        best.push_back({index, label, result.manifest.best_iteration});
    }
    write_labels(out_dir / "labels_best.csv", best);

    std::ofstream manifest_out(out_dir / "manifest.json");
    manifest_out << manifest_to_json(result.manifest) << '\n';
    return result;
}

namespace {

nlohmann::json config_to_json(const PipelineConfig& cfg) {
    nlohmann::json j;
    j["k"] = cfg.k;
    j["k_tilde"] = cfg.k_tilde;
    j["ti"] = cfg.ti;
    if (cfg.ti_quantile) j["ti_quantile"] = *cfg.ti_quantile;
    j["beta"] = cfg.beta;
    j["eps"] = cfg.eps;
    j["min_pts"] = cfg.min_pts;
    j["recognition_epochs"] = cfg.recognition_epochs;
    j["iterations"] = cfg.iterations;
    j["refine_rate"] = cfg.refine_rate;
    j["refine_passes"] = cfg.refine_passes;
    j["seed"] = cfg.seed;
    j["ami_normalizer"] =
        cfg.ami_normalizer == AmiNormalizer::arithmetic ? "arithmetic" : "max";
    j["noise_select"] = cfg.noise_select_enabled;
    return j;
}

nlohmann::json metrics_to_json_value(const MetricsReport& report) {
    nlohmann::json j;
    j["map"] = report.map;
    j["cmc"] = nlohmann::json::object();
    for (const auto& [rank, value] : report.cmc) {
        j["cmc"][std::to_string(rank)] = value;
    }
    if (report.ami) {
        j["ami"] = *report.ami;
    } else {
        j["ami"] = nullptr;
    }
    j["iteration"] = report.iteration;
    j["skipped_queries"] = report.skipped_queries;
    return j;
}

}  // namespace

std::string metrics_to_json(const MetricsReport& report) {
    return metrics_to_json_value(report).dump(2);
}

std::string manifest_to_json(const RunManifest& manifest) {
    nlohmann::json j;
    j["mode"] = to_string(manifest.mode);
    j["config"] = config_to_json(manifest.config);
    j["train_count"] = manifest.train_count;
    j["viewpoint_count"] = manifest.viewpoint_count;
    if (manifest.tau) {
        j["tau"] = {{"value", manifest.tau->tau},
                    {"rank", manifest.tau->rank},
                    {"pair_count", manifest.tau->pair_count},
                    {"clamped", manifest.tau->clamped}};
    } else {
        j["tau"] = nullptr;
    }
    j["iterations"] = nlohmann::json::array();
    for (const IterationStats& stats : manifest.iterations) {
        nlohmann::json it;
        it["iteration"] = stats.iteration;
        it["cluster_count"] = stats.cluster_count;
        it["noise_before_selection"] = stats.noise_before_selection;
        it["merge_count"] = stats.merge_count;
        if (stats.ami) {
            it["ami"] = *stats.ami;
        } else {
            it["ami"] = nullptr;
        }
        j["iterations"].push_back(std::move(it));
    }
    j["best_iteration"] = manifest.best_iteration;
    if (manifest.final_metrics) {
        j["final_metrics"] = metrics_to_json_value(*manifest.final_metrics);
    } else {
        j["final_metrics"] = nullptr;
    }
    j["events"] = manifest.events;
    j["timings"] = nlohmann::json::object();
    for (const StageTiming& t : manifest.timings) {
        j["timings"][t.stage] = t.seconds;
    }
    return j.dump(2);
}

}  // namespace vapc
