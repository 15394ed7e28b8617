#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "vapc/pipeline.hpp"
#include "vapc/synth.hpp"

using namespace vapc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("vapc_pipe_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in),
            std::istreambuf_iterator<char>()};
}

SynthDataset small_dataset(std::uint64_t seed,
                           std::vector<Viewpoint> viewpoints = {
                               Viewpoint::front, Viewpoint::side,
                               Viewpoint::rear}) {
    SynthConfig cfg;
    cfg.identities = 8;
    cfg.viewpoints = std::move(viewpoints);
    cfg.dim = 24;
    cfg.samples_per_identity_viewpoint = 8;
    cfg.seed = seed;
    return generate(cfg);
}

PipelineConfig fast_config() {
    PipelineConfig cfg;
    cfg.iterations = 3;
    cfg.ti = 40;
    return cfg;
}

}  // namespace

TEST_CASE("zero iterations return the index labeling") {
    const SynthDataset ds = small_dataset(1);
    PipelineConfig cfg = fast_config();
    cfg.iterations = 0;
    const RunResult result = run_pipeline(ds.embeddings, ds.meta, cfg);
    REQUIRE(result.final_labels.size() == ds.embeddings.n);
    for (std::size_t i = 0; i < result.final_labels.size(); ++i) {
        CHECK(result.final_labels[i].first == i);
        CHECK(result.final_labels[i].second == static_cast<int>(i));
    }
    CHECK(result.manifest.iterations.empty());
    CHECK(result.manifest.best_iteration == 0);
}

TEST_CASE("the run records one tau and per-iteration stats") {
    const SynthDataset ds = small_dataset(2);
    const PipelineConfig cfg = fast_config();
    const RunResult result = run_pipeline(ds.embeddings, ds.meta, cfg);

    REQUIRE(result.manifest.tau.has_value());
    CHECK(result.manifest.iterations.size() ==
          static_cast<std::size_t>(cfg.iterations));
    for (const IterationStats& stats : result.manifest.iterations) {
        CHECK(stats.cluster_count > 0);
        CHECK(stats.ami.has_value());
    }
    // the manifest JSON carries exactly one top-level tau object
    const nlohmann::json j =
        nlohmann::json::parse(manifest_to_json(result.manifest));
    CHECK(j.count("tau") == 1);
    CHECK(j["tau"]["rank"] == result.manifest.tau->rank);

    // every persisted labeling is dense with no noise markers
    std::map<int, std::map<std::size_t, int>> by_iteration;
    for (const LabelRow& row : result.label_history) {
        CHECK(row.label >= 0);
        by_iteration[row.iteration][row.index] = row.label;
    }
    REQUIRE(by_iteration.size() ==
            static_cast<std::size_t>(cfg.iterations) + 1);  // + index labeling
    for (const auto& [iteration, labels] : by_iteration) {
        CHECK(labels.size() == ds.embeddings.n);
        std::set<int> distinct;
        for (const auto& [index, label] : labels) distinct.insert(label);
        CHECK(*distinct.begin() == 0);
        CHECK(*distinct.rbegin() == static_cast<int>(distinct.size()) - 1);
    }
}

TEST_CASE("identical runs write byte-identical label files") {
    const SynthDataset ds = small_dataset(3);
    TempDir dir;
    const fs::path emb = dir.path / "e.bin";
    const fs::path meta = dir.path / "m.jsonl";
    write_embeddings(emb, ds.embeddings);
    write_metadata(meta, ds.meta);

    const PipelineConfig cfg = fast_config();
    run_and_write(emb, meta, dir.path / "run1", cfg, PipelineMode::viewpoint);
    run_and_write(emb, meta, dir.path / "run2", cfg, PipelineMode::viewpoint);

    CHECK(slurp(dir.path / "run1/labels.csv") ==
          slurp(dir.path / "run2/labels.csv"));
    CHECK(slurp(dir.path / "run1/labels_best.csv") ==
          slurp(dir.path / "run2/labels_best.csv"));

    // manifests agree apart from wall-clock timings
    auto canonical = [](const fs::path& p) {
        nlohmann::json j = nlohmann::json::parse(slurp(p));
        j.erase("timings");
        return j.dump();
    };
    CHECK(canonical(dir.path / "run1/manifest.json") ==
          canonical(dir.path / "run2/manifest.json"));
}

TEST_CASE("single-viewpoint datasets skip the second period") {
    const SynthDataset ds = small_dataset(4, {Viewpoint::front});
    const PipelineConfig cfg = fast_config();
    const RunResult run = run_pipeline(ds.embeddings, ds.meta, cfg);
    CHECK_FALSE(run.manifest.tau.has_value());
    bool logged = false;
    for (const std::string& e : run.manifest.events) {
        logged |= e.find("second period skipped") != std::string::npos;
    }
    CHECK(logged);
    for (const IterationStats& stats : run.manifest.iterations) {
        CHECK(stats.merge_count == 0);
    }

    // and the global baseline produces the identical labeling there
    const RunResult base = run_baseline_global(ds.embeddings, ds.meta, cfg);
    CHECK(base.manifest.mode == PipelineMode::global);
    CHECK(run.final_labels == base.final_labels);
}

TEST_CASE("the baseline manifest is marked global") {
    const SynthDataset ds = small_dataset(5);
    const RunResult base =
        run_baseline_global(ds.embeddings, ds.meta, fast_config());
    CHECK(base.manifest.mode == PipelineMode::global);
    CHECK_FALSE(base.manifest.tau.has_value());
    const nlohmann::json j =
        nlohmann::json::parse(manifest_to_json(base.manifest));
    CHECK(j["mode"] == "global");
}

TEST_CASE("validation failures abort the run") {
    SynthDataset ds = small_dataset(6);
    ds.meta[3].viewpoint.reset();
    CHECK_THROWS_AS(run_pipeline(ds.embeddings, ds.meta, fast_config()),
                    ValidationError);

    std::vector<SampleMeta> empty;
    CHECK_THROWS_AS(run_pipeline(ds.embeddings, empty, fast_config()),
                    ValidationError);
}

TEST_CASE("a dataset without train samples is rejected") {
    SynthDataset ds = small_dataset(7);
    for (SampleMeta& m : ds.meta) m.split = Split::gallery;
    CHECK_THROWS_AS(run_pipeline(ds.embeddings, ds.meta, fast_config()),
                    std::invalid_argument);
}

TEST_CASE("query/gallery splits produce retrieval metrics in the manifest") {
    SynthDataset ds = small_dataset(8);
    // carve out a query and gallery split; keep ids so relevance exists
    for (std::size_t i = 0; i < ds.meta.size(); ++i) {
        if (i % 8 == 6) {
            ds.meta[i].split = Split::query;
            ds.meta[i].camera = "probe";
        }
        if (i % 8 == 7) ds.meta[i].split = Split::gallery;
    }
    const RunResult run = run_pipeline(ds.embeddings, ds.meta, fast_config());
    REQUIRE(run.manifest.final_metrics.has_value());
    CHECK(run.manifest.final_metrics->map > 0.0);
    CHECK(run.manifest.final_metrics->cmc.count(1) == 1);
    CHECK(run.manifest.final_metrics->cmc.at(20) >=
          run.manifest.final_metrics->cmc.at(1));
}

TEST_CASE("ami tracking is skipped without complete ground truth") {
    SynthDataset ds = small_dataset(9);
    ds.meta[0].gt_id.reset();
    const RunResult run = run_pipeline(ds.embeddings, ds.meta, fast_config());
    CHECK(run.ami_trajectory.empty());
    for (const IterationStats& stats : run.manifest.iterations) {
        CHECK_FALSE(stats.ami.has_value());
    }
    bool logged = false;
    for (const std::string& e : run.manifest.events) {
        logged |= e.find("ami skipped") != std::string::npos;
    }
    CHECK(logged);
}

TEST_CASE("ti quantile resolves against the cross-viewpoint pair count") {
    const SynthDataset ds = small_dataset(10);
    PipelineConfig cfg = fast_config();
    cfg.ti_quantile = 0.001;
    const RunResult run = run_pipeline(ds.embeddings, ds.meta, cfg);
    REQUIRE(run.manifest.tau.has_value());
    const std::size_t expected_rank = static_cast<std::size_t>(
        std::llround(0.001 * static_cast<double>(run.manifest.tau->pair_count)));
    CHECK(run.manifest.tau->rank == std::max<std::size_t>(1, expected_rank));
}

TEST_CASE("run_and_write persists labels, best labels and the manifest") {
    const SynthDataset ds = small_dataset(11);
    TempDir dir;
    write_embeddings(dir.path / "e.bin", ds.embeddings);
    write_metadata(dir.path / "m.jsonl", ds.meta);
    const RunResult run = run_and_write(dir.path / "e.bin", dir.path / "m.jsonl",
                                        dir.path / "out", fast_config(),
                                        PipelineMode::viewpoint);
    CHECK(fs::exists(dir.path / "out/labels.csv"));
    CHECK(fs::exists(dir.path / "out/labels_best.csv"));
    CHECK(fs::exists(dir.path / "out/manifest.json"));

    const auto best = read_labels(dir.path / "out/labels_best.csv");
    REQUIRE(best.size() == ds.embeddings.n);
    for (const LabelRow& row : best) {
        CHECK(row.iteration == run.manifest.best_iteration);
        CHECK(row.label >= 0);
    }
    const nlohmann::json manifest =
        nlohmann::json::parse(slurp(dir.path / "out/manifest.json"));
    CHECK(manifest["train_count"] == ds.embeddings.n);
}
