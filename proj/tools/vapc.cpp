#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vapc/eval.hpp"
#include "vapc/io.hpp"
#include "vapc/pipeline.hpp"
#include "vapc/synth.hpp"

namespace {

using namespace vapc;

int fail(const std::string& category, const std::string& detail) {
    std::cerr << "error: " << category << ": " << detail << "\n";
    return 1;
}

void add_config_options(CLI::App* cmd, PipelineConfig& cfg) {
    cmd->add_option("--k", cfg.k, "neighbor count for the expanded sets");
    cmd->add_option("--k-tilde", cfg.k_tilde,
                    "reciprocal-check count in noise selection");
    cmd->add_option("--ti", cfg.ti, "rank of the pair distance fixing tau");
    cmd->add_option("--ti-quantile",
                    "set tau from a fraction of the cross-viewpoint pair "
                    "count instead of an absolute rank")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--beta", cfg.beta, "softmax temperature");
    cmd->add_option("--eps", cfg.eps, "density radius on the Jaccard scale");
    cmd->add_option("--min-pts", cfg.min_pts, "density count, self included");
    cmd->add_option("--epochs", cfg.recognition_epochs,
                    "recognition-stage epochs");
    cmd->add_option("--iterations", cfg.iterations, "clustering iterations");
    cmd->add_option("--refine-rate", cfg.refine_rate,
                    "feature refinement step size");
    cmd->add_option("--refine-passes", cfg.refine_passes,
                    "refinement passes per iteration");
    cmd->add_option("--seed", cfg.seed, "random seed");
    cmd->add_flag_callback(
        "--no-noise-select",
        [&cfg] { cfg.noise_select_enabled = false; },
        "send DBSCAN noise straight to singleton clusters");
    cmd->parse_complete_callback([cmd, &cfg]() {
        const auto* opt = cmd->get_option("--ti-quantile");
        if (opt->count() > 0) cfg.ti_quantile = opt->as<double>();
    });
}

std::vector<double> parse_rates(const std::string& csv) {
    std::vector<double> rates;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        rates.push_back(std::stod(item));
    }
    return rates;
}

int run_command(const std::string& embeddings, const std::string& meta,
                const std::string& out_dir, const PipelineConfig& cfg,
                PipelineMode mode) {
    const RunResult result =
        run_and_write(embeddings, meta, out_dir, cfg, mode);
    const auto& m = result.manifest;
    std::cout << "mode: " << to_string(m.mode) << "\n"
              << "train samples: " << m.train_count << "\n";
    if (m.tau) {
        std::cout << "tau: " << m.tau->tau << " (rank " << m.tau->rank
                  << " of " << m.tau->pair_count << " pairs)\n";
    }
    for (const IterationStats& it : m.iterations) {
        std::cout << "iteration " << it.iteration << ": clusters "
                  << it.cluster_count << ", noise "
                  << it.noise_before_selection << ", merges "
                  << it.merge_count;
        if (it.ami) std::cout << ", ami " << *it.ami;
        std::cout << "\n";
    }
    if (m.final_metrics && m.final_metrics->ami) {
        std::cout << "final ami: " << *m.final_metrics->ami
                  << " (iteration " << m.best_iteration << ")\n";
    }
    std::cout << "artifacts written to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"viewpoint-aware progressive clustering for unlabeled "
                 "re-identification embeddings"};
    app.require_subcommand(1);

    std::string embeddings_path;
    std::string meta_path;
    std::string out_dir = ".";
    PipelineConfig cfg;

    auto add_dataset_options = [&](CLI::App* cmd) {
        cmd->add_option("--embeddings", embeddings_path, "embedding file")
            ->required();
        cmd->add_option("--meta", meta_path, "metadata file (JSON lines)")
            ->required();
        cmd->add_option("--out-dir", out_dir, "output directory");
    };

    CLI::App* run = app.add_subcommand(
        "run", "run the full two-period clustering pipeline");
    add_dataset_options(run);
    add_config_options(run, cfg);

    CLI::App* baseline = app.add_subcommand(
        "baseline", "comparison arm: global clustering without the "
                    "viewpoint partition");
    add_dataset_options(baseline);
    add_config_options(baseline, cfg);

    CLI::App* sweep = app.add_subcommand(
        "sweep-viewpoint-error",
        "re-run the pipeline under corrupted viewpoint labels");
    add_dataset_options(sweep);
    add_config_options(sweep, cfg);
    std::string rates_csv = "0,0.1,0.3,0.5";
    sweep->add_option("--rates", rates_csv, "comma-separated error rates");

    CLI::App* eval_cmd = app.add_subcommand(
        "eval", "query/gallery retrieval metrics (mAP, CMC)");
    add_dataset_options(eval_cmd);
    std::string protocol_name = "cross_camera";
    eval_cmd->add_option("--protocol", protocol_name,
                         "cross_camera or all_gallery");

    CLI::App* gen = app.add_subcommand(
        "gen", "generate a synthetic embedding dataset");
    SynthConfig synth_cfg;
    std::string gen_out = ".";
    std::string viewpoints_csv;
    gen->add_option("--out-dir", gen_out, "output directory");
    gen->add_option("--identities", synth_cfg.identities, "identity count");
    gen->add_option("--dim", synth_cfg.dim, "embedding dimension");
    gen->add_option("--samples", synth_cfg.samples_per_identity_viewpoint,
                    "samples per identity and viewpoint");
    gen->add_option("--sigma-id", synth_cfg.identity_spread,
                    "identity center spread");
    gen->add_option("--sigma-vp", synth_cfg.viewpoint_offset_scale,
                    "viewpoint offset scale");
    gen->add_option("--sigma-w", synth_cfg.within_cluster_noise,
                    "within-cluster noise");
    gen->add_option("--seed", synth_cfg.seed, "random seed");
    gen->add_option("--viewpoints", viewpoints_csv,
                    "comma-separated viewpoint subset (default: all five)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            return run_command(embeddings_path, meta_path, out_dir, cfg,
                               PipelineMode::viewpoint);
        }
        if (baseline->parsed()) {
            return run_command(embeddings_path, meta_path, out_dir, cfg,
                               PipelineMode::global);
        }
        if (sweep->parsed()) {
            const EmbeddingSet raw = read_embeddings(embeddings_path);
            const std::vector<SampleMeta> meta = read_metadata(meta_path);
            const std::vector<double> rates = parse_rates(rates_csv);
            nlohmann::json out = nlohmann::json::array();
            for (std::size_t r = 0; r < rates.size(); ++r) {
                const std::uint64_t inject_seed =
                    cfg.seed * 1000003ULL + static_cast<std::uint64_t>(r);
                const auto corrupted =
                    inject_viewpoint_errors(meta, rates[r], inject_seed);
                const RunResult result = run_pipeline(raw, corrupted, cfg);
                nlohmann::json entry;
                entry["rate"] = rates[r];
                entry["final_ami"] =
                    result.manifest.final_metrics &&
                            result.manifest.final_metrics->ami
                        ? nlohmann::json(*result.manifest.final_metrics->ami)
                        : nlohmann::json(nullptr);
                entry["cluster_count"] =
                    result.manifest.iterations.empty()
                        ? 0
                        : result.manifest.iterations.back().cluster_count;
                std::cout << "rate " << rates[r] << ": final ami "
                          << entry["final_ami"].dump() << "\n";
                out.push_back(std::move(entry));
            }
            std::filesystem::create_directories(out_dir);
            std::ofstream sweep_out(std::filesystem::path(out_dir) /
                                    "sweep.json");
            sweep_out << out.dump(2) << "\n";
            std::cout << "sweep written to " << out_dir << "/sweep.json\n";
            return 0;
        }
        if (eval_cmd->parsed()) {
            const auto mode = parse_retrieval_mode(protocol_name);
            if (!mode) {
                return fail("config", "unknown protocol \"" + protocol_name +
                                          "\"");
            }
            const EmbeddingSet raw = read_embeddings(embeddings_path);
            const std::vector<SampleMeta> meta = read_metadata(meta_path);
            const ValidationReport report = validate_dataset(raw, meta);
            if (!report.ok()) {
                return fail("validation", report.summary());
            }
            EventLog events;
            const MetricsReport metrics = evaluate_retrieval(
                normalize_rows(raw), meta, RetrievalProtocol{*mode},
                {1, 5, 20}, &events);
            const std::string doc = metrics_to_json(metrics);
            std::filesystem::create_directories(out_dir);
            std::ofstream report_out(std::filesystem::path(out_dir) /
                                     "report.json");
            report_out << doc << "\n";
            std::cout << doc << "\n";
            return 0;
        }
        if (gen->parsed()) {
            if (!viewpoints_csv.empty()) {
                synth_cfg.viewpoints.clear();
                std::stringstream ss(viewpoints_csv);
                std::string item;
                while (std::getline(ss, item, ',')) {
                    const auto vp = parse_viewpoint(item);
                    if (!vp) {
                        return fail("config",
                                    "unknown viewpoint \"" + item + "\"");
                    }
                    synth_cfg.viewpoints.push_back(*vp);
                }
            }
            const SynthDataset ds = generate(synth_cfg);
            std::filesystem::create_directories(gen_out);
            const auto dir = std::filesystem::path(gen_out);
            write_embeddings(dir / "embeddings.bin", ds.embeddings);
            write_metadata(dir / "meta.jsonl", ds.meta);
            std::cout << "generated " << ds.embeddings.n << " samples of "
                      << "dimension " << ds.embeddings.d << " into " << gen_out
                      << "\n";
            return 0;
        }
    } catch (const IoError& e) {
        return fail(std::string(to_string(e.kind)), e.what());
    } catch (const ValidationError& e) {
        return fail("validation", e.what());
    } catch (const std::invalid_argument& e) {
        return fail("config", e.what());
    } catch (const std::exception& e) {
        return fail("runtime", e.what());
    }
    return 0;
}
