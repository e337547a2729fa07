#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ecp/attn_sim.hpp"
#include "ecp/bias.hpp"
#include "ecp/errors.hpp"
#include "ecp/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

ecp::PipelineConfig load_config(const std::string& config_path) {
    if (config_path.empty()) return ecp::PipelineConfig{};
    return ecp::PipelineConfig::from_json_file(config_path);
}

int cmd_simulate_events(const std::string& frames_dir, const std::string& timestamps,
                        const ecp::EsimParams& params, const std::string& out_file,
                        const std::string& format) {
    const ecp::FrameSequence seq = ecp::load_frame_dir(frames_dir, timestamps);
    const ecp::EventStream events = ecp::simulate_events(seq, params);
    const ecp::EventFormat fmt =
        format == "packed-binary" ? ecp::EventFormat::PackedBinary : ecp::EventFormat::TextCsv;
    std::ofstream out(out_file, std::ios::binary);
    if (!out) throw ecp::DataError("cannot write " + out_file);
    ecp::write_events(out, events, fmt);
    std::cerr << "[ecp] wrote " << events.size() << " events to " << out_file << "\n";
    return 0;
}

int cmd_analyze_bias(const std::string& glob, std::uint16_t rows, std::uint16_t cols,
                     double margin, const std::string& out_dir) {
    const ecp::RegionPartition part = ecp::partition_regions(rows, cols, margin);

    // Group peripheral-to-center ratios by layer; each frame in each map is
    // one ratio sample.
    std::map<std::uint32_t, std::vector<double>> ratios_by_layer;
    std::vector<std::string> paths;
    if (fs::is_directory(glob)) {
        for (const auto& e : fs::directory_iterator(glob)) {
            if (e.is_regular_file() && e.path().extension() == ".ecpatt")
                paths.push_back(e.path().string());
        }
    } else {
        paths.push_back(glob);
    }
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw ecp::DataError("analyze-bias: no .ecpatt maps found at " + glob);
    for (const auto& path : paths) {
        const ecp::AttentionMap map = ecp::read_attention_map_file(path);
        std::set<std::uint32_t> frames;
        for (const auto& e : map.visual_index) frames.insert(e.frame_index);
        for (std::uint32_t f : frames) {
            const auto mass = ecp::attention_readout(map, f);
            ratios_by_layer[map.layer].push_back(ecp::peripheral_ratio(mass, part));
        }
    }

    std::vector<ecp::BiasStatsEntry> entries;
    json jl = json::array();
    for (const auto& [layer, ratios] : ratios_by_layer) {
        ecp::BiasStatsEntry e = ecp::bias_stats(ratios);
        e.layer = static_cast<int>(layer);
        entries.push_back(e);
        jl.push_back(json{{"layer", e.layer},
                          {"mu", e.mu},
                          {"sigma", e.sigma},
                          {"d", e.degenerate ? json(nullptr) : json(e.cohens_d)},
                          {"t", e.degenerate ? json(nullptr) : json(e.t_stat)},
                          {"n", e.n}});
    }

    fs::create_directories(out_dir);
    {
        std::ofstream csv(fs::path(out_dir) / "bias_stats.csv");
        ecp::write_bias_csv(csv, entries);
        std::ofstream js(fs::path(out_dir) / "bias_stats.json");
        js << json{{"entries", jl}}.dump(2) << "\n";
    }
    std::ostringstream preview;
    ecp::write_bias_csv(preview, entries);
    std::cout << preview.str();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Event-guided visual token pruning pipeline"};
    app.require_subcommand(0, 1);

    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    std::size_t threads = 0;
    bool print_config = false;
    bool seed_set = false, final_ratio_set = false;
    app.add_option("--config", config_path, "pipeline config JSON");
    app.add_option("--out", out_dir, "output directory override");
    app.add_option("--seed", seed, "seed override");
    app.add_option("--threads", threads, "max worker threads");
    double final_ratio = 0.0;
    app.add_option("--final-ratio", final_ratio, "target final visual-token retention (0,1]")
        ->check(CLI::Range(1e-9, 1.0));
    app.add_flag("--print-config", print_config, "print the effective config and exit");

    auto* run = app.add_subcommand("run", "full cascade: events -> sampling -> saliency -> pruning");
    auto* sample = app.add_subcommand("sample", "event-triggered keyframe sampling only");
    auto* saliency = app.add_subcommand("saliency", "token-aligned saliency maps only");
    auto* prune = app.add_subcommand("prune", "cascade with prune report focus");

    auto* sim = app.add_subcommand("simulate-events", "simulate events from PGM frames");
    std::string sim_frames, sim_timestamps, sim_out = "events.csv", sim_format = "text-csv";
    ecp::EsimParams esim;
    sim->add_option("--frames", sim_frames, "PGM frame directory")->required();
    sim->add_option("--timestamps", sim_timestamps, "per-frame microsecond timestamps")->required();
    sim->add_option("--out-file", sim_out, "output event file");
    sim->add_option("--format", sim_format, "text-csv | packed-binary")
        ->check(CLI::IsMember({"text-csv", "packed-binary"}));
    sim->add_option("--c-pos", esim.c_pos, "positive contrast threshold");
    sim->add_option("--c-neg", esim.c_neg, "negative contrast threshold");
    sim->add_option("--t-ref", esim.t_ref, "refractory period (us)");

    auto* bias = app.add_subcommand("analyze-bias", "peripheral-bias statistics over attention maps");
    std::string bias_glob;
    std::uint16_t bias_rows = 12, bias_cols = 18;
    double bias_margin = 0.15;
    bias->add_option("--maps", bias_glob, "attention map file or directory")->required();
    bias->add_option("--rows", bias_rows, "token grid rows");
    bias->add_option("--cols", bias_cols, "token grid cols");
    bias->add_option("--margin", bias_margin, "margin fraction");

    auto* synth = app.add_subcommand("synth-attn", "generate synthetic biased attention maps");
    std::vector<std::uint32_t> synth_layers = {3, 9, 17};
    std::vector<double> synth_mults;
    double synth_noise = 0.0;
    std::size_t synth_frames = 4, synth_queries = 4, synth_text = 8;
    std::uint16_t synth_rows = 12, synth_cols = 18;
    double synth_margin = 0.15;
    synth->add_option("--layers", synth_layers, "layer indices");
    synth->add_option("--multipliers", synth_mults, "peripheral multiplier per layer");
    synth->add_option("--noise", synth_noise, "noise scale");
    synth->add_option("--frames", synth_frames, "frames per map");
    synth->add_option("--queries", synth_queries, "scoring query rows");
    synth->add_option("--text-tokens", synth_text, "leading text tokens");
    synth->add_option("--rows", synth_rows, "token grid rows");
    synth->add_option("--cols", synth_cols, "token grid cols");
    synth->add_option("--margin", synth_margin, "margin fraction");

    auto* flops = app.add_subcommand("flops", "analytical attention-cost model");
    std::vector<std::size_t> flops_counts;
    std::size_t flops_full = 0, flops_dk = 128;
    flops->add_option("--tokens", flops_counts, "visual token count per layer")->required();
    flops->add_option("--full", flops_full, "unpruned token count")->required();
    flops->add_option("--d-k", flops_dk, "key dimension");

    CLI11_PARSE(app, argc, argv);
    final_ratio_set = app.count("--final-ratio") > 0;
    seed_set = app.count("--seed") > 0;

    try {
        ecp::PipelineConfig config = load_config(config_path);
        if (!out_dir.empty()) config.out_dir = out_dir;
        if (seed_set) config.seed = seed;
        if (threads > 0) config.threads = threads;
        if (final_ratio_set) config.final_ratio = final_ratio;

        if (print_config) {
            std::cout << config.to_json_text();
            return 0;
        }

        if (sim->parsed()) {
            return cmd_simulate_events(sim_frames, sim_timestamps, esim, sim_out, sim_format);
        }
        if (bias->parsed()) {
            return cmd_analyze_bias(bias_glob, bias_rows, bias_cols, bias_margin,
                                    out_dir.empty() ? "out" : out_dir);
        }
        if (synth->parsed()) {
            const auto part = ecp::partition_regions(synth_rows, synth_cols, synth_margin);
            const std::string dir = out_dir.empty() ? "out" : out_dir;
            fs::create_directories(dir);
            for (std::size_t i = 0; i < synth_layers.size(); ++i) {
                const double mult = i < synth_mults.size() ? synth_mults[i] : 1.0;
                const auto map =
                    ecp::synth_biased_map(part, mult, synth_noise, synth_layers[i], synth_frames,
                                          synth_queries, synth_text, config.seed);
                const std::string path =
                    (fs::path(dir) / ("attn_layer" + std::to_string(synth_layers[i]) + ".ecpatt"))
                        .string();
                ecp::write_attention_map_file(path, map);
                std::cerr << "[ecp] wrote " << path << "\n";
            }
            return 0;
        }
        if (flops->parsed()) {
            const auto report = ecp::flops_model(flops_counts, flops_full, flops_dk);
            json j{{"reduction_ratio", report.reduction_ratio},
                   {"total_cost", report.total_cost},
                   {"baseline_total", report.baseline_total}};
            std::cout << j.dump(2) << "\n";
            std::cout << "layer,tokens_before,tokens_after,attention_cost,baseline_cost\n";
            for (const auto& l : report.layers) {
                std::cout << l.layer << ',' << l.tokens_before << ',' << l.tokens_after << ','
                          << l.attention_cost << ',' << l.baseline_cost << '\n';
            }
            return 0;
        }
        if (run->parsed() || sample->parsed() || saliency->parsed() || prune->parsed()) {
            ecp::EfficiencyReport report;
            const ecp::PruneResult result = ecp::run_pipeline(config, &report);
            if (sample->parsed()) {
                ecp::write_keyframe_manifest(std::cout, result.keyframes);
            } else if (saliency->parsed()) {
                std::cout << "wrote " << result.saliency.size() << " saliency maps to "
                          << config.out_dir << "\n";
            } else {
                std::cout << "retention reduction ratio: " << report.reduction_ratio << "\n";
                std::cout << "artifacts in " << config.out_dir << "\n";
            }
            return 0;
        }
        std::cerr << app.help();
        return 2;
    } catch (const ecp::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ecp::DataError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 3;
    } catch (const ecp::InvariantError& e) {
        std::cerr << "internal invariant violation: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
