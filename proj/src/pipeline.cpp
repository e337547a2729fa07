#include "ecp/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "ecp/attn_sim.hpp"
#include "ecp/bias.hpp"
#include "ecp/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ecp {

namespace {

EventFormat format_from_string(const std::string& s) {
    if (s == "text-csv") return EventFormat::TextCsv;
    if (s == "packed-binary") return EventFormat::PackedBinary;
    throw ConfigError("unknown event format: " + s);
}

std::string format_to_string(EventFormat f) {
    return f == EventFormat::TextCsv ? "text-csv" : "packed-binary";
}

// Keyframe-level parallel map with deterministic output: results land in
// index slots, so scheduling order is irrelevant.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < n; i += threads) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace

PipelineConfig PipelineConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }

    PipelineConfig c;
    try {
        if (j.contains("events")) {
            const auto& e = j["events"];
            c.event_path = e.value("path", c.event_path);
            c.event_format = format_from_string(e.value("format", std::string("text-csv")));
            c.sensor_width = e.value("width", c.sensor_width);
            c.sensor_height = e.value("height", c.sensor_height);
        }
        if (j.contains("frames")) {
            const auto& f = j["frames"];
            c.frame_dir = f.value("dir", c.frame_dir);
            c.frame_timestamps = f.value("timestamps", c.frame_timestamps);
        }
        if (j.contains("esim")) {
            const auto& e = j["esim"];
            c.esim.c_pos = e.value("c_pos", c.esim.c_pos);
            c.esim.c_neg = e.value("c_neg", c.esim.c_neg);
            c.esim.t_ref = e.value("t_ref_us", c.esim.t_ref);
            c.esim.log_eps = e.value("log_eps", c.esim.log_eps);
        }
        if (j.contains("window")) {
            const auto& w = j["window"];
            c.delta_t_us = w.value("delta_t_us", c.delta_t_us);
            if (w.contains("origin_us") && !w["origin_us"].is_null()) {
                c.origin_us = w["origin_us"].get<std::uint64_t>();
            }
        }
        if (j.contains("density_filter")) {
            const auto& d = j["density_filter"];
            c.density.spatial_radius = d.value("spatial_radius", c.density.spatial_radius);
            c.density.temporal_radius = d.value("temporal_radius_us", c.density.temporal_radius);
            c.density.min_neighbors = d.value("min_neighbors", c.density.min_neighbors);
        }
        if (j.contains("etcs")) {
            const auto& e = j["etcs"];
            c.etcs.n_target = e.value("n_target", c.etcs.n_target);
            c.etcs.delta_share = e.value("delta_share", c.etcs.delta_share);
            c.etcs.min_gap = e.value("min_gap", c.etcs.min_gap);
            c.etcs.low_activity_quantile =
                e.value("low_activity_quantile", c.etcs.low_activity_quantile);
        }
        if (j.contains("grid")) {
            c.grid_rows = j["grid"].value("rows", c.grid_rows);
            c.grid_cols = j["grid"].value("cols", c.grid_cols);
        }
        if (j.contains("emsf")) c.emsf_rho = j["emsf"].value("rho", c.emsf_rho);
        c.schedule.layers = {3, 9, 17};
        c.schedule.gamma = {0.8, 0.6, 0.5};
        c.schedule.rho = {1.0, 1.0, 1.0};
        if (j.contains("schedule")) {
            const auto& s = j["schedule"];
            if (s.contains("layers")) c.schedule.layers = s["layers"].get<std::vector<std::uint32_t>>();
            if (s.contains("gamma")) c.schedule.gamma = s["gamma"].get<std::vector<double>>();
            if (s.contains("rho")) c.schedule.rho = s["rho"].get<std::vector<double>>();
        }
        if (j.contains("attention")) {
            const auto& a = j["attention"];
            c.attention_glob = a.value("glob", c.attention_glob);
            if (a.contains("multipliers")) {
                c.synth_multipliers = a["multipliers"].get<std::vector<double>>();
            }
            c.synth_noise = a.value("noise", c.synth_noise);
            c.n_queries = a.value("n_queries", c.n_queries);
            c.n_text_tokens = a.value("n_text_tokens", c.n_text_tokens);
            c.partition_margin = a.value("margin_fraction", c.partition_margin);
        }
        if (j.contains("timeline")) {
            const auto& t = j["timeline"];
            if (t.contains("frame_times_us")) {
                c.frame_times_us = t["frame_times_us"].get<std::vector<std::uint64_t>>();
            }
            c.uniform_frames = t.value("uniform_frames", c.uniform_frames);
        }
        if (j.contains("model")) {
            c.model_layers = j["model"].value("n_layers", c.model_layers);
            c.d_k = j["model"].value("d_k", c.d_k);
        }
        if (j.contains("final_ratio") && !j["final_ratio"].is_null()) {
            c.final_ratio = j["final_ratio"].get<double>();
        }
        c.out_dir = j.value("out", c.out_dir);
        c.seed = j.value("seed", c.seed);
        c.threads = j.value("threads", c.threads);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }
    c.schedule.validate();
    return c;
}

PipelineConfig PipelineConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json_text(text);
}

std::string PipelineConfig::to_json_text() const {
    json j;
    j["events"] = {{"path", event_path},
                   {"format", format_to_string(event_format)},
                   {"width", sensor_width},
                   {"height", sensor_height}};
    j["frames"] = {{"dir", frame_dir}, {"timestamps", frame_timestamps}};
    j["esim"] = {{"c_pos", esim.c_pos},
                 {"c_neg", esim.c_neg},
                 {"t_ref_us", esim.t_ref},
                 {"log_eps", esim.log_eps}};
    j["window"] = {{"delta_t_us", delta_t_us},
                   {"origin_us", origin_us ? json(*origin_us) : json(nullptr)}};
    j["density_filter"] = {{"spatial_radius", density.spatial_radius},
                           {"temporal_radius_us", density.temporal_radius},
                           {"min_neighbors", density.min_neighbors}};
    j["etcs"] = {{"n_target", etcs.n_target},
                 {"delta_share", etcs.delta_share},
                 {"min_gap", etcs.min_gap},
                 {"low_activity_quantile", etcs.low_activity_quantile}};
    j["grid"] = {{"rows", grid_rows}, {"cols", grid_cols}};
    j["emsf"] = {{"rho", emsf_rho}};
    j["schedule"] = {{"layers", schedule.layers}, {"gamma", schedule.gamma}, {"rho", schedule.rho}};
    j["attention"] = {{"glob", attention_glob},       {"multipliers", synth_multipliers},
                      {"noise", synth_noise},         {"n_queries", n_queries},
                      {"n_text_tokens", n_text_tokens}, {"margin_fraction", partition_margin}};
    j["timeline"] = {{"frame_times_us", frame_times_us}, {"uniform_frames", uniform_frames}};
    j["model"] = {{"n_layers", model_layers}, {"d_k", d_k}};
    j["final_ratio"] = final_ratio ? json(*final_ratio) : json(nullptr);
    j["out"] = out_dir;
    j["seed"] = seed;
    j["threads"] = threads;
    return j.dump(2) + "\n";
}

RatioSplit solve_final_ratio(double final_ratio, std::size_t n_earf_layers,
                             std::size_t tokens_per_frame) {
    if (final_ratio <= 0.0 || final_ratio > 1.0) {
        throw ConfigError("final_ratio must lie in (0,1]");
    }
    RatioSplit split;
    const double stage = std::pow(final_ratio, 1.0 / double(n_earf_layers + 1));
    split.emsf_rho = stage;
    split.layer_rho.assign(n_earf_layers, stage);

    // Unreachable when any stage floor would hit the min-1-token clamp.
    split.reachable = true;
    std::size_t n = tokens_per_frame;
    for (std::size_t s = 0; s < n_earf_layers + 1 && n > 0; ++s) {
        const auto k = static_cast<std::size_t>(std::floor(stage * double(n)));
        if (k == 0) split.reachable = false;
        n = std::max<std::size_t>(1, k);
    }
    return split;
}

std::vector<std::size_t> cascade_token_counts(std::size_t tokens_per_frame, double emsf_rho,
                                              const std::vector<double>& layer_rho) {
    std::vector<std::size_t> counts;
    counts.push_back(tokens_per_frame);
    std::size_t n = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(emsf_rho * double(tokens_per_frame))));
    counts.push_back(n);
    for (double r : layer_rho) {
        n = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(r * double(n))));
        counts.push_back(n);
    }
    return counts;
}

EfficiencyReport flops_model(const std::vector<std::size_t>& tokens_per_layer,
                             std::size_t full_tokens, std::size_t d_k) {
    if (full_tokens == 0) throw ConfigError("flops_model: full token count must be positive");
    // Attention-term cost model: c * tokens^2 * d_k per layer. c = 2 (QK^T
    // plus the weighted value sum); it cancels in every reported ratio.
    constexpr double kC = 2.0;
    EfficiencyReport report;
    const double baseline = kC * double(full_tokens) * double(full_tokens) * double(d_k);
    for (std::size_t l = 0; l < tokens_per_layer.size(); ++l) {
        if (tokens_per_layer[l] == 0) throw ConfigError("flops_model: zero token count");
        EfficiencyReport::LayerEntry entry;
        entry.layer = l;
        entry.tokens_before = l == 0 ? full_tokens : tokens_per_layer[l - 1];
        entry.tokens_after = tokens_per_layer[l];
        entry.attention_cost = kC * double(entry.tokens_after) * double(entry.tokens_after) * double(d_k);
        entry.baseline_cost = baseline;
        report.total_cost += entry.attention_cost;
        report.baseline_total += baseline;
        report.layers.push_back(entry);
    }
    report.reduction_ratio = report.total_cost / report.baseline_total;
    return report;
}

namespace {

// Minimal '*' glob over one path component; anything without '*' is taken
// literally (file or directory of .ecpatt files).
std::vector<std::string> expand_attention_glob(const std::string& pattern) {
    std::vector<std::string> out;
    if (pattern.find('*') == std::string::npos) {
        if (fs::is_directory(pattern)) {
            for (const auto& e : fs::directory_iterator(pattern)) {
                if (e.is_regular_file()) out.push_back(e.path().string());
            }
        } else {
            out.push_back(pattern);
        }
    } else {
        const fs::path p(pattern);
        const fs::path dir = p.parent_path().empty() ? "." : p.parent_path();
        const std::string name = p.filename().string();
        const auto star = name.find('*');
        const std::string prefix = name.substr(0, star);
        const std::string suffix = name.substr(star + 1);
        if (!fs::is_directory(dir)) throw DataError("attention glob directory missing: " + dir.string());
        for (const auto& e : fs::directory_iterator(dir)) {
            if (!e.is_regular_file()) continue;
            const std::string f = e.path().filename().string();
            if (f.size() >= prefix.size() + suffix.size() && f.starts_with(prefix) &&
                f.ends_with(suffix)) {
                out.push_back(e.path().string());
            }
        }
    }
    std::sort(out.begin(), out.end());
    if (out.empty()) throw DataError("attention glob matched no files: " + pattern);
    return out;
}

std::vector<std::uint64_t> uniform_timeline(std::uint64_t t_start, std::uint64_t t_end,
                                            std::size_t n, std::uint64_t fallback_span) {
    std::uint64_t span = t_end > t_start ? t_end - t_start : fallback_span;
    span = std::max<std::uint64_t>(span, n);  // keep timestamps strictly increasing
    std::vector<std::uint64_t> times(n);
    for (std::size_t i = 0; i < n; ++i) {
        times[i] = t_start + (span * (2 * i + 1)) / (2 * n);
    }
    return times;
}

KeyframeSet uniform_keyframes(const std::vector<std::uint64_t>& frame_times, std::size_t n_target) {
    KeyframeSet set;
    const std::size_t f = frame_times.size();
    const std::size_t n = std::min(n_target, f);
    std::vector<std::size_t> picks;
    for (std::size_t i = 0; i < n; ++i) {
        picks.push_back(n == 1 ? 0 : (i * (f - 1)) / (n - 1));
    }
    picks.erase(std::unique(picks.begin(), picks.end()), picks.end());
    for (std::size_t idx : picks) {
        set.frame_indices.push_back(idx);
        set.window_indices.push_back(idx);  // documented fallback: no event windows exist
        set.frame_times.push_back(frame_times[idx]);
    }
    return set;
}

json retained_stats(const std::vector<double>& calib, const std::vector<std::size_t>& kept) {
    double lo = 1.0, hi = 0.0, sum = 0.0;
    for (std::size_t pos : kept) {
        lo = std::min(lo, calib[pos]);
        hi = std::max(hi, calib[pos]);
        sum += calib[pos];
    }
    return json{{"score_min", lo}, {"score_max", hi}, {"score_mean", sum / double(kept.size())}};
}

}  // namespace

PruneResult run_pipeline(const PipelineConfig& config, EfficiencyReport* report_out) {
    const auto stage_start = std::chrono::steady_clock::now();
    auto log_stage = [last = stage_start](const char* name) mutable {
        const auto now = std::chrono::steady_clock::now();
        std::cerr << "[ecp] " << name << " "
                  << std::chrono::duration_cast<std::chrono::microseconds>(now - last).count()
                  << " us\n";
        last = now;
    };

    fs::create_directories(config.out_dir);
    const fs::path out_dir(config.out_dir);

    // Stage 0: event acquisition (ingest or simulate).
    EventStream stream;
    std::vector<std::uint64_t> frame_times = config.frame_times_us;
    if (!config.frame_dir.empty()) {
        const FrameSequence frames = load_frame_dir(config.frame_dir, config.frame_timestamps);
        stream = simulate_events(frames, config.esim);
        if (frame_times.empty()) frame_times = frames.timestamps;
    } else if (!config.event_path.empty()) {
        if (config.sensor_width == 0 || config.sensor_height == 0) {
            throw ConfigError("events.width/height must be set for event input");
        }
        stream = ingest_events_file(config.event_path, config.event_format, config.sensor_width,
                                    config.sensor_height);
    } else {
        throw ConfigError("config needs an event source: events.path or frames.dir");
    }
    if (frame_times.empty()) {
        frame_times = uniform_timeline(stream.t_start, stream.t_end, config.uniform_frames,
                                       config.delta_t_us * config.uniform_frames);
    }
    log_stage("ingest");

    // Retention budget: explicit stage ratios, or the geometric final-ratio split.
    PruneResult result;
    result.schedule = config.schedule;
    result.emsf_rho = config.emsf_rho;
    result.grid_tokens = std::size_t(config.grid_rows) * config.grid_cols;
    if (config.final_ratio) {
        const RatioSplit split =
            solve_final_ratio(*config.final_ratio, config.schedule.size(), result.grid_tokens);
        if (!split.reachable) {
            std::cerr << "[ecp] warning: final ratio " << *config.final_ratio
                      << " unreachable with min-1-token floors on " << result.grid_tokens
                      << " tokens\n";
        }
        result.emsf_rho = split.emsf_rho;
        result.schedule.rho = split.layer_rho;
    }

    // Stage 1: ETCS keyframe selection (uniform fallback for empty streams).
    WindowingParams windowing{config.delta_t_us, config.origin_us.value_or(stream.t_start)};
    const ActivityProfile profile = activity_flux(stream, windowing, config.density);
    if (stream.empty() || profile.flux.empty()) {
        result.keyframes = uniform_keyframes(frame_times, config.etcs.n_target);
    } else {
        result.keyframes = select_keyframes(profile, config.etcs, frame_times);
    }
    {
        std::ofstream mf(out_dir / "keyframes.txt");
        write_keyframe_manifest(mf, result.keyframes);
    }
    log_stage("etcs");

    // Stage 2: EMSF saliency + budgeted retention, per keyframe.
    const std::size_t n_frames = result.keyframes.frame_indices.size();
    if (n_frames == 0) throw InvariantError("keyframe selection returned no frames");
    const TokenGridSpec grid{config.grid_rows, config.grid_cols, stream.sensor_width,
                             stream.sensor_height};
    result.saliency.resize(n_frames);
    result.emsf_retained.resize(n_frames);
    parallel_for(n_frames, config.threads, [&](std::size_t f) {
        const std::uint64_t a = result.keyframes.frame_times[f];
        result.saliency[f] = token_saliency(stream, grid, {a, a + config.delta_t_us},
                                            config.density, result.keyframes.frame_indices[f]);
        result.emsf_retained[f] = retain_topk(result.saliency[f], result.emsf_rho);
    });
    for (std::size_t f = 0; f < n_frames; ++f) {
        std::ofstream csv(out_dir / ("saliency_f" + std::to_string(f) + ".csv"));
        write_saliency_csv(csv, result.saliency[f]);
        std::ofstream bin(out_dir / ("saliency_f" + std::to_string(f) + ".bin"), std::ios::binary);
        write_saliency_binary(bin, result.saliency[f], grid);
    }
    log_stage("emsf");

    // Stage 3: attention maps (files or synthetic fixtures).
    std::unordered_map<std::uint32_t, AttentionMap> maps;
    if (!config.attention_glob.empty()) {
        for (const auto& path : expand_attention_glob(config.attention_glob)) {
            AttentionMap m = read_attention_map_file(path);
            maps.emplace(m.layer, std::move(m));
        }
    } else {
        const RegionPartition part =
            partition_regions(config.grid_rows, config.grid_cols, config.partition_margin);
        std::vector<AttentionMap> generated(result.schedule.size());
        parallel_for(result.schedule.size(), config.threads, [&](std::size_t i) {
            const double mult = i < config.synth_multipliers.size() ? config.synth_multipliers[i] : 1.0;
            generated[i] = synth_biased_map(part, mult, config.synth_noise,
                                            result.schedule.layers[i], n_frames, config.n_queries,
                                            config.n_text_tokens, config.seed);
        });
        for (auto& m : generated) {
            write_attention_map_file(
                (out_dir / ("attn_layer" + std::to_string(m.layer) + ".ecpatt")).string(), m);
            maps.emplace(m.layer, std::move(m));
        }
    }
    log_stage("attention");

    // Stage 4: EARF layer-wise rank fusion and pruning.
    ActiveSet active;
    for (std::size_t t = 0; t < config.n_text_tokens; ++t) {
        active.text_tokens.push_back(static_cast<std::uint32_t>(t));
    }
    active.visual_tokens.resize(n_frames);
    for (std::size_t f = 0; f < n_frames; ++f) {
        for (std::size_t idx : result.emsf_retained[f].indices) {
            active.visual_tokens[f].push_back(static_cast<std::uint32_t>(idx));
        }
    }

    json prune_json;
    prune_json["layers"] = json::array();
    for (std::size_t s = 0; s < result.schedule.size(); ++s) {
        const std::uint32_t layer = result.schedule.layers[s];
        const auto it = maps.find(layer);
        if (it == maps.end()) {
            throw DataError("no attention map for pruning layer " + std::to_string(layer));
        }
        const AttentionMap& map = it->second;

        std::vector<VisualScore> scores(n_frames);
        json frames_json = json::array();
        for (std::size_t f = 0; f < n_frames; ++f) {
            const auto readout = attention_readout(map, static_cast<std::uint32_t>(f));
            if (readout.size() < result.grid_tokens) {
                throw DataError("attention map layer " + std::to_string(layer) +
                                " does not cover the token grid");
            }
            for (std::uint32_t tok : active.visual_tokens[f]) {
                scores[f].attention.push_back(readout[tok]);
                scores[f].event.push_back(result.saliency[f].saliency[tok]);
            }
        }
        const ActiveSet next =
            prune_layer(active, scores, result.schedule.gamma[s], result.schedule.rho[s]);
        for (std::size_t f = 0; f < n_frames; ++f) {
            const auto calib = calibrate(scores[f], result.schedule.gamma[s]);
            std::vector<std::size_t> kept_pos;
            for (std::uint32_t tok : next.visual_tokens[f]) {
                const auto pos = std::find(active.visual_tokens[f].begin(),
                                           active.visual_tokens[f].end(), tok) -
                                 active.visual_tokens[f].begin();
                kept_pos.push_back(static_cast<std::size_t>(pos));
            }
            json fj = retained_stats(calib, kept_pos);
            fj["frame"] = f;
            fj["budget"] = next.visual_tokens[f].size();
            fj["retained"] = next.visual_tokens[f];
            frames_json.push_back(std::move(fj));
        }
        prune_json["layers"].push_back(
            json{{"layer", layer},
                 {"gamma", result.schedule.gamma[s]},
                 {"rho", result.schedule.rho[s]},
                 {"frames", std::move(frames_json)}});

        active = next;
        active.layer = static_cast<int>(layer);
        result.layer_states.push_back(active);
    }
    log_stage("earf");

    // Final per-frame retention masks (u8 per grid token).
    for (std::size_t f = 0; f < n_frames; ++f) {
        std::vector<std::uint8_t> mask(result.grid_tokens, 0);
        for (std::uint32_t tok : active.visual_tokens[f]) mask[tok] = 1;
        std::ofstream mk(out_dir / ("mask_f" + std::to_string(f) + ".bin"), std::ios::binary);
        mk.write(reinterpret_cast<const char*>(mask.data()), std::streamsize(mask.size()));
    }
    {
        std::ofstream pj(out_dir / "prune_result.json");
        pj << prune_json.dump(2) << "\n";
    }

    // Efficiency accounting over the whole model depth (totals across frames).
    std::vector<std::size_t> per_layer_tokens(config.model_layers, 0);
    {
        std::size_t current = 0;
        for (std::size_t f = 0; f < n_frames; ++f) current += result.emsf_retained[f].indices.size();
        std::size_t stage = 0;
        for (std::size_t l = 0; l < config.model_layers; ++l) {
            while (stage < result.schedule.size() && l >= result.schedule.layers[stage]) {
                current = 0;
                for (std::size_t f = 0; f < n_frames; ++f) {
                    current += result.layer_states[stage].visual_tokens[f].size();
                }
                ++stage;
            }
            per_layer_tokens[l] = current;
        }
    }
    EfficiencyReport report =
        flops_model(per_layer_tokens, result.grid_tokens * n_frames, config.d_k);
    {
        json ej;
        ej["note"] = "analytical attention-term model only; not a measured GFLOPs figure";
        ej["d_k"] = config.d_k;
        ej["reduction_ratio"] = report.reduction_ratio;
        ej["total_cost"] = report.total_cost;
        ej["baseline_total"] = report.baseline_total;
        ej["layers"] = json::array();
        std::ofstream ec(out_dir / "efficiency.csv");
        ec << "layer,tokens_before,tokens_after,attention_cost,baseline_cost\n";
        for (const auto& l : report.layers) {
            ej["layers"].push_back(json{{"layer", l.layer},
                                        {"tokens_before", l.tokens_before},
                                        {"tokens_after", l.tokens_after},
                                        {"attention_cost", l.attention_cost},
                                        {"baseline_cost", l.baseline_cost}});
            ec << l.layer << ',' << l.tokens_before << ',' << l.tokens_after << ','
               << l.attention_cost << ',' << l.baseline_cost << '\n';
        }
        std::ofstream ejf(out_dir / "efficiency.json");
        ejf << ej.dump(2) << "\n";
    }
    log_stage("report");

    if (report_out) *report_out = report;
    return result;
}

}  // namespace ecp
