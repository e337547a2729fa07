#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ecp/earf.hpp"
#include "ecp/emsf.hpp"
#include "ecp/etcs.hpp"
#include "ecp/event.hpp"
#include "ecp/esim.hpp"

namespace ecp {

/// Full cascade configuration. Serialized as JSON; every field has a
/// documented default (see `--print-config`).
struct PipelineConfig {
    // Event source: either an event file or a frame directory to simulate from.
    std::string event_path;
    EventFormat event_format = EventFormat::TextCsv;
    std::uint16_t sensor_width = 0;
    std::uint16_t sensor_height = 0;

    std::string frame_dir;         // optional; triggers esim when set
    std::string frame_timestamps;  // sidecar for frame_dir
    EsimParams esim;

    std::uint64_t delta_t_us = 1'000'000;
    std::optional<std::uint64_t> origin_us;  // defaults to stream t_start
    DensityFilterParams density;
    EtcsParams etcs;

    std::uint16_t grid_rows = 12;
    std::uint16_t grid_cols = 18;
    double emsf_rho = 1.0;
    PruneSchedule schedule;  // defaults: layers (3,9,17), gamma (0.8,0.6,0.5), rho (1,1,1)

    // Attention source: glob over ECPATT01 files, or a synthetic profile.
    std::string attention_glob;
    std::vector<double> synth_multipliers;  // per pruning layer when synthetic
    double synth_noise = 0.0;
    std::size_t n_queries = 4;
    std::size_t n_text_tokens = 8;
    double partition_margin = 0.15;

    std::vector<std::uint64_t> frame_times_us;  // explicit frame timeline
    std::size_t uniform_frames = 16;            // fallback frame count when no timeline given

    std::optional<double> final_ratio;  // when set, overrides emsf_rho and schedule.rho
    std::size_t model_layers = 28;
    std::size_t d_k = 128;

    std::string out_dir = "out";
    std::uint64_t seed = 0;
    std::size_t threads = 1;

    static PipelineConfig from_json_text(const std::string& text);
    static PipelineConfig from_json_file(const std::string& path);
    std::string to_json_text() const;
};

/// Analytical attention-cost accounting. Wall-clock timing is reported on
/// stderr only, so output artifacts stay byte-identical across runs.
struct EfficiencyReport {
    struct LayerEntry {
        std::size_t layer = 0;
        std::size_t tokens_before = 0;
        std::size_t tokens_after = 0;
        double attention_cost = 0.0;           // c * tokens_after^2 * d_k
        double baseline_cost = 0.0;            // c * full_tokens^2 * d_k
    };
    std::vector<LayerEntry> layers;
    double total_cost = 0.0;
    double baseline_total = 0.0;
    double reduction_ratio = 0.0;  // total / baseline, in (0,1]
};

struct PruneResult {
    KeyframeSet keyframes;
    std::vector<SaliencyMap> saliency;                 // one per keyframe
    std::vector<RetainedSet> emsf_retained;            // one per keyframe
    std::vector<ActiveSet> layer_states;               // active sets after each pruning layer
    PruneSchedule schedule;
    double emsf_rho = 1.0;
    std::size_t grid_tokens = 0;
};

/// Geometric split of a requested final retention across the EMSF stage and
/// every EARF layer: each stage gets final_ratio^(1/(n_earf_layers+1)).
/// Returns false (with a stderr warning from the caller) when min-1-token
/// floors make the request unreachable for the given token count.
struct RatioSplit {
    double emsf_rho;
    std::vector<double> layer_rho;
    bool reachable;
};
RatioSplit solve_final_ratio(double final_ratio, std::size_t n_earf_layers,
                             std::size_t tokens_per_frame);

/// Apply the EMSF floor then each EARF floor in sequence; the bookkeeping
/// oracle for per-frame retained counts.
std::vector<std::size_t> cascade_token_counts(std::size_t tokens_per_frame, double emsf_rho,
                                              const std::vector<double>& layer_rho);

EfficiencyReport flops_model(const std::vector<std::size_t>& tokens_per_layer,
                             std::size_t full_tokens, std::size_t d_k);

/// Run the full cascade and write every intermediate artifact under
/// config.out_dir. Deterministic given config + seed, independent of threads.
PruneResult run_pipeline(const PipelineConfig& config, EfficiencyReport* report = nullptr);

}  // namespace ecp
