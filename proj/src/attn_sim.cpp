#include "ecp/attn_sim.hpp"

#include <algorithm>

#include "ecp/errors.hpp"
#include "ecp/rng.hpp"

namespace ecp {

AttentionMap synth_biased_map(const RegionPartition& partition, double multiplier,
                              double noise_scale, std::uint32_t layer, std::size_t frames,
                              std::size_t n_queries, std::size_t n_text, std::uint64_t seed) {
    if (multiplier < 0.0) throw ConfigError("peripheral multiplier must be >= 0");
    if (noise_scale < 0.0) throw ConfigError("noise_scale must be >= 0");
    if (frames == 0 || n_queries == 0) throw ConfigError("need at least one frame and one query");

    const std::size_t grid_tokens = std::size_t(partition.rows) * partition.cols;
    std::vector<bool> peripheral(grid_tokens, false);
    for (std::size_t i : partition.corner) peripheral[i] = true;
    for (std::size_t i : partition.edge) peripheral[i] = true;

    AttentionMap map;
    map.layer = layer;
    map.n_tokens = n_text + frames * grid_tokens;
    map.query_set.resize(n_queries);
    for (std::size_t q = 0; q < n_queries; ++q) map.query_set[q] = static_cast<std::uint32_t>(q);
    map.scores.assign(n_queries * map.n_tokens, 0.0);
    for (std::size_t f = 0; f < frames; ++f) {
        for (std::size_t i = 0; i < grid_tokens; ++i) {
            map.visual_index.push_back({static_cast<std::uint32_t>(n_text + f * grid_tokens + i),
                                        static_cast<std::uint32_t>(f),
                                        static_cast<std::uint32_t>(i)});
        }
    }

    SplitMix64 rng(seed ^ (std::uint64_t(layer) << 32));
    for (std::size_t q = 0; q < n_queries; ++q) {
        double* row = map.scores.data() + q * map.n_tokens;
        for (std::size_t i = 0; i < n_text; ++i) row[i] = 1.0;
        for (std::size_t f = 0; f < frames; ++f) {
            for (std::size_t i = 0; i < grid_tokens; ++i) {
                double mass = peripheral[i] ? multiplier : 1.0;
                if (noise_scale > 0.0) {
                    mass = std::max(0.0, mass + noise_scale * (rng.next_double() - 0.5));
                }
                row[n_text + f * grid_tokens + i] = mass;
            }
        }
        double sum = 0.0;
        for (std::size_t i = 0; i < map.n_tokens; ++i) sum += row[i];
        if (sum <= 0.0) throw InvariantError("synthetic attention row has zero mass");
        for (std::size_t i = 0; i < map.n_tokens; ++i) row[i] /= sum;
    }
    return map;
}

TinyAttention tiny_attention(std::size_t n_queries, std::size_t n_keys, std::size_t d_k,
                             std::size_t d_v, std::uint64_t seed) {
    if (d_k == 0 || n_keys == 0 || n_queries == 0 || d_v == 0) {
        throw ConfigError("tiny_attention dims must be >= 1");
    }
    SplitMix64 rng(seed);
    auto fill = [&rng](std::vector<double>& v, std::size_t n) {
        v.resize(n);
        for (double& x : v) x = 2.0 * rng.next_double() - 1.0;
    };

    TinyAttention t;
    fill(t.queries, n_queries * d_k);
    fill(t.keys, n_keys * d_k);
    fill(t.values, n_keys * d_v);
    t.full = purified_attention(t.queries, t.keys, t.values, n_queries, n_keys, d_k, d_v);
    return t;
}

}  // namespace ecp
