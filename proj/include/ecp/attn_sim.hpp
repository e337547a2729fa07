#pragma once

#include <cstdint>
#include <vector>

#include "ecp/bias.hpp"
#include "ecp/earf.hpp"

namespace ecp {

/// Fixture parameters for synthetic biased attention maps. A multiplier of
/// 1.0 with zero noise yields exactly uniform maps.
struct BiasProfile {
    std::vector<double> multipliers;  // peripheral multiplier per layer, >= 0
    double noise_scale = 0.0;
    std::uint64_t seed = 0;
};

/// Synthetic attention map with controlled peripheral bias: peripheral
/// tokens carry `multiplier` times the center base mass plus seeded
/// truncated-at-zero uniform noise; rows are renormalized to sum 1.
/// The token sequence is `frames` copies of the partition grid, preceded by
/// `n_text` text positions (text tokens carry the base mass). Deterministic
/// per (params, seed) via SplitMix64.
AttentionMap synth_biased_map(const RegionPartition& partition, double multiplier,
                              double noise_scale, std::uint32_t layer, std::size_t frames,
                              std::size_t n_queries, std::size_t n_text, std::uint64_t seed);

/// Genuine softmax attention on small seeded random matrices; the oracle
/// input for purified-attention tests.
struct TinyAttention {
    std::vector<double> queries;  // n_queries x d_k
    std::vector<double> keys;     // n_keys x d_k
    std::vector<double> values;   // n_keys x d_v
    AttentionOutput full;         // exact softmax over all keys
};

TinyAttention tiny_attention(std::size_t n_queries, std::size_t n_keys, std::size_t d_k,
                             std::size_t d_v, std::uint64_t seed);

}  // namespace ecp
