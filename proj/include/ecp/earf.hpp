#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace ecp {

/// Head-averaged post-softmax attention rows for the scoring queries, over
/// the full active token sequence. Visual columns are located through
/// visual_index; every full row sums to 1 (tolerance 1e-5).
struct AttentionMap {
    struct VisualEntry {
        std::uint32_t seq_pos;
        std::uint32_t frame_index;
        std::uint32_t token_index;
    };

    std::uint32_t layer = 0;
    std::size_t n_tokens = 0;                   // active sequence length
    std::vector<std::uint32_t> query_set;       // scoring query positions, one per row
    std::vector<double> scores;                 // query_set.size() x n_tokens, row-major
    std::vector<VisualEntry> visual_index;

    std::size_t n_queries() const { return query_set.size(); }
    double at(std::size_t q, std::size_t col) const { return scores[q * n_tokens + col]; }
};

/// Attention/event score pair for the active visual tokens of one keyframe,
/// aligned by position.
struct VisualScore {
    std::vector<double> attention;
    std::vector<double> event;
};

/// Layer-wise pruning schedule: layer indices with per-layer fusion weight
/// gamma and retention ratio rho.
struct PruneSchedule {
    std::vector<std::uint32_t> layers;
    std::vector<double> gamma;  // in [0,1]
    std::vector<double> rho;    // in (0,1]

    std::size_t size() const { return layers.size(); }
    void validate() const;
};

/// Active token sets at one layer: text tokens (never pruned) plus per-frame
/// retained visual token indices.
struct ActiveSet {
    std::vector<std::uint32_t> text_tokens;
    std::vector<std::vector<std::uint32_t>> visual_tokens;  // per frame, sorted
    int layer = -1;
};

/// Mean over the scoring query rows of the visual columns belonging to one
/// frame, ordered by token index.
std::vector<double> attention_readout(const AttentionMap& map, std::uint32_t frame);

/// Zero-based ascending ranks normalized by max(N-1, 1); ties receive
/// distinct consecutive ranks in ascending index order, so the output is a
/// permutation of {0, 1/(N-1), ..., 1} for N >= 2.
std::vector<double> rank_project(const std::vector<double>& values);

/// S_calib = (1-gamma) * rank(attention) + gamma * rank(event), per token.
std::vector<double> calibrate(const VisualScore& scores, double gamma);

/// Per-frame top-K retention on calibrated scores. scores[f] must align with
/// active.visual_tokens[f]. Keeps K = max(1, floor(rho*|V|)) per frame.
ActiveSet prune_layer(const ActiveSet& active, const std::vector<VisualScore>& scores,
                      double gamma, double rho);

/// Rank-space margin between two tokens of the same frame:
/// (1-gamma)*dRA + gamma*dRM, where the deltas are rank differences u - j.
double score_gap(double rank_attn_u, double rank_event_u, double rank_attn_j,
                 double rank_event_j, double gamma);

/// Softmax attention computed over the retained keys only (pruned tokens are
/// absent from the denominator).
struct AttentionOutput {
    std::vector<double> weights;  // n_queries x n_keys, row-major
    std::vector<double> outputs;  // n_queries x d_v, row-major
    std::size_t n_keys = 0;
    std::size_t d_v = 0;
};

AttentionOutput purified_attention(const std::vector<double>& queries,
                                   const std::vector<double>& keys,
                                   const std::vector<double>& values, std::size_t n_queries,
                                   std::size_t n_keys, std::size_t d_k, std::size_t d_v);

/// ECPATT01 binary attention-map format.
AttentionMap read_attention_map(std::istream& in);
AttentionMap read_attention_map_file(const std::string& path);
void write_attention_map(std::ostream& out, const AttentionMap& map);
void write_attention_map_file(const std::string& path, const AttentionMap& map);

}  // namespace ecp
