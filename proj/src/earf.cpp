#include "ecp/earf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ecp/emsf.hpp"
#include "ecp/errors.hpp"

namespace ecp {

void PruneSchedule::validate() const {
    if (gamma.size() != layers.size() || rho.size() != layers.size()) {
        throw ConfigError("prune schedule: layers/gamma/rho lengths differ");
    }
    if (!std::is_sorted(layers.begin(), layers.end()) ||
        std::adjacent_find(layers.begin(), layers.end()) != layers.end()) {
        throw ConfigError("prune schedule: layer indices must be sorted and distinct");
    }
    for (double g : gamma) {
        if (g < 0.0 || g > 1.0) throw ConfigError("prune schedule: gamma must lie in [0,1]");
    }
    for (double r : rho) {
        if (r <= 0.0 || r > 1.0) throw ConfigError("prune schedule: rho must lie in (0,1]");
    }
}

std::vector<double> attention_readout(const AttentionMap& map, std::uint32_t frame) {
    if (map.query_set.empty()) throw DataError("attention map has empty query set");

    // Columns of the requested frame, ordered by token index.
    std::vector<const AttentionMap::VisualEntry*> entries;
    for (const auto& e : map.visual_index) {
        if (e.frame_index == frame) entries.push_back(&e);
    }
    if (entries.empty()) throw DataError("frame " + std::to_string(frame) + " not in attention map");
    std::sort(entries.begin(), entries.end(),
              [](const auto* a, const auto* b) { return a->token_index < b->token_index; });

    std::vector<double> out(entries.size(), 0.0);
    for (std::size_t q = 0; q < map.n_queries(); ++q) {
        for (std::size_t i = 0; i < entries.size(); ++i) {
            out[i] += map.at(q, entries[i]->seq_pos);
        }
    }
    const double inv = 1.0 / double(map.n_queries());
    for (double& v : out) v *= inv;
    return out;
}

std::vector<double> rank_project(const std::vector<double>& values) {
    if (values.empty()) throw DataError("rank_project on empty score vector");
    const std::size_t n = values.size();

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Ascending by value; stable keeps ties in ascending index order, giving
    // distinct consecutive ranks.
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    const double denom = double(std::max<std::size_t>(n - 1, 1));
    std::vector<double> ranks(n);
    for (std::size_t r = 0; r < n; ++r) ranks[order[r]] = double(r) / denom;
    return ranks;
}

std::vector<double> calibrate(const VisualScore& scores, double gamma) {
    if (scores.attention.size() != scores.event.size()) {
        throw DataError("calibrate: attention/event score length mismatch");
    }
    if (gamma < 0.0 || gamma > 1.0) throw ConfigError("gamma must lie in [0,1]");

    const auto ra = rank_project(scores.attention);
    const auto rm = rank_project(scores.event);
    std::vector<double> out(ra.size());
    for (std::size_t i = 0; i < ra.size(); ++i) {
        out[i] = (1.0 - gamma) * ra[i] + gamma * rm[i];
    }
    return out;
}

ActiveSet prune_layer(const ActiveSet& active, const std::vector<VisualScore>& scores,
                      double gamma, double rho) {
    if (rho <= 0.0 || rho > 1.0) throw ConfigError("rho must lie in (0,1]");
    if (scores.size() != active.visual_tokens.size()) {
        throw DataError("prune_layer: score frames do not match active frames");
    }

    ActiveSet out;
    out.text_tokens = active.text_tokens;
    out.layer = active.layer + 1;
    out.visual_tokens.resize(active.visual_tokens.size());

    for (std::size_t f = 0; f < active.visual_tokens.size(); ++f) {
        const auto& tokens = active.visual_tokens[f];
        if (tokens.empty()) {
            // Earlier stages guarantee at least one token per frame.
            throw InvariantError("prune_layer: frame " + std::to_string(f) +
                                 " has no active visual tokens");
        }
        if (scores[f].attention.size() != tokens.size()) {
            throw DataError("prune_layer: score length does not match active tokens");
        }
        const auto calib = calibrate(scores[f], gamma);
        const std::size_t k =
            std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(rho * double(tokens.size()))));
        for (std::size_t pos : topk_indices(calib, k)) {
            out.visual_tokens[f].push_back(tokens[pos]);
        }
    }
    return out;
}

double score_gap(double rank_attn_u, double rank_event_u, double rank_attn_j,
                 double rank_event_j, double gamma) {
    return (1.0 - gamma) * (rank_attn_u - rank_attn_j) + gamma * (rank_event_u - rank_event_j);
}

AttentionOutput purified_attention(const std::vector<double>& queries,
                                   const std::vector<double>& keys,
                                   const std::vector<double>& values, std::size_t n_queries,
                                   std::size_t n_keys, std::size_t d_k, std::size_t d_v) {
    if (n_keys == 0) throw DataError("purified_attention: empty retained set");
    if (queries.size() != n_queries * d_k || keys.size() != n_keys * d_k ||
        values.size() != n_keys * d_v) {
        throw DataError("purified_attention: dimension mismatch");
    }

    AttentionOutput out;
    out.n_keys = n_keys;
    out.d_v = d_v;
    out.weights.assign(n_queries * n_keys, 0.0);
    out.outputs.assign(n_queries * d_v, 0.0);

    const double scale = 1.0 / std::sqrt(double(d_k));
    std::vector<double> logits(n_keys);
    for (std::size_t q = 0; q < n_queries; ++q) {
        double max_logit = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n_keys; ++i) {
            double dot = 0.0;
            for (std::size_t d = 0; d < d_k; ++d) {
                dot += queries[q * d_k + d] * keys[i * d_k + d];
            }
            logits[i] = dot * scale;
            max_logit = std::max(max_logit, logits[i]);
        }
        double denom = 0.0;
        for (std::size_t i = 0; i < n_keys; ++i) {
            logits[i] = std::exp(logits[i] - max_logit);
            denom += logits[i];
        }
        for (std::size_t i = 0; i < n_keys; ++i) {
            const double alpha = logits[i] / denom;
            out.weights[q * n_keys + i] = alpha;
            for (std::size_t d = 0; d < d_v; ++d) {
                out.outputs[q * d_v + d] += alpha * values[i * d_v + d];
            }
        }
    }
    return out;
}

}  // namespace ecp
