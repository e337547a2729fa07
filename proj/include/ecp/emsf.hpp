#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "ecp/event.hpp"

namespace ecp {

/// Uniform token tiling of the sensor plane. Cells are floor-partitioned;
/// remainder pixels are absorbed by the last row/column of cells.
struct TokenGridSpec {
    std::uint16_t rows = 1;
    std::uint16_t cols = 1;
    std::uint16_t sensor_width = 0;
    std::uint16_t sensor_height = 0;

    std::size_t token_count() const { return std::size_t(rows) * cols; }
    /// Token cell owning pixel (x, y).
    std::size_t token_of(std::uint16_t x, std::uint16_t y) const;
};

struct TimeInterval {
    std::uint64_t begin = 0;  // inclusive
    std::uint64_t end = 0;    // exclusive
};

/// Per-token raw event counts and their min-max normalized saliency for one
/// keyframe window. All-equal counts (including all-zero) normalize to zero.
struct SaliencyMap {
    std::vector<std::uint64_t> counts;
    std::vector<double> saliency;  // in [0,1]
    std::size_t frame_index = 0;
    TimeInterval window;
};

struct RetainedSet {
    std::vector<std::size_t> indices;  // sorted distinct token indices
    std::size_t budget_k = 0;
    std::size_t frame_index = 0;
};

/// Token-aligned event counts within the window, min-max normalized across
/// all tokens of the keyframe.
SaliencyMap token_saliency(const EventStream& stream, const TokenGridSpec& grid,
                           const TimeInterval& window, const DensityFilterParams& filter,
                           std::size_t frame_index = 0);

/// Keep the K = max(1, floor(rho*N)) tokens with highest saliency, ties by
/// lower token index. The result attains the maximum saliency sum over all
/// K-subsets.
RetainedSet retain_topk(const SaliencyMap& map, double rho);

/// Top-K index selection on an arbitrary score vector; shared by EMSF and
/// EARF budgeted retention.
std::vector<std::size_t> topk_indices(const std::vector<double>& scores, std::size_t k);

void write_saliency_csv(std::ostream& out, const SaliencyMap& map);
/// Binary block: u32 frame_index, u16 rows, u16 cols, then row-major f32 saliency.
void write_saliency_binary(std::ostream& out, const SaliencyMap& map, const TokenGridSpec& grid);

}  // namespace ecp
