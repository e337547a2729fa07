#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "ecp/event.hpp"

namespace ecp {

struct EtcsParams {
    std::size_t n_target = 8;            // frame budget, >= 1
    double delta_share = 0.5;            // budget fraction for top-dS windows, [0,1]
    std::size_t min_gap = 0;             // minimum window separation; 0 disables refinement
    double low_activity_quantile = 0.25; // "low activity" label used in refinement
};

struct KeyframeSet {
    std::vector<std::size_t> window_indices;  // sorted distinct
    std::vector<std::size_t> frame_indices;   // sorted distinct
    std::vector<std::uint64_t> frame_times;   // microseconds, aligned with frame_indices
};

/// Dual-criteria keyframe selection: top-dS windows first, budget filled by
/// top-S windows, clustered low-activity picks refined toward coverage gaps,
/// then window midpoints mapped to the nearest frame times (ties to the
/// earlier frame) with dedup-and-backfill. All score ties break toward the
/// earlier window index.
KeyframeSet select_keyframes(const ActivityProfile& profile, const EtcsParams& params,
                             const std::vector<std::uint64_t>& frame_times);

/// Pre-refinement window selection (steps 1-2 only); exposed so the staged
/// contract is independently checkable.
std::vector<std::size_t> select_windows_preref(const ActivityProfile& profile,
                                               const EtcsParams& params);

/// Text manifest: one `frame_index,window_index,frame_time_us` line per keyframe.
void write_keyframe_manifest(std::ostream& out, const KeyframeSet& set);

}  // namespace ecp
