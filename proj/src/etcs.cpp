#include "ecp/etcs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>

#include "ecp/errors.hpp"

namespace ecp {

namespace {

// Windows ordered by (delta desc, index asc). Window n >= 1 qualifies via
// deltas[n-1]; window 0 has no delta.
std::vector<std::size_t> delta_order(const ActivityProfile& profile) {
    std::vector<std::size_t> order(profile.deltas.size());
    std::iota(order.begin(), order.end(), std::size_t{1});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return profile.deltas[a - 1] > profile.deltas[b - 1];
    });
    return order;
}

// Windows ordered by (flux desc, index asc).
std::vector<std::size_t> flux_order(const ActivityProfile& profile) {
    std::vector<std::size_t> order(profile.flux.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return profile.flux[a] > profile.flux[b];
    });
    return order;
}

// Nearest-rank quantile of the flux values.
double flux_quantile(const ActivityProfile& profile, double q) {
    std::vector<double> sorted = profile.flux;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    std::size_t idx = q <= 0.0 ? 0 : static_cast<std::size_t>(std::ceil(q * double(n))) - 1;
    idx = std::min(idx, n - 1);
    return sorted[idx];
}

std::uint64_t window_midpoint(const WindowingParams& w, std::size_t n) {
    return w.origin + std::uint64_t(n) * w.delta_t + w.delta_t / 2;
}

// Nearest frame by time; ties break toward the earlier frame.
std::size_t nearest_frame(const std::vector<std::uint64_t>& frame_times, std::uint64_t t) {
    const auto it = std::lower_bound(frame_times.begin(), frame_times.end(), t);
    if (it == frame_times.begin()) return 0;
    if (it == frame_times.end()) return frame_times.size() - 1;
    const std::size_t hi = static_cast<std::size_t>(it - frame_times.begin());
    const std::size_t lo = hi - 1;
    const std::uint64_t d_lo = t - frame_times[lo];
    const std::uint64_t d_hi = frame_times[hi] - t;
    return d_lo <= d_hi ? lo : hi;
}

}  // namespace

std::vector<std::size_t> select_windows_preref(const ActivityProfile& profile,
                                               const EtcsParams& params) {
    if (profile.flux.empty()) throw DataError("empty activity profile");
    if (params.n_target == 0) throw ConfigError("n_target must be >= 1");
    if (params.delta_share < 0 || params.delta_share > 1) {
        throw ConfigError("delta_share must lie in [0,1]");
    }

    const std::size_t budget = std::min(params.n_target, profile.flux.size());
    const std::size_t n_delta =
        std::min<std::size_t>(budget, static_cast<std::size_t>(
                                          std::ceil(params.delta_share * double(params.n_target))));

    std::vector<std::size_t> selected;  // in priority order
    std::set<std::size_t> chosen;
    for (std::size_t w : delta_order(profile)) {
        if (selected.size() >= n_delta) break;
        selected.push_back(w);
        chosen.insert(w);
    }
    for (std::size_t w : flux_order(profile)) {
        if (selected.size() >= budget) break;
        if (chosen.insert(w).second) selected.push_back(w);
    }
    return selected;
}

KeyframeSet select_keyframes(const ActivityProfile& profile, const EtcsParams& params,
                             const std::vector<std::uint64_t>& frame_times) {
    if (frame_times.empty()) throw DataError("empty frame time list");
    std::vector<std::size_t> selected = select_windows_preref(profile, params);

    // Refinement: break up clustered low-activity picks and refill toward
    // the largest coverage gap. Bounded by the budget, so it terminates.
    if (params.min_gap > 0) {
        const double low = flux_quantile(profile, params.low_activity_quantile);
        for (std::size_t iter = 0; iter < params.n_target; ++iter) {
            std::vector<std::size_t> sorted = selected;
            std::sort(sorted.begin(), sorted.end());

            std::size_t drop = profile.flux.size();  // sentinel: none
            for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
                const std::size_t a = sorted[i], b = sorted[i + 1];
                if (b - a > params.min_gap) continue;
                if (profile.flux[a] >= low && profile.flux[b] >= low) continue;
                // Drop the lower-S window; on a tie, the later one.
                drop = profile.flux[a] < profile.flux[b] ? a
                       : profile.flux[b] < profile.flux[a] ? b
                                                           : b;
                break;
            }
            if (drop == profile.flux.size()) break;

            selected.erase(std::find(selected.begin(), selected.end(), drop));
            sorted.erase(std::find(sorted.begin(), sorted.end(), drop));

            // Midpoint of the largest gap between consecutive selected
            // windows (tie: earliest gap).
            std::size_t best_gap = 0, candidate = profile.flux.size();
            for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
                const std::size_t gap = sorted[i + 1] - sorted[i];
                if (gap > best_gap) {
                    best_gap = gap;
                    candidate = sorted[i] + gap / 2;
                }
            }
            if (candidate == profile.flux.size() ||
                std::find(sorted.begin(), sorted.end(), candidate) != sorted.end()) {
                break;
            }
            selected.push_back(candidate);
        }
    }

    // Map window midpoints to frames in priority order; collisions backfill
    // from the best unselected windows (flux desc, index asc).
    std::set<std::size_t> used_windows(selected.begin(), selected.end());
    std::vector<std::size_t> backfill;
    for (std::size_t w : flux_order(profile)) {
        if (!used_windows.count(w)) backfill.push_back(w);
    }

    KeyframeSet out;
    std::set<std::size_t> used_frames;
    std::vector<std::pair<std::size_t, std::size_t>> frame_window;  // (frame, window)
    const std::size_t budget = std::min(params.n_target, profile.flux.size());
    std::size_t bf = 0;
    for (std::size_t i = 0; i < selected.size() || bf < backfill.size();) {
        std::size_t w;
        if (i < selected.size()) {
            w = selected[i++];
        } else {
            w = backfill[bf++];
        }
        const std::size_t frame = nearest_frame(frame_times, window_midpoint(profile.windowing, w));
        if (used_frames.insert(frame).second) {
            frame_window.emplace_back(frame, w);
            if (frame_window.size() >= budget) break;
        }
    }

    // The window->frame midpoint mapping is monotone, so ordering by frame
    // also orders the paired windows.
    std::sort(frame_window.begin(), frame_window.end());
    for (const auto& [frame, window] : frame_window) {
        out.frame_indices.push_back(frame);
        out.window_indices.push_back(window);
        out.frame_times.push_back(frame_times[frame]);
    }
    return out;
}

void write_keyframe_manifest(std::ostream& out, const KeyframeSet& set) {
    for (std::size_t i = 0; i < set.frame_indices.size(); ++i) {
        out << set.frame_indices[i] << ',' << set.window_indices[i] << ','
            << set.frame_times[i] << '\n';
    }
}

}  // namespace ecp
