#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "ecp/errors.hpp"
#include "ecp/event.hpp"

namespace ecp {

EventStream density_filter(const EventStream& stream, const DensityFilterParams& params) {
    if (params.min_neighbors == 0) return stream;

    EventStream out;
    out.sensor_width = stream.sensor_width;
    out.sensor_height = stream.sensor_height;
    out.t_start = stream.t_start;
    out.t_end = stream.t_end;

    const auto& ev = stream.events;
    const std::size_t n = ev.size();
    // Events are time-sorted, so the temporal radius bounds a sliding scan
    // window; the spatial test is Chebyshev distance.
    std::size_t lo = 0;
    for (std::size_t k = 0; k < n; ++k) {
        while (lo < k && ev[k].t - ev[lo].t > params.temporal_radius) ++lo;
        std::uint32_t neighbors = 0;
        for (std::size_t j = lo; j < n; ++j) {
            if (ev[j].t > ev[k].t && ev[j].t - ev[k].t > params.temporal_radius) break;
            if (j == k) continue;
            const int dx = std::abs(int(ev[j].x) - int(ev[k].x));
            const int dy = std::abs(int(ev[j].y) - int(ev[k].y));
            if (std::max(dx, dy) <= int(params.spatial_radius)) {
                if (++neighbors >= params.min_neighbors) break;
            }
        }
        if (neighbors >= params.min_neighbors) out.events.push_back(ev[k]);
    }
    return out;
}

ActivityProfile activity_flux(const EventStream& stream,
                              const WindowingParams& windowing,
                              const DensityFilterParams& filter) {
    if (windowing.delta_t == 0) throw ConfigError("windowing delta_t must be > 0");

    const EventStream filtered = density_filter(stream, filter);

    ActivityProfile profile;
    profile.windowing = windowing;

    const std::uint64_t origin = windowing.origin;
    const std::uint64_t dt = windowing.delta_t;

    // Window count: enough windows to cover [origin, t_end) plus any event
    // landing exactly at t_end on a window boundary.
    std::size_t windows = 0;
    if (stream.t_end > origin) {
        windows = static_cast<std::size_t>((stream.t_end - origin + dt - 1) / dt);
    }
    for (const Event& e : filtered.events) {
        if (e.t < origin) continue;  // events before the window origin are not counted
        const std::size_t idx = static_cast<std::size_t>((e.t - origin) / dt);
        windows = std::max(windows, idx + 1);
    }
    profile.flux.assign(windows, 0.0);
    for (const Event& e : filtered.events) {
        if (e.t < origin) continue;
        profile.flux[static_cast<std::size_t>((e.t - origin) / dt)] += 1.0;
    }
    for (std::size_t i = 1; i < windows; ++i) {
        profile.deltas.push_back(std::abs(profile.flux[i] - profile.flux[i - 1]));
    }
    return profile;
}

}  // namespace ecp
