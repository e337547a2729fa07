#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ecp {

/// One polarity spike: pixel (x, y), timestamp in integer microseconds,
/// polarity +1 or -1.
struct Event {
    std::uint16_t x = 0;
    std::uint16_t y = 0;
    std::uint64_t t = 0;
    std::int8_t p = 1;

    friend bool operator==(const Event&, const Event&) = default;
};

/// Time-sorted event sequence with sensor bounds. All events lie within
/// [t_start, t_end] and inside the sensor grid.
struct EventStream {
    std::vector<Event> events;
    std::uint16_t sensor_width = 0;
    std::uint16_t sensor_height = 0;
    std::uint64_t t_start = 0;
    std::uint64_t t_end = 0;

    std::size_t size() const { return events.size(); }
    bool empty() const { return events.empty(); }
};

/// Spatiotemporal neighbor-count denoising filter. min_neighbors = 0 is the
/// identity.
struct DensityFilterParams {
    std::uint16_t spatial_radius = 0;    // pixels, Chebyshev
    std::uint64_t temporal_radius = 0;   // microseconds
    std::uint32_t min_neighbors = 0;
};

/// Fixed temporal windowing: window n covers [origin + n*delta_t,
/// origin + (n+1)*delta_t).
struct WindowingParams {
    std::uint64_t delta_t = 1;  // microseconds, > 0
    std::uint64_t origin = 0;   // window-0 start, microseconds
};

/// Per-window activity flux and its adjacent absolute differences.
struct ActivityProfile {
    std::vector<double> flux;    // one value per window, >= 0
    std::vector<double> deltas;  // deltas[n-1] = |flux[n] - flux[n-1]|
    WindowingParams windowing;

    std::size_t window_count() const { return flux.size(); }
};

enum class EventFormat { TextCsv, PackedBinary };

/// Parse an event stream. Text: one `t_us,x,y,p` per line, `#` comments
/// ignored; a `t` field containing '.' or an exponent is read as seconds and
/// converted to microseconds with round-half-even. Binary: "ECPEVT01" header
/// then packed little-endian (u64 t, u16 x, u16 y, i8 p) records.
/// Out-of-order input is stably sorted by t. Throws DataError on malformed
/// records (with record number) or out-of-bounds events.
EventStream ingest_events(std::istream& in, EventFormat format,
                          std::uint16_t width, std::uint16_t height);
EventStream ingest_events_file(const std::string& path, EventFormat format,
                               std::uint16_t width, std::uint16_t height);

void write_events(std::ostream& out, const EventStream& stream, EventFormat format);

/// Keep events having at least min_neighbors OTHER events within Chebyshev
/// distance <= spatial_radius and |dt| <= temporal_radius. Order preserved;
/// output is a subsequence of the input.
EventStream density_filter(const EventStream& stream, const DensityFilterParams& params);

/// Window-level activity flux over the density-filtered stream. Windows run
/// from `windowing.origin` and cover the whole stream span, zero-count
/// windows included.
ActivityProfile activity_flux(const EventStream& stream,
                              const WindowingParams& windowing,
                              const DensityFilterParams& filter);

/// Validates EventStream invariants (sortedness, bounds); throws
/// InvariantError on violation.
void validate_stream(const EventStream& stream);

}  // namespace ecp
