#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ecp/event.hpp"

namespace ecp {

/// Grayscale intensity frames in [0,1] with strictly increasing microsecond
/// timestamps. Needs >= 2 frames for simulation.
struct FrameSequence {
    std::vector<std::vector<double>> frames;  // row-major width*height each
    std::vector<std::uint64_t> timestamps;    // microseconds
    std::uint16_t width = 0;
    std::uint16_t height = 0;

    std::size_t frame_count() const { return frames.size(); }
};

struct EsimParams {
    double c_pos = 0.2;            // positive contrast threshold, > 0
    double c_neg = 0.2;            // negative contrast threshold, > 0
    std::uint64_t t_ref = 0;       // refractory period, microseconds
    double log_eps = 1e-3;         // additive epsilon before log
};

/// Simulate events from an intensity-frame sequence: per pixel the log
/// intensity is linearly interpolated between consecutive frames and an
/// event fires every time it crosses reference +/- threshold (>= semantics;
/// the reference then advances by the threshold). Events within t_ref of the
/// pixel's previous event are suppressed. Output is globally sorted with
/// stable tie order (t, y, x, p).
EventStream simulate_events(const FrameSequence& frames, const EsimParams& params);

/// Load a frame sequence from a directory of P5 PGM files (8- or 16-bit),
/// ordered by filename, plus a sidecar text file with one microsecond
/// timestamp per line. Pixel values are normalized to [0,1].
FrameSequence load_frame_dir(const std::string& dir, const std::string& timestamp_file);

}  // namespace ecp
