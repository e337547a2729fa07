#include "ecp/esim.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <tuple>

#include "ecp/errors.hpp"

namespace fs = std::filesystem;

namespace ecp {

namespace {

void check_sequence(const FrameSequence& seq) {
    if (seq.frame_count() < 2) throw DataError("frame sequence needs at least 2 frames");
    if (seq.timestamps.size() != seq.frame_count()) {
        throw DataError("frame/timestamp count mismatch");
    }
    const std::size_t pixels = std::size_t(seq.width) * seq.height;
    for (const auto& f : seq.frames) {
        if (f.size() != pixels) throw DataError("frame dims mismatch");
    }
    for (std::size_t i = 1; i < seq.timestamps.size(); ++i) {
        if (seq.timestamps[i] <= seq.timestamps[i - 1]) {
            throw DataError("frame timestamps must be strictly increasing");
        }
    }
}

}  // namespace

EventStream simulate_events(const FrameSequence& seq, const EsimParams& params) {
    check_sequence(seq);
    if (params.c_pos <= 0 || params.c_neg <= 0) throw ConfigError("contrast thresholds must be > 0");
    if (params.log_eps <= 0) throw ConfigError("log_eps must be > 0");

    EventStream out;
    out.sensor_width = seq.width;
    out.sensor_height = seq.height;
    out.t_start = seq.timestamps.front();
    out.t_end = seq.timestamps.back();

    const std::size_t pixels = std::size_t(seq.width) * seq.height;
    const std::size_t n_frames = seq.frame_count();

    for (std::size_t px = 0; px < pixels; ++px) {
        const std::uint16_t x = static_cast<std::uint16_t>(px % seq.width);
        const std::uint16_t y = static_cast<std::uint16_t>(px / seq.width);

        double ref = std::log(seq.frames[0][px] + params.log_eps);
        bool has_last = false;
        std::uint64_t last_t = 0;

        for (std::size_t k = 0; k + 1 < n_frames; ++k) {
            const double l0 = std::log(seq.frames[k][px] + params.log_eps);
            const double l1 = std::log(seq.frames[k + 1][px] + params.log_eps);
            const double t0 = static_cast<double>(seq.timestamps[k]);
            const double t1 = static_cast<double>(seq.timestamps[k + 1]);
            if (l1 == l0) continue;

            const bool rising = l1 > l0;
            const double threshold = rising ? params.c_pos : params.c_neg;
            const std::int8_t polarity = rising ? 1 : -1;

            // Walk the reference across every threshold crossing inside this
            // segment; a crossing exactly at the threshold fires (>=).
            while (true) {
                const double level = rising ? ref + threshold : ref - threshold;
                if (rising ? (level > l1) : (level < l1)) break;
                const double tc = t0 + (level - l0) / (l1 - l0) * (t1 - t0);
                const auto t_us = static_cast<std::uint64_t>(std::llround(tc));
                ref = level;  // reference advances by the threshold even if suppressed
                if (has_last && t_us - last_t < params.t_ref) continue;
                out.events.push_back(Event{x, y, t_us, polarity});
                has_last = true;
                last_t = t_us;
            }
        }
    }

    std::sort(out.events.begin(), out.events.end(), [](const Event& a, const Event& b) {
        return std::tie(a.t, a.y, a.x, a.p) < std::tie(b.t, b.y, b.x, b.p);
    });
    return out;
}

namespace {

int pgm_next_int(std::istream& in) {
    // Skip whitespace and '#' comments between header tokens.
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
        } else if (!std::isspace(c)) {
            in.unget();
            break;
        }
    }
    int value;
    if (!(in >> value)) throw DataError("malformed PGM header");
    return value;
}

std::vector<double> load_pgm(const fs::path& path, std::uint16_t& width, std::uint16_t& height) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open frame: " + path.string());
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != 'P' || m1 != '5') throw DataError("not a P5 PGM: " + path.string());
    const int w = pgm_next_int(in);
    const int h = pgm_next_int(in);
    const int maxval = pgm_next_int(in);
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) {
        throw DataError("bad PGM header: " + path.string());
    }
    in.get();  // single whitespace after maxval

    width = static_cast<std::uint16_t>(w);
    height = static_cast<std::uint16_t>(h);
    const std::size_t pixels = std::size_t(w) * h;
    std::vector<double> data(pixels);
    if (maxval < 256) {
        std::vector<unsigned char> raw(pixels);
        if (!in.read(reinterpret_cast<char*>(raw.data()), pixels)) {
            throw DataError("truncated PGM data: " + path.string());
        }
        for (std::size_t i = 0; i < pixels; ++i) data[i] = raw[i] / double(maxval);
    } else {
        std::vector<unsigned char> raw(pixels * 2);
        if (!in.read(reinterpret_cast<char*>(raw.data()), pixels * 2)) {
            throw DataError("truncated PGM data: " + path.string());
        }
        for (std::size_t i = 0; i < pixels; ++i) {
            data[i] = (raw[2 * i] * 256 + raw[2 * i + 1]) / double(maxval);  // big-endian
        }
    }
    return data;
}

}  // namespace

FrameSequence load_frame_dir(const std::string& dir, const std::string& timestamp_file) {
    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".pgm") {
            paths.push_back(entry.path());
        }
    }
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw DataError("no .pgm frames in " + dir);

    FrameSequence seq;
    for (const auto& p : paths) {
        std::uint16_t w = 0, h = 0;
        auto frame = load_pgm(p, w, h);
        if (seq.frames.empty()) {
            seq.width = w;
            seq.height = h;
        } else if (w != seq.width || h != seq.height) {
            throw DataError("frame dims mismatch at " + p.string());
        }
        seq.frames.push_back(std::move(frame));
    }

    std::ifstream ts(timestamp_file);
    if (!ts) throw DataError("cannot open timestamp file: " + timestamp_file);
    std::string line;
    while (std::getline(ts, line)) {
        if (line.empty() || line[0] == '#') continue;
        seq.timestamps.push_back(std::stoull(line));
    }
    if (seq.timestamps.size() != seq.frame_count()) {
        throw DataError("timestamp count (" + std::to_string(seq.timestamps.size()) +
                        ") does not match frame count (" + std::to_string(seq.frame_count()) + ")");
    }
    return seq;
}

}  // namespace ecp
