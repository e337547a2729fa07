#include "ecp/event.hpp"

#include <algorithm>
#include <array>
#include <cfenv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "ecp/errors.hpp"

namespace ecp {

namespace {

constexpr char kMagic[8] = {'E', 'C', 'P', 'E', 'V', 'T', '0', '1'};

[[noreturn]] void bad_record(std::size_t record, const std::string& why) {
    throw DataError("event record " + std::to_string(record) + ": " + why);
}

std::int8_t normalize_polarity(long long raw, std::size_t record) {
    // Both {0,1} and {-1,+1} conventions exist on disk; 0 means negative.
    if (raw == 1) return 1;
    if (raw == 0 || raw == -1) return -1;
    bad_record(record, "polarity must be -1, 0, or 1 (got " + std::to_string(raw) + ")");
}

// Timestamp field: plain integer = microseconds; a value with '.' or an
// exponent is seconds, converted with round-half-even.
std::uint64_t parse_timestamp(const std::string& tok, std::size_t record) {
    const bool fractional = tok.find_first_of(".eE") != std::string::npos;
    try {
        if (!fractional) {
            const long long v = std::stoll(tok);
            if (v < 0) bad_record(record, "negative timestamp");
            return static_cast<std::uint64_t>(v);
        }
        const double seconds = std::stod(tok);
        if (seconds < 0) bad_record(record, "negative timestamp");
        const double us = std::nearbyint(seconds * 1e6);  // FE_TONEAREST: half-even
        return static_cast<std::uint64_t>(us);
    } catch (const std::invalid_argument&) {
        bad_record(record, "unparsable timestamp '" + tok + "'");
    } catch (const std::out_of_range&) {
        bad_record(record, "timestamp out of range '" + tok + "'");
    }
}

void check_bounds(const Event& e, std::uint16_t w, std::uint16_t h, std::size_t record) {
    if (e.x >= w || e.y >= h) {
        bad_record(record, "event at (" + std::to_string(e.x) + "," + std::to_string(e.y) +
                               ") outside " + std::to_string(w) + "x" + std::to_string(h) +
                               " sensor");
    }
}

EventStream ingest_text(std::istream& in, std::uint16_t width, std::uint16_t height) {
    EventStream stream;
    stream.sensor_width = width;
    stream.sensor_height = height;

    std::string line;
    std::size_t record = 0;
    while (std::getline(in, line)) {
        // Strip trailing CR from CRLF input.
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        ++record;

        std::array<std::string, 4> fields;
        std::stringstream ss(line);
        std::size_t n = 0;
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            if (n >= 4) bad_record(record, "too many fields");
            fields[n++] = tok;
        }
        if (n != 4) bad_record(record, "expected 4 comma-separated fields, got " + std::to_string(n));

        Event e;
        e.t = parse_timestamp(fields[0], record);
        try {
            const long long x = std::stoll(fields[1]);
            const long long y = std::stoll(fields[2]);
            if (x < 0 || y < 0) bad_record(record, "negative coordinate");
            e.x = static_cast<std::uint16_t>(x);
            e.y = static_cast<std::uint16_t>(y);
            if (x > 0xFFFF || y > 0xFFFF) bad_record(record, "coordinate exceeds u16");
            e.p = normalize_polarity(std::stoll(fields[3]), record);
        } catch (const std::invalid_argument&) {
            bad_record(record, "unparsable field");
        } catch (const std::out_of_range&) {
            bad_record(record, "field out of range");
        }
        check_bounds(e, width, height, record);
        stream.events.push_back(e);
    }
    return stream;
}

template <typename T>
bool read_le(std::istream& in, T& out) {
    unsigned char buf[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) return false;
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= std::uint64_t(buf[i]) << (8 * i);
    out = static_cast<T>(v);
    return true;
}

template <typename T>
void write_le(std::ostream& out, T v) {
    const auto u = static_cast<std::uint64_t>(static_cast<std::make_unsigned_t<T>>(v));
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.put(static_cast<char>((u >> (8 * i)) & 0xFF));
    }
}

EventStream ingest_binary(std::istream& in, std::uint16_t width, std::uint16_t height) {
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
        throw DataError("packed event input: bad or missing ECPEVT01 magic");
    }
    std::uint16_t file_w = 0, file_h = 0;
    std::uint32_t reserved = 0;
    if (!read_le(in, file_w) || !read_le(in, file_h) || !read_le(in, reserved)) {
        throw DataError("packed event input: truncated header");
    }
    if (file_w != width || file_h != height) {
        throw DataError("packed event input: header dims " + std::to_string(file_w) + "x" +
                        std::to_string(file_h) + " do not match requested " +
                        std::to_string(width) + "x" + std::to_string(height));
    }

    EventStream stream;
    stream.sensor_width = width;
    stream.sensor_height = height;
    std::size_t record = 0;
    while (true) {
        Event e;
        std::uint64_t t;
        if (!read_le(in, t)) {
            if (in.eof() && in.gcount() == 0) break;
            bad_record(record + 1, "truncated record");
        }
        ++record;
        std::uint16_t x, y;
        std::int8_t p;
        if (!read_le(in, x) || !read_le(in, y) || !read_le(in, p)) {
            bad_record(record, "truncated record");
        }
        e.t = t;
        e.x = x;
        e.y = y;
        e.p = normalize_polarity(p, record);
        check_bounds(e, width, height, record);
        stream.events.push_back(e);
    }
    return stream;
}

}  // namespace

EventStream ingest_events(std::istream& in, EventFormat format,
                          std::uint16_t width, std::uint16_t height) {
    if (width == 0 || height == 0) throw ConfigError("sensor dims must be positive");
    EventStream stream = format == EventFormat::TextCsv ? ingest_text(in, width, height)
                                                        : ingest_binary(in, width, height);
    std::stable_sort(stream.events.begin(), stream.events.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
    if (!stream.events.empty()) {
        stream.t_start = stream.events.front().t;
        stream.t_end = stream.events.back().t;
    }
    return stream;
}

EventStream ingest_events_file(const std::string& path, EventFormat format,
                               std::uint16_t width, std::uint16_t height) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open event file: " + path);
    return ingest_events(in, format, width, height);
}

void write_events(std::ostream& out, const EventStream& stream, EventFormat format) {
    if (format == EventFormat::TextCsv) {
        for (const Event& e : stream.events) {
            out << e.t << ',' << e.x << ',' << e.y << ',' << int(e.p) << '\n';
        }
        return;
    }
    out.write(kMagic, 8);
    write_le(out, stream.sensor_width);
    write_le(out, stream.sensor_height);
    write_le(out, std::uint32_t{0});
    for (const Event& e : stream.events) {
        write_le(out, e.t);
        write_le(out, e.x);
        write_le(out, e.y);
        write_le(out, e.p);
    }
}

void validate_stream(const EventStream& stream) {
    std::uint64_t prev = 0;
    bool first = true;
    for (const Event& e : stream.events) {
        if (e.x >= stream.sensor_width || e.y >= stream.sensor_height) {
            throw InvariantError("event outside sensor bounds");
        }
        if (e.p != 1 && e.p != -1) throw InvariantError("polarity must be +1 or -1");
        if (!first && e.t < prev) throw InvariantError("events not sorted by t");
        if (e.t < stream.t_start || e.t > stream.t_end) {
            throw InvariantError("event outside [t_start, t_end]");
        }
        prev = e.t;
        first = false;
    }
}

}  // namespace ecp
