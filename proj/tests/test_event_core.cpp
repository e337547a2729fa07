#include <algorithm>
#include <cstdlib>
#include <sstream>
#include <vector>

#include <doctest.h>

#include "ecp/errors.hpp"
#include "ecp/event.hpp"
#include "ecp/rng.hpp"

using namespace ecp;

namespace {

EventStream random_stream(SplitMix64& rng, std::size_t n, std::uint16_t w, std::uint16_t h,
                          std::uint64_t t_max) {
    EventStream s;
    s.sensor_width = w;
    s.sensor_height = h;
    for (std::size_t i = 0; i < n; ++i) {
        Event e;
        e.x = static_cast<std::uint16_t>(rng.next_below(w));
        e.y = static_cast<std::uint16_t>(rng.next_below(h));
        e.t = rng.next_below(t_max);
        e.p = (rng.next_u64() & 1) ? 1 : -1;
        s.events.push_back(e);
    }
    std::stable_sort(s.events.begin(), s.events.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
    s.t_start = 0;
    s.t_end = t_max;
    return s;
}

// Independent O(n^2) neighbor-count filter.
EventStream brute_density(const EventStream& s, const DensityFilterParams& p) {
    EventStream out = s;
    out.events.clear();
    for (std::size_t i = 0; i < s.events.size(); ++i) {
        std::uint32_t neighbors = 0;
        for (std::size_t j = 0; j < s.events.size(); ++j) {
            if (i == j) continue;
            const auto& a = s.events[i];
            const auto& b = s.events[j];
            const std::uint64_t dt = a.t > b.t ? a.t - b.t : b.t - a.t;
            const int dx = std::abs(int(a.x) - int(b.x));
            const int dy = std::abs(int(a.y) - int(b.y));
            if (std::max(dx, dy) <= int(p.spatial_radius) && dt <= p.temporal_radius) ++neighbors;
        }
        if (neighbors >= p.min_neighbors) out.events.push_back(s.events[i]);
    }
    return out;
}

}  // namespace

TEST_CASE("ingest: empty input gives empty stream") {
    std::istringstream in("");
    const EventStream s = ingest_events(in, EventFormat::TextCsv, 10, 10);
    CHECK(s.size() == 0);
    CHECK(s.t_start == 0);
    CHECK(s.t_end == 0);
}

TEST_CASE("ingest: plain CSV parse") {
    std::istringstream in("100,3,4,1\n200,3,4,-1\n");
    const EventStream s = ingest_events(in, EventFormat::TextCsv, 10, 10);
    REQUIRE(s.size() == 2);
    CHECK(s.events[0] == Event{3, 4, 100, 1});
    CHECK(s.events[1] == Event{3, 4, 200, -1});
    CHECK(s.t_start <= 100);
    CHECK(s.t_end >= 200);
}

TEST_CASE("ingest: comments, zero polarity, fractional-second timestamps") {
    std::istringstream in(
        "# header comment\n"
        "3.5e-6,1,1,0\n"
        "2.5e-6,2,2,1\n");
    const EventStream s = ingest_events(in, EventFormat::TextCsv, 10, 10);
    REQUIRE(s.size() == 2);
    // Half-microsecond values round to even: 2.5 -> 2, 3.5 -> 4.
    CHECK(s.events[0].t == 2);
    CHECK(s.events[0].p == 1);
    CHECK(s.events[1].t == 4);
    CHECK(s.events[1].p == -1);  // 0 on disk means negative polarity
}

TEST_CASE("ingest: out-of-order input is stably sorted") {
    std::istringstream in("200,1,1,1\n100,2,2,1\n100,3,3,-1\n");
    const EventStream s = ingest_events(in, EventFormat::TextCsv, 10, 10);
    REQUIRE(s.size() == 3);
    CHECK(s.events[0].x == 2);
    CHECK(s.events[1].x == 3);  // equal timestamps keep input order
    CHECK(s.events[2].x == 1);
}

TEST_CASE("ingest: bounds violation names the record") {
    std::istringstream in("100,99,4,1\n");
    try {
        ingest_events(in, EventFormat::TextCsv, 10, 10);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("1") != std::string::npos);
    }
}

TEST_CASE("ingest: malformed record and bad polarity rejected") {
    std::istringstream bad("100,1\n");
    CHECK_THROWS_AS(ingest_events(bad, EventFormat::TextCsv, 10, 10), DataError);
    std::istringstream badp("100,1,1,7\n");
    CHECK_THROWS_AS(ingest_events(badp, EventFormat::TextCsv, 10, 10), DataError);
}

TEST_CASE("binary round-trip preserves the stream") {
    SplitMix64 rng(41);
    for (int it = 0; it < 20; ++it) {
        const EventStream s = random_stream(rng, 200, 64, 48, 100000);
        std::stringstream buf;
        write_events(buf, s, EventFormat::PackedBinary);
        const EventStream back = ingest_events(buf, EventFormat::PackedBinary, 64, 48);
        CHECK(back.events == s.events);
        CHECK(back.sensor_width == 64);
        CHECK(back.sensor_height == 48);
    }
}

TEST_CASE("text round-trip preserves the stream") {
    SplitMix64 rng(42);
    const EventStream s = random_stream(rng, 100, 32, 32, 5000);
    std::stringstream buf;
    write_events(buf, s, EventFormat::TextCsv);
    const EventStream back = ingest_events(buf, EventFormat::TextCsv, 32, 32);
    CHECK(back.events == s.events);
}

TEST_CASE("density_filter: min_neighbors=0 is the identity") {
    SplitMix64 rng(7);
    const EventStream s = random_stream(rng, 100, 16, 16, 1000);
    const EventStream out = density_filter(s, DensityFilterParams{2, 10, 0});
    CHECK(out.events == s.events);
}

TEST_CASE("density_filter: single isolated event is dropped") {
    EventStream s;
    s.sensor_width = s.sensor_height = 10;
    s.events = {Event{5, 5, 100, 1}};
    s.t_end = 200;
    const EventStream out = density_filter(s, DensityFilterParams{3, 1000, 1});
    CHECK(out.empty());
}

TEST_CASE("density_filter: same-pixel burst survives") {
    EventStream s;
    s.sensor_width = s.sensor_height = 10;
    s.events = {Event{5, 5, 0, 1}, Event{5, 5, 10, 1}, Event{5, 5, 20, -1}};
    s.t_end = 20;
    const EventStream out = density_filter(s, DensityFilterParams{1, 15, 1});
    CHECK(out.events == s.events);
}

TEST_CASE("density_filter matches brute-force oracle and is a subsequence") {
    SplitMix64 rng(99);
    for (int it = 0; it < 30; ++it) {
        const EventStream s = random_stream(rng, 80, 8, 8, 200);
        DensityFilterParams p;
        p.spatial_radius = static_cast<std::uint16_t>(rng.next_below(3));
        p.temporal_radius = rng.next_below(50);
        p.min_neighbors = static_cast<std::uint32_t>(rng.next_below(4));
        const EventStream got = density_filter(s, p);
        const EventStream want = brute_density(s, p);
        CHECK(got.events == want.events);

        // Subsequence check.
        std::size_t j = 0;
        for (const auto& e : s.events) {
            if (j < got.events.size() && got.events[j] == e) ++j;
        }
        CHECK(j == got.events.size());
    }
}

TEST_CASE("activity_flux: worked example") {
    EventStream s;
    s.sensor_width = s.sensor_height = 10;
    s.events = {Event{1, 1, 100000, 1}, Event{1, 1, 200000, 1}, Event{1, 1, 1500000, -1}};
    s.t_start = 0;
    s.t_end = 1500000;
    const ActivityProfile prof = activity_flux(s, WindowingParams{1000000, 0}, {});
    CHECK(prof.flux == std::vector<double>{2.0, 1.0});
    CHECK(prof.deltas == std::vector<double>{1.0});
}

TEST_CASE("activity_flux: empty stream still yields zero windows over its span") {
    EventStream s;
    s.sensor_width = s.sensor_height = 4;
    s.t_start = 0;
    s.t_end = 3000;  // spans [0, 3*delta_t)
    const ActivityProfile prof = activity_flux(s, WindowingParams{1000, 0}, {});
    CHECK(prof.flux == std::vector<double>{0.0, 0.0, 0.0});
    CHECK(prof.deltas == std::vector<double>{0.0, 0.0});
}

TEST_CASE("activity_flux: one event per window") {
    EventStream s;
    s.sensor_width = s.sensor_height = 4;
    for (int n = 0; n < 5; ++n) s.events.push_back(Event{1, 1, std::uint64_t(n) * 100 + 50, 1});
    s.t_start = 0;
    s.t_end = 500;
    const ActivityProfile prof = activity_flux(s, WindowingParams{100, 0}, {});
    CHECK(prof.flux == std::vector<double>(5, 1.0));
    CHECK(prof.deltas == std::vector<double>(4, 0.0));
}

TEST_CASE("activity_flux: delta_t=0 rejected") {
    EventStream s;
    s.sensor_width = s.sensor_height = 4;
    CHECK_THROWS_AS(activity_flux(s, WindowingParams{0, 0}, {}), ConfigError);
}

TEST_CASE("activity_flux: conservation and histogram-oracle equivalence") {
    SplitMix64 rng(3);
    for (int it = 0; it < 50; ++it) {
        const EventStream s = random_stream(rng, 1 + rng.next_below(300), 16, 16, 10000);
        WindowingParams w;
        w.delta_t = 1 + rng.next_below(2000);
        w.origin = 0;
        const ActivityProfile prof = activity_flux(s, w, {});
        double total = 0;
        for (double f : prof.flux) total += f;
        CHECK(total == double(s.size()));

        // Brute-force histogram oracle.
        for (std::size_t n = 0; n < prof.flux.size(); ++n) {
            std::size_t count = 0;
            for (const auto& e : s.events) {
                if (e.t >= w.origin + n * w.delta_t && e.t < w.origin + (n + 1) * w.delta_t)
                    ++count;
            }
            CHECK(prof.flux[n] == double(count));
        }
        // Invariant: deltas are adjacent absolute differences.
        for (std::size_t n = 1; n < prof.flux.size(); ++n) {
            CHECK(prof.deltas[n - 1] == std::abs(prof.flux[n] - prof.flux[n - 1]));
        }
    }
}

TEST_CASE("activity_flux: invariant under permutation of equal-timestamp events") {
    EventStream a;
    a.sensor_width = a.sensor_height = 10;
    a.events = {Event{1, 1, 100, 1}, Event{2, 2, 100, -1}, Event{3, 3, 250, 1}};
    a.t_end = 300;
    EventStream b = a;
    std::swap(b.events[0], b.events[1]);
    const auto pa = activity_flux(a, WindowingParams{100, 0}, {});
    const auto pb = activity_flux(b, WindowingParams{100, 0}, {});
    CHECK(pa.flux == pb.flux);
    CHECK(pa.deltas == pb.deltas);
}

TEST_CASE("validate_stream rejects unsorted or out-of-bounds streams") {
    EventStream s;
    s.sensor_width = s.sensor_height = 4;
    s.events = {Event{1, 1, 200, 1}, Event{1, 1, 100, 1}};
    s.t_end = 200;
    CHECK_THROWS_AS(validate_stream(s), InvariantError);
    s.events = {Event{9, 1, 100, 1}};
    CHECK_THROWS_AS(validate_stream(s), InvariantError);
}
