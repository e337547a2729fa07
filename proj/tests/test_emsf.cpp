#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>
#include <vector>

#include <doctest.h>

#include "ecp/emsf.hpp"
#include "ecp/errors.hpp"
#include "ecp/rng.hpp"

using namespace ecp;

namespace {

SaliencyMap map_from_counts(std::vector<std::uint64_t> counts) {
    SaliencyMap m;
    m.counts = std::move(counts);
    const auto [mn, mx] = std::minmax_element(m.counts.begin(), m.counts.end());
    for (std::uint64_t c : m.counts) {
        m.saliency.push_back(*mx > *mn ? double(c - *mn) / double(*mx - *mn) : 0.0);
    }
    return m;
}

// Best K-subset by exhaustive bitmask enumeration; ties prefer the
// lexicographically smallest index set (lowest indices).
std::vector<std::size_t> brute_topk(const std::vector<double>& s, std::size_t k) {
    const std::size_t n = s.size();
    double best = -1;
    std::uint32_t best_mask = 0;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        if (std::popcount(mask) != int(k)) continue;
        double sum = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask & (1u << i)) sum += s[i];
        }
        if (sum > best + 1e-12) {
            best = sum;
            best_mask = mask;
        } else if (sum > best - 1e-12) {
            // Equal sums: keep the set with lower indices (smaller value as
            // a bitmask means lower bits set... not quite; compare sets).
            std::vector<std::size_t> a, b;
            for (std::size_t i = 0; i < n; ++i) {
                if (best_mask & (1u << i)) a.push_back(i);
                if (mask & (1u << i)) b.push_back(i);
            }
            if (b < a) best_mask = mask;
        }
    }
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i) {
        if (best_mask & (1u << i)) out.push_back(i);
    }
    return out;
}

}  // namespace

TEST_CASE("token_of: floor partition with remainder absorbed at the edges") {
    const TokenGridSpec grid{2, 3, 10, 7};  // cells 3px wide (last 4), 3px tall (last 4)
    CHECK(grid.token_count() == 6);
    CHECK(grid.token_of(0, 0) == 0);
    CHECK(grid.token_of(2, 2) == 0);
    CHECK(grid.token_of(3, 0) == 1);
    CHECK(grid.token_of(6, 0) == 2);
    CHECK(grid.token_of(9, 0) == 2);  // remainder column -> last cell
    CHECK(grid.token_of(0, 3) == 3);
    CHECK(grid.token_of(9, 6) == 5);  // remainder row -> last cell
}

TEST_CASE("token_of: every pixel maps to exactly one valid token") {
    const TokenGridSpec grid{3, 5, 17, 11};
    std::vector<std::size_t> hits(grid.token_count(), 0);
    for (std::uint16_t y = 0; y < 11; ++y) {
        for (std::uint16_t x = 0; x < 17; ++x) {
            const std::size_t tok = grid.token_of(x, y);
            REQUIRE(tok < grid.token_count());
            ++hits[tok];
        }
    }
    std::size_t total = 0;
    for (std::size_t h : hits) {
        CHECK(h > 0);
        total += h;
    }
    CHECK(total == 17u * 11u);
}

TEST_CASE("token_saliency: empty window is all zeros") {
    EventStream s;
    s.sensor_width = 10;
    s.sensor_height = 10;
    s.events = {Event{1, 1, 500, 1}};
    s.t_end = 500;
    const TokenGridSpec grid{2, 2, 10, 10};
    const SaliencyMap m = token_saliency(s, grid, TimeInterval{1000, 2000}, {});
    CHECK(m.counts == std::vector<std::uint64_t>(4, 0));
    CHECK(m.saliency == std::vector<double>(4, 0.0));
}

TEST_CASE("token_saliency: min-max normalization") {
    EventStream s;
    s.sensor_width = 10;
    s.sensor_height = 10;
    // Counts per 2x2 token grid: [5, 0, 3, 1].
    std::uint64_t t = 0;
    for (int i = 0; i < 5; ++i) s.events.push_back(Event{0, 0, t++, 1});
    for (int i = 0; i < 3; ++i) s.events.push_back(Event{0, 9, t++, 1});
    s.events.push_back(Event{9, 9, t++, 1});
    std::stable_sort(s.events.begin(), s.events.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
    s.t_end = t;
    const TokenGridSpec grid{2, 2, 10, 10};
    const SaliencyMap m = token_saliency(s, grid, TimeInterval{0, 100}, {});
    CHECK(m.counts == std::vector<std::uint64_t>{5, 0, 3, 1});
    CHECK(m.saliency == std::vector<double>{1.0, 0.0, 0.6, 0.2});
}

TEST_CASE("token_saliency: uniform counts normalize to zero (degenerate rule)") {
    const SaliencyMap m = map_from_counts({7, 7, 7, 7});
    CHECK(m.saliency == std::vector<double>(4, 0.0));

    EventStream s;
    s.sensor_width = s.sensor_height = 2;
    s.events = {Event{0, 0, 0, 1}, Event{1, 0, 1, 1}, Event{0, 1, 2, 1}, Event{1, 1, 3, 1}};
    s.t_end = 3;
    const SaliencyMap real = token_saliency(s, TokenGridSpec{2, 2, 2, 2}, TimeInterval{0, 10}, {});
    CHECK(real.counts == std::vector<std::uint64_t>(4, 1));
    CHECK(real.saliency == std::vector<double>(4, 0.0));
}

TEST_CASE("token_saliency: counts conservation and window bounds") {
    SplitMix64 rng(21);
    const TokenGridSpec grid{4, 4, 32, 32};
    for (int it = 0; it < 20; ++it) {
        EventStream s;
        s.sensor_width = s.sensor_height = 32;
        const std::size_t n = 1 + rng.next_below(200);
        for (std::size_t i = 0; i < n; ++i) {
            s.events.push_back(Event{static_cast<std::uint16_t>(rng.next_below(32)),
                                     static_cast<std::uint16_t>(rng.next_below(32)),
                                     rng.next_below(1000), 1});
        }
        std::stable_sort(s.events.begin(), s.events.end(),
                         [](const Event& a, const Event& b) { return a.t < b.t; });
        s.t_end = 1000;
        const TimeInterval w{200, 700};
        const SaliencyMap m = token_saliency(s, grid, w, {});
        std::uint64_t total = 0;
        for (std::uint64_t c : m.counts) total += c;
        std::uint64_t expected = 0;
        for (const auto& e : s.events) {
            if (e.t >= w.begin && e.t < w.end) ++expected;
        }
        CHECK(total == expected);
        for (double v : m.saliency) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("token_saliency: grid/sensor mismatch rejected") {
    EventStream s;
    s.sensor_width = s.sensor_height = 10;
    CHECK_THROWS_AS(token_saliency(s, TokenGridSpec{2, 2, 8, 8}, TimeInterval{0, 1}, {}),
                    ConfigError);
}

TEST_CASE("retain_topk: worked examples") {
    SUBCASE("rho=0.5 keeps the two best") {
        SaliencyMap m;
        m.counts = {5, 0, 3, 1};
        m.saliency = {1.0, 0.0, 0.6, 0.2};
        const RetainedSet r = retain_topk(m, 0.5);
        CHECK(r.indices == std::vector<std::size_t>{0, 2});
        CHECK(r.budget_k == 2);
    }
    SUBCASE("rho=1 keeps everything") {
        const SaliencyMap m = map_from_counts({4, 1, 2});
        const RetainedSet r = retain_topk(m, 1.0);
        CHECK(r.indices == std::vector<std::size_t>{0, 1, 2});
    }
    SUBCASE("all-zero saliency falls back to index order") {
        const SaliencyMap m = map_from_counts(std::vector<std::uint64_t>(8, 0));
        const RetainedSet r = retain_topk(m, 0.25);
        CHECK(r.indices == std::vector<std::size_t>{0, 1});
    }
    SUBCASE("budget floor keeps at least one token") {
        const SaliencyMap m = map_from_counts({1, 9});
        const RetainedSet r = retain_topk(m, 0.1);
        CHECK(r.indices == std::vector<std::size_t>{1});
    }
}

TEST_CASE("retain_topk: invalid rho and empty map rejected") {
    const SaliencyMap m = map_from_counts({1, 2});
    CHECK_THROWS_AS(retain_topk(m, 0.0), ConfigError);
    CHECK_THROWS_AS(retain_topk(m, 1.5), ConfigError);
    CHECK_THROWS_AS(retain_topk(SaliencyMap{}, 0.5), DataError);
}

TEST_CASE("retain_topk matches exhaustive subset argmax") {
    SplitMix64 rng(22);
    for (int it = 0; it < 200; ++it) {
        const std::size_t n = 1 + rng.next_below(12);
        std::vector<std::uint64_t> counts(n);
        for (auto& c : counts) c = rng.next_below(5);  // heavy ties
        const SaliencyMap m = map_from_counts(std::move(counts));
        const double rho = double(1 + rng.next_below(100)) / 100.0;
        const RetainedSet r = retain_topk(m, rho);
        const std::size_t k = std::max<std::size_t>(1, std::size_t(std::floor(rho * double(n))));
        CHECK(r.budget_k == k);
        CHECK(r.indices == brute_topk(m.saliency, k));
    }
}

TEST_CASE("retain_topk: invariant under strictly increasing count transforms") {
    SplitMix64 rng(23);
    for (int it = 0; it < 100; ++it) {
        const std::size_t n = 2 + rng.next_below(14);
        std::vector<std::uint64_t> counts(n);
        for (auto& c : counts) c = rng.next_below(50);
        const SaliencyMap base = map_from_counts(counts);
        std::vector<std::uint64_t> squared;
        for (std::uint64_t c : counts) squared.push_back(c * c + 3 * c);
        const SaliencyMap xf = map_from_counts(std::move(squared));
        const double rho = double(1 + rng.next_below(100)) / 100.0;
        // Min-max normalization changes, but the retained index set must not:
        // selection depends only on the count ordering.
        CHECK(retain_topk(base, rho).indices == retain_topk(xf, rho).indices);
    }
}

TEST_CASE("saliency CSV output") {
    SaliencyMap m;
    m.counts = {5, 0};
    m.saliency = {1.0, 0.0};
    std::ostringstream out;
    write_saliency_csv(out, m);
    CHECK(out.str() == "token_index,count,saliency\n0,5,1\n1,0,0\n");
}
