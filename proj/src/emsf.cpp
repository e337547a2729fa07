#include "ecp/emsf.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <ostream>

#include "ecp/errors.hpp"

namespace ecp {

std::size_t TokenGridSpec::token_of(std::uint16_t x, std::uint16_t y) const {
    const std::size_t cell_w = sensor_width / cols;
    const std::size_t cell_h = sensor_height / rows;
    const std::size_t col = std::min<std::size_t>(x / cell_w, cols - 1);
    const std::size_t row = std::min<std::size_t>(y / cell_h, rows - 1);
    return row * cols + col;
}

SaliencyMap token_saliency(const EventStream& stream, const TokenGridSpec& grid,
                           const TimeInterval& window, const DensityFilterParams& filter,
                           std::size_t frame_index) {
    if (grid.rows == 0 || grid.cols == 0) throw ConfigError("token grid dims must be >= 1");
    if (grid.sensor_width < grid.cols || grid.sensor_height < grid.rows) {
        throw ConfigError("token grid does not tile the sensor (more cells than pixels)");
    }
    if (grid.sensor_width != stream.sensor_width || grid.sensor_height != stream.sensor_height) {
        throw ConfigError("token grid sensor dims do not match the event stream");
    }
    if (window.end <= window.begin) throw ConfigError("empty saliency window");

    const EventStream filtered = density_filter(stream, filter);

    SaliencyMap map;
    map.frame_index = frame_index;
    map.window = window;
    map.counts.assign(grid.token_count(), 0);
    for (const Event& e : filtered.events) {
        if (e.t < window.begin || e.t >= window.end) continue;
        ++map.counts[grid.token_of(e.x, e.y)];
    }

    const auto [min_it, max_it] = std::minmax_element(map.counts.begin(), map.counts.end());
    map.saliency.assign(map.counts.size(), 0.0);
    if (*max_it > *min_it) {
        const double lo = double(*min_it);
        const double span = double(*max_it) - lo;
        for (std::size_t i = 0; i < map.counts.size(); ++i) {
            map.saliency[i] = (double(map.counts[i]) - lo) / span;
        }
    }
    // All-equal counts carry no motion evidence; saliency stays zero.
    return map;
}

std::vector<std::size_t> topk_indices(const std::vector<double>& scores, std::size_t k) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    k = std::min(k, order.size());
    // stable_sort keeps ascending-index order among ties.
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    order.resize(k);
    std::sort(order.begin(), order.end());
    return order;
}

RetainedSet retain_topk(const SaliencyMap& map, double rho) {
    if (map.saliency.empty()) throw DataError("empty saliency map");
    if (rho <= 0.0 || rho > 1.0) throw ConfigError("rho must lie in (0,1]");

    const std::size_t n = map.saliency.size();
    const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(rho * double(n))));

    RetainedSet out;
    out.frame_index = map.frame_index;
    out.budget_k = k;
    out.indices = topk_indices(map.saliency, k);
    return out;
}

void write_saliency_csv(std::ostream& out, const SaliencyMap& map) {
    out << "token_index,count,saliency\n";
    for (std::size_t i = 0; i < map.counts.size(); ++i) {
        out << i << ',' << map.counts[i] << ',' << map.saliency[i] << '\n';
    }
}

void write_saliency_binary(std::ostream& out, const SaliencyMap& map, const TokenGridSpec& grid) {
    auto put_le = [&out](std::uint64_t v, int bytes) {
        for (int i = 0; i < bytes; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
    };
    put_le(static_cast<std::uint32_t>(map.frame_index), 4);
    put_le(grid.rows, 2);
    put_le(grid.cols, 2);
    for (double s : map.saliency) {
        const float f = static_cast<float>(s);
        std::uint32_t bits;
        static_assert(sizeof(bits) == sizeof(f));
        std::memcpy(&bits, &f, sizeof(bits));
        put_le(bits, 4);
    }
}

}  // namespace ecp
