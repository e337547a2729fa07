#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

#include "ecp/earf.hpp"
#include "ecp/errors.hpp"

namespace ecp {

namespace {

constexpr char kMagic[8] = {'E', 'C', 'P', 'A', 'T', 'T', '0', '1'};

std::uint32_t read_u32(std::istream& in) {
    unsigned char buf[4];
    if (!in.read(reinterpret_cast<char*>(buf), 4)) {
        throw DataError("attention map: truncated input");
    }
    return std::uint32_t(buf[0]) | std::uint32_t(buf[1]) << 8 | std::uint32_t(buf[2]) << 16 |
           std::uint32_t(buf[3]) << 24;
}

void write_u32(std::ostream& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

float read_f32(std::istream& in) {
    const std::uint32_t bits = read_u32(in);
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

void write_f32(std::ostream& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    write_u32(out, bits);
}

}  // namespace

AttentionMap read_attention_map(std::istream& in) {
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
        throw DataError("attention map: bad or missing ECPATT01 magic");
    }
    AttentionMap map;
    map.layer = read_u32(in);
    const std::uint32_t n_queries = read_u32(in);
    const std::uint32_t n_tokens = read_u32(in);
    const std::uint32_t n_visual = read_u32(in);
    if (n_queries == 0) throw DataError("attention map: zero queries");
    if (n_visual > n_tokens) throw DataError("attention map: more visual entries than tokens");

    map.n_tokens = n_tokens;
    map.query_set.resize(n_queries);
    std::iota(map.query_set.begin(), map.query_set.end(), 0u);
    map.scores.resize(std::size_t(n_queries) * n_tokens);
    for (double& v : map.scores) v = read_f32(in);

    // Row sums must be 1: rows are post-softmax over all active keys.
    for (std::size_t q = 0; q < n_queries; ++q) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n_tokens; ++i) sum += map.scores[q * n_tokens + i];
        if (std::abs(sum - 1.0) > 1e-5) {
            throw DataError("attention map: query row " + std::to_string(q) +
                            " sums to " + std::to_string(sum) + ", expected 1");
        }
    }

    map.visual_index.resize(n_visual);
    for (auto& e : map.visual_index) {
        e.seq_pos = read_u32(in);
        e.frame_index = read_u32(in);
        e.token_index = read_u32(in);
        if (e.seq_pos >= n_tokens) throw DataError("attention map: visual seq_pos out of range");
    }
    return map;
}

AttentionMap read_attention_map_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open attention map: " + path);
    return read_attention_map(in);
}

void write_attention_map(std::ostream& out, const AttentionMap& map) {
    out.write(kMagic, 8);
    write_u32(out, map.layer);
    write_u32(out, static_cast<std::uint32_t>(map.n_queries()));
    write_u32(out, static_cast<std::uint32_t>(map.n_tokens));
    write_u32(out, static_cast<std::uint32_t>(map.visual_index.size()));
    for (double v : map.scores) write_f32(out, static_cast<float>(v));
    for (const auto& e : map.visual_index) {
        write_u32(out, e.seq_pos);
        write_u32(out, e.frame_index);
        write_u32(out, e.token_index);
    }
}

void write_attention_map_file(const std::string& path, const AttentionMap& map) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write attention map: " + path);
    write_attention_map(out, map);
}

}  // namespace ecp
