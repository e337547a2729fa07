#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace ecp {

/// Corner / edge / center token partition of a rows x cols grid. Margin
/// bands are floor(margin_fraction * dim) cells per side; corner cells lie
/// in both a row band and a column band, edge = peripheral minus corner.
struct RegionPartition {
    std::uint16_t rows = 0;
    std::uint16_t cols = 0;
    double margin_fraction = 0.15;
    std::vector<std::size_t> corner;
    std::vector<std::size_t> edge;
    std::vector<std::size_t> center;

    std::size_t peripheral_count() const { return corner.size() + edge.size(); }
};

/// Per-layer peripheral-bias statistics from a sample of per-frame ratios.
struct BiasStatsEntry {
    int layer = -1;
    double mu = 0.0;       // sample mean of the peripheral-to-center ratio
    double sigma = 0.0;    // sample standard deviation (n-1 denominator)
    double cohens_d = 0.0; // (mu - 1) / sigma
    double t_stat = 0.0;   // (mu - mu0) / (sigma / sqrt(n))
    std::size_t n = 0;
    bool degenerate = false;  // sigma == 0; d and t undefined
};

struct DistributionDiagnostics {
    double skewness = 0.0;         // Fisher moment coefficient, m3 / m2^(3/2)
    double top_decile_share = 0.0; // mass fraction of the top 10% of tokens
};

RegionPartition partition_regions(std::uint16_t rows, std::uint16_t cols,
                                  double margin_fraction);

/// (mean per-token mass over peripheral) / (mean per-token mass over center).
/// 1.0 means no bias. Throws DataError on exact-zero center mass.
double peripheral_ratio(const std::vector<double>& token_mass, const RegionPartition& partition);

/// One-sample statistics of per-frame ratio samples against baseline mu0.
BiasStatsEntry bias_stats(const std::vector<double>& ratios, double mu0 = 1.0);

/// Pearson correlation of two per-layer profiles.
double profile_correlation(const std::vector<double>& a, const std::vector<double>& b);

DistributionDiagnostics distribution_diagnostics(const std::vector<double>& values);

void write_bias_csv(std::ostream& out, const std::vector<BiasStatsEntry>& entries);

}  // namespace ecp
