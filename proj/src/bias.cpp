#include "ecp/bias.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "ecp/errors.hpp"

namespace ecp {

RegionPartition partition_regions(std::uint16_t rows, std::uint16_t cols,
                                  double margin_fraction) {
    if (rows < 3 || cols < 3) throw ConfigError("partition needs dims >= 3");
    if (margin_fraction <= 0.0 || margin_fraction >= 0.5) {
        throw ConfigError("margin_fraction must lie in (0, 0.5)");
    }
    const std::size_t margin_rows = static_cast<std::size_t>(std::floor(margin_fraction * rows));
    const std::size_t margin_cols = static_cast<std::size_t>(std::floor(margin_fraction * cols));
    if (margin_rows == 0 || margin_cols == 0) {
        throw ConfigError("margin bands are empty at this fraction");
    }
    if (2 * margin_rows >= rows || 2 * margin_cols >= cols) {
        throw ConfigError("margins consume the whole grid");
    }

    RegionPartition part;
    part.rows = rows;
    part.cols = cols;
    part.margin_fraction = margin_fraction;
    for (std::size_t r = 0; r < rows; ++r) {
        const bool row_band = r < margin_rows || r >= rows - margin_rows;
        for (std::size_t c = 0; c < cols; ++c) {
            const bool col_band = c < margin_cols || c >= cols - margin_cols;
            const std::size_t idx = r * cols + c;
            if (row_band && col_band) {
                part.corner.push_back(idx);
            } else if (row_band || col_band) {
                part.edge.push_back(idx);
            } else {
                part.center.push_back(idx);
            }
        }
    }
    return part;
}

namespace {

double region_mean(const std::vector<double>& mass, const std::vector<std::size_t>& region) {
    double sum = 0.0;
    for (std::size_t i : region) sum += mass[i];
    return sum / double(region.size());
}

}  // namespace

double peripheral_ratio(const std::vector<double>& token_mass, const RegionPartition& part) {
    const std::size_t n = std::size_t(part.rows) * part.cols;
    if (token_mass.size() != n) {
        throw DataError("token mass length does not match partition grid");
    }
    double peripheral = 0.0;
    for (std::size_t i : part.corner) peripheral += token_mass[i];
    for (std::size_t i : part.edge) peripheral += token_mass[i];
    peripheral /= double(part.peripheral_count());

    const double center = region_mean(token_mass, part.center);
    if (center == 0.0) throw DataError("peripheral_ratio: center mass is exactly zero");
    return peripheral / center;
}

BiasStatsEntry bias_stats(const std::vector<double>& ratios, double mu0) {
    if (ratios.size() < 2) throw DataError("bias_stats needs at least 2 samples");

    BiasStatsEntry e;
    e.n = ratios.size();
    e.mu = std::accumulate(ratios.begin(), ratios.end(), 0.0) / double(e.n);
    double ss = 0.0;
    for (double r : ratios) ss += (r - e.mu) * (r - e.mu);
    e.sigma = std::sqrt(ss / double(e.n - 1));
    if (e.sigma == 0.0) {
        e.degenerate = true;
        return e;
    }
    e.cohens_d = (e.mu - 1.0) / e.sigma;
    e.t_stat = (e.mu - mu0) / (e.sigma / std::sqrt(double(e.n)));
    return e;
}

double profile_correlation(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw DataError("profiles have different lengths");
    if (a.size() < 2) throw DataError("profile correlation needs length >= 2");
    const std::size_t n = a.size();
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / double(n);
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / double(n);
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    if (va == 0.0 || vb == 0.0) throw DataError("constant profile has no correlation");
    return cov / std::sqrt(va * vb);
}

DistributionDiagnostics distribution_diagnostics(const std::vector<double>& values) {
    if (values.size() < 3) throw DataError("distribution diagnostics need n >= 3");
    const std::size_t n = values.size();
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / double(n);
    double m2 = 0.0, m3 = 0.0;
    for (double v : values) {
        const double d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= double(n);
    m3 /= double(n);
    if (m2 == 0.0) throw DataError("zero-variance score vector");

    DistributionDiagnostics diag;
    diag.skewness = m3 / std::pow(m2, 1.5);

    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const std::size_t k = static_cast<std::size_t>(std::ceil(0.1 * double(n)));
    const double total = std::accumulate(sorted.begin(), sorted.end(), 0.0);
    const double top = std::accumulate(sorted.begin(), sorted.begin() + k, 0.0);
    diag.top_decile_share = total == 0.0 ? 0.0 : top / total;
    return diag;
}

void write_bias_csv(std::ostream& out, const std::vector<BiasStatsEntry>& entries) {
    out << "layer,mu,sigma,d,t,n\n";
    for (const auto& e : entries) {
        out << e.layer << ',' << e.mu << ',' << e.sigma << ',';
        if (e.degenerate) {
            out << "nan,nan";
        } else {
            out << e.cohens_d << ',' << e.t_stat;
        }
        out << ',' << e.n << '\n';
    }
}

}  // namespace ecp
