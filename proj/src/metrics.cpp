#include "mapflow/metrics.hpp"

#include "mapflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace mapflow {

namespace {

std::vector<std::uint32_t> compact(std::span<const std::uint32_t> labels, std::size_t& count) {
    std::unordered_map<std::uint32_t, std::uint32_t> ids;
    std::vector<std::uint32_t> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out[i] = ids.try_emplace(labels[i], static_cast<std::uint32_t>(ids.size())).first->second;
    }
    count = ids.size();
    return out;
}

} // namespace

Contingency contingency(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
    if (a.size() != b.size()) throw ValidationError("labelings have different lengths");
    if (a.empty()) throw ValidationError("labelings are empty");
    Contingency c;
    c.n = a.size();
    std::size_t rows = 0, cols = 0;
    const auto ra = compact(a, rows);
    const auto cb = compact(b, cols);
    c.row_sums.assign(rows, 0);
    c.col_sums.assign(cols, 0);
    std::unordered_map<std::uint64_t, std::size_t> cells;
    for (std::size_t i = 0; i < c.n; ++i) {
        ++c.row_sums[ra[i]];
        ++c.col_sums[cb[i]];
        ++cells[(static_cast<std::uint64_t>(ra[i]) << 32) | cb[i]];
    }
    c.cells.reserve(cells.size());
    for (const auto& [key, count] : cells) {
        c.cells.push_back({static_cast<std::uint32_t>(key >> 32), static_cast<std::uint32_t>(key), count});
    }
    std::sort(c.cells.begin(), c.cells.end(),
              [](const auto& x, const auto& y) { return x.row != y.row ? x.row < y.row : x.col < y.col; });
    return c;
}

double entropy_nats(std::span<const std::size_t> sizes, std::size_t n) {
    double h = 0.0;
    for (std::size_t s : sizes) {
        if (s == 0) continue;
        const double p = static_cast<double>(s) / static_cast<double>(n);
        h -= p * std::log(p);
    }
    return h;
}

double mutual_information(const Contingency& c) {
    const double n = static_cast<double>(c.n);
    double mi = 0.0;
    for (const auto& cell : c.cells) {
        const double nij = static_cast<double>(cell.count);
        mi += nij / n *
              std::log(n * nij / (static_cast<double>(c.row_sums[cell.row]) * static_cast<double>(c.col_sums[cell.col])));
    }
    return std::max(mi, 0.0);
}

double expected_mutual_information(std::span<const std::size_t> row_sums,
                                   std::span<const std::size_t> col_sums, std::size_t n) {
    const double N = static_cast<double>(n);
    std::vector<double> lfact(n + 1);
    for (std::size_t k = 0; k <= n; ++k) lfact[k] = std::lgamma(static_cast<double>(k) + 1.0);
    double emi = 0.0;
    for (std::size_t a : row_sums) {
        for (std::size_t b : col_sums) {
            const std::size_t lo = std::max<std::size_t>(1, a + b > n ? a + b - n : 0);
            const std::size_t hi = std::min(a, b);
            const double fixed = lfact[a] + lfact[b] + lfact[n - a] + lfact[n - b] - lfact[n];
            for (std::size_t k = lo; k <= hi; ++k) {
                const double log_p = fixed - lfact[k] - lfact[a - k] - lfact[b - k] - lfact[n - a - b + k];
                const double kk = static_cast<double>(k);
                emi += kk / N * std::log(N * kk / (static_cast<double>(a) * static_cast<double>(b))) *
                       std::exp(log_p);
            }
        }
    }
    return emi;
}

double ami(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b, AmiNormalization norm) {
    const Contingency c = contingency(a, b);
    const double ha = entropy_nats(c.row_sums, c.n);
    const double hb = entropy_nats(c.col_sums, c.n);
    const double mi = mutual_information(c);
    const double emi = expected_mutual_information(c.row_sums, c.col_sums, c.n);
    double scale = 0.0;
    switch (norm) {
    case AmiNormalization::arithmetic: scale = 0.5 * (ha + hb); break;
    case AmiNormalization::geometric: scale = std::sqrt(ha * hb); break;
    case AmiNormalization::max: scale = std::max(ha, hb); break;
    case AmiNormalization::min: scale = std::min(ha, hb); break;
    }
    const double denom = scale - emi;
    if (!(denom > 0.0)) return 0.0;
    return (mi - emi) / denom;
}

} // namespace mapflow
