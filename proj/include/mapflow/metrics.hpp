#pragma once

// Adjusted mutual information between two labelings of the same node set.

#include <cstdint>
#include <span>
#include <vector>

namespace mapflow {

enum class AmiNormalization { arithmetic, geometric, max, min };

/// Sparse cross-tabulation of two labelings. Labels are remapped to 0..R-1 and 0..C-1.
struct Contingency {
    std::size_t n = 0;
    std::vector<std::size_t> row_sums;
    std::vector<std::size_t> col_sums;
    struct Cell {
        std::uint32_t row, col;
        std::size_t count;
    };
    std::vector<Cell> cells; // non-zero cells only
};

Contingency contingency(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b);

/// Natural-log entropy of a class-size vector.
double entropy_nats(std::span<const std::size_t> sizes, std::size_t n);
double mutual_information(const Contingency& c);
/// Expected mutual information of two labelings with the given class sizes when one is
/// permuted uniformly at random (hypergeometric cell counts).
double expected_mutual_information(std::span<const std::size_t> row_sums,
                                   std::span<const std::size_t> col_sums, std::size_t n);

/// (MI - E[MI]) / (norm(H(a), H(b)) - E[MI]); 0 when the denominator is not positive.
double ami(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b,
           AmiNormalization norm = AmiNormalization::arithmetic);

} // namespace mapflow
