#pragma once

// Two-level map equation. With module exit flows q_m, module flows P_m and node visit
// rates p_i (all log base 2, 0 log 0 = 0):
//
//   L = plogp(sum_m q_m) - 2 sum_m plogp(q_m) - sum_i plogp(p_i) + sum_m plogp(q_m + P_m)
//
// which is q H(Q) + sum_m p_m^loop H(P^m) expanded. Exit flow is used for both the index
// codebook and the module exit codewords.

#include "mapflow/flow.hpp"
#include "mapflow/graph.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace mapflow {

struct Partition {
    std::vector<std::uint32_t> module_of;
    std::size_t num_modules = 0;
    std::vector<double> module_flow; // filled by evaluate()
    std::vector<double> exit_flow;   // filled by evaluate()
    double codelength = std::numeric_limits<double>::quiet_NaN();
};

/// Relabels an arbitrary assignment to contiguous module ids in order of first appearance.
Partition make_partition(std::span<const std::uint32_t> assignment);

/// Throws ValidationError unless the partition covers n nodes with contiguous module ids.
void validate_partition(const Partition& part, std::size_t n);

inline double plogp(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

/// Shannon entropy (bits) of a probability vector.
double entropy_bits(std::span<const double> p);

/// Map equation from per-node visit rates and per-module exit flows.
double codelength_from_exits(std::span<const double> visit_rate,
                             std::span<const std::uint32_t> module_of,
                             std::span<const double> exit_flow);

/// Fills module_flow, exit_flow and codelength.
Partition evaluate(const MultiGraph& g, const FlowField& flows, Partition part);

double codelength(const MultiGraph& g, const FlowField& flows, const Partition& part);

/// 1 - L / L1. Throws DomainError when L1 == 0.
double codelength_savings(double codelength, double one_module_codelength);

} // namespace mapflow
