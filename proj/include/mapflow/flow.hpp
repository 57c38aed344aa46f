#pragma once

// Stationary flows under the regularized (posterior-mean) transition rates, the classic
// fixed-rate teleportation walk, and the unregularized walk.
//
// Every non-link step is a "jump" that factorizes over channels: a node i with jump mass
// x_i = p_i * jump_weight_i sends x_i * source_ik * target_jk to each node j holding a target
// in channel k (j != i when self-jumps are excluded). One channel reproduces the uniform
// prior (source 1/(S - f_i), target f_j) and plain teleportation (source 1/N, target 1);
// metadata adds one channel per label and the bipartite prior uses two cross-type channels.
// Channel source sums make one operator application O(E + N + #channel entries).

#include "mapflow/graph.hpp"
#include "mapflow/prior.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mapflow {

enum class FlowMethod {
    standard,  // observed links only; unrecorded teleportation for directed graphs
    uniform,   // regularized, uniform connectivity
    bipartite, // regularized, cross-type connectivity
    metadata,  // regularized, label-reinforced connectivity
    teleport,  // fixed-rate recorded teleportation
};

std::string_view to_string(FlowMethod m);
/// Accepts the enum names plus "none" (standard) and "regularized" (uniform).
FlowMethod parse_flow_method(std::string_view name);

/// Teleportation rate used to obtain ergodic visit rates for the standard method on
/// directed graphs. Those teleportation steps are not encoded.
inline constexpr double kStandardTeleportRate = 0.15;

struct ChannelEntry {
    std::uint32_t channel;
    double source;
    double target;
};

struct JumpChannels {
    std::size_t num_channels = 0;
    std::vector<double> target_total; // S_k
    std::vector<std::size_t> offsets{0};
    std::vector<ChannelEntry> entries; // sorted by channel within each node
    bool exclude_self = true;

    std::span<const ChannelEntry> of(NodeId i) const noexcept {
        return {entries.data() + offsets[i], offsets[i + 1] - offsets[i]};
    }
    bool empty() const noexcept { return num_channels == 0; }
};

/// Channel form of the prior: sum over channels of source_ik * target_jk equals
/// gamma_ij / sum_j gamma_ij for j != i.
JumpChannels prior_channels(const MultiGraph& g, const PriorModel& p);
/// Uniform teleportation to any node, itself included.
JumpChannels teleport_channels(std::size_t n);

/// Work counters for one or more operator applications.
struct OperatorStats {
    std::uint64_t arc_visits = 0;
    std::uint64_t channel_visits = 0;
    std::size_t workspace_bytes = 0;
};

/// p'_j = sum_i p_i (1 - beta_i) w_ij / s_i^out + jumps. Nodes without out-arcs must have
/// beta_i = 1 for the operator to conserve mass.
class TransitionOperator {
public:
    TransitionOperator(const MultiGraph& g, JumpChannels channels, std::vector<double> jump_weight);

    /// OpenMP pull kernel. Channel sums use a fixed block decomposition, so results do not
    /// depend on the thread count.
    void apply(std::span<const double> p, std::span<double> out, OperatorStats* stats = nullptr) const;
    /// Serial push-style reference kept for testing the parallel kernel.
    void apply_serial(std::span<const double> p, std::span<double> out,
                      OperatorStats* stats = nullptr) const;

    const JumpChannels& channels() const noexcept { return channels_; }
    std::span<const double> jump_weight() const noexcept { return jump_weight_; }
    std::span<const double> link_scale() const noexcept { return link_scale_; }
    std::size_t num_nodes() const noexcept { return graph_->num_nodes(); }
    /// Bytes held by the operator itself (excluding the graph).
    std::size_t footprint_bytes() const noexcept;

private:
    const MultiGraph* graph_;
    JumpChannels channels_;
    std::vector<double> jump_weight_;
    std::vector<double> link_scale_;
};

struct FlowField {
    FlowMethod method = FlowMethod::standard;
    std::vector<double> visit_rate;  // p_i
    std::vector<double> jump_weight; // recorded share of steps taken as jumps (alpha_i)
    std::vector<double> link_scale;  // recorded link-step probability per unit weight
    JumpChannels channels;
    double residual = 0.0;
    std::size_t iterations = 0;

    double link_flow(const Arc& a) const noexcept {
        return visit_rate[a.source] * link_scale[a.source] * a.weight;
    }
    double jump_source(NodeId i, const ChannelEntry& e) const noexcept {
        return visit_rate[i] * jump_weight[i] * e.source;
    }
};

struct FlowOptions {
    FlowMethod method = FlowMethod::standard;
    double teleport_alpha = 0.15;
    double tolerance = 1e-12;
    std::size_t max_iterations = 10'000;
};

/// One application of the regularized operator.
std::vector<double> apply_regularized(const MultiGraph& g, const PriorModel& prior,
                                      std::span<const double> p);

/// Iterates the lazy chain p <- (p + Tp)/2 from the uniform vector until ||Tp - p||_1 < tol.
/// The lazy chain shares T's fixed points and is aperiodic, which bipartite priors need.
/// Throws ConvergenceError after max_iter iterations.
std::vector<double> power_iterate(const TransitionOperator& op, double tol, std::size_t max_iter,
                                  double* residual = nullptr, std::size_t* iterations = nullptr);

FlowField stationary_flow(const MultiGraph& g, const PriorModel& prior, double tol = 1e-12,
                          std::size_t max_iter = 10'000);
FlowField stationary_flow_teleport(const MultiGraph& g, double alpha, double tol = 1e-12,
                                   std::size_t max_iter = 10'000);
/// Undirected: p_i = s_i / sum s. Directed: visit rates from teleportation at
/// kStandardTeleportRate, with only link steps encoded.
FlowField stationary_flow_standard(const MultiGraph& g, double tol = 1e-12,
                                   std::size_t max_iter = 10'000);

FlowField compute_flow(const MultiGraph& g, const FlowOptions& opts);

/// Per-module channel target sums V_{m,k}.
class ModuleTargets {
public:
    ModuleTargets(const FlowField& flows, std::span<const std::uint32_t> module_of);
    double inside(std::uint32_t module, std::uint32_t channel) const;
    /// S_k - V_{m,k}; exactly zero when the module holds every target of the channel.
    double outside(std::uint32_t module, std::uint32_t channel) const;

private:
    struct Sum {
        double value = 0.0;
        std::size_t count = 0;
    };
    const JumpChannels* channels_;
    std::vector<std::size_t> channel_counts_;
    std::unordered_map<std::uint64_t, Sum> sums_;
};

struct TransitionMasses {
    double within = 0.0;
    double exit = 0.0;
};

/// Splits node i's recorded out-flow into the part staying in its module and the part
/// leaving it, from observed arcs plus channel aggregates.
TransitionMasses node_transition_masses(const MultiGraph& g, const FlowField& flows,
                                        std::span<const std::uint32_t> module_of,
                                        const ModuleTargets& targets, NodeId i);

} // namespace mapflow
