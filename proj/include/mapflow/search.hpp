#pragma once

// Greedy two-level map equation minimization: seeded local node moves, aggregation of
// modules into super-nodes, repeat. Best of several independent trials, compared against
// the one-module solution.

#include "mapflow/flow.hpp"
#include "mapflow/graph.hpp"
#include "mapflow/mapeq.hpp"

#include <cstdint>
#include <span>
#include <tuple>
#include <vector>

namespace mapflow {

struct SearchConfig {
    std::uint64_t seed = 1;
    std::size_t trials = 10;
    std::size_t max_outer_loops = 100;
    double improvement_threshold = 1e-10; // bits per sweep
    bool shuffle = true;
};

void validate(const SearchConfig& cfg);

/// Jump-channel aggregate carried by a (super-)node: summed jump source mass, summed target
/// weight, and the number of original nodes holding a non-zero target.
struct NodeChannel {
    std::uint32_t channel;
    double source;
    double target;
    std::uint32_t count;
};

struct FlowLink {
    std::uint32_t node;
    double flow;
};

/// Recorded flow between (super-)nodes at one level of the search.
class FlowNetwork {
public:
    static FlowNetwork from_flows(const MultiGraph& g, const FlowField& flows);
    FlowNetwork aggregate(std::span<const std::uint32_t> module_of, std::size_t num_modules) const;

    std::size_t num_nodes() const noexcept { return flow_.size(); }
    double flow(std::uint32_t u) const noexcept { return flow_[u]; }
    /// All recorded link flow leaving u, including flow that stays inside u.
    double out_link(std::uint32_t u) const noexcept { return out_link_[u]; }
    double self_link(std::uint32_t u) const noexcept { return self_link_[u]; }
    std::span<const FlowLink> out_links(std::uint32_t u) const noexcept {
        return {out_.data() + out_offsets_[u], out_offsets_[u + 1] - out_offsets_[u]};
    }
    std::span<const FlowLink> in_links(std::uint32_t u) const noexcept {
        return {in_.data() + in_offsets_[u], in_offsets_[u + 1] - in_offsets_[u]};
    }
    std::span<const NodeChannel> channels(std::uint32_t u) const noexcept {
        return {channels_.data() + channel_offsets_[u], channel_offsets_[u + 1] - channel_offsets_[u]};
    }
    std::size_t num_channels() const noexcept { return channel_totals_.size(); }
    double channel_total(std::uint32_t k) const noexcept { return channel_totals_[k]; }
    std::uint32_t channel_count(std::uint32_t k) const noexcept { return channel_counts_[k]; }
    /// sum_i plogp(p_i) over the original nodes; constant across levels.
    double node_entropy_term() const noexcept { return node_entropy_term_; }

private:
    void set_links(std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> links);

    std::vector<double> flow_, out_link_, self_link_;
    std::vector<std::size_t> out_offsets_, in_offsets_;
    std::vector<FlowLink> out_, in_;
    std::vector<std::size_t> channel_offsets_;
    std::vector<NodeChannel> channels_;
    std::vector<double> channel_totals_;
    std::vector<std::uint32_t> channel_counts_;
    double node_entropy_term_ = 0.0;
};

/// Incrementally maintained two-level codelength of a FlowNetwork partition. Module ids
/// range over 0..num_nodes-1; empty modules are allowed.
class ModuleMover {
public:
    ModuleMover(const FlowNetwork& net, std::vector<std::uint32_t> module_of);

    double codelength() const noexcept;
    std::uint32_t module_of(std::uint32_t u) const noexcept { return module_of_[u]; }
    std::span<const std::uint32_t> assignment() const noexcept { return module_of_; }
    std::size_t num_nonempty_modules() const noexcept;

    /// Codelength change if u moved to `target`, from local information only.
    double move_delta(std::uint32_t u, std::uint32_t target) const;
    void move(std::uint32_t u, std::uint32_t target);

    /// One pass over `order`, moving each node to its best candidate module (observed
    /// neighbor modules, the best jump module per channel, an empty module). Returns the
    /// total codelength decrease.
    double sweep(std::span<const std::uint32_t> order);

    /// Recomputes module exits and codelength terms from scratch.
    void refresh();

private:
    struct ModuleChannel {
        std::uint32_t channel;
        double source;
        double target;
        std::uint32_t count;   // original nodes with non-zero target
        std::uint32_t members; // level nodes contributing this channel
    };
    struct Module {
        double flow = 0.0;
        double link_exit = 0.0;
        double jump_exit = 0.0;
        std::uint32_t members = 0;
        std::vector<ModuleChannel> channels; // sorted by channel
        double exit() const noexcept { return link_exit + jump_exit; }
    };
    struct MoveEffect {
        double delta;
        double old_link_exit, old_jump_exit; // module losing u
        double new_link_exit, new_jump_exit; // module gaining u
    };

    double outside(std::uint32_t channel, double target, std::uint32_t count) const noexcept;
    double jump_exit_of(const Module& m) const noexcept;
    double jump_exit_after(const Module& m, std::uint32_t u, double sign) const;
    MoveEffect evaluate(std::uint32_t u, std::uint32_t target, double flow_to_old, double flow_from_old,
                        double flow_to_new, double flow_from_new) const;
    void apply(std::uint32_t u, std::uint32_t target, const MoveEffect& effect);
    void best_jump_modules();

    const FlowNetwork* net_;
    std::vector<std::uint32_t> module_of_;
    std::vector<Module> modules_;
    std::vector<std::uint32_t> empty_modules_;
    double exit_total_ = 0.0, exit_term_ = 0.0, loop_term_ = 0.0;

    // sweep scratch
    std::vector<double> scratch_to_, scratch_from_;
    std::vector<std::uint32_t> touched_;
    std::vector<std::uint32_t> seen_;
    std::uint32_t stamp_ = 0;
    std::vector<std::uint32_t> best_jump_module_;
};

Partition one_level_partition(const MultiGraph& g);

/// Best partition over cfg.trials seeded runs; deterministic for fixed inputs and seed.
/// The one-module partition is returned when no run beats it. The result carries its
/// codelength, module flows and exit flows.
Partition optimize(const MultiGraph& g, const FlowField& flows, const SearchConfig& cfg = {});

/// A single seeded run (no one-module comparison); exposed for tests.
Partition optimize_trial(const MultiGraph& g, const FlowField& flows, const SearchConfig& cfg,
                         std::uint64_t trial_seed);

} // namespace mapflow
