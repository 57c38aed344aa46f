#include "mapflow/mapeq.hpp"

#include "mapflow/errors.hpp"

#include <cmath>
#include <string>
#include <unordered_map>

namespace mapflow {

Partition make_partition(std::span<const std::uint32_t> assignment) {
    Partition part;
    part.module_of.resize(assignment.size());
    std::unordered_map<std::uint32_t, std::uint32_t> relabel;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        auto [it, inserted] =
            relabel.try_emplace(assignment[i], static_cast<std::uint32_t>(relabel.size()));
        part.module_of[i] = it->second;
    }
    part.num_modules = relabel.size();
    return part;
}

void validate_partition(const Partition& part, std::size_t n) {
    if (part.module_of.size() != n) {
        throw ValidationError("partition covers " + std::to_string(part.module_of.size()) +
                              " nodes, graph has " + std::to_string(n));
    }
    std::vector<bool> used(part.num_modules, false);
    for (std::uint32_t m : part.module_of) {
        if (m >= part.num_modules) throw ValidationError("module id out of range");
        used[m] = true;
    }
    for (bool u : used) {
        if (!u) throw ValidationError("module ids are not contiguous");
    }
}

double entropy_bits(std::span<const double> p) {
    double h = 0.0;
    for (double x : p) h -= plogp(x);
    return h;
}

double codelength_from_exits(std::span<const double> visit_rate,
                             std::span<const std::uint32_t> module_of,
                             std::span<const double> exit_flow) {
    std::vector<double> module_flow(exit_flow.size(), 0.0);
    double node_term = 0.0;
    for (std::size_t i = 0; i < visit_rate.size(); ++i) {
        module_flow[module_of[i]] += visit_rate[i];
        node_term += plogp(visit_rate[i]);
    }
    double exit_total = 0.0;
    double exit_term = 0.0;
    double loop_term = 0.0;
    for (std::size_t m = 0; m < exit_flow.size(); ++m) {
        exit_total += exit_flow[m];
        exit_term += plogp(exit_flow[m]);
        loop_term += plogp(exit_flow[m] + module_flow[m]);
    }
    return plogp(exit_total) - 2.0 * exit_term - node_term + loop_term;
}

Partition evaluate(const MultiGraph& g, const FlowField& flows, Partition part) {
    validate_partition(part, g.num_nodes());
    part.module_flow.assign(part.num_modules, 0.0);
    part.exit_flow.assign(part.num_modules, 0.0);
    const ModuleTargets targets(flows, part.module_of);
    for (NodeId i = 0; i < g.num_nodes(); ++i) {
        const std::uint32_t m = part.module_of[i];
        part.module_flow[m] += flows.visit_rate[i];
        part.exit_flow[m] += node_transition_masses(g, flows, part.module_of, targets, i).exit;
    }
    part.codelength = codelength_from_exits(flows.visit_rate, part.module_of, part.exit_flow);
    return part;
}

double codelength(const MultiGraph& g, const FlowField& flows, const Partition& part) {
    return evaluate(g, flows, part).codelength;
}

double codelength_savings(double codelength, double one_module_codelength) {
    if (one_module_codelength == 0.0) throw DomainError("one-module codelength is zero");
    return 1.0 - codelength / one_module_codelength;
}

} // namespace mapflow
