#include "mapflow/flow.hpp"

#include "mapflow/errors.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace mapflow {

std::string_view to_string(FlowMethod m) {
    switch (m) {
    case FlowMethod::standard: return "standard";
    case FlowMethod::uniform: return "uniform";
    case FlowMethod::bipartite: return "bipartite";
    case FlowMethod::metadata: return "metadata";
    case FlowMethod::teleport: return "teleport";
    }
    return "?";
}

FlowMethod parse_flow_method(std::string_view name) {
    if (name == "standard" || name == "none") return FlowMethod::standard;
    if (name == "uniform" || name == "regularized") return FlowMethod::uniform;
    if (name == "bipartite") return FlowMethod::bipartite;
    if (name == "metadata") return FlowMethod::metadata;
    if (name == "teleport") return FlowMethod::teleport;
    throw ValidationError("unknown method '" + std::string(name) + "'");
}

JumpChannels prior_channels(const MultiGraph& g, const PriorModel& p) {
    const std::size_t n = g.num_nodes();
    JumpChannels ch;
    ch.exclude_self = true;
    ch.offsets.assign(n + 1, 0);
    const auto safe_inverse = [](double x) { return x > 0.0 ? 1.0 / x : 0.0; };

    switch (p.mode) {
    case PriorMode::uniform:
        ch.num_channels = 1;
        ch.target_total = {p.in_factor_sum};
        for (NodeId i = 0; i < n; ++i) {
            ch.entries.push_back({0, safe_inverse(p.in_factor_sum - p.in_factor[i]), p.in_factor[i]});
            ch.offsets[i + 1] = ch.entries.size();
        }
        break;
    case PriorMode::bipartite: {
        // channel 0 reaches type-B nodes, channel 1 reaches type-A nodes
        ch.num_channels = 2;
        ch.target_total = {p.in_factor_sum_by_type[1], p.in_factor_sum_by_type[0]};
        for (NodeId i = 0; i < n; ++i) {
            if (g.node_type(i) == NodeType::A) {
                ch.entries.push_back({0, safe_inverse(p.in_factor_sum_by_type[1]), 0.0});
                ch.entries.push_back({1, 0.0, p.in_factor[i]});
            } else {
                ch.entries.push_back({0, 0.0, p.in_factor[i]});
                ch.entries.push_back({1, safe_inverse(p.in_factor_sum_by_type[0]), 0.0});
            }
            ch.offsets[i + 1] = ch.entries.size();
        }
        break;
    }
    case PriorMode::metadata: {
        // channel 0 is the uniform part, channel 1 + m reinforces label m
        const std::size_t n_labels = g.num_labels();
        ch.num_channels = 1 + n_labels;
        ch.target_total.resize(ch.num_channels);
        ch.target_total[0] = p.in_factor_sum;
        for (LabelId m = 0; m < n_labels; ++m) ch.target_total[1 + m] = p.in_factor_sum_by_label[m];
        for (NodeId i = 0; i < n; ++i) {
            const LabelId m = g.label(i);
            const double lambda_m = p.lambda_by_label[m];
            const double denom = p.lambda * (p.in_factor_sum - p.in_factor[i]) +
                                 lambda_m * (p.in_factor_sum_by_label[m] - p.in_factor[i]);
            const double inv = safe_inverse(denom);
            ch.entries.push_back({0, p.lambda * inv, p.in_factor[i]});
            ch.entries.push_back({1 + m, lambda_m * inv, p.in_factor[i]});
            ch.offsets[i + 1] = ch.entries.size();
        }
        break;
    }
    }
    return ch;
}

JumpChannels teleport_channels(std::size_t n) {
    JumpChannels ch;
    ch.num_channels = 1;
    ch.exclude_self = false;
    ch.target_total = {static_cast<double>(n)};
    ch.offsets.resize(n + 1);
    ch.entries.assign(n, {0, n > 0 ? 1.0 / static_cast<double>(n) : 0.0, 1.0});
    std::iota(ch.offsets.begin(), ch.offsets.end(), std::size_t{0});
    return ch;
}

std::vector<double> apply_regularized(const MultiGraph& g, const PriorModel& prior,
                                      std::span<const double> p) {
    TransitionOperator op(g, prior_channels(g, prior), prior.alpha);
    std::vector<double> out(g.num_nodes());
    op.apply(p, out);
    return out;
}

std::vector<double> power_iterate(const TransitionOperator& op, double tol, std::size_t max_iter,
                                  double* residual, std::size_t* iterations) {
    if (!(tol > 0.0)) throw DomainError("tolerance must be positive");
    const std::size_t n = op.num_nodes();
    if (n == 0) throw DomainError("cannot compute flows on an empty graph");

    std::vector<double> p(n, 1.0 / static_cast<double>(n));
    std::vector<double> next(n);
    double r = 0.0;
    for (std::size_t it = 1; it <= max_iter; ++it) {
        op.apply(p, next);
        r = 0.0;
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            r += std::abs(next[i] - p[i]);
            total += next[i];
        }
        if (r < tol) {
            for (double& x : next) x /= total;
            if (residual) *residual = r;
            if (iterations) *iterations = it;
            return next;
        }
        double lazy_total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = 0.5 * (p[i] + next[i]);
            lazy_total += p[i];
        }
        for (double& x : p) x /= lazy_total;
    }
    throw ConvergenceError("power iteration did not reach tolerance " + std::to_string(tol) +
                               " in " + std::to_string(max_iter) + " iterations (residual " +
                               std::to_string(r) + ")",
                           r);
}

namespace {

FlowMethod method_of(PriorMode mode) {
    switch (mode) {
    case PriorMode::uniform: return FlowMethod::uniform;
    case PriorMode::bipartite: return FlowMethod::bipartite;
    case PriorMode::metadata: return FlowMethod::metadata;
    }
    return FlowMethod::uniform;
}

FlowField field_from(const TransitionOperator& op, FlowMethod method, std::vector<double> p,
                     double residual, std::size_t iterations) {
    FlowField f;
    f.method = method;
    f.visit_rate = std::move(p);
    f.jump_weight.assign(op.jump_weight().begin(), op.jump_weight().end());
    f.link_scale.assign(op.link_scale().begin(), op.link_scale().end());
    f.channels = op.channels();
    f.residual = residual;
    f.iterations = iterations;
    return f;
}

} // namespace

FlowField stationary_flow(const MultiGraph& g, const PriorModel& prior, double tol,
                          std::size_t max_iter) {
    TransitionOperator op(g, prior_channels(g, prior), prior.alpha);
    if (g.num_nodes() == 1) return field_from(op, method_of(prior.mode), {1.0}, 0.0, 0);
    double residual = 0.0;
    std::size_t iterations = 0;
    auto p = power_iterate(op, tol, max_iter, &residual, &iterations);
    return field_from(op, method_of(prior.mode), std::move(p), residual, iterations);
}

FlowField stationary_flow_teleport(const MultiGraph& g, double alpha, double tol,
                                   std::size_t max_iter) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("teleportation rate must lie in (0, 1)");
    const std::size_t n = g.num_nodes();
    std::vector<double> jump(n);
    for (NodeId i = 0; i < n; ++i) jump[i] = g.s_out(i) > 0.0 ? alpha : 1.0;
    TransitionOperator op(g, teleport_channels(n), std::move(jump));
    double residual = 0.0;
    std::size_t iterations = 0;
    auto p = power_iterate(op, tol, max_iter, &residual, &iterations);
    return field_from(op, FlowMethod::teleport, std::move(p), residual, iterations);
}

FlowField stationary_flow_standard(const MultiGraph& g, double tol, std::size_t max_iter) {
    const std::size_t n = g.num_nodes();
    if (n == 0) throw DomainError("cannot compute flows on an empty graph");
    FlowField f;
    f.method = FlowMethod::standard;
    if (!g.directed()) {
        const double total = std::accumulate(g.s_out().begin(), g.s_out().end(), 0.0);
        f.visit_rate.resize(n);
        for (NodeId i = 0; i < n; ++i) {
            f.visit_rate[i] = total > 0.0 ? g.s_out(i) / total : 1.0 / static_cast<double>(n);
        }
    } else {
        FlowField pagerank = stationary_flow_teleport(g, kStandardTeleportRate, tol, max_iter);
        f.visit_rate = std::move(pagerank.visit_rate);
        f.residual = pagerank.residual;
        f.iterations = pagerank.iterations;
    }
    f.jump_weight.assign(n, 0.0);
    f.link_scale.resize(n);
    for (NodeId i = 0; i < n; ++i) f.link_scale[i] = g.s_out(i) > 0.0 ? 1.0 / g.s_out(i) : 0.0;
    f.channels.offsets.assign(n + 1, 0);
    return f;
}

FlowField compute_flow(const MultiGraph& g, const FlowOptions& opts) {
    switch (opts.method) {
    case FlowMethod::standard:
        return stationary_flow_standard(g, opts.tolerance, opts.max_iterations);
    case FlowMethod::teleport:
        return stationary_flow_teleport(g, opts.teleport_alpha, opts.tolerance, opts.max_iterations);
    case FlowMethod::uniform:
        return stationary_flow(g, build_prior(g, PriorMode::uniform), opts.tolerance, opts.max_iterations);
    case FlowMethod::bipartite:
        return stationary_flow(g, build_prior(g, PriorMode::bipartite), opts.tolerance,
                               opts.max_iterations);
    case FlowMethod::metadata:
        return stationary_flow(g, build_prior(g, PriorMode::metadata), opts.tolerance,
                               opts.max_iterations);
    }
    throw ValidationError("unknown flow method");
}

namespace {

std::uint64_t module_channel_key(std::uint32_t module, std::uint32_t channel) {
    return (static_cast<std::uint64_t>(module) << 32) | channel;
}

} // namespace

ModuleTargets::ModuleTargets(const FlowField& flows, std::span<const std::uint32_t> module_of)
    : channels_(&flows.channels), channel_counts_(flows.channels.num_channels, 0) {
    const std::size_t n = module_of.size();
    if (flows.channels.empty()) return;
    for (NodeId i = 0; i < n; ++i) {
        for (const ChannelEntry& e : flows.channels.of(i)) {
            if (e.target == 0.0) continue;
            Sum& s = sums_[module_channel_key(module_of[i], e.channel)];
            s.value += e.target;
            ++s.count;
            ++channel_counts_[e.channel];
        }
    }
}

double ModuleTargets::inside(std::uint32_t module, std::uint32_t channel) const {
    auto it = sums_.find(module_channel_key(module, channel));
    return it == sums_.end() ? 0.0 : it->second.value;
}

double ModuleTargets::outside(std::uint32_t module, std::uint32_t channel) const {
    auto it = sums_.find(module_channel_key(module, channel));
    if (it == sums_.end()) return channels_->target_total[channel];
    if (it->second.count == channel_counts_[channel]) return 0.0;
    return channels_->target_total[channel] - it->second.value;
}

TransitionMasses node_transition_masses(const MultiGraph& g, const FlowField& flows,
                                        std::span<const std::uint32_t> module_of,
                                        const ModuleTargets& targets, NodeId i) {
    TransitionMasses m;
    const std::uint32_t home = module_of[i];
    for (const Arc& a : g.out_arcs(i)) {
        const double f = flows.link_flow(a);
        (module_of[a.target] == home ? m.within : m.exit) += f;
    }
    if (!flows.channels.empty()) {
        for (const ChannelEntry& e : flows.channels.of(i)) {
            if (e.source == 0.0) continue;
            const double src = flows.jump_source(i, e);
            const double self = flows.channels.exclude_self ? e.target : 0.0;
            m.exit += src * targets.outside(home, e.channel);
            m.within += src * (targets.inside(home, e.channel) - self);
        }
    }
    return m;
}

} // namespace mapflow
