#include "mapflow/search.hpp"

#include "mapflow/errors.hpp"
#include "mapflow/random.hpp"

#include <omp.h>

#include <algorithm>
#include <exception>
#include <limits>
#include <numeric>
#include <random>

namespace mapflow {

namespace {

constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
// Smallest codelength decrease (bits) accepted for a single move; below this the gain is
// indistinguishable from rounding in the incremental terms.
constexpr double kMinMoveGain = 1e-12;
constexpr std::size_t kMaxSweepsPerLevel = 200;

} // namespace

void validate(const SearchConfig& cfg) {
    if (cfg.trials < 1) throw ValidationError("search needs at least one trial");
    if (!(cfg.improvement_threshold > 0.0)) {
        throw ValidationError("improvement threshold must be positive");
    }
    if (cfg.max_outer_loops < 1) throw ValidationError("search needs at least one outer loop");
}

// ---------------------------------------------------------------------------
// FlowNetwork
// ---------------------------------------------------------------------------

void FlowNetwork::set_links(std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> links) {
    const std::size_t n = flow_.size();
    std::sort(links.begin(), links.end(), [](const auto& a, const auto& b) {
        return std::get<0>(a) != std::get<0>(b) ? std::get<0>(a) < std::get<0>(b)
                                                : std::get<1>(a) < std::get<1>(b);
    });
    out_.clear();
    out_offsets_.assign(n + 1, 0);
    std::vector<std::uint32_t> source;
    for (const auto& [u, v, f] : links) {
        if (!out_.empty() && source.back() == u && out_.back().node == v) {
            out_.back().flow += f;
            continue;
        }
        out_.push_back({v, f});
        source.push_back(u);
        ++out_offsets_[u + 1];
    }
    for (std::size_t u = 0; u < n; ++u) out_offsets_[u + 1] += out_offsets_[u];

    in_offsets_.assign(n + 1, 0);
    for (const FlowLink& l : out_) ++in_offsets_[l.node + 1];
    for (std::size_t u = 0; u < n; ++u) in_offsets_[u + 1] += in_offsets_[u];
    in_.resize(out_.size());
    std::vector<std::size_t> cursor(in_offsets_.begin(), in_offsets_.end() - 1);
    for (std::size_t e = 0; e < out_.size(); ++e) {
        in_[cursor[out_[e].node]++] = {source[e], out_[e].flow};
    }
}

FlowNetwork FlowNetwork::from_flows(const MultiGraph& g, const FlowField& flows) {
    const std::size_t n = g.num_nodes();
    FlowNetwork net;
    net.flow_ = flows.visit_rate;
    net.out_link_.assign(n, 0.0);
    net.self_link_.assign(n, 0.0);
    std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> links;
    links.reserve(g.num_arcs());
    for (const Arc& a : g.arcs()) {
        const double f = flows.link_flow(a);
        if (f == 0.0) continue;
        net.out_link_[a.source] += f;
        if (a.source == a.target) {
            net.self_link_[a.source] += f;
        } else {
            links.emplace_back(a.source, a.target, f);
        }
    }
    net.set_links(std::move(links));

    net.channel_offsets_.assign(n + 1, 0);
    net.channel_totals_ = flows.channels.target_total;
    net.channel_counts_.assign(flows.channels.num_channels, 0);
    if (!flows.channels.empty()) {
        for (NodeId i = 0; i < n; ++i) {
            for (const ChannelEntry& e : flows.channels.of(i)) {
                const double src = flows.jump_source(i, e);
                if (src == 0.0 && e.target == 0.0) continue;
                const std::uint32_t count = e.target != 0.0 ? 1 : 0;
                net.channels_.push_back({e.channel, src, e.target, count});
                net.channel_counts_[e.channel] += count;
            }
            net.channel_offsets_[i + 1] = net.channels_.size();
        }
    }
    for (double p : flows.visit_rate) net.node_entropy_term_ += plogp(p);
    return net;
}

FlowNetwork FlowNetwork::aggregate(std::span<const std::uint32_t> module_of,
                                   std::size_t num_modules) const {
    FlowNetwork net;
    net.flow_.assign(num_modules, 0.0);
    net.out_link_.assign(num_modules, 0.0);
    net.self_link_.assign(num_modules, 0.0);
    std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> links;
    for (std::uint32_t u = 0; u < num_nodes(); ++u) {
        const std::uint32_t m = module_of[u];
        net.flow_[m] += flow_[u];
        net.out_link_[m] += out_link_[u];
        net.self_link_[m] += self_link_[u];
        for (const FlowLink& l : out_links(u)) {
            const std::uint32_t mv = module_of[l.node];
            if (mv == m) {
                net.self_link_[m] += l.flow;
            } else {
                links.emplace_back(m, mv, l.flow);
            }
        }
    }
    net.set_links(std::move(links));

    std::vector<std::pair<std::uint32_t, NodeChannel>> entries;
    entries.reserve(channels_.size());
    for (std::uint32_t u = 0; u < num_nodes(); ++u) {
        for (const NodeChannel& c : channels(u)) entries.emplace_back(module_of[u], c);
    }
    std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first < b.first : a.second.channel < b.second.channel;
    });
    net.channel_offsets_.assign(num_modules + 1, 0);
    std::uint32_t last_module = kNone;
    for (const auto& [m, c] : entries) {
        if (m == last_module && net.channels_.back().channel == c.channel) {
            NodeChannel& acc = net.channels_.back();
            acc.source += c.source;
            acc.target += c.target;
            acc.count += c.count;
        } else {
            net.channels_.push_back(c);
            ++net.channel_offsets_[m + 1];
            last_module = m;
        }
    }
    for (std::size_t m = 0; m < num_modules; ++m) net.channel_offsets_[m + 1] += net.channel_offsets_[m];
    net.channel_totals_ = channel_totals_;
    net.channel_counts_ = channel_counts_;
    net.node_entropy_term_ = node_entropy_term_;
    return net;
}

// ---------------------------------------------------------------------------
// ModuleMover
// ---------------------------------------------------------------------------

ModuleMover::ModuleMover(const FlowNetwork& net, std::vector<std::uint32_t> module_of)
    : net_(&net), module_of_(std::move(module_of)) {
    const std::size_t n = net.num_nodes();
    if (module_of_.size() != n) throw ValidationError("module assignment size mismatch");
    modules_.resize(n);
    for (std::uint32_t u = 0; u < n; ++u) {
        const std::uint32_t m = module_of_[u];
        if (m >= n) throw ValidationError("module id out of range");
        Module& mod = modules_[m];
        mod.flow += net.flow(u);
        ++mod.members;
        for (const NodeChannel& c : net.channels(u)) {
            auto it = std::lower_bound(mod.channels.begin(), mod.channels.end(), c.channel,
                                       [](const ModuleChannel& mc, std::uint32_t k) { return mc.channel < k; });
            if (it != mod.channels.end() && it->channel == c.channel) {
                it->source += c.source;
                it->target += c.target;
                it->count += c.count;
                ++it->members;
            } else {
                mod.channels.insert(it, {c.channel, c.source, c.target, c.count, 1});
            }
        }
    }
    for (std::uint32_t m = static_cast<std::uint32_t>(n); m-- > 0;) {
        if (modules_[m].members == 0) empty_modules_.push_back(m);
    }
    scratch_to_.assign(n, 0.0);
    scratch_from_.assign(n, 0.0);
    seen_.assign(n, 0);
    refresh();
}

double ModuleMover::outside(std::uint32_t channel, double target, std::uint32_t count) const noexcept {
    if (count == net_->channel_count(channel)) return 0.0;
    return std::max(net_->channel_total(channel) - target, 0.0);
}

double ModuleMover::jump_exit_of(const Module& m) const noexcept {
    double j = 0.0;
    for (const ModuleChannel& c : m.channels) j += c.source * outside(c.channel, c.target, c.count);
    return j;
}

double ModuleMover::jump_exit_after(const Module& m, std::uint32_t u, double sign) const {
    double j = m.jump_exit;
    for (const NodeChannel& c : net_->channels(u)) {
        auto it = std::lower_bound(m.channels.begin(), m.channels.end(), c.channel,
                                   [](const ModuleChannel& mc, std::uint32_t k) { return mc.channel < k; });
        const bool present = it != m.channels.end() && it->channel == c.channel;
        double old_term = 0.0;
        double source = 0.0, target = 0.0;
        std::uint32_t count = 0, members = 0;
        if (present) {
            old_term = it->source * outside(c.channel, it->target, it->count);
            source = it->source;
            target = it->target;
            count = it->count;
            members = it->members;
        }
        double new_term = 0.0;
        if (sign > 0.0) {
            new_term = (source + c.source) * outside(c.channel, target + c.target, count + c.count);
        } else if (members > 1) {
            new_term = (source - c.source) * outside(c.channel, target - c.target, count - c.count);
        }
        j += new_term - old_term;
    }
    return std::max(j, 0.0);
}

void ModuleMover::refresh() {
    for (Module& m : modules_) m.link_exit = 0.0;
    for (std::uint32_t u = 0; u < net_->num_nodes(); ++u) {
        const std::uint32_t m = module_of_[u];
        for (const FlowLink& l : net_->out_links(u)) {
            if (module_of_[l.node] != m) modules_[m].link_exit += l.flow;
        }
    }
    exit_total_ = exit_term_ = loop_term_ = 0.0;
    for (Module& m : modules_) {
        if (m.members == 0) {
            m.link_exit = m.jump_exit = 0.0;
            continue;
        }
        m.jump_exit = jump_exit_of(m);
        const double q = m.exit();
        exit_total_ += q;
        exit_term_ += plogp(q);
        loop_term_ += plogp(q + m.flow);
    }
}

double ModuleMover::codelength() const noexcept {
    return plogp(exit_total_) - 2.0 * exit_term_ + loop_term_ - net_->node_entropy_term();
}

std::size_t ModuleMover::num_nonempty_modules() const noexcept {
    return modules_.size() - empty_modules_.size();
}

ModuleMover::MoveEffect ModuleMover::evaluate(std::uint32_t u, std::uint32_t target,
                                              double flow_to_old, double flow_from_old,
                                              double flow_to_new, double flow_from_new) const {
    const std::uint32_t a = module_of_[u];
    const Module& old_mod = modules_[a];
    const Module& new_mod = modules_[target];
    const double p = net_->flow(u);
    const double external = net_->out_link(u) - net_->self_link(u);

    MoveEffect e{};
    double old_flow = 0.0;
    if (old_mod.members > 1) {
        e.old_link_exit = std::max(old_mod.link_exit - (external - flow_to_old) + flow_from_old, 0.0);
        e.old_jump_exit = jump_exit_after(old_mod, u, -1.0);
        old_flow = old_mod.flow - p;
    }
    e.new_link_exit = std::max(new_mod.link_exit + (external - flow_to_new) - flow_from_new, 0.0);
    e.new_jump_exit = jump_exit_after(new_mod, u, +1.0);
    const double new_flow = new_mod.flow + p;

    const double qa = old_mod.exit(), qb = new_mod.exit();
    const double qa2 = e.old_link_exit + e.old_jump_exit;
    const double qb2 = e.new_link_exit + e.new_jump_exit;
    const double total2 = exit_total_ - qa - qb + qa2 + qb2;
    e.delta = plogp(total2) - plogp(exit_total_) -
              2.0 * (plogp(qa2) + plogp(qb2) - plogp(qa) - plogp(qb)) +
              plogp(qa2 + old_flow) + plogp(qb2 + new_flow) - plogp(qa + old_mod.flow) -
              plogp(qb + new_mod.flow);
    return e;
}

void ModuleMover::apply(std::uint32_t u, std::uint32_t target, const MoveEffect& e) {
    const std::uint32_t a = module_of_[u];
    Module& old_mod = modules_[a];
    Module& new_mod = modules_[target];
    const double p = net_->flow(u);

    const double qa = old_mod.exit(), qb = new_mod.exit();
    exit_term_ -= plogp(qa) + plogp(qb);
    loop_term_ -= plogp(qa + old_mod.flow) + plogp(qb + new_mod.flow);
    exit_total_ -= qa + qb;

    if (new_mod.members == 0) {
        auto it = std::find(empty_modules_.begin(), empty_modules_.end(), target);
        if (it != empty_modules_.end()) {
            *it = empty_modules_.back();
            empty_modules_.pop_back();
        }
    }

    --old_mod.members;
    if (old_mod.members == 0) {
        old_mod.flow = old_mod.link_exit = old_mod.jump_exit = 0.0;
        old_mod.channels.clear();
        empty_modules_.push_back(a);
    } else {
        old_mod.flow -= p;
        old_mod.link_exit = e.old_link_exit;
        old_mod.jump_exit = e.old_jump_exit;
        for (const NodeChannel& c : net_->channels(u)) {
            auto it = std::lower_bound(old_mod.channels.begin(), old_mod.channels.end(), c.channel,
                                       [](const ModuleChannel& mc, std::uint32_t k) { return mc.channel < k; });
            if (--it->members == 0) {
                old_mod.channels.erase(it);
            } else {
                it->source -= c.source;
                it->target -= c.target;
                it->count -= c.count;
            }
        }
    }

    ++new_mod.members;
    new_mod.flow += p;
    new_mod.link_exit = e.new_link_exit;
    new_mod.jump_exit = e.new_jump_exit;
    for (const NodeChannel& c : net_->channels(u)) {
        auto it = std::lower_bound(new_mod.channels.begin(), new_mod.channels.end(), c.channel,
                                   [](const ModuleChannel& mc, std::uint32_t k) { return mc.channel < k; });
        if (it != new_mod.channels.end() && it->channel == c.channel) {
            it->source += c.source;
            it->target += c.target;
            it->count += c.count;
            ++it->members;
        } else {
            new_mod.channels.insert(it, {c.channel, c.source, c.target, c.count, 1});
        }
    }

    const double qa2 = old_mod.exit(), qb2 = new_mod.exit();
    exit_term_ += plogp(qa2) + plogp(qb2);
    loop_term_ += plogp(qa2 + old_mod.flow) + plogp(qb2 + new_mod.flow);
    exit_total_ += qa2 + qb2;
    module_of_[u] = target;
}

double ModuleMover::move_delta(std::uint32_t u, std::uint32_t target) const {
    const std::uint32_t a = module_of_[u];
    if (target == a) return 0.0;
    double to_old = 0.0, from_old = 0.0, to_new = 0.0, from_new = 0.0;
    for (const FlowLink& l : net_->out_links(u)) {
        const std::uint32_t m = module_of_[l.node];
        if (m == a) to_old += l.flow;
        if (m == target) to_new += l.flow;
    }
    for (const FlowLink& l : net_->in_links(u)) {
        const std::uint32_t m = module_of_[l.node];
        if (m == a) from_old += l.flow;
        if (m == target) from_new += l.flow;
    }
    return evaluate(u, target, to_old, from_old, to_new, from_new).delta;
}

void ModuleMover::move(std::uint32_t u, std::uint32_t target) {
    const std::uint32_t a = module_of_[u];
    if (target == a) return;
    double to_old = 0.0, from_old = 0.0, to_new = 0.0, from_new = 0.0;
    for (const FlowLink& l : net_->out_links(u)) {
        const std::uint32_t m = module_of_[l.node];
        if (m == a) to_old += l.flow;
        if (m == target) to_new += l.flow;
    }
    for (const FlowLink& l : net_->in_links(u)) {
        const std::uint32_t m = module_of_[l.node];
        if (m == a) from_old += l.flow;
        if (m == target) from_new += l.flow;
    }
    apply(u, target, evaluate(u, target, to_old, from_old, to_new, from_new));
}

void ModuleMover::best_jump_modules() {
    const std::size_t k = net_->num_channels();
    best_jump_module_.assign(k, kNone);
    std::vector<double> best(k, 0.0);
    for (std::uint32_t m = 0; m < modules_.size(); ++m) {
        if (modules_[m].members == 0) continue;
        for (const ModuleChannel& c : modules_[m].channels) {
            if (c.target > best[c.channel]) {
                best[c.channel] = c.target;
                best_jump_module_[c.channel] = m;
            }
        }
    }
}

double ModuleMover::sweep(std::span<const std::uint32_t> order) {
    refresh();
    best_jump_modules();
    double improvement = 0.0;
    std::vector<std::uint32_t> candidates;

    for (std::uint32_t u : order) {
        const std::uint32_t a = module_of_[u];
        if (++stamp_ == 0) {
            std::fill(seen_.begin(), seen_.end(), 0);
            stamp_ = 1;
        }
        touched_.clear();
        const auto touch = [&](std::uint32_t m) {
            if (seen_[m] != stamp_) {
                seen_[m] = stamp_;
                touched_.push_back(m);
            }
        };
        for (const FlowLink& l : net_->out_links(u)) {
            const std::uint32_t m = module_of_[l.node];
            touch(m);
            scratch_to_[m] += l.flow;
        }
        for (const FlowLink& l : net_->in_links(u)) {
            const std::uint32_t m = module_of_[l.node];
            touch(m);
            scratch_from_[m] += l.flow;
        }
        const double to_old = scratch_to_[a], from_old = scratch_from_[a];

        candidates.clear();
        for (std::uint32_t m : touched_) {
            if (m != a) candidates.push_back(m);
        }
        for (const NodeChannel& c : net_->channels(u)) {
            if (c.source == 0.0) continue;
            const std::uint32_t m = best_jump_module_[c.channel];
            if (m != kNone && m != a && modules_[m].members > 0 && seen_[m] != stamp_) {
                touch(m);
                candidates.push_back(m);
            }
        }
        if (modules_[a].members > 1 && !empty_modules_.empty()) {
            candidates.push_back(empty_modules_.back());
        }

        MoveEffect best{};
        best.delta = 0.0;
        std::uint32_t best_module = a;
        for (std::uint32_t m : candidates) {
            const double to_new = seen_[m] == stamp_ ? scratch_to_[m] : 0.0;
            const double from_new = seen_[m] == stamp_ ? scratch_from_[m] : 0.0;
            const MoveEffect e = evaluate(u, m, to_old, from_old, to_new, from_new);
            if (e.delta < best.delta) {
                best = e;
                best_module = m;
            }
        }
        for (std::uint32_t m : touched_) scratch_to_[m] = scratch_from_[m] = 0.0;

        if (best_module != a && best.delta < -kMinMoveGain) {
            apply(u, best_module, best);
            improvement -= best.delta;
        }
    }
    return improvement;
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

Partition one_level_partition(const MultiGraph& g) {
    Partition part;
    part.module_of.assign(g.num_nodes(), 0);
    part.num_modules = g.num_nodes() > 0 ? 1 : 0;
    return part;
}

Partition optimize_trial(const MultiGraph& g, const FlowField& flows, const SearchConfig& cfg,
                         std::uint64_t trial_seed) {
    validate(cfg);
    const std::size_t n = g.num_nodes();
    std::mt19937_64 rng(trial_seed);
    FlowNetwork net = FlowNetwork::from_flows(g, flows);
    std::vector<std::uint32_t> node_to_module(n);
    std::iota(node_to_module.begin(), node_to_module.end(), 0u);

    for (std::size_t outer = 0; outer < cfg.max_outer_loops; ++outer) {
        const std::size_t level_size = net.num_nodes();
        std::vector<std::uint32_t> identity(level_size);
        std::iota(identity.begin(), identity.end(), 0u);
        ModuleMover mover(net, identity);
        std::vector<std::uint32_t> order = identity;
        for (std::size_t s = 0; s < kMaxSweepsPerLevel; ++s) {
            if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);
            if (mover.sweep(order) < cfg.improvement_threshold) break;
        }

        std::vector<std::uint32_t> relabel(level_size, kNone);
        std::uint32_t next = 0;
        std::vector<std::uint32_t> level_module(level_size);
        for (std::uint32_t u = 0; u < level_size; ++u) {
            const std::uint32_t m = mover.module_of(u);
            if (relabel[m] == kNone) relabel[m] = next++;
            level_module[u] = relabel[m];
        }
        if (next == level_size) break;
        for (auto& m : node_to_module) m = level_module[m];
        if (next == 1) break;
        net = net.aggregate(level_module, next);
    }
    return evaluate(g, flows, make_partition(node_to_module));
}

Partition optimize(const MultiGraph& g, const FlowField& flows, const SearchConfig& cfg) {
    validate(cfg);
    Partition one = evaluate(g, flows, one_level_partition(g));
    if (g.num_nodes() <= 1) return one;

    const auto trials = static_cast<std::ptrdiff_t>(cfg.trials);
    std::vector<Partition> results(cfg.trials);
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t t = 0; t < trials; ++t) {
        try {
            results[t] = optimize_trial(g, flows, cfg, derive_seed(cfg.seed, {static_cast<std::uint64_t>(t)}));
        } catch (...) {
#pragma omp critical(mapflow_search_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    std::size_t best = 0;
    for (std::size_t t = 1; t < results.size(); ++t) {
        if (results[t].codelength < results[best].codelength) best = t;
    }
    if (results[best].codelength < one.codelength - cfg.improvement_threshold) {
        return std::move(results[best]);
    }
    return one;
}

} // namespace mapflow
