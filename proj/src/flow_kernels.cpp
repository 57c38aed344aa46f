// Transition operator kernels: an OpenMP pull kernel and the serial push reference.

#include "mapflow/flow.hpp"

#include <omp.h>

#include <algorithm>

namespace mapflow {

namespace {

// Fixed block size for channel-sum partials; keeping it independent of the thread count
// makes the reduction order, and therefore the result, reproducible.
constexpr std::size_t kReductionBlock = 4096;

} // namespace

TransitionOperator::TransitionOperator(const MultiGraph& g, JumpChannels channels,
                                       std::vector<double> jump_weight)
    : graph_(&g), channels_(std::move(channels)), jump_weight_(std::move(jump_weight)) {
    const std::size_t n = g.num_nodes();
    link_scale_.resize(n);
    for (NodeId i = 0; i < n; ++i) {
        link_scale_[i] = g.s_out(i) > 0.0 ? (1.0 - jump_weight_[i]) / g.s_out(i) : 0.0;
    }
}

std::size_t TransitionOperator::footprint_bytes() const noexcept {
    return sizeof(double) * (jump_weight_.size() + link_scale_.size() + channels_.target_total.size()) +
           sizeof(std::size_t) * channels_.offsets.size() +
           sizeof(ChannelEntry) * channels_.entries.size();
}

void TransitionOperator::apply(std::span<const double> p, std::span<double> out,
                               OperatorStats* stats) const {
    const MultiGraph& g = *graph_;
    const auto n = static_cast<std::ptrdiff_t>(g.num_nodes());
    const std::size_t n_channels = channels_.num_channels;

    std::vector<double> link_mass(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) link_mass[i] = p[i] * link_scale_[i];

    std::vector<double> channel_sum(n_channels, 0.0);
    std::vector<double> partial;
    if (n_channels > 0) {
        const std::size_t n_blocks = (static_cast<std::size_t>(n) + kReductionBlock - 1) / kReductionBlock;
        partial.assign(n_blocks * n_channels, 0.0);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(n_blocks); ++b) {
            double* row = partial.data() + b * n_channels;
            const std::size_t lo = b * kReductionBlock;
            const std::size_t hi = std::min(lo + kReductionBlock, static_cast<std::size_t>(n));
            for (std::size_t i = lo; i < hi; ++i) {
                const double x = p[i] * jump_weight_[i];
                for (const ChannelEntry& e : channels_.of(static_cast<NodeId>(i))) {
                    row[e.channel] += x * e.source;
                }
            }
        }
        for (std::size_t b = 0; b < n_blocks; ++b) {
            for (std::size_t k = 0; k < n_channels; ++k) channel_sum[k] += partial[b * n_channels + k];
        }
    }

    const bool exclude_self = channels_.exclude_self;
#pragma omp parallel for schedule(dynamic, 1024)
    for (std::ptrdiff_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (const Arc& a : g.in_arcs(static_cast<NodeId>(j))) acc += link_mass[a.source] * a.weight;
        const double x = p[j] * jump_weight_[j];
        for (const ChannelEntry& e : channels_.of(static_cast<NodeId>(j))) {
            const double incoming = channel_sum[e.channel] - (exclude_self ? x * e.source : 0.0);
            acc += e.target * incoming;
        }
        out[j] = acc;
    }

    if (stats) {
        stats->arc_visits += g.num_arcs();
        stats->channel_visits += 2 * channels_.entries.size();
        stats->workspace_bytes = std::max(stats->workspace_bytes,
                                          sizeof(double) * (link_mass.size() + channel_sum.size() +
                                                            partial.size()));
    }
}

void TransitionOperator::apply_serial(std::span<const double> p, std::span<double> out,
                                      OperatorStats* stats) const {
    const MultiGraph& g = *graph_;
    const std::size_t n = g.num_nodes();
    std::fill(out.begin(), out.end(), 0.0);

    for (NodeId i = 0; i < n; ++i) {
        const double x = p[i] * link_scale_[i];
        for (const Arc& a : g.out_arcs(i)) out[a.target] += x * a.weight;
    }

    std::vector<double> channel_sum(channels_.num_channels, 0.0);
    for (NodeId i = 0; i < n; ++i) {
        const double x = p[i] * jump_weight_[i];
        for (const ChannelEntry& e : channels_.of(i)) channel_sum[e.channel] += x * e.source;
    }
    for (NodeId j = 0; j < n; ++j) {
        const double x = p[j] * jump_weight_[j];
        for (const ChannelEntry& e : channels_.of(j)) {
            double incoming = channel_sum[e.channel];
            if (channels_.exclude_self) incoming -= x * e.source;
            out[j] += e.target * incoming;
        }
    }

    if (stats) {
        stats->arc_visits += g.num_arcs();
        stats->channel_visits += 2 * channels_.entries.size();
        stats->workspace_bytes = std::max(stats->workspace_bytes, sizeof(double) * channel_sum.size());
    }
}

} // namespace mapflow
