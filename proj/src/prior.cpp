#include "mapflow/prior.hpp"

#include "mapflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mapflow {

double uniform_lambda(std::size_t n) {
    if (n < 2) throw DomainError("uniform_lambda needs n >= 2, got " + std::to_string(n));
    const double x = static_cast<double>(n);
    return std::log(x) / x;
}

double bipartite_lambda(std::size_t n_a, std::size_t n_b) {
    if (n_a == 0 || n_b == 0) {
        throw DomainError("bipartite_lambda needs both node classes non-empty");
    }
    return std::log(static_cast<double>(n_a + n_b)) / static_cast<double>(std::min(n_a, n_b));
}

double metadata_lambda(std::size_t n_m) {
    if (n_m == 0) throw DomainError("metadata_lambda of an empty class");
    const double x = static_cast<double>(n_m);
    return std::log(x) / x;
}

namespace {

struct DegreeTotals {
    double degree_sum = 0.0;
    double strength_sum = 0.0;
};

DegreeTotals degree_totals(const MultiGraph& g) {
    DegreeTotals t;
    for (NodeId n = 0; n < g.num_nodes(); ++n) {
        t.degree_sum += static_cast<double>(g.k_in(n) + g.k_out(n));
        t.strength_sum += g.s_in(n) + g.s_out(n);
    }
    return t;
}

// Without any observed arc the configuration model is undefined; every factor is 1.
double prefactor_of(const DegreeTotals& t) {
    return t.strength_sum > 0.0 ? t.degree_sum / t.strength_sum : 1.0;
}

// s/k on the requested side; nodes without arcs on that side fall back to their total
// strength per total degree, and fully isolated nodes to the global mean weight.
double side_factor(const MultiGraph& g, NodeId i, bool out_side, double prefactor) {
    const std::size_t k = out_side ? g.k_out(i) : g.k_in(i);
    if (k > 0) return (out_side ? g.s_out(i) : g.s_in(i)) / static_cast<double>(k);
    const std::size_t k_total = g.k_in(i) + g.k_out(i);
    if (k_total > 0) return (g.s_in(i) + g.s_out(i)) / static_cast<double>(k_total);
    return 1.0 / prefactor;
}

double lambda_between(const MultiGraph& g, const PriorModel& p, NodeId i, NodeId j) {
    switch (p.mode) {
    case PriorMode::uniform:
        return p.lambda;
    case PriorMode::bipartite:
        return g.node_type(i) == g.node_type(j) ? 0.0 : p.lambda_ab;
    case PriorMode::metadata:
        return p.lambda + (g.label(i) == g.label(j) ? p.lambda_by_label[g.label(i)] : 0.0);
    }
    return 0.0;
}

} // namespace

PriorModel build_prior(const MultiGraph& g, PriorMode mode) {
    const std::size_t n = g.num_nodes();
    PriorModel p;
    p.mode = mode;
    if (mode == PriorMode::bipartite && !g.is_bipartite()) {
        throw ValidationError("bipartite prior requires node types");
    }
    if (mode == PriorMode::metadata && !g.has_metadata()) {
        throw ValidationError("metadata prior requires node labels");
    }

    p.lambda = n >= 2 ? uniform_lambda(n) : 0.0;
    if (mode == PriorMode::bipartite) {
        p.lambda_ab = bipartite_lambda(g.type_count(NodeType::A), g.type_count(NodeType::B));
    }
    if (mode == PriorMode::metadata) {
        p.lambda_by_label.resize(g.num_labels());
        for (LabelId m = 0; m < g.num_labels(); ++m) {
            p.lambda_by_label[m] = g.label_count(m) > 0 ? metadata_lambda(g.label_count(m)) : 0.0;
        }
    }

    p.ccm_prefactor = prefactor_of(degree_totals(g));
    p.out_factor.resize(n);
    p.in_factor.resize(n);
    for (NodeId i = 0; i < n; ++i) {
        p.out_factor[i] = side_factor(g, i, true, p.ccm_prefactor);
        p.in_factor[i] = side_factor(g, i, false, p.ccm_prefactor);
        p.in_factor_sum += p.in_factor[i];
    }
    if (g.has_metadata()) {
        p.in_factor_sum_by_label.assign(g.num_labels(), 0.0);
        for (NodeId i = 0; i < n; ++i) p.in_factor_sum_by_label[g.label(i)] += p.in_factor[i];
    }
    if (g.is_bipartite()) {
        for (NodeId i = 0; i < n; ++i) {
            p.in_factor_sum_by_type[static_cast<int>(g.node_type(i))] += p.in_factor[i];
        }
    }

    p.gamma_out_total.resize(n);
    p.alpha.resize(n);
    for (NodeId i = 0; i < n; ++i) {
        double lambda_mass = 0.0; // sum_{j != i} lambda_ij * in_factor_j
        switch (mode) {
        case PriorMode::uniform:
            lambda_mass = p.lambda * (p.in_factor_sum - p.in_factor[i]);
            break;
        case PriorMode::bipartite: {
            const int other = 1 - static_cast<int>(g.node_type(i));
            lambda_mass = p.lambda_ab * p.in_factor_sum_by_type[other];
            break;
        }
        case PriorMode::metadata: {
            const LabelId m = g.label(i);
            lambda_mass = p.lambda * (p.in_factor_sum - p.in_factor[i]) +
                          p.lambda_by_label[m] * (p.in_factor_sum_by_label[m] - p.in_factor[i]);
            break;
        }
        }
        const double total = p.ccm_prefactor * p.out_factor[i] * std::max(lambda_mass, 0.0);
        p.gamma_out_total[i] = total;
        const double mass = g.s_out(i) + total;
        p.alpha[i] = mass > 0.0 ? total / mass : 1.0;
    }
    return p;
}

double ccm_weight(const MultiGraph& g, NodeId i, NodeId j) {
    const double prefactor = prefactor_of(degree_totals(g));
    return prefactor * side_factor(g, i, true, prefactor) * side_factor(g, j, false, prefactor);
}

double gamma(const MultiGraph& g, const PriorModel& p, NodeId i, NodeId j) {
    if (i == j) throw DomainError("the prior network has no self-links");
    return lambda_between(g, p, i, j) * p.ccm_prefactor * p.out_factor[i] * p.in_factor[j];
}

double alpha(const MultiGraph& g, const PriorModel& p, NodeId i) {
    const double total = p.gamma_out_total[i];
    const double mass = g.s_out(i) + total;
    return mass > 0.0 ? total / mass : 1.0;
}

std::vector<double> posterior_mean_row(std::span<const double> weights,
                                       std::span<const double> gammas) {
    if (weights.size() != gammas.size()) {
        throw DomainError("posterior_mean_row: weight and prior vectors differ in length");
    }
    double total = 0.0;
    for (std::size_t j = 0; j < weights.size(); ++j) {
        if (weights[j] < 0.0 || gammas[j] < 0.0) {
            throw DomainError("posterior_mean_row: negative count");
        }
        total += weights[j] + gammas[j];
    }
    if (!(total > 0.0)) throw DomainError("posterior_mean_row: zero combined mass");
    std::vector<double> row(weights.size());
    for (std::size_t j = 0; j < weights.size(); ++j) row[j] = (weights[j] + gammas[j]) / total;
    return row;
}

} // namespace mapflow
