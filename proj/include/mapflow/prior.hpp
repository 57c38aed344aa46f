#pragma once

// Empirical Bayes prior over random-walker transition rates.
//
// The prior pseudo-count for a link is gamma_ij = lambda_ij * c_ij where c_ij comes from a
// relaxed continuous configuration model,
//
//     c_ij = [sum_n (k_n^in + k_n^out) / sum_n (s_n^in + s_n^out)] * (s_i^out / k_i^out) * (s_j^in / k_j^in),
//
// and lambda_ij is a connectivity parameter (uniform, bipartite or metadata-reinforced).
// Because c_ij factorizes into a global prefactor, an out-factor of i and an in-factor of j,
// every row sum sum_j gamma_ij is available from per-node and per-label aggregates. Nothing
// here ever materializes an N x N structure.

#include "mapflow/graph.hpp"

#include <span>
#include <vector>

namespace mapflow {

enum class PriorMode { uniform, bipartite, metadata };

/// ln(n) / n. Throws DomainError for n < 2.
double uniform_lambda(std::size_t n);

/// ln(n_a + n_b) / min(n_a, n_b). Throws DomainError if either side is empty.
double bipartite_lambda(std::size_t n_a, std::size_t n_b);

/// ln(n_m) / n_m, which is 0 for singleton classes. Throws DomainError for n_m == 0.
double metadata_lambda(std::size_t n_m);

struct PriorModel {
    PriorMode mode = PriorMode::uniform;
    double lambda = 0.0;
    double lambda_ab = 0.0;
    std::vector<double> lambda_by_label;

    double ccm_prefactor = 1.0;
    std::vector<double> out_factor; // s_i^out / k_i^out, with the dangling fallback
    std::vector<double> in_factor;  // s_j^in / k_j^in, with the dangling fallback

    double in_factor_sum = 0.0;                 // S
    std::vector<double> in_factor_sum_by_label; // S_m
    double in_factor_sum_by_type[2] = {0.0, 0.0};

    std::vector<double> gamma_out_total; // sum_{j != i} gamma_ij
    std::vector<double> alpha;           // prior share of node i's posterior mass
};

/// Builds the factorized prior. Bipartite mode needs node types, metadata mode needs labels.
PriorModel build_prior(const MultiGraph& g, PriorMode mode);

/// Continuous configuration model weight evaluated straight from degrees and strengths.
/// O(N) per call; meant for oracles and tiny graphs.
double ccm_weight(const MultiGraph& g, NodeId i, NodeId j);

/// lambda_ij * c_ij using the model's factors. Throws DomainError for i == j.
double gamma(const MultiGraph& g, const PriorModel& p, NodeId i, NodeId j);

/// sum_j gamma_ij / (sum_j w_ij + sum_j gamma_ij).
double alpha(const MultiGraph& g, const PriorModel& p, NodeId i);

/// Posterior mean of a Dirichlet-multinomial row: (w_j + gamma_j) / sum(w + gamma).
std::vector<double> posterior_mean_row(std::span<const double> weights,
                                       std::span<const double> gammas);

} // namespace mapflow
