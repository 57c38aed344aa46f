#include "mapflow/errors.hpp"
#include "mapflow/flow.hpp"
#include "mapflow/mapeq.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <omp.h>

#include <numeric>
#include <random>

using namespace mapflow;

namespace {

MultiGraph labelled(const MultiGraph& g, std::size_t n_labels, std::mt19937_64& rng) {
    std::uniform_int_distribution<LabelId> pick(0, static_cast<LabelId>(n_labels - 1));
    std::vector<LabelId> labels(g.num_nodes());
    for (auto& l : labels) l = pick(rng);
    std::vector<std::string> names(n_labels);
    for (std::size_t m = 0; m < n_labels; ++m) names[m] = std::to_string(m);
    return g.with_metadata(labels, names);
}

MultiGraph typed(std::size_t n_a, std::size_t n_b, double density, std::mt19937_64& rng) {
    std::bernoulli_distribution keep(density);
    std::vector<Arc> edges;
    for (NodeId a = 0; a < n_a; ++a) {
        for (NodeId b = 0; b < n_b; ++b) {
            if (keep(rng)) edges.push_back({a, static_cast<NodeId>(n_a + b), 1.0 + (a + b) % 3});
            if (keep(rng)) edges.push_back({static_cast<NodeId>(n_a + b), a, 2.0});
        }
    }
    std::vector<NodeType> types(n_a + n_b, NodeType::B);
    std::fill_n(types.begin(), n_a, NodeType::A);
    return MultiGraph::from_edges(n_a + n_b, edges, true).with_node_types(types);
}

std::vector<double> random_distribution(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.01, 1.0);
    std::vector<double> p(n);
    for (auto& x : p) x = u(rng);
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    for (auto& x : p) x /= total;
    return p;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

} // namespace

TEST(FlowTest, parseFlowMethod) {
    EXPECT_EQ(parse_flow_method("none"), FlowMethod::standard);
    EXPECT_EQ(parse_flow_method("regularized"), FlowMethod::uniform);
    EXPECT_EQ(parse_flow_method("metadata"), FlowMethod::metadata);
    EXPECT_THROW(parse_flow_method("pagerank"), ValidationError);
    EXPECT_EQ(to_string(FlowMethod::teleport), "teleport");
}

TEST(FlowTest, noPriorOperatorIsObservedWalk) {
    std::mt19937_64 rng(2);
    const MultiGraph g = oracle::random_graph(12, 0.5, true, rng);
    for (NodeId i = 0; i < g.num_nodes(); ++i) ASSERT_GT(g.s_out(i), 0.0);
    JumpChannels none;
    none.offsets.assign(g.num_nodes() + 1, 0);
    TransitionOperator op(g, none, std::vector<double>(g.num_nodes(), 0.0));
    const auto p = random_distribution(g.num_nodes(), rng);
    std::vector<double> out(p.size());
    op.apply(p, out);
    const auto w = oracle::weight_matrix(g);
    oracle::Matrix t = w;
    for (NodeId i = 0; i < g.num_nodes(); ++i) {
        for (auto& x : t[i]) x /= g.s_out(i);
    }
    EXPECT_LT(max_abs_diff(out, oracle::step(t, p)), 1e-15);
}

TEST(FlowTest, singleNodeWithSelfLoop) {
    const std::vector<Arc> arcs{{0, 0, 3.0}};
    const MultiGraph g = MultiGraph::from_edges(1, arcs, true);
    const PriorModel prior = build_prior(g, PriorMode::uniform);
    const std::vector<double> p{1.0};
    EXPECT_EQ(apply_regularized(g, prior, p), p);
    const FlowField f = stationary_flow(g, prior, 1e-12, 100);
    EXPECT_EQ(f.visit_rate, p);
}

TEST(FlowTest, chainMatchesDenseOracle) {
    std::vector<Arc> arcs;
    for (NodeId i = 0; i + 1 < 5; ++i) arcs.push_back({i, i + 1, 1.0 + i});
    const MultiGraph g = MultiGraph::from_edges(5, arcs, true);
    const PriorModel prior = build_prior(g, PriorMode::uniform);
    std::mt19937_64 rng(6);
    const auto p = random_distribution(5, rng);
    const auto dense = oracle::step(oracle::regularized_matrix(g, PriorMode::uniform), p);
    EXPECT_LT(max_abs_diff(apply_regularized(g, prior, p), dense), 1e-12);
}

TEST(FlowTest, denseOracleAllModes) {
    std::mt19937_64 rng(31);
    for (int rep = 0; rep < 15; ++rep) {
        const std::size_t n = 4 + rep * 3;
        const MultiGraph g = oracle::random_graph(n, 0.15, rep % 3 != 2, rng, 6, rep % 2 == 1);
        const MultiGraph m = labelled(g, 1 + rep % 5, rng);
        const MultiGraph b = typed(n / 3 + 1, n - n / 3, 0.2, rng);
        for (const auto& [graph, mode] : std::vector<std::pair<MultiGraph, PriorMode>>{
                 {g, PriorMode::uniform}, {m, PriorMode::metadata}, {b, PriorMode::bipartite}}) {
            const auto p = random_distribution(graph.num_nodes(), rng);
            const auto out = apply_regularized(graph, build_prior(graph, mode), p);
            const auto dense = oracle::step(oracle::regularized_matrix(graph, mode), p);
            EXPECT_LT(max_abs_diff(out, dense), 1e-12) << "rep " << rep;
            EXPECT_NEAR(std::accumulate(out.begin(), out.end(), 0.0), 1.0, 1e-12);
        }
    }
}

TEST(FlowTest, parallelKernelMatchesSerialReference) {
    std::mt19937_64 rng(5);
    const MultiGraph g = labelled(oracle::random_graph(300, 0.03, true, rng), 7, rng);
    const PriorModel prior = build_prior(g, PriorMode::metadata);
    TransitionOperator op(g, prior_channels(g, prior), prior.alpha);
    const auto p = random_distribution(g.num_nodes(), rng);
    std::vector<double> a(p.size()), b(p.size());
    OperatorStats sa, sb;
    op.apply(p, a, &sa);
    op.apply_serial(p, b, &sb);
    EXPECT_LT(max_abs_diff(a, b), 1e-15);
    EXPECT_EQ(sa.arc_visits, g.num_arcs());
    EXPECT_EQ(sb.arc_visits, g.num_arcs());
}

TEST(FlowTest, kernelIsIndependentOfThreadCount) {
    std::mt19937_64 rng(15);
    const MultiGraph g = oracle::random_graph(9000, 0.0008, true, rng);
    const PriorModel prior = build_prior(g, PriorMode::uniform);
    TransitionOperator op(g, prior_channels(g, prior), prior.alpha);
    const auto p = random_distribution(g.num_nodes(), rng);
    std::vector<double> one(p.size()), many(p.size());
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    op.apply(p, one);
    omp_set_num_threads(4);
    op.apply(p, many);
    omp_set_num_threads(saved);
    EXPECT_EQ(one, many);
}

TEST(FlowTest, symmetricPairIsUniform) {
    const std::vector<Arc> edges{{0, 1, 2.0}};
    const MultiGraph g = MultiGraph::from_edges(2, edges, false);
    const FlowField f = stationary_flow(g, build_prior(g, PriorMode::uniform), 1e-12, 10000);
    EXPECT_NEAR(f.visit_rate[0], 0.5, 1e-12);
    EXPECT_NEAR(f.visit_rate[1], 0.5, 1e-12);
}

TEST(FlowTest, directedCycleIsUniform) {
    const std::vector<Arc> arcs{{0, 1, 1.0}, {1, 2, 1.0}, {2, 0, 1.0}};
    const MultiGraph g = MultiGraph::from_edges(3, arcs, true);
    const FlowField f = stationary_flow(g, build_prior(g, PriorMode::uniform), 1e-12, 10000);
    for (double x : f.visit_rate) EXPECT_NEAR(x, 1.0 / 3.0, 1e-12);
    EXPECT_LT(f.residual, 1e-12);
}

TEST(FlowTest, undirectedClosedForm) {
    std::mt19937_64 rng(44);
    for (int rep = 0; rep < 5; ++rep) {
        const MultiGraph g = oracle::random_graph(40 + rep * 10, 0.1, false, rng, 9, rep % 2 == 0);
        for (PriorMode mode : {PriorMode::uniform, PriorMode::metadata}) {
            const MultiGraph h = mode == PriorMode::metadata ? labelled(g, 4, rng) : g;
            const PriorModel prior = build_prior(h, mode);
            const FlowField f = stationary_flow(h, prior, 1e-14, 100000);
            std::vector<double> expected(h.num_nodes());
            for (NodeId i = 0; i < h.num_nodes(); ++i) expected[i] = h.s_out(i) + prior.gamma_out_total[i];
            const double total = std::accumulate(expected.begin(), expected.end(), 0.0);
            for (auto& x : expected) x /= total;
            EXPECT_LT(max_abs_diff(f.visit_rate, expected), 1e-10);
        }
    }
}

TEST(FlowTest, fixedPointInvariant) {
    std::mt19937_64 rng(8);
    const MultiGraph g = oracle::random_graph(60, 0.05, true, rng);
    const PriorModel prior = build_prior(g, PriorMode::uniform);
    const FlowField f = stationary_flow(g, prior, 1e-12, 10000);
    EXPECT_NEAR(std::accumulate(f.visit_rate.begin(), f.visit_rate.end(), 0.0), 1.0, 1e-12);
    for (double x : f.visit_rate) EXPECT_GT(x, 0.0);
    const auto next = apply_regularized(g, prior, f.visit_rate);
    double change = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i) change += std::abs(next[i] - f.visit_rate[i]);
    EXPECT_LT(change, 1e-12);
}

TEST(FlowTest, bipartitePriorConverges) {
    std::mt19937_64 rng(12);
    const MultiGraph b = typed(6, 9, 0.3, rng);
    const FlowField f = stationary_flow(b, build_prior(b, PriorMode::bipartite), 1e-12, 10000);
    const auto next = oracle::step(oracle::regularized_matrix(b, PriorMode::bipartite), f.visit_rate);
    EXPECT_LT(max_abs_diff(next, f.visit_rate), 1e-11);
}

TEST(FlowTest, nonConvergenceCarriesResidual) {
    std::mt19937_64 rng(3);
    const MultiGraph g = oracle::random_graph(30, 0.1, true, rng);
    try {
        stationary_flow(g, build_prior(g, PriorMode::uniform), 1e-12, 2);
        FAIL() << "expected ConvergenceError";
    } catch (const ConvergenceError& e) {
        EXPECT_GT(e.residual(), 1e-12);
    }
    EXPECT_THROW(stationary_flow(g, build_prior(g, PriorMode::uniform), 0.0, 10), DomainError);
}

TEST(FlowTest, teleportCompleteGraphIsUniform) {
    std::vector<Arc> arcs;
    for (NodeId i = 0; i < 6; ++i) {
        for (NodeId j = 0; j < 6; ++j) {
            if (i != j) arcs.push_back({i, j, 1.0});
        }
    }
    const MultiGraph g = MultiGraph::from_edges(6, arcs, true);
    for (double a : {0.05, 0.15, 0.9}) {
        const FlowField f = stationary_flow_teleport(g, a, 1e-13, 10000);
        for (double x : f.visit_rate) EXPECT_NEAR(x, 1.0 / 6.0, 1e-12);
    }
    EXPECT_THROW(stationary_flow_teleport(g, 1.0, 1e-12, 10), DomainError);
    EXPECT_THROW(stationary_flow_teleport(g, 0.0, 1e-12, 10), DomainError);
}

TEST(FlowTest, teleportTwoNodeDanglingClosedForm) {
    // node 1 is dangling and teleports with probability 1:
    // p0 = p0*a/2 + p1/2, p1 = p0*(1 - a) + p0*a/2 + p1/2  =>  p0 / p1 = 1 / (2 - a)
    const std::vector<Arc> arcs{{0, 1, 1.0}};
    const MultiGraph g = MultiGraph::from_edges(2, arcs, true);
    const double a = 0.15;
    const FlowField f = stationary_flow_teleport(g, a, 1e-14, 10000);
    const double p0 = 1.0 / (1.0 + (2.0 - a));
    EXPECT_NEAR(f.visit_rate[0], p0, 1e-12);
    EXPECT_NEAR(f.visit_rate[1], 1.0 - p0, 1e-12);
}

TEST(FlowTest, teleportHighRateApproachesUniform) {
    std::mt19937_64 rng(19);
    const MultiGraph g = oracle::random_graph(20, 0.1, true, rng);
    const FlowField f = stationary_flow_teleport(g, 0.999999, 1e-13, 10000);
    for (double x : f.visit_rate) EXPECT_NEAR(x, 1.0 / 20.0, 1e-6);
}

TEST(FlowTest, standardUndirectedIsStrengthProportional) {
    const MultiGraph g = oracle::clique_pair(4, 2.0, 1.0);
    const FlowField f = compute_flow(g, {});
    double total = 0.0;
    for (NodeId i = 0; i < g.num_nodes(); ++i) total += g.s_out(i);
    for (NodeId i = 0; i < g.num_nodes(); ++i) EXPECT_DOUBLE_EQ(f.visit_rate[i], g.s_out(i) / total);
    double link = 0.0;
    for (const Arc& a : g.arcs()) link += f.link_flow(a);
    EXPECT_NEAR(link, 1.0, 1e-14);
}

TEST(FlowTest, transitionMassesSingleModuleHasNoExit) {
    std::mt19937_64 rng(23);
    const MultiGraph g = labelled(oracle::random_graph(25, 0.1, true, rng), 3, rng);
    for (FlowMethod method : {FlowMethod::standard, FlowMethod::uniform, FlowMethod::metadata, FlowMethod::teleport}) {
        FlowOptions opts;
        opts.method = method;
        const FlowField f = compute_flow(g, opts);
        const std::vector<std::uint32_t> one(g.num_nodes(), 0);
        const ModuleTargets targets(f, one);
        for (NodeId i = 0; i < g.num_nodes(); ++i) {
            EXPECT_EQ(node_transition_masses(g, f, one, targets, i).exit, 0.0) << to_string(method);
        }
    }
}

TEST(FlowTest, transitionMassesMatchDenseOracle) {
    std::mt19937_64 rng(29);
    for (int rep = 0; rep < 6; ++rep) {
        const MultiGraph g = labelled(oracle::random_graph(20 + rep * 5, 0.08, true, rng), 3, rng);
        for (PriorMode mode : {PriorMode::uniform, PriorMode::metadata}) {
            const PriorModel prior = build_prior(g, mode);
            const FlowField f = stationary_flow(g, prior, 1e-12, 10000);
            const auto t = oracle::regularized_matrix(g, mode);
            std::vector<std::uint32_t> module_of(g.num_nodes());
            for (NodeId i = 0; i < g.num_nodes(); ++i) module_of[i] = (i * 7 + rep) % 4;
            const ModuleTargets targets(f, module_of);
            for (NodeId i = 0; i < g.num_nodes(); ++i) {
                double exit = 0.0, within = 0.0;
                for (NodeId j = 0; j < g.num_nodes(); ++j) {
                    (module_of[j] == module_of[i] ? within : exit) += f.visit_rate[i] * t[i][j];
                }
                const auto m = node_transition_masses(g, f, module_of, targets, i);
                EXPECT_NEAR(m.exit, exit, 1e-14);
                EXPECT_NEAR(m.within, within, 1e-14);
            }
        }
    }
}

TEST(FlowTest, danglingNodeExitUsesSelfCorrectedTargets) {
    // node 3 has no out-arcs, so alpha_3 = 1 and all of its flow follows the prior
    const std::vector<Arc> arcs{{0, 1, 2.0}, {1, 2, 1.0}, {2, 0, 3.0}, {0, 3, 1.0}};
    const MultiGraph g = MultiGraph::from_edges(4, arcs, true);
    const PriorModel prior = build_prior(g, PriorMode::uniform);
    ASSERT_EQ(prior.alpha[3], 1.0);
    const FlowField f = stationary_flow(g, prior, 1e-13, 10000);
    const std::vector<std::uint32_t> module_of{0, 1, 1, 1};
    const ModuleTargets targets(f, module_of);
    const double v_in = prior.in_factor[1] + prior.in_factor[2] + prior.in_factor[3] - prior.in_factor[3];
    const double v_all = prior.in_factor_sum - prior.in_factor[3];
    const auto m = node_transition_masses(g, f, module_of, targets, 3);
    EXPECT_NEAR(m.exit, f.visit_rate[3] * (1.0 - v_in / v_all), 1e-15);
}

TEST(FlowTest, disconnectedCliquesHaveNoExit) {
    const MultiGraph g = oracle::clique_pair(4, 1.0, 0.0);
    const FlowField f = compute_flow(g, {});
    std::vector<std::uint32_t> module_of(8, 0);
    for (NodeId i = 4; i < 8; ++i) module_of[i] = 1;
    const ModuleTargets targets(f, module_of);
    for (NodeId i = 0; i < 8; ++i) EXPECT_EQ(node_transition_masses(g, f, module_of, targets, i).exit, 0.0);
}

TEST(FlowTest, operatorCountsAreLinear) {
    std::mt19937_64 rng(37);
    std::vector<OperatorStats> stats;
    for (std::size_t n : {1000u, 4000u}) {
        const MultiGraph g = labelled(oracle::random_graph(n, 8.0 / static_cast<double>(n), true, rng), 10, rng);
        const PriorModel prior = build_prior(g, PriorMode::metadata);
        TransitionOperator op(g, prior_channels(g, prior), prior.alpha);
        std::vector<double> p(n, 1.0 / static_cast<double>(n)), out(n);
        OperatorStats s;
        op.apply(p, out, &s);
        EXPECT_EQ(s.arc_visits, g.num_arcs());
        EXPECT_LE(s.channel_visits, 4 * n);
        stats.push_back(s);
    }
    const double ratio = static_cast<double>(stats[1].workspace_bytes) / static_cast<double>(stats[0].workspace_bytes);
    EXPECT_GT(ratio, 3.0);
    EXPECT_LT(ratio, 5.0);
}
