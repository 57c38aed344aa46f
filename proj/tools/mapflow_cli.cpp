#include "mapflow/bench.hpp"
#include "mapflow/errors.hpp"
#include "mapflow/flow.hpp"
#include "mapflow/graph.hpp"
#include "mapflow/mapeq.hpp"
#include "mapflow/prior.hpp"
#include "mapflow/search.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <unordered_map>

namespace fs = std::filesystem;
using namespace mapflow;

namespace {

enum ExitCode { kOk = 0, kParse = 1, kValidation = 2, kConvergence = 3 };

struct DetectArgs {
    std::string input;
    bool directed = false;
    std::string prior; // empty: inferred from the other flags
    bool regularized = false;
    std::string metadata;
    std::string bipartite;
    std::optional<double> teleport;
    double remove_fraction = 0.0;
    bool xval = false;
    std::uint64_t seed = 1;
    std::size_t trials = 10;
    double tol = 1e-12;
    std::size_t max_iter = 10'000;
    std::string out = ".";
};

struct SweepArgs {
    std::string spec;
    std::string output;
    std::string summary;
};

std::unordered_map<std::string, std::string> read_label_map(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    std::unordered_map<std::string, std::string> out;
    for (auto& [id, label] : read_node_labels(in)) out[id] = label;
    return out;
}

FlowMethod resolve_method(const DetectArgs& a) {
    if (!a.prior.empty()) return parse_flow_method(a.prior);
    if (a.teleport) return FlowMethod::teleport;
    if (!a.metadata.empty()) return FlowMethod::metadata;
    if (!a.bipartite.empty()) return FlowMethod::bipartite;
    if (a.regularized) return FlowMethod::uniform;
    return FlowMethod::standard;
}

nlohmann::json alpha_stats(const MultiGraph& g, const FlowField& flows) {
    if (flows.method == FlowMethod::standard) return nullptr;
    std::vector<double> alpha;
    if (flows.method == FlowMethod::teleport) {
        alpha = flows.jump_weight;
    } else {
        PriorMode mode = PriorMode::uniform;
        if (flows.method == FlowMethod::bipartite) mode = PriorMode::bipartite;
        if (flows.method == FlowMethod::metadata) mode = PriorMode::metadata;
        alpha = build_prior(g, mode).alpha;
    }
    if (alpha.empty()) return nullptr;
    double sum = 0.0;
    for (double x : alpha) sum += x;
    return {{"min", *std::min_element(alpha.begin(), alpha.end())},
            {"max", *std::max_element(alpha.begin(), alpha.end())},
            {"mean", sum / static_cast<double>(alpha.size())}};
}

void write_partition(const fs::path& path, const MultiGraph& g, const Partition& part) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << "# node-id module-id\n";
    for (NodeId i = 0; i < g.num_nodes(); ++i) out << g.original_id(i) << ' ' << part.module_of[i] << '\n';
}

int run_detect(const DetectArgs& a) {
    const FlowMethod method = resolve_method(a);
    MultiGraph g = load_graph_file(a.input, a.directed);
    if (!a.metadata.empty()) g = attach_metadata(g, read_label_map(a.metadata));
    if (!a.bipartite.empty()) {
        std::unordered_map<std::string, NodeType> types;
        for (const auto& [id, t] : read_label_map(a.bipartite)) types[id] = parse_node_type(t);
        g = attach_bipartite_types(g, types);
    }
    if (method == FlowMethod::metadata && !g.has_metadata()) {
        throw ValidationError("metadata prior needs --metadata FILE");
    }
    if (method == FlowMethod::bipartite && !g.is_bipartite()) {
        throw ValidationError("bipartite prior needs --bipartite FILE or a two-mode Pajek file");
    }
    if (g.num_nodes() == 0) throw ValidationError("input network has no nodes");
    if (a.remove_fraction > 0.0) g = remove_multiedges(g, a.remove_fraction, a.seed);

    FlowOptions flow;
    flow.method = method;
    flow.teleport_alpha = a.teleport.value_or(kStandardTeleportRate);
    flow.tolerance = a.tol;
    flow.max_iterations = a.max_iter;
    SearchConfig search;
    search.seed = a.seed;
    search.trials = a.trials;
    validate(search);

    nlohmann::json summary;
    summary["config"] = {{"input", a.input},
                         {"directed", g.directed()},
                         {"method", std::string(to_string(method))},
                         {"teleport_alpha", flow.teleport_alpha},
                         {"metadata", a.metadata},
                         {"bipartite", a.bipartite},
                         {"remove_fraction", a.remove_fraction},
                         {"xval", a.xval},
                         {"seed", a.seed},
                         {"trials", a.trials},
                         {"tolerance", a.tol},
                         {"max_iterations", a.max_iter},
                         {"improvement_threshold", search.improvement_threshold},
                         {"max_outer_loops", search.max_outer_loops}};
    summary["nodes"] = g.num_nodes();
    summary["arcs"] = g.num_arcs();

    fs::create_directories(a.out);
    Partition part;
    if (a.xval) {
        const auto [train, test] = split_two_fold(g, a.seed);
        const CrossValidation cv = cross_validate(train, test, flow, search);
        part = cv.partition;
        summary["train_codelength"] = cv.train_codelength;
        summary["test_codelength"] = cv.test_codelength;
        summary["test_one_level_codelength"] = cv.test_one_level_codelength;
        summary["savings"] = cv.savings;
        summary["alpha"] = alpha_stats(train, compute_flow(train, flow));
    } else {
        const Detection d = detect(g, flow, search);
        part = d.partition;
        summary["codelength"] = d.partition.codelength;
        summary["one_level_codelength"] = d.one_level_codelength;
        summary["savings"] = d.savings;
        summary["flow_residual"] = d.flows.residual;
        summary["flow_iterations"] = d.flows.iterations;
        summary["alpha"] = alpha_stats(g, d.flows);
    }
    summary["modules"] = part.num_modules;

    write_partition(fs::path(a.out) / "partition.txt", g, part);
    std::ofstream js(fs::path(a.out) / "summary.json");
    js << summary.dump(2) << '\n';
    std::cout << "modules " << part.num_modules << "  savings " << summary["savings"].get<double>() << '\n';
    return kOk;
}

int run_sweep_cmd(const SweepArgs& a) {
    std::ifstream in(a.spec);
    if (!in) throw ValidationError("cannot open sweep spec " + a.spec);
    SweepSpec spec = parse_sweep_spec(in);
    if (!a.output.empty()) spec.output = a.output;
    if (!a.summary.empty()) spec.summary = a.summary;

    std::ofstream file;
    std::ostream* csv = &std::cout;
    if (!spec.output.empty()) {
        file.open(spec.output);
        if (!file) throw ValidationError("cannot write " + spec.output);
        csv = &file;
    }
    const auto records = run_sweep(spec, csv);
    if (!spec.summary.empty()) {
        std::ofstream js(spec.summary);
        if (!js) throw ValidationError("cannot write " + spec.summary);
        js << summarize(records).dump(2) << '\n';
    }
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Map equation community detection with regularized flows"};
    app.require_subcommand(1);

    DetectArgs d;
    auto* detect_cmd = app.add_subcommand("detect", "Detect modules in one network");
    detect_cmd->add_option("-i,--input", d.input, "Edge list or Pajek file")->required();
    detect_cmd->add_flag("--directed", d.directed, "Treat edge lists as directed");
    detect_cmd->add_option("--prior", d.prior, "none, uniform, bipartite, metadata or teleport")
        ->check(CLI::IsMember({"none", "standard", "uniform", "regularized", "bipartite", "metadata", "teleport"}));
    detect_cmd->add_flag("--regularized", d.regularized, "Uniform-connectivity prior");
    detect_cmd->add_option("--metadata", d.metadata, "Node label file; selects the metadata prior");
    detect_cmd->add_option("--bipartite", d.bipartite, "Node type file (A/B); selects the bipartite prior");
    detect_cmd->add_option("--teleport", d.teleport, "Recorded teleportation with this rate");
    detect_cmd->add_option("--remove-fraction", d.remove_fraction, "Remove this fraction of multiedges first");
    detect_cmd->add_flag("--xval", d.xval, "Two-fold cross-validation");
    detect_cmd->add_option("--seed", d.seed, "Random seed");
    detect_cmd->add_option("--trials", d.trials, "Independent search trials");
    detect_cmd->add_option("--tol", d.tol, "Power iteration tolerance (L1)");
    detect_cmd->add_option("--max-iter", d.max_iter, "Power iteration limit");
    detect_cmd->add_option("-o,--out", d.out, "Output directory");

    SweepArgs s;
    auto* sweep_cmd = app.add_subcommand("sweep", "Run a parameter sweep");
    sweep_cmd->add_option("--spec", s.spec, "key = value sweep config file")->required();
    sweep_cmd->add_option("--output", s.output, "CSV path (overrides the config file)");
    sweep_cmd->add_option("--summary", s.summary, "Summary JSON path (overrides the config file)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kValidation;
    }

    try {
        if (detect_cmd->parsed()) return run_detect(d);
        return run_sweep_cmd(s);
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return kParse;
    } catch (const ConvergenceError& e) {
        std::cerr << "no convergence: " << e.what() << '\n';
        return kConvergence;
    } catch (const ValidationError& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kValidation;
    } catch (const DomainError& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    }
}
