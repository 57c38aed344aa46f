#pragma once

// Experiment harness: planted-partition generator, multiedge samplers, metadata
// randomization, two-fold cross-validation and parameter sweeps.

#include "mapflow/flow.hpp"
#include "mapflow/graph.hpp"
#include "mapflow/mapeq.hpp"
#include "mapflow/search.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mapflow {

struct PlantedNetwork {
    MultiGraph graph;
    std::vector<LabelId> planted;
};

/// Directed planted-partition network. Node i belongs to community floor(i*M/n), so sizes
/// differ by at most one. Each node draws out-degree d ~ Poisson(avg_degree), sends
/// Binomial(d, 1 - mixing) arcs to distinct members of its own community and the rest to
/// distinct nodes outside it; weights are 1 + Poisson(mean_weight - 1).
PlantedNetwork generate_planted(std::size_t n, double avg_degree, double mixing, std::size_t n_modules,
                                double mean_weight, std::uint64_t seed);

/// Reassigns floor(mu*N) uniformly chosen nodes a label drawn uniformly from the labels
/// present in `labels`.
std::vector<LabelId> randomize_metadata(std::span<const LabelId> labels, double mu, std::uint64_t seed);

/// Attaches dense metadata, dropping label ids that no node carries.
MultiGraph with_labels(const MultiGraph& g, std::span<const LabelId> labels);

/// Total multiedge count m = sum of input-level weights; throws ValidationError unless all
/// weights are integers.
std::uint64_t multiedge_count(const MultiGraph& g);

/// Removes round(r*m) unit edges uniformly without replacement. Node set, types and
/// metadata are kept.
MultiGraph remove_multiedges(const MultiGraph& g, double r, std::uint64_t seed);

/// Balanced split of the multiedges; the first fold gets ceil(m/2).
std::pair<MultiGraph, MultiGraph> split_two_fold(const MultiGraph& g, std::uint64_t seed);

struct Detection {
    FlowField flows;
    Partition partition;
    double one_level_codelength = 0.0;
    double savings = 0.0;
};

Detection detect(const MultiGraph& g, const FlowOptions& flow, const SearchConfig& search);

struct CrossValidation {
    Partition partition; // detected on the training fold
    double train_codelength = 0.0;
    double test_codelength = 0.0;
    double test_one_level_codelength = 0.0;
    double savings = 0.0; // on the test fold
};

/// Optimizes on `train` and scores the resulting partition under the flows of `test`
/// computed with the same method.
CrossValidation cross_validate(const MultiGraph& train, const MultiGraph& test, const FlowOptions& flow,
                               const SearchConfig& search);

/// Splits g into two folds with `seed` and cross-validates the first against the second.
CrossValidation cross_validate(const MultiGraph& g, const FlowOptions& flow, const SearchConfig& search,
                               std::uint64_t seed);

struct SweepSpec {
    std::vector<double> r_values;
    std::vector<double> mu_values;
    std::size_t repetitions = 1;
    std::vector<FlowMethod> methods{FlowMethod::standard, FlowMethod::uniform};
    std::uint64_t seed = 1;
    std::size_t trials = 10;
    double teleport_alpha = kStandardTeleportRate;
    double tolerance = 1e-12;
    std::size_t max_iterations = 10'000;
    bool cross_validation = false;

    // input network; the planted generator is used when `input` is empty
    std::string input;
    bool directed = false;
    std::string metadata;  // "node label" file, also used as planted labels when `planted` is empty
    std::string planted;   // "node label" file for AMI
    std::size_t n = 1000;
    double avg_degree = 7.0;
    double mixing = 0.4;
    std::size_t modules = 31;
    double mean_weight = 4.9;

    std::string output;  // CSV path
    std::string summary; // JSON path
};

std::vector<double> default_r_values();
std::vector<double> default_mu_values();

/// Throws ValidationError on domain violations.
void validate(const SweepSpec& spec);

/// "key = value" lines, '#' comments. Lists are comma separated; r and mu also accept
/// "default". Unknown keys and malformed values throw ValidationError.
SweepSpec parse_sweep_spec(std::istream& in);

struct ExperimentRecord {
    FlowMethod method;
    double r;
    double mu;
    std::size_t rep;
    std::uint64_t seed;
    std::size_t n_modules;
    double ami;              // NaN without planted labels
    double train_codelength; // codelength on the network the partition was detected on
    double test_codelength;  // NaN without cross-validation
    double savings;          // test savings with cross-validation, else detection savings
    std::uint64_t fold_size; // multiedges in the detection network
};

void write_csv_header(std::ostream& out);
void write_csv_row(std::ostream& out, const ExperimentRecord& rec);

/// Runs every (r, mu, repetition, method) job. Rows are written to `csv` in job order as
/// soon as a contiguous prefix is complete; on failure the finished prefix is flushed and
/// the exception rethrown.
std::vector<ExperimentRecord> run_sweep(const SweepSpec& spec, std::ostream* csv = nullptr);

/// Mean and standard error per (method, r, mu).
nlohmann::json summarize(std::span<const ExperimentRecord> records);

} // namespace mapflow
