#include "mapflow/bench.hpp"

#include "mapflow/errors.hpp"
#include "mapflow/metrics.hpp"
#include "mapflow/random.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace mapflow {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// stream tags for derive_seed
constexpr std::uint64_t kTagBaseNetwork = 0xB45E;
constexpr std::uint64_t kTagSample = 0x5A3B;
constexpr std::uint64_t kTagSplit = 0x5B17;
constexpr std::uint64_t kTagMetadata = 0x3E7A;

std::uint64_t round_count(double x) { return static_cast<std::uint64_t>(std::llround(x)); }

// Selects `keep` of the m unit edges uniformly (selection sampling) and returns the kept
// edge set; `rest` receives the complement when non-null.
std::vector<Arc> sample_units(const std::vector<Arc>& edges, std::uint64_t m, std::uint64_t keep,
                              std::mt19937_64& rng, std::vector<Arc>* rest) {
    std::vector<Arc> kept;
    std::uint64_t remaining = m;
    std::uint64_t needed = keep;
    for (const Arc& e : edges) {
        const auto w = static_cast<std::uint64_t>(e.weight);
        std::uint64_t take = 0;
        for (std::uint64_t u = 0; u < w; ++u) {
            if (needed > 0 && std::uniform_int_distribution<std::uint64_t>(0, remaining - 1)(rng) < needed) {
                ++take;
                --needed;
            }
            --remaining;
        }
        if (take > 0) kept.push_back({e.source, e.target, static_cast<double>(take)});
        if (rest && take < w) rest->push_back({e.source, e.target, static_cast<double>(w - take)});
    }
    return kept;
}

} // namespace

PlantedNetwork generate_planted(std::size_t n, double avg_degree, double mixing, std::size_t n_modules,
                                double mean_weight, std::uint64_t seed) {
    if (n_modules < 1 || n_modules > n) throw DomainError("need 1 <= n_modules <= n");
    if (!(mixing >= 0.0 && mixing < 1.0)) throw DomainError("mixing must lie in [0, 1)");
    if (!(avg_degree >= 0.0)) throw DomainError("average degree must be non-negative");
    if (!(mean_weight >= 1.0)) throw DomainError("mean weight must be at least 1");

    std::mt19937_64 rng(seed);
    PlantedNetwork out;
    out.planted.resize(n);
    std::vector<std::vector<NodeId>> members(n_modules);
    for (std::size_t i = 0; i < n; ++i) {
        const auto m = static_cast<LabelId>(i * n_modules / n);
        out.planted[i] = m;
        members[m].push_back(static_cast<NodeId>(i));
    }

    std::poisson_distribution<std::uint64_t> degree(avg_degree);
    std::vector<Arc> arcs;
    std::unordered_set<NodeId> chosen;
    const auto draw_weight = [&] {
        if (mean_weight == 1.0) return 1.0;
        return 1.0 + static_cast<double>(std::poisson_distribution<std::uint64_t>(mean_weight - 1.0)(rng));
    };
    for (std::size_t i = 0; i < n; ++i) {
        const auto& own = members[out.planted[i]];
        const std::size_t d = degree(rng);
        std::size_t internal = std::binomial_distribution<std::size_t>(d, 1.0 - mixing)(rng);
        std::size_t external = d - internal;
        internal = std::min(internal, own.size() - 1);
        external = std::min(external, n - own.size());

        chosen.clear();
        std::uniform_int_distribution<std::size_t> pick_own(0, own.size() - 1);
        while (chosen.size() < internal) {
            const NodeId j = own[pick_own(rng)];
            if (j != i) chosen.insert(j);
        }
        std::uniform_int_distribution<std::size_t> pick_any(0, n - 1);
        std::size_t outside = 0;
        while (outside < external) {
            const auto j = static_cast<NodeId>(pick_any(rng));
            if (out.planted[j] != out.planted[i] && chosen.insert(j).second) ++outside;
        }
        std::vector<NodeId> targets(chosen.begin(), chosen.end());
        std::sort(targets.begin(), targets.end());
        for (NodeId j : targets) arcs.push_back({static_cast<NodeId>(i), j, draw_weight()});
    }
    out.graph = MultiGraph::from_edges(n, arcs, true);
    return out;
}

std::vector<LabelId> randomize_metadata(std::span<const LabelId> labels, double mu, std::uint64_t seed) {
    if (!(mu >= 0.0 && mu <= 1.0)) throw DomainError("mu must lie in [0, 1]");
    std::vector<LabelId> out(labels.begin(), labels.end());
    const auto count = static_cast<std::size_t>(std::floor(mu * static_cast<double>(labels.size())));
    if (count == 0) return out;
    std::vector<LabelId> pool(labels.begin(), labels.end());
    std::sort(pool.begin(), pool.end());
    pool.erase(std::unique(pool.begin(), pool.end()), pool.end());

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order(labels.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::uniform_int_distribution<std::size_t> pick_label(0, pool.size() - 1);
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t j = std::uniform_int_distribution<std::size_t>(k, order.size() - 1)(rng);
        std::swap(order[k], order[j]);
        out[order[k]] = pool[pick_label(rng)];
    }
    return out;
}

MultiGraph with_labels(const MultiGraph& g, std::span<const LabelId> labels) {
    if (labels.size() != g.num_nodes()) throw ValidationError("label count does not match node count");
    std::map<LabelId, LabelId> dense;
    for (LabelId l : labels) dense.emplace(l, 0);
    std::vector<std::string> names;
    for (auto& [label, id] : dense) {
        id = static_cast<LabelId>(names.size());
        names.push_back(std::to_string(label));
    }
    std::vector<LabelId> mapped(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) mapped[i] = dense[labels[i]];
    return g.with_metadata(std::move(mapped), std::move(names));
}

std::uint64_t multiedge_count(const MultiGraph& g) {
    if (!g.has_integer_weights()) {
        throw ValidationError("multiedge sampling needs integer weights; round or scale the weights first");
    }
    return round_count(g.total_edge_weight());
}

MultiGraph remove_multiedges(const MultiGraph& g, double r, std::uint64_t seed) {
    if (!(r >= 0.0 && r < 1.0)) throw DomainError("removal fraction must lie in [0, 1)");
    const std::uint64_t m = multiedge_count(g);
    const std::uint64_t removed = round_count(r * static_cast<double>(m));
    if (removed == 0) return g;
    std::mt19937_64 rng(seed);
    const auto kept = sample_units(g.edges(), m, m - removed, rng, nullptr);
    return g.with_edges(kept);
}

std::pair<MultiGraph, MultiGraph> split_two_fold(const MultiGraph& g, std::uint64_t seed) {
    const std::uint64_t m = multiedge_count(g);
    std::mt19937_64 rng(seed);
    std::vector<Arc> test;
    const auto train = sample_units(g.edges(), m, (m + 1) / 2, rng, &test);
    return {g.with_edges(train), g.with_edges(test)};
}

Detection detect(const MultiGraph& g, const FlowOptions& flow, const SearchConfig& search) {
    Detection d;
    d.flows = compute_flow(g, flow);
    d.partition = optimize(g, d.flows, search);
    d.one_level_codelength = codelength(g, d.flows, one_level_partition(g));
    d.savings = d.one_level_codelength > 0.0 ? codelength_savings(d.partition.codelength, d.one_level_codelength)
                                             : 0.0;
    return d;
}

CrossValidation cross_validate(const MultiGraph& train, const MultiGraph& test, const FlowOptions& flow,
                               const SearchConfig& search) {
    if (train.num_nodes() != test.num_nodes()) throw ValidationError("folds have different node sets");
    CrossValidation cv;
    const FlowField train_flows = compute_flow(train, flow);
    cv.partition = optimize(train, train_flows, search);
    cv.train_codelength = cv.partition.codelength;
    const FlowField test_flows = compute_flow(test, flow);
    Partition scored;
    scored.module_of = cv.partition.module_of;
    scored.num_modules = cv.partition.num_modules;
    cv.test_codelength = codelength(test, test_flows, scored);
    cv.test_one_level_codelength = codelength(test, test_flows, one_level_partition(test));
    cv.savings = cv.test_one_level_codelength > 0.0
                     ? codelength_savings(cv.test_codelength, cv.test_one_level_codelength)
                     : 0.0;
    return cv;
}

CrossValidation cross_validate(const MultiGraph& g, const FlowOptions& flow, const SearchConfig& search,
                               std::uint64_t seed) {
    auto [train, test] = split_two_fold(g, seed);
    return cross_validate(train, test, flow, search);
}

// ---------------------------------------------------------------------------
// Sweep config
// ---------------------------------------------------------------------------

std::vector<double> default_r_values() {
    std::vector<double> r;
    for (int k = 0; k <= 19; ++k) r.push_back(k * 0.05);
    return r;
}

std::vector<double> default_mu_values() { return {0.0, 0.15, 0.5}; }

void validate(const SweepSpec& spec) {
    if (spec.r_values.empty()) throw ValidationError("sweep needs at least one r value");
    if (spec.mu_values.empty()) throw ValidationError("sweep needs at least one mu value");
    for (double r : spec.r_values) {
        if (!(r >= 0.0 && r < 1.0)) throw ValidationError("r values must lie in [0, 1)");
    }
    for (double mu : spec.mu_values) {
        if (!(mu >= 0.0 && mu <= 1.0)) throw ValidationError("mu values must lie in [0, 1]");
    }
    if (spec.repetitions < 1) throw ValidationError("repetitions must be at least 1");
    if (spec.methods.empty()) throw ValidationError("sweep needs at least one method");
    if (spec.trials < 1) throw ValidationError("trials must be at least 1");
    if (!(spec.teleport_alpha > 0.0 && spec.teleport_alpha < 1.0)) {
        throw ValidationError("teleport alpha must lie in (0, 1)");
    }
    if (spec.input.empty()) {
        if (spec.modules < 1 || spec.modules > spec.n) throw ValidationError("need 1 <= modules <= n");
        if (!(spec.mixing >= 0.0 && spec.mixing < 1.0)) throw ValidationError("mixing must lie in [0, 1)");
        if (!(spec.mean_weight >= 1.0)) throw ValidationError("mean_weight must be at least 1");
        if (!(spec.avg_degree >= 0.0)) throw ValidationError("avg_degree must be non-negative");
    }
    const bool needs_metadata =
        std::find(spec.methods.begin(), spec.methods.end(), FlowMethod::metadata) != spec.methods.end();
    if (needs_metadata && !spec.input.empty() && spec.metadata.empty()) {
        throw ValidationError("metadata method on an input network needs a metadata file");
    }
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used == v.size()) return x;
    } catch (const std::exception&) {
    }
    throw ValidationError("invalid number '" + v + "' for " + key);
}

std::uint64_t to_count(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        if (!v.empty() && v[0] != '-') {
            const unsigned long long x = std::stoull(v, &used);
            if (used == v.size()) return x;
        }
    } catch (const std::exception&) {
    }
    throw ValidationError("invalid count '" + v + "' for " + key);
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ValidationError("invalid flag '" + v + "' for " + key);
}

std::vector<double> to_grid(const std::string& key, const std::string& v, std::vector<double> fallback) {
    if (v == "default") return fallback;
    std::vector<double> out;
    for (const auto& item : split_list(v)) out.push_back(to_double(key, item));
    return out;
}

} // namespace

SweepSpec parse_sweep_spec(std::istream& in) {
    SweepSpec spec;
    spec.r_values = default_r_values();
    spec.mu_values = {0.0};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ValidationError("line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "r") {
            spec.r_values = to_grid(key, value, default_r_values());
        } else if (key == "mu") {
            spec.mu_values = to_grid(key, value, default_mu_values());
        } else if (key == "repetitions") {
            spec.repetitions = to_count(key, value);
        } else if (key == "methods") {
            spec.methods.clear();
            for (const auto& name : split_list(value)) spec.methods.push_back(parse_flow_method(name));
        } else if (key == "seed") {
            spec.seed = to_count(key, value);
        } else if (key == "trials") {
            spec.trials = to_count(key, value);
        } else if (key == "teleport_alpha") {
            spec.teleport_alpha = to_double(key, value);
        } else if (key == "tolerance") {
            spec.tolerance = to_double(key, value);
        } else if (key == "max_iterations") {
            spec.max_iterations = to_count(key, value);
        } else if (key == "xval") {
            spec.cross_validation = to_bool(key, value);
        } else if (key == "input") {
            spec.input = value;
        } else if (key == "directed") {
            spec.directed = to_bool(key, value);
        } else if (key == "metadata") {
            spec.metadata = value;
        } else if (key == "planted") {
            spec.planted = value;
        } else if (key == "n") {
            spec.n = to_count(key, value);
        } else if (key == "k") {
            spec.avg_degree = to_double(key, value);
        } else if (key == "mixing") {
            spec.mixing = to_double(key, value);
        } else if (key == "modules") {
            spec.modules = to_count(key, value);
        } else if (key == "mean_weight") {
            spec.mean_weight = to_double(key, value);
        } else if (key == "output") {
            spec.output = value;
        } else if (key == "summary") {
            spec.summary = value;
        } else {
            throw ValidationError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    validate(spec);
    return spec;
}

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

namespace {

void put_real(std::ostream& out, double x) {
    if (std::isnan(x)) return;
    std::ostringstream s;
    s.precision(12);
    s << x;
    out << s.str();
}

} // namespace

void write_csv_header(std::ostream& out) {
    out << "method,r,mu,rep,seed,n_modules,ami,train_codelength,test_codelength,savings,fold_size\n";
}

void write_csv_row(std::ostream& out, const ExperimentRecord& rec) {
    out << to_string(rec.method) << ',';
    put_real(out, rec.r);
    out << ',';
    put_real(out, rec.mu);
    out << ',' << rec.rep << ',' << rec.seed << ',' << rec.n_modules << ',';
    put_real(out, rec.ami);
    out << ',';
    put_real(out, rec.train_codelength);
    out << ',';
    put_real(out, rec.test_codelength);
    out << ',';
    put_real(out, rec.savings);
    out << ',' << rec.fold_size << '\n';
}

namespace {

std::vector<LabelId> read_labels_for(const MultiGraph& g, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open label file " + path);
    std::unordered_map<std::string, std::string> by_id;
    for (auto& [id, label] : read_node_labels(in)) by_id[id] = label;
    std::unordered_map<std::string, LabelId> dense;
    std::vector<LabelId> labels(g.num_nodes());
    for (NodeId i = 0; i < g.num_nodes(); ++i) {
        auto it = by_id.find(g.original_id(i));
        if (it == by_id.end()) throw ValidationError("label file " + path + " misses node " + g.original_id(i));
        labels[i] = dense.try_emplace(it->second, static_cast<LabelId>(dense.size())).first->second;
    }
    return labels;
}

struct SweepInput {
    MultiGraph graph;
    std::vector<LabelId> planted;  // empty when unknown
    std::vector<LabelId> metadata; // empty when unavailable
};

SweepInput load_sweep_input(const SweepSpec& spec) {
    SweepInput s;
    if (spec.input.empty()) {
        auto net = generate_planted(spec.n, spec.avg_degree, spec.mixing, spec.modules, spec.mean_weight,
                                    derive_seed(spec.seed, {kTagBaseNetwork}));
        s.graph = std::move(net.graph);
        s.planted = std::move(net.planted);
        s.metadata = s.planted;
        return s;
    }
    s.graph = load_graph_file(spec.input, spec.directed);
    if (!spec.metadata.empty()) s.metadata = read_labels_for(s.graph, spec.metadata);
    if (!spec.planted.empty()) {
        s.planted = read_labels_for(s.graph, spec.planted);
    } else {
        s.planted = s.metadata;
    }
    return s;
}

} // namespace

std::vector<ExperimentRecord> run_sweep(const SweepSpec& spec, std::ostream* csv) {
    validate(spec);
    const SweepInput input = load_sweep_input(spec);
    const bool needs_metadata =
        std::find(spec.methods.begin(), spec.methods.end(), FlowMethod::metadata) != spec.methods.end();
    if (needs_metadata && input.metadata.empty()) {
        throw ValidationError("metadata method needs metadata labels");
    }

    const std::size_t n_r = spec.r_values.size(), n_mu = spec.mu_values.size();
    const std::size_t n_jobs = n_r * n_mu * spec.repetitions;
    const std::size_t per_job = spec.methods.size();
    std::vector<ExperimentRecord> records(n_jobs * per_job);
    std::vector<char> done(n_jobs, 0);
    std::size_t flushed = 0;
    std::exception_ptr failure;
    bool stop = false;

    if (csv) write_csv_header(*csv);

#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t job = 0; job < static_cast<std::ptrdiff_t>(n_jobs); ++job) {
        bool skip = false;
#pragma omp atomic read
        skip = stop;
        if (skip) continue;
        try {
            const std::size_t rep = static_cast<std::size_t>(job) % spec.repetitions;
            const std::size_t mi = (static_cast<std::size_t>(job) / spec.repetitions) % n_mu;
            const std::size_t ri = static_cast<std::size_t>(job) / (spec.repetitions * n_mu);
            const double r = spec.r_values[ri], mu = spec.mu_values[mi];
            const std::uint64_t job_seed = derive_seed(spec.seed, {ri, mi, rep});
            // the sampled network and folds depend on (r, rep) only, so every mu sees the same data
            const std::uint64_t sample_seed = derive_seed(spec.seed, {kTagSample, ri, rep});

            const MultiGraph sampled = remove_multiedges(input.graph, r, sample_seed);
            std::vector<LabelId> labels;
            if (needs_metadata) labels = randomize_metadata(input.metadata, mu, derive_seed(job_seed, {kTagMetadata}));

            std::optional<std::pair<MultiGraph, MultiGraph>> folds;
            if (spec.cross_validation) folds = split_two_fold(sampled, derive_seed(sample_seed, {kTagSplit}));

            SearchConfig search;
            search.seed = job_seed;
            search.trials = spec.trials;
            for (std::size_t k = 0; k < per_job; ++k) {
                const FlowMethod method = spec.methods[k];
                FlowOptions flow;
                flow.method = method;
                flow.teleport_alpha = spec.teleport_alpha;
                flow.tolerance = spec.tolerance;
                flow.max_iterations = spec.max_iterations;

                ExperimentRecord rec{method, r, mu, rep, job_seed, 0, kNaN, kNaN, kNaN, kNaN, 0};
                std::vector<std::uint32_t> detected;
                if (folds) {
                    const MultiGraph train = method == FlowMethod::metadata ? with_labels(folds->first, labels)
                                                                            : folds->first;
                    const MultiGraph test = method == FlowMethod::metadata ? with_labels(folds->second, labels)
                                                                           : folds->second;
                    CrossValidation cv = cross_validate(train, test, flow, search);
                    rec.n_modules = cv.partition.num_modules;
                    rec.train_codelength = cv.train_codelength;
                    rec.test_codelength = cv.test_codelength;
                    rec.savings = cv.savings;
                    rec.fold_size = multiedge_count(train);
                    detected = std::move(cv.partition.module_of);
                } else {
                    const MultiGraph g = method == FlowMethod::metadata ? with_labels(sampled, labels) : sampled;
                    Detection d = detect(g, flow, search);
                    rec.n_modules = d.partition.num_modules;
                    rec.train_codelength = d.partition.codelength;
                    rec.savings = d.savings;
                    rec.fold_size = multiedge_count(sampled);
                    detected = std::move(d.partition.module_of);
                }
                if (!input.planted.empty()) rec.ami = ami(detected, input.planted);
                records[static_cast<std::size_t>(job) * per_job + k] = rec;
            }
#pragma omp critical(mapflow_sweep_output)
            {
                done[job] = 1;
                while (flushed < n_jobs && done[flushed] == 1) {
                    if (csv) {
                        for (std::size_t k = 0; k < per_job; ++k) write_csv_row(*csv, records[flushed * per_job + k]);
                        csv->flush();
                    }
                    ++flushed;
                }
            }
        } catch (...) {
#pragma omp critical(mapflow_sweep_output)
            if (!failure) failure = std::current_exception();
#pragma omp atomic write
            stop = true;
        }
    }
    if (failure) std::rethrow_exception(failure);
    return records;
}

nlohmann::json summarize(std::span<const ExperimentRecord> records) {
    struct Acc {
        std::size_t count = 0;
        std::map<std::string, std::pair<double, double>> sums; // sum, sum of squares
        std::map<std::string, std::size_t> counts;
    };
    std::map<std::tuple<std::string, double, double>, Acc> groups;
    for (const auto& rec : records) {
        Acc& acc = groups[{std::string(to_string(rec.method)), rec.r, rec.mu}];
        ++acc.count;
        const auto add = [&](const char* name, double x) {
            if (std::isnan(x)) return;
            auto& [s, s2] = acc.sums[name];
            s += x;
            s2 += x * x;
            ++acc.counts[name];
        };
        add("n_modules", static_cast<double>(rec.n_modules));
        add("ami", rec.ami);
        add("train_codelength", rec.train_codelength);
        add("test_codelength", rec.test_codelength);
        add("savings", rec.savings);
    }
    nlohmann::json out = nlohmann::json::array();
    for (const auto& [key, acc] : groups) {
        nlohmann::json row;
        row["method"] = std::get<0>(key);
        row["r"] = std::get<1>(key);
        row["mu"] = std::get<2>(key);
        row["count"] = acc.count;
        for (const auto& [name, sums] : acc.sums) {
            const double k = static_cast<double>(acc.counts.at(name));
            const double mean = sums.first / k;
            const double var = k > 1.0 ? std::max(sums.second - k * mean * mean, 0.0) / (k - 1.0) : 0.0;
            row[name] = {{"mean", mean}, {"stderr", std::sqrt(var / k)}};
        }
        out.push_back(std::move(row));
    }
    return out;
}

} // namespace mapflow
