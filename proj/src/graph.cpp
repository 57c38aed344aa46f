#include "mapflow/graph.hpp"

#include "mapflow/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace mapflow {

namespace {

std::vector<std::string> default_ids(std::size_t n) {
    std::vector<std::string> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = std::to_string(i);
    return ids;
}

// Strips a trailing '#' comment and splits on whitespace.
std::vector<std::string> tokenize(const std::string& line) {
    std::vector<std::string> tokens;
    const auto hash = line.find('#');
    std::istringstream ss(hash == std::string::npos ? line : line.substr(0, hash));
    std::string tok;
    while (ss >> tok) tokens.push_back(tok);
    return tokens;
}

double parse_weight(const std::string& token, std::size_t line_no) {
    std::size_t used = 0;
    double w = 0.0;
    try {
        w = std::stod(token, &used);
    } catch (const std::exception&) {
        throw ParseError("invalid weight '" + token + "'", line_no);
    }
    if (used != token.size() || !std::isfinite(w)) {
        throw ParseError("invalid weight '" + token + "'", line_no);
    }
    if (w < 0.0) {
        throw ValidationError("line " + std::to_string(line_no) + ": negative weight " + token);
    }
    return w;
}

class IdMap {
public:
    NodeId get(const std::string& id) {
        auto [it, inserted] = index_.try_emplace(id, static_cast<NodeId>(ids_.size()));
        if (inserted) ids_.push_back(id);
        return it->second;
    }
    std::vector<std::string> take() { return std::move(ids_); }
    std::size_t size() const { return ids_.size(); }

private:
    std::unordered_map<std::string, NodeId> index_;
    std::vector<std::string> ids_;
};

} // namespace

MultiGraph MultiGraph::from_edges(std::size_t n_nodes, std::span<const Arc> edges, bool directed,
                                  std::vector<std::string> ids) {
    MultiGraph g;
    g.directed_ = directed;
    g.ids_ = ids.empty() ? default_ids(n_nodes) : std::move(ids);
    if (g.ids_.size() != n_nodes) {
        throw ValidationError("id list has " + std::to_string(g.ids_.size()) + " entries for " +
                              std::to_string(n_nodes) + " nodes");
    }
    g.index_.reserve(n_nodes);
    for (NodeId i = 0; i < n_nodes; ++i) {
        if (!g.index_.emplace(g.ids_[i], i).second) {
            throw ValidationError("duplicate node id '" + g.ids_[i] + "'");
        }
    }
    g.k_out_.assign(n_nodes, 0);

    std::vector<Arc> arcs;
    arcs.reserve(directed ? edges.size() : 2 * edges.size());
    for (const Arc& e : edges) {
        if (e.source >= n_nodes || e.target >= n_nodes) {
            throw ValidationError("arc (" + std::to_string(e.source) + ", " +
                                  std::to_string(e.target) + ") references a node outside 0.." +
                                  std::to_string(n_nodes));
        }
        if (!(e.weight >= 0.0) || !std::isfinite(e.weight)) {
            throw ValidationError("arc (" + std::to_string(e.source) + ", " +
                                  std::to_string(e.target) + ") has invalid weight");
        }
        if (e.weight == 0.0) continue;
        arcs.push_back(e);
        if (!directed) arcs.push_back({e.target, e.source, e.weight});
        g.total_edge_weight_ += e.weight;
    }
    g.build(std::move(arcs));
    return g;
}

void MultiGraph::build(std::vector<Arc> arcs) {
    const std::size_t n = num_nodes();
    std::sort(arcs.begin(), arcs.end(), [](const Arc& a, const Arc& b) {
        return a.source != b.source ? a.source < b.source : a.target < b.target;
    });
    arcs_.clear();
    for (const Arc& a : arcs) {
        if (!arcs_.empty() && arcs_.back().source == a.source && arcs_.back().target == a.target) {
            arcs_.back().weight += a.weight;
        } else {
            arcs_.push_back(a);
        }
    }

    out_offsets_.assign(n + 1, 0);
    in_offsets_.assign(n + 1, 0);
    k_out_.assign(n, 0);
    k_in_.assign(n, 0);
    s_out_.assign(n, 0.0);
    s_in_.assign(n, 0.0);
    for (const Arc& a : arcs_) {
        ++k_out_[a.source];
        ++k_in_[a.target];
        s_out_[a.source] += a.weight;
        s_in_[a.target] += a.weight;
    }
    for (std::size_t i = 0; i < n; ++i) {
        out_offsets_[i + 1] = out_offsets_[i] + k_out_[i];
        in_offsets_[i + 1] = in_offsets_[i] + k_in_[i];
    }
    in_arcs_.resize(arcs_.size());
    std::vector<std::size_t> cursor(in_offsets_.begin(), in_offsets_.end() - 1);
    // arcs_ is sorted by source, so each in-list ends up sorted by source too.
    for (const Arc& a : arcs_) in_arcs_[cursor[a.target]++] = a;
}

std::vector<Arc> MultiGraph::edges() const {
    if (directed_) return arcs_;
    std::vector<Arc> out;
    out.reserve(arcs_.size() / 2 + 1);
    for (const Arc& a : arcs_) {
        if (a.source < a.target) {
            out.push_back(a);
        } else if (a.source == a.target) {
            out.push_back({a.source, a.target, a.weight / 2.0});
        }
    }
    return out;
}

MultiGraph MultiGraph::with_edges(std::span<const Arc> edges) const {
    MultiGraph g = from_edges(num_nodes(), edges, directed_, ids_);
    g.types_ = types_;
    g.type_counts_[0] = type_counts_[0];
    g.type_counts_[1] = type_counts_[1];
    g.labels_ = labels_;
    g.label_names_ = label_names_;
    g.label_counts_ = label_counts_;
    if (g.is_bipartite()) g.check_bipartite();
    return g;
}

bool MultiGraph::has_integer_weights() const noexcept {
    return std::all_of(arcs_.begin(), arcs_.end(),
                       [](const Arc& a) { return a.weight == std::floor(a.weight); });
}

std::optional<NodeId> MultiGraph::index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

MultiGraph MultiGraph::with_metadata(std::vector<LabelId> labels,
                                     std::vector<std::string> label_names) const {
    if (labels.size() != num_nodes()) {
        throw ValidationError("metadata covers " + std::to_string(labels.size()) + " of " +
                              std::to_string(num_nodes()) + " nodes");
    }
    MultiGraph g = *this;
    g.label_counts_.assign(label_names.size(), 0);
    for (LabelId m : labels) {
        if (m >= label_names.size()) throw ValidationError("label index out of range");
        ++g.label_counts_[m];
    }
    g.labels_ = std::move(labels);
    g.label_names_ = std::move(label_names);
    return g;
}

MultiGraph MultiGraph::with_node_types(std::vector<NodeType> types) const {
    if (types.size() != num_nodes()) {
        throw ValidationError("node types cover " + std::to_string(types.size()) + " of " +
                              std::to_string(num_nodes()) + " nodes");
    }
    MultiGraph g = *this;
    g.types_ = std::move(types);
    g.type_counts_[0] = g.type_counts_[1] = 0;
    for (NodeType t : g.types_) ++g.type_counts_[static_cast<int>(t)];
    g.check_bipartite();
    return g;
}

void MultiGraph::check_bipartite() const {
    for (const Arc& a : arcs_) {
        if (types_[a.source] == types_[a.target]) {
            throw ValidationError("bipartite violation: arc (" + ids_[a.source] + ", " +
                                  ids_[a.target] + ") joins two nodes of type " +
                                  (types_[a.source] == NodeType::A ? "A" : "B"));
        }
    }
}

MultiGraph load_edge_list(std::istream& in, bool directed) {
    IdMap ids;
    std::vector<Arc> edges;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto tokens = tokenize(line);
        if (tokens.empty()) continue;
        if (tokens.size() < 2 || tokens.size() > 3) {
            throw ParseError("expected 'src dst [weight]', got " + std::to_string(tokens.size()) +
                                 " fields",
                             line_no);
        }
        const double w = tokens.size() == 3 ? parse_weight(tokens[2], line_no) : 1.0;
        const NodeId s = ids.get(tokens[0]);
        const NodeId t = ids.get(tokens[1]);
        edges.push_back({s, t, w});
    }
    const std::size_t n = ids.size();
    return MultiGraph::from_edges(n, edges, directed, ids.take());
}

MultiGraph load_pajek(std::istream& in) {
    enum class Section { none, vertices, arcs, edges };
    Section section = Section::none;
    std::size_t n = 0;
    bool seen_vertices = false;
    std::optional<std::size_t> n_first_mode;
    std::vector<std::pair<Arc, bool>> lines; // (edge, undirected?)
    std::string line;
    std::size_t line_no = 0;

    auto parse_index = [&](const std::string& tok) -> NodeId {
        std::size_t used = 0;
        long long v = 0;
        try {
            v = std::stoll(tok, &used);
        } catch (const std::exception&) {
            throw ParseError("invalid vertex index '" + tok + "'", line_no);
        }
        if (used != tok.size() || v < 1 || static_cast<std::size_t>(v) > n) {
            throw ParseError("vertex index '" + tok + "' outside 1.." + std::to_string(n), line_no);
        }
        return static_cast<NodeId>(v - 1);
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '%') continue;
        if (line[first] == '*') {
            std::istringstream ss(line.substr(first + 1));
            std::string keyword;
            ss >> keyword;
            std::transform(keyword.begin(), keyword.end(), keyword.begin(),
                           [](unsigned char c) { return std::tolower(c); });
            if (keyword == "vertices") {
                long long count = -1;
                if (!(ss >> count) || count < 0) throw ParseError("bad *Vertices header", line_no);
                n = static_cast<std::size_t>(count);
                long long first_mode = -1;
                if (ss >> first_mode) {
                    if (first_mode < 0 || first_mode > count) {
                        throw ParseError("bad two-mode *Vertices header", line_no);
                    }
                    n_first_mode = static_cast<std::size_t>(first_mode);
                }
                seen_vertices = true;
                section = Section::vertices;
            } else if (keyword == "arcs") {
                section = Section::arcs;
            } else if (keyword == "edges") {
                section = Section::edges;
            } else {
                throw ParseError("unsupported section '*" + keyword + "'", line_no);
            }
            if (section != Section::vertices && !seen_vertices) {
                throw ParseError("*Vertices must precede link sections", line_no);
            }
            continue;
        }
        const auto tokens = tokenize(line);
        if (tokens.empty()) continue;
        switch (section) {
        case Section::none:
            throw ParseError("data before *Vertices", line_no);
        case Section::vertices:
            parse_index(tokens[0]);
            break;
        case Section::arcs:
        case Section::edges: {
            if (tokens.size() < 2 || tokens.size() > 3) {
                throw ParseError("expected 'src dst [weight]'", line_no);
            }
            const double w = tokens.size() == 3 ? parse_weight(tokens[2], line_no) : 1.0;
            lines.push_back({{parse_index(tokens[0]), parse_index(tokens[1]), w},
                             section == Section::edges});
            break;
        }
        }
    }
    if (!seen_vertices) throw ParseError("missing *Vertices header");

    const bool directed = std::any_of(lines.begin(), lines.end(),
                                      [](const auto& l) { return !l.second; });
    std::vector<Arc> edges;
    edges.reserve(lines.size() * 2);
    for (const auto& [e, undirected] : lines) {
        edges.push_back(e);
        if (directed && undirected && e.source != e.target) {
            edges.push_back({e.target, e.source, e.weight});
        }
    }
    std::vector<std::string> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = std::to_string(i + 1);
    MultiGraph g = MultiGraph::from_edges(n, edges, directed, std::move(ids));
    if (!n_first_mode) return g;
    std::vector<NodeType> types(n, NodeType::B);
    std::fill_n(types.begin(), *n_first_mode, NodeType::A);
    return g.with_node_types(std::move(types));
}

MultiGraph load_graph_file(const std::string& path, bool directed) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".net") == 0) return load_pajek(in);
    return load_edge_list(in, directed);
}

void write_edge_list(std::ostream& out, const MultiGraph& g) {
    out << std::setprecision(17);
    for (const Arc& e : g.edges()) {
        out << g.original_id(e.source) << ' ' << g.original_id(e.target) << ' ' << e.weight << '\n';
    }
}

std::vector<std::pair<std::string, std::string>> read_node_labels(std::istream& in) {
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto tokens = tokenize(line);
        if (tokens.empty()) continue;
        if (tokens.size() != 2) throw ParseError("expected 'node-id label'", line_no);
        out.emplace_back(tokens[0], tokens[1]);
    }
    return out;
}

MultiGraph attach_metadata(const MultiGraph& g,
                           const std::unordered_map<std::string, std::string>& labels) {
    std::vector<LabelId> dense(g.num_nodes());
    std::vector<std::string> names;
    std::unordered_map<std::string, LabelId> name_index;
    std::vector<std::string> missing;
    for (NodeId i = 0; i < g.num_nodes(); ++i) {
        auto it = labels.find(g.original_id(i));
        if (it == labels.end()) {
            missing.push_back(g.original_id(i));
            continue;
        }
        auto [slot, inserted] = name_index.try_emplace(it->second, static_cast<LabelId>(names.size()));
        if (inserted) names.push_back(it->second);
        dense[i] = slot->second;
    }
    if (!missing.empty()) {
        std::string list;
        for (std::size_t k = 0; k < missing.size() && k < 20; ++k) list += " " + missing[k];
        if (missing.size() > 20) list += " ...";
        throw ValidationError("metadata missing for " + std::to_string(missing.size()) +
                              " node(s):" + list);
    }
    for (const auto& [id, label] : labels) {
        if (!g.index_of(id)) throw ValidationError("metadata names unknown node '" + id + "'");
    }
    return g.with_metadata(std::move(dense), std::move(names));
}

MultiGraph attach_bipartite_types(const MultiGraph& g,
                                  const std::unordered_map<std::string, NodeType>& types) {
    std::vector<NodeType> dense(g.num_nodes());
    std::vector<std::string> missing;
    for (NodeId i = 0; i < g.num_nodes(); ++i) {
        auto it = types.find(g.original_id(i));
        if (it == types.end()) {
            missing.push_back(g.original_id(i));
            continue;
        }
        dense[i] = it->second;
    }
    if (!missing.empty()) {
        std::string list;
        for (std::size_t k = 0; k < missing.size() && k < 20; ++k) list += " " + missing[k];
        throw ValidationError("node type missing for " + std::to_string(missing.size()) +
                              " node(s):" + list);
    }
    return g.with_node_types(std::move(dense));
}

NodeType parse_node_type(const std::string& token) {
    if (token == "A" || token == "a" || token == "0") return NodeType::A;
    if (token == "B" || token == "b" || token == "1") return NodeType::B;
    throw ParseError("unknown node type '" + token + "' (expected A or B)");
}

} // namespace mapflow
