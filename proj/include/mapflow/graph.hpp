#pragma once

// Immutable directed weighted multigraph with optional bipartite node types and
// discrete metadata labels. Undirected input is stored as pairs of opposing arcs.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace mapflow {

using NodeId = std::uint32_t;
using LabelId = std::uint32_t;

struct Arc {
    NodeId source;
    NodeId target;
    double weight;

    friend bool operator==(const Arc&, const Arc&) = default;
};

enum class NodeType : std::uint8_t { A = 0, B = 1 };

class MultiGraph {
public:
    MultiGraph() = default;

    /// Builds a graph from input-level edges. Duplicate (source, target) pairs are summed,
    /// zero weights dropped, negative weights rejected. For undirected graphs each edge
    /// {u, v} becomes the arcs (u, v) and (v, u); a self-loop {u, u} becomes one arc of
    /// twice the weight. `ids` defaults to "0".."n-1".
    static MultiGraph from_edges(std::size_t n_nodes, std::span<const Arc> edges, bool directed,
                                 std::vector<std::string> ids = {});

    std::size_t num_nodes() const noexcept { return k_out_.size(); }
    std::size_t num_arcs() const noexcept { return arcs_.size(); }
    bool directed() const noexcept { return directed_; }

    /// All arcs sorted by (source, target).
    std::span<const Arc> arcs() const noexcept { return arcs_; }
    std::span<const Arc> out_arcs(NodeId i) const noexcept {
        return {arcs_.data() + out_offsets_[i], out_offsets_[i + 1] - out_offsets_[i]};
    }
    /// Arcs ending in `j`, sorted by source.
    std::span<const Arc> in_arcs(NodeId j) const noexcept {
        return {in_arcs_.data() + in_offsets_[j], in_offsets_[j + 1] - in_offsets_[j]};
    }

    /// Input-level edges: the arcs for directed graphs, one entry per unordered pair
    /// (source <= target) with the original weight for undirected graphs.
    std::vector<Arc> edges() const;

    /// Same node set, types and metadata with a new edge set (validated like from_edges).
    MultiGraph with_edges(std::span<const Arc> edges) const;

    std::size_t k_out(NodeId i) const noexcept { return k_out_[i]; }
    std::size_t k_in(NodeId i) const noexcept { return k_in_[i]; }
    double s_out(NodeId i) const noexcept { return s_out_[i]; }
    double s_in(NodeId i) const noexcept { return s_in_[i]; }
    std::span<const double> s_out() const noexcept { return s_out_; }
    std::span<const double> s_in() const noexcept { return s_in_; }

    /// Sum of input-level edge weights (each undirected edge counted once).
    double total_edge_weight() const noexcept { return total_edge_weight_; }
    bool has_integer_weights() const noexcept;

    const std::string& original_id(NodeId i) const { return ids_[i]; }
    std::span<const std::string> original_ids() const noexcept { return ids_; }
    std::optional<NodeId> index_of(const std::string& id) const;

    bool is_bipartite() const noexcept { return !types_.empty(); }
    NodeType node_type(NodeId i) const { return types_[i]; }
    std::span<const NodeType> node_types() const noexcept { return types_; }
    std::size_t type_count(NodeType t) const noexcept { return type_counts_[static_cast<int>(t)]; }

    bool has_metadata() const noexcept { return !labels_.empty(); }
    LabelId label(NodeId i) const { return labels_[i]; }
    std::span<const LabelId> labels() const noexcept { return labels_; }
    std::size_t num_labels() const noexcept { return label_names_.size(); }
    std::span<const std::string> label_names() const noexcept { return label_names_; }
    /// N_m: number of nodes carrying label m.
    std::size_t label_count(LabelId m) const { return label_counts_[m]; }

    /// Dense-label variants used by generators; labels must be < label_names.size().
    MultiGraph with_metadata(std::vector<LabelId> labels, std::vector<std::string> label_names) const;
    MultiGraph with_node_types(std::vector<NodeType> types) const;

private:
    void build(std::vector<Arc> arcs);
    void check_bipartite() const;

    bool directed_ = true;
    std::vector<Arc> arcs_;
    std::vector<std::size_t> out_offsets_{0};
    std::vector<Arc> in_arcs_;
    std::vector<std::size_t> in_offsets_{0};
    std::vector<std::size_t> k_out_, k_in_;
    std::vector<double> s_out_, s_in_;
    double total_edge_weight_ = 0.0;

    std::vector<std::string> ids_;
    std::unordered_map<std::string, NodeId> index_;

    std::vector<NodeType> types_;
    std::size_t type_counts_[2] = {0, 0};

    std::vector<LabelId> labels_;
    std::vector<std::string> label_names_;
    std::vector<std::size_t> label_counts_;
};

/// Whitespace-separated "src dst [weight]" lines; '#' starts a comment. Node ids are
/// arbitrary tokens, remapped densely in order of first appearance.
MultiGraph load_edge_list(std::istream& in, bool directed);

/// Pajek subset: "*Vertices n" followed by optional "id label" lines, then "*Arcs"
/// (directed) and/or "*Edges" (undirected) sections of "src dst [weight]".
/// A file containing any *Arcs section is loaded as directed; *Edges lines then
/// contribute both directions. A two-mode header "*Vertices n n_A" marks vertices
/// 1..n_A as type A and the rest as type B.
MultiGraph load_pajek(std::istream& in);

/// Loads by extension: ".net" is Pajek, everything else an edge list.
MultiGraph load_graph_file(const std::string& path, bool directed);

/// Writes input-level edges as "src dst weight" using original ids (17 significant digits).
void write_edge_list(std::ostream& out, const MultiGraph& g);

/// "node-id label" per line, '#' comments.
std::vector<std::pair<std::string, std::string>> read_node_labels(std::istream& in);

MultiGraph attach_metadata(const MultiGraph& g,
                           const std::unordered_map<std::string, std::string>& labels);

MultiGraph attach_bipartite_types(const MultiGraph& g,
                                  const std::unordered_map<std::string, NodeType>& types);

/// Accepts "A"/"B" (case-insensitive) or "0"/"1".
NodeType parse_node_type(const std::string& token);

} // namespace mapflow
