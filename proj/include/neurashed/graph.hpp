#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "neurashed/errors.hpp"

namespace neurashed {

using NodeId = int;
using Edge = std::pair<NodeId, NodeId>; // (lower, upper)

// Raw mirror of the on-disk graph document. May describe an invalid graph;
// validate() reports every violation, compile() turns it into a Graph.
struct NodeSpec {
    NodeId id = 0;
    int level = 0;
    std::optional<int> threshold;

    friend bool operator==(const NodeSpec&, const NodeSpec&) = default;
};

struct GraphData {
    int num_levels = 0;
    std::vector<NodeSpec> nodes;
    std::vector<Edge> edges;
    std::vector<NodeId> class_nodes;

    friend bool operator==(const GraphData&, const GraphData&) = default;
};

struct Violation {
    ErrorCode code;
    std::string message;
};

// Re-checks every structural invariant from scratch. Deliberately written as
// straight-line passes over the raw data, independent of the compiler below,
// so the two act as cross-checks on each other.
inline std::vector<Violation> validate(const GraphData& g) {
    std::vector<Violation> out;
    auto add = [&](ErrorCode c, std::string m) { out.push_back({c, std::move(m)}); };

    if (g.num_levels < 2)
        add(ErrorCode::MalformedDocument, "levels must be >= 2");

    const int n = static_cast<int>(g.nodes.size());

    // ids dense 0..N-1, each with a level inside 1..L
    std::vector<int> seen(static_cast<std::size_t>(std::max(n, 0)), 0);
    for (const auto& node : g.nodes) {
        if (node.id < 0 || node.id >= n) {
            add(ErrorCode::MalformedDocument,
                "node id " + std::to_string(node.id) + " outside dense range 0.." + std::to_string(n - 1));
            continue;
        }
        if (++seen[static_cast<std::size_t>(node.id)] > 1)
            add(ErrorCode::DuplicateNodeId, "node id " + std::to_string(node.id) + " appears more than once");
    }

    auto level_of = [&](NodeId id) -> int {
        for (const auto& node : g.nodes)
            if (node.id == id) return node.level;
        return -1;
    };

    for (const auto& node : g.nodes) {
        if (node.level < 1 || node.level > g.num_levels)
            add(ErrorCode::MalformedDocument,
                "node " + std::to_string(node.id) + " has level " + std::to_string(node.level) +
                    " outside 1.." + std::to_string(g.num_levels));
    }

    // edges connect known nodes on adjacent levels, no duplicates
    std::set<Edge> edge_set;
    for (const auto& [lo, hi] : g.edges) {
        int ll = level_of(lo);
        int lh = level_of(hi);
        if (ll < 0 || lh < 0) {
            add(ErrorCode::MalformedDocument,
                "edge (" + std::to_string(lo) + "," + std::to_string(hi) + ") references unknown node");
            continue;
        }
        if (lh != ll + 1)
            add(ErrorCode::EdgeSkipsLevel,
                "edge (" + std::to_string(lo) + "," + std::to_string(hi) + ") connects level " +
                    std::to_string(ll) + " to level " + std::to_string(lh));
        if (!edge_set.insert({lo, hi}).second)
            add(ErrorCode::MalformedDocument,
                "duplicate edge (" + std::to_string(lo) + "," + std::to_string(hi) + ")");
    }

    auto indegree_of = [&](NodeId id) {
        int d = 0;
        for (const auto& [lo, hi] : g.edges)
            if (hi == id) ++d;
        return d;
    };

    // thresholds: required on middle levels, forbidden elsewhere, 1..indegree
    for (const auto& node : g.nodes) {
        bool middle = node.level > 1 && node.level < g.num_levels;
        if (middle) {
            int indeg = indegree_of(node.id);
            if (indeg < 1)
                add(ErrorCode::ThresholdOutOfRange,
                    "middle node " + std::to_string(node.id) + " has no dependents");
            if (!node.threshold)
                add(ErrorCode::ThresholdOutOfRange,
                    "middle node " + std::to_string(node.id) + " is missing a threshold");
            else if (*node.threshold < 1 || *node.threshold > indeg)
                add(ErrorCode::ThresholdOutOfRange,
                    "node " + std::to_string(node.id) + " threshold " + std::to_string(*node.threshold) +
                        " outside 1.." + std::to_string(indeg));
        } else if (node.threshold) {
            add(ErrorCode::ThresholdOutOfRange,
                "node " + std::to_string(node.id) + " on level " + std::to_string(node.level) +
                    " must not carry a threshold");
        }
    }

    // class nodes: exactly the top level, in some order, K >= 2
    std::vector<NodeId> top;
    for (const auto& node : g.nodes)
        if (node.level == g.num_levels) top.push_back(node.id);
    std::set<NodeId> class_set(g.class_nodes.begin(), g.class_nodes.end());
    if (class_set.size() != g.class_nodes.size())
        add(ErrorCode::NoClassNodes, "class_nodes contains duplicates");
    if (g.class_nodes.size() < 2)
        add(ErrorCode::NoClassNodes, "need at least 2 class nodes, got " + std::to_string(g.class_nodes.size()));
    for (NodeId c : g.class_nodes)
        if (level_of(c) != g.num_levels)
            add(ErrorCode::NoClassNodes, "class node " + std::to_string(c) + " is not on the top level");
    for (NodeId t : top)
        if (!class_set.count(t))
            add(ErrorCode::NoClassNodes, "top-level node " + std::to_string(t) + " is not listed in class_nodes");

    return out;
}

// Compiled, structurally valid graph. Immutable after construction and safe
// to share across concurrent runs.
class Graph {
public:
    // Builds adjacency while checking each invariant as it becomes checkable;
    // throws the first violation. validate() above is the independent oracle.
    static Graph compile(GraphData data) {
        Graph g;
        if (data.num_levels < 2)
            fail(ErrorCode::MalformedDocument, "levels must be >= 2");
        g.num_levels_ = data.num_levels;

        const int n = static_cast<int>(data.nodes.size());
        g.level_.assign(static_cast<std::size_t>(n), 0);
        g.threshold_.assign(static_cast<std::size_t>(n), 0);
        g.dependents_.resize(static_cast<std::size_t>(n));
        g.consumers_.resize(static_cast<std::size_t>(n));
        g.nodes_at_level_.resize(static_cast<std::size_t>(data.num_levels) + 1);

        std::vector<std::optional<int>> pending_threshold(static_cast<std::size_t>(n));
        for (const auto& node : data.nodes) {
            if (node.id < 0 || node.id >= n)
                fail(ErrorCode::MalformedDocument,
                     "node id " + std::to_string(node.id) + " outside dense range 0.." + std::to_string(n - 1));
            if (g.level_[static_cast<std::size_t>(node.id)] != 0)
                fail(ErrorCode::DuplicateNodeId, "node id " + std::to_string(node.id) + " appears more than once");
            if (node.level < 1 || node.level > data.num_levels)
                fail(ErrorCode::MalformedDocument,
                     "node " + std::to_string(node.id) + " has level " + std::to_string(node.level));
            g.level_[static_cast<std::size_t>(node.id)] = node.level;
            g.nodes_at_level_[static_cast<std::size_t>(node.level)].push_back(node.id);
            pending_threshold[static_cast<std::size_t>(node.id)] = node.threshold;
        }
        for (auto& ids : g.nodes_at_level_) std::sort(ids.begin(), ids.end());

        std::set<Edge> edge_set;
        for (const auto& [lo, hi] : data.edges) {
            if (lo < 0 || lo >= n || hi < 0 || hi >= n)
                fail(ErrorCode::MalformedDocument,
                     "edge (" + std::to_string(lo) + "," + std::to_string(hi) + ") references unknown node");
            if (g.level_[static_cast<std::size_t>(hi)] != g.level_[static_cast<std::size_t>(lo)] + 1)
                fail(ErrorCode::EdgeSkipsLevel,
                     "edge (" + std::to_string(lo) + "," + std::to_string(hi) + ") connects level " +
                         std::to_string(g.level_[static_cast<std::size_t>(lo)]) + " to level " +
                         std::to_string(g.level_[static_cast<std::size_t>(hi)]));
            if (!edge_set.insert({lo, hi}).second)
                fail(ErrorCode::MalformedDocument,
                     "duplicate edge (" + std::to_string(lo) + "," + std::to_string(hi) + ")");
            g.dependents_[static_cast<std::size_t>(hi)].push_back(lo);
            g.consumers_[static_cast<std::size_t>(lo)].push_back(hi);
        }
        for (auto& v : g.dependents_) std::sort(v.begin(), v.end());
        for (auto& v : g.consumers_) std::sort(v.begin(), v.end());

        for (NodeId id = 0; id < n; ++id) {
            int level = g.level_[static_cast<std::size_t>(id)];
            bool middle = level > 1 && level < data.num_levels;
            const auto& th = pending_threshold[static_cast<std::size_t>(id)];
            if (middle) {
                int indeg = static_cast<int>(g.dependents_[static_cast<std::size_t>(id)].size());
                if (indeg < 1)
                    fail(ErrorCode::ThresholdOutOfRange, "middle node " + std::to_string(id) + " has no dependents");
                if (!th)
                    fail(ErrorCode::ThresholdOutOfRange, "middle node " + std::to_string(id) + " is missing a threshold");
                if (*th < 1 || *th > indeg)
                    fail(ErrorCode::ThresholdOutOfRange,
                         "node " + std::to_string(id) + " threshold " + std::to_string(*th) + " outside 1.." +
                             std::to_string(indeg));
                g.threshold_[static_cast<std::size_t>(id)] = *th;
            } else if (th) {
                fail(ErrorCode::ThresholdOutOfRange,
                     "node " + std::to_string(id) + " on level " + std::to_string(level) + " must not carry a threshold");
            }
        }

        std::set<NodeId> class_set;
        for (NodeId c : data.class_nodes) {
            if (!class_set.insert(c).second)
                fail(ErrorCode::NoClassNodes, "class_nodes contains duplicates");
            if (c < 0 || c >= n || g.level_[static_cast<std::size_t>(c)] != data.num_levels)
                fail(ErrorCode::NoClassNodes, "class node " + std::to_string(c) + " is not on the top level");
        }
        if (data.class_nodes.size() < 2)
            fail(ErrorCode::NoClassNodes, "need at least 2 class nodes, got " + std::to_string(data.class_nodes.size()));
        for (NodeId t : g.nodes_at_level_[static_cast<std::size_t>(data.num_levels)])
            if (!class_set.count(t))
                fail(ErrorCode::NoClassNodes, "top-level node " + std::to_string(t) + " is not listed in class_nodes");

        // Canonical eta order: for each class (in class_nodes order), its
        // second-last-level dependents ascending.
        for (std::size_t j = 0; j < data.class_nodes.size(); ++j) {
            NodeId cls = data.class_nodes[j];
            for (NodeId f : g.dependents_[static_cast<std::size_t>(cls)]) {
                g.class_edge_index_[{f, cls}] = static_cast<int>(g.class_edges_.size());
                g.class_edges_.push_back({f, cls});
            }
        }

        g.data_ = std::move(data);
        std::sort(g.data_.edges.begin(), g.data_.edges.end());
        std::sort(g.data_.nodes.begin(), g.data_.nodes.end(),
                  [](const NodeSpec& a, const NodeSpec& b) { return a.id < b.id; });
        return g;
    }

    int num_levels() const { return num_levels_; }
    int node_count() const { return static_cast<int>(level_.size()); }
    int level_of(NodeId id) const { return level_[static_cast<std::size_t>(id)]; }
    int threshold_of(NodeId id) const { return threshold_[static_cast<std::size_t>(id)]; }
    bool is_top(NodeId id) const { return level_of(id) == num_levels_; }

    std::span<const NodeId> dependents(NodeId id) const { return dependents_[static_cast<std::size_t>(id)]; }
    std::span<const NodeId> consumers(NodeId id) const { return consumers_[static_cast<std::size_t>(id)]; }
    std::span<const NodeId> nodes_at_level(int level) const {
        if (level < 1 || level > num_levels_)
            fail(ErrorCode::LevelOutOfRange, "level " + std::to_string(level) + " outside 1.." + std::to_string(num_levels_));
        return nodes_at_level_[static_cast<std::size_t>(level)];
    }

    std::span<const NodeId> class_nodes() const { return data_.class_nodes; }
    int num_classes() const { return static_cast<int>(data_.class_nodes.size()); }
    int class_of_label(int label) const {
        if (label < 0 || label >= num_classes())
            fail(ErrorCode::LabelOutOfRange, "label " + std::to_string(label) + " outside 0.." + std::to_string(num_classes() - 1));
        return data_.class_nodes[static_cast<std::size_t>(label)];
    }

    // (second-last node, class node) pairs carrying eta weights, canonical order.
    const std::vector<Edge>& class_edges() const { return class_edges_; }
    int class_edge_index(NodeId f, NodeId cls) const {
        auto it = class_edge_index_.find({f, cls});
        return it == class_edge_index_.end() ? -1 : it->second;
    }

    const GraphData& data() const { return data_; }

private:
    Graph() = default;

    GraphData data_;
    int num_levels_ = 0;
    std::vector<int> level_;
    std::vector<int> threshold_;
    std::vector<std::vector<NodeId>> dependents_;
    std::vector<std::vector<NodeId>> consumers_;
    std::vector<std::vector<NodeId>> nodes_at_level_;
    std::vector<Edge> class_edges_;
    std::map<Edge, int> class_edge_index_;
};

namespace detail {

inline void reject_unknown_fields(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                                  const std::string& context) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (auto a : allowed)
            if (it.key() == a) { known = true; break; }
        if (!known)
            fail(ErrorCode::MalformedDocument, "unknown field \"" + it.key() + "\" in " + context);
    }
}

inline nlohmann::json parse_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded())
        fail(ErrorCode::MalformedDocument, "not valid JSON");
    return j;
}

inline int get_int(const nlohmann::json& j, const char* key, const std::string& context) {
    if (!j.contains(key))
        fail(ErrorCode::MalformedDocument, "missing field \"" + std::string(key) + "\" in " + context);
    if (!j[key].is_number_integer())
        fail(ErrorCode::MalformedDocument, "field \"" + std::string(key) + "\" in " + context + " must be an integer");
    return j[key].get<int>();
}

} // namespace detail

// Parses and fully validates a graph document. Total: every structural
// violation comes back as a named Error.
inline Graph parse_graph_spec(const std::string& text) {
    using nlohmann::json;
    json j = detail::parse_json(text);
    if (!j.is_object())
        fail(ErrorCode::MalformedDocument, "graph document must be a JSON object");
    detail::reject_unknown_fields(j, {"levels", "nodes", "edges", "class_nodes"}, "graph document");

    GraphData data;
    data.num_levels = detail::get_int(j, "levels", "graph document");

    if (!j.contains("nodes") || !j["nodes"].is_array())
        fail(ErrorCode::MalformedDocument, "graph document needs a \"nodes\" array");
    for (const auto& nj : j["nodes"]) {
        if (!nj.is_object())
            fail(ErrorCode::MalformedDocument, "node entries must be objects");
        detail::reject_unknown_fields(nj, {"id", "level", "threshold"}, "node entry");
        NodeSpec spec;
        spec.id = detail::get_int(nj, "id", "node entry");
        spec.level = detail::get_int(nj, "level", "node entry");
        if (nj.contains("threshold")) {
            if (!nj["threshold"].is_number_integer())
                fail(ErrorCode::MalformedDocument, "threshold must be an integer");
            spec.threshold = nj["threshold"].get<int>();
        }
        data.nodes.push_back(spec);
    }

    if (!j.contains("edges") || !j["edges"].is_array())
        fail(ErrorCode::MalformedDocument, "graph document needs an \"edges\" array");
    for (const auto& ej : j["edges"]) {
        if (!ej.is_array() || ej.size() != 2 || !ej[0].is_number_integer() || !ej[1].is_number_integer())
            fail(ErrorCode::MalformedDocument, "edges must be [lowerId, upperId] pairs");
        data.edges.push_back({ej[0].get<int>(), ej[1].get<int>()});
    }

    if (!j.contains("class_nodes") || !j["class_nodes"].is_array())
        fail(ErrorCode::NoClassNodes, "graph document needs a \"class_nodes\" array");
    for (const auto& cj : j["class_nodes"]) {
        if (!cj.is_number_integer())
            fail(ErrorCode::MalformedDocument, "class_nodes must hold integers");
        data.class_nodes.push_back(cj.get<int>());
    }

    return Graph::compile(std::move(data));
}

inline std::string serialize_graph_spec(const GraphData& data) {
    nlohmann::json j;
    j["levels"] = data.num_levels;
    j["nodes"] = nlohmann::json::array();
    for (const auto& node : data.nodes) {
        nlohmann::json nj;
        nj["id"] = node.id;
        nj["level"] = node.level;
        if (node.threshold) nj["threshold"] = *node.threshold;
        j["nodes"].push_back(nj);
    }
    j["edges"] = nlohmann::json::array();
    for (const auto& [lo, hi] : data.edges) j["edges"].push_back({lo, hi});
    j["class_nodes"] = data.class_nodes;
    return j.dump(2) + "\n";
}

inline std::string serialize_graph_spec(const Graph& g) { return serialize_graph_spec(g.data()); }

// First-level firing set plus supervision.
struct InputPattern {
    std::vector<NodeId> fire; // sorted, level-1 ids
    int label = 0;
    double weight = 1.0;

    friend bool operator==(const InputPattern&, const InputPattern&) = default;
};

struct FiringState {
    std::vector<unsigned char> firing; // indexed by NodeId

    bool fires(NodeId id) const { return firing[static_cast<std::size_t>(id)] != 0; }
    void set(NodeId id) { firing[static_cast<std::size_t>(id)] = 1; }
};

struct FeaturePathway {
    std::vector<NodeId> nodes;
    std::vector<Edge> edges; // both endpoints firing
};

inline void check_input(const Graph& g, const InputPattern& input) {
    if (input.fire.empty())
        fail(ErrorCode::InputNodeNotLevelOne, "input firing set is empty");
    for (NodeId id : input.fire) {
        if (id < 0 || id >= g.node_count() || g.level_of(id) != 1)
            fail(ErrorCode::InputNodeNotLevelOne, "input node " + std::to_string(id) + " is not a level-1 node");
    }
    g.class_of_label(input.label);
}

// Level-by-level threshold evaluation. A middle node fires iff at least
// threshold many of its dependents fire. Supervised runs light up exactly the
// label's class node; unsupervised runs leave the top level dark.
inline FiringState compute_firing(const Graph& g, const InputPattern& input, bool supervised) {
    check_input(g, input);
    FiringState state;
    state.firing.assign(static_cast<std::size_t>(g.node_count()), 0);
    for (NodeId id : input.fire) state.set(id);
    for (int level = 2; level < g.num_levels(); ++level) {
        for (NodeId id : g.nodes_at_level(level)) {
            int count = 0;
            for (NodeId dep : g.dependents(id))
                if (state.fires(dep)) ++count;
            if (count >= g.threshold_of(id)) state.set(id);
        }
    }
    if (supervised) state.set(g.class_of_label(input.label));
    return state;
}

inline FeaturePathway feature_pathway(const Graph& g, const InputPattern& input) {
    FiringState state = compute_firing(g, input, /*supervised=*/true);
    FeaturePathway path;
    for (NodeId id = 0; id < g.node_count(); ++id)
        if (state.fires(id)) path.nodes.push_back(id);
    for (const auto& e : g.data().edges)
        if (state.fires(e.first) && state.fires(e.second)) path.edges.push_back(e);
    return path;
}

// Mini-batch firing: a node fires iff it lies in at least one sample's
// feature pathway. Pathways are computed per sample and then unioned; the
// thresholds are never re-evaluated against the merged input set.
inline FiringState union_firing(const Graph& g, std::span<const InputPattern> batch) {
    if (batch.empty())
        fail(ErrorCode::EmptyBatch, "union firing over an empty batch");
    FiringState state;
    state.firing.assign(static_cast<std::size_t>(g.node_count()), 0);
    for (const auto& input : batch) {
        FiringState one = compute_firing(g, input, /*supervised=*/true);
        for (NodeId id = 0; id < g.node_count(); ++id)
            if (one.fires(id)) state.set(id);
    }
    return state;
}

} // namespace neurashed
