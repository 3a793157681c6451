#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "neurashed/csv.hpp"
#include "neurashed/dataset.hpp"
#include "neurashed/dynamics.hpp"
#include "neurashed/errors.hpp"
#include "neurashed/graph.hpp"
#include "neurashed/metrics.hpp"

namespace neurashed {

// A runnable study: graph + data + training setup + declared node/pattern
// groups + machine-checkable expected outcomes.
struct Scenario {
    std::string name;
    std::string description;
    Graph graph;
    Dataset dataset;
    TrainConfig config;
    UpdateSchedule schedule;
    NodeGroups node_groups{};
    std::vector<std::string> redundant_groups{}; // names whose entropy the batch study asserts on
    std::vector<std::pair<std::string, std::vector<int>>> pattern_groups{}; // name -> pattern indices
    nlohmann::json assertions = nlohmann::json::array();
};

namespace detail {

inline GraphData make_graph_data(int levels, std::vector<NodeSpec> nodes, std::vector<Edge> edges,
                                 std::vector<NodeId> class_nodes) {
    GraphData d;
    d.num_levels = levels;
    d.nodes = std::move(nodes);
    d.edges = std::move(edges);
    d.class_nodes = std::move(class_nodes);
    return d;
}

} // namespace detail

// Binary-classification information-bottleneck model. Thirteen first-level
// nodes; node 7 (id 6) is shared by every pattern of both classes. Each class
// owns a second-level trio with thresholds (1, 2, 1) whose middle node is the
// dominant one: it fires for every pattern of its class and for none of the
// other class's. Init is uniform(0, 0.01); g- = x1.022^(-1/4) everywhere,
// g+ = x1.022^(11/4) for all hidden nodes except id 6, which fires in every
// pattern and gets the damped g+ = x1.022^(3/4).
inline Scenario scenario_fig3_bottleneck() {
    std::vector<NodeSpec> nodes;
    for (int i = 0; i < 13; ++i) nodes.push_back({i, 1, {}});
    nodes.push_back({13, 2, 1}); // fires for class-1 type A
    nodes.push_back({14, 2, 2}); // class-1 dominant
    nodes.push_back({15, 2, 1}); // class-1 type B
    nodes.push_back({16, 2, 1}); // class-2 type A
    nodes.push_back({17, 2, 2}); // class-2 dominant
    nodes.push_back({18, 2, 1}); // class-2 type B
    nodes.push_back({19, 3, {}});
    nodes.push_back({20, 3, {}});

    std::vector<Edge> edges;
    for (NodeId lo : {0, 1, 2}) edges.push_back({lo, 13});
    for (NodeId lo : {1, 4, 6}) edges.push_back({lo, 14});
    for (NodeId lo : {3, 4, 5}) edges.push_back({lo, 15});
    for (NodeId lo : {7, 8, 9}) edges.push_back({lo, 16});
    for (NodeId lo : {6, 8, 11}) edges.push_back({lo, 17});
    for (NodeId lo : {10, 11, 12}) edges.push_back({lo, 18});
    for (NodeId f : {13, 14, 15}) edges.push_back({f, 19});
    for (NodeId f : {16, 17, 18}) edges.push_back({f, 20});

    Scenario s{.name = "fig3-bottleneck",
               .description = "binary classification with redundant pathways; information bottleneck study",
               .graph = Graph::compile(detail::make_graph_data(3, std::move(nodes), std::move(edges), {19, 20})),
               .dataset = {},
               .config = {},
               .schedule = {}};

    s.dataset.patterns = {
        {{0, 1, 6}, 0, 1.0},  {{1, 2, 6}, 0, 1.0},  {{3, 4, 6}, 0, 1.0},  {{4, 5, 6}, 0, 1.0},
        {{6, 7, 8}, 1, 1.0},  {{6, 8, 9}, 1, 1.0},  {{6, 10, 11}, 1, 1.0}, {{6, 11, 12}, 1, 1.0},
    };

    s.config.batch_size = 1;
    s.config.iterations = 4000;
    s.config.seed = 1;
    s.config.init = InitSpec::uniform(0.0, 0.01);
    s.config.snapshot_every = 50;

    s.schedule.default_up = UpdateRule::multiplicative(std::pow(1.022, 11.0 / 4.0));
    s.schedule.default_down = UpdateRule::multiplicative(std::pow(1.022, -1.0 / 4.0));
    s.schedule.node_overrides[6] = {UpdateRule::multiplicative(std::pow(1.022, 3.0 / 4.0)), {}};

    s.node_groups = {{"level2-class1", {13, 14, 15}}, {"level2-class2", {16, 17, 18}}};
    s.pattern_groups = {{"class1", {0, 1, 2, 3}}, {"class2", {4, 5, 6, 7}}};

    s.assertions = nlohmann::json::array({{{"kind", "mi_bottleneck"},
                                           {"level", 2},
                                           {"iterations", 4000},
                                           {"eval_every", 50},
                                           {"sigma", 0.05},
                                           {"mc_samples", 10000},
                                           {"seed", 1},
                                           {"peak_min", 1.85},
                                           {"final_value", 1.0},
                                           {"final_tol", 0.15},
                                           {"label_final_value", 1.0},
                                           {"label_final_tol", 0.1},
                                           {"max_seconds", 120.0}}});
    return s;
}

// Four-level, three-class model behind the convergence and local-elasticity
// studies. Class 1 has two sample types (1a, 1b) sharing almost their whole
// pathway; class 2 shares the level-1 pair {0,1} and the level-2 node 9 with
// class 1; class 3 shares only the universal node 0. Each class's logit flows
// through a class-exclusive gate at the second-last level, so logits of
// classes an input does not belong to stay exactly zero, and the shared
// sub-chains give the class logits strictly ordered growth rates, which keeps
// the elasticity ordering stable across seeds.
inline Scenario scenario_fig2_three_class() {
    std::vector<NodeSpec> nodes;
    for (int i = 0; i < 8; ++i) nodes.push_back({i, 1, {}});
    nodes.push_back({8, 2, 1});  // always fires (node 0)
    nodes.push_back({9, 2, 2});  // fires for classes 1 and 2 ({0,1})
    nodes.push_back({10, 2, 1}); // class-1 gate ({2,3})
    nodes.push_back({11, 2, 1}); // class-2 gate ({4,5})
    nodes.push_back({12, 2, 2}); // class-3 gate ({0,6,7})
    nodes.push_back({13, 3, 2}); // class-1 second-last: gate and engine
    nodes.push_back({14, 3, 2}); // class-2 second-last
    nodes.push_back({15, 3, 1}); // class-3 second-last
    nodes.push_back({16, 4, {}});
    nodes.push_back({17, 4, {}});
    nodes.push_back({18, 4, {}});

    std::vector<Edge> edges;
    edges.push_back({0, 8});
    for (NodeId lo : {0, 1}) edges.push_back({lo, 9});
    for (NodeId lo : {2, 3}) edges.push_back({lo, 10});
    for (NodeId lo : {4, 5}) edges.push_back({lo, 11});
    for (NodeId lo : {0, 6, 7}) edges.push_back({lo, 12});
    for (NodeId lo : {8, 10}) edges.push_back({lo, 13});
    for (NodeId lo : {9, 11}) edges.push_back({lo, 14});
    edges.push_back({12, 15});
    edges.push_back({13, 16});
    edges.push_back({14, 17});
    edges.push_back({15, 18});

    Scenario s{.name = "fig2-three-class",
               .description = "three classes, four levels; class 1 has two sample types; convergence and elasticity",
               .graph = Graph::compile(detail::make_graph_data(4, std::move(nodes), std::move(edges), {16, 17, 18})),
               .dataset = {},
               .config = {},
               .schedule = {}};

    s.dataset.patterns = {
        {{0, 1, 2}, 0, 0.5},    // 1a
        {{0, 1, 3}, 0, 0.5},    // 1b
        {{0, 1, 4, 5}, 1, 1.0}, // class 2
        {{0, 6, 7}, 2, 1.0},    // class 3
    };

    s.config.batch_size = 1;
    s.config.iterations = 2000;
    s.config.seed = 1;
    s.config.init = InitSpec::uniform(0.0, 0.01);
    s.config.snapshot_every = 100;

    s.schedule.default_up = UpdateRule::multiplicative(1.05);
    s.schedule.default_down = UpdateRule::multiplicative(0.98);

    s.node_groups = {{"level2", {8, 9, 10, 11, 12}}, {"level3", {13, 14, 15}}};
    s.pattern_groups = {{"1a", {0}}, {"1b", {1}}, {"2", {2}}, {"3", {3}}};

    s.assertions = nlohmann::json::array(
        {{{"kind", "convergence"},
          {"batch_size", 1},
          {"iterations", 2000},
          {"seeds", {1, 2, 3}},
          {"min_true_class_prob", 0.99},
          {"max_seconds", 5.0}},
         {{"kind", "elasticity_order"},
          {"train_iterations", 2000},
          {"seeds", {1, 2, 3}},
          {"base_group", "1a"},
          {"ordered_test_groups", {"1b", "2", "3"}},
          {"max_seconds", 5.0}}});
    return s;
}

// Single-class subgraph with two redundant pathways (A via level-1 {2,3},
// B via {4,5}) behind shared nodes {0,1}. The dataset holds 32 weighted
// entries so a "full" batch of dataset size covers both pathways essentially
// always, pinning the redundant-group entropy at 1.0 under the constant init,
// while batch-1 training lets the more frequent pathway win. The second class
// only satisfies the two-class minimum.
inline Scenario scenario_fig4_batch() {
    std::vector<NodeSpec> nodes;
    for (int i = 0; i < 8; ++i) nodes.push_back({i, 1, {}});
    nodes.push_back({8, 2, 1});  // shared ({0,1})
    nodes.push_back({9, 2, 1});  // pathway A ({2,3})
    nodes.push_back({10, 2, 1}); // pathway B ({4,5})
    nodes.push_back({11, 2, 1}); // class-2 ({6,7})
    nodes.push_back({12, 3, {}});
    nodes.push_back({13, 3, {}});

    std::vector<Edge> edges;
    for (NodeId lo : {0, 1}) edges.push_back({lo, 8});
    for (NodeId lo : {2, 3}) edges.push_back({lo, 9});
    for (NodeId lo : {4, 5}) edges.push_back({lo, 10});
    for (NodeId lo : {6, 7}) edges.push_back({lo, 11});
    for (NodeId f : {8, 9, 10}) edges.push_back({f, 12});
    edges.push_back({11, 13});

    Scenario s{.name = "fig4-batch",
               .description = "two redundant pathways for one class; small-batch vs full-batch sparsity",
               .graph = Graph::compile(detail::make_graph_data(3, std::move(nodes), std::move(edges), {12, 13})),
               .dataset = {},
               .config = {},
               .schedule = {}};

    for (int i = 0; i < 16; ++i) {
        s.dataset.patterns.push_back({{0, 1, 2, 3}, 0, 0.6});
        s.dataset.patterns.push_back({{0, 1, 4, 5}, 0, 0.4});
    }

    s.config.batch_size = 1;
    s.config.iterations = 1500;
    s.config.seed = 1;
    s.config.init = InitSpec::constant(0.005);
    s.config.snapshot_every = 100;

    s.schedule.default_up = UpdateRule::multiplicative(1.05);
    s.schedule.default_down = UpdateRule::multiplicative(0.98);

    s.node_groups = {{"redundant-level2", {9, 10}}, {"redundant-level1", {2, 3, 4, 5}}, {"shared-level1", {0, 1}}};
    s.redundant_groups = {"redundant-level2", "redundant-level1"};
    std::vector<int> a_ids, b_ids;
    for (int i = 0; i < 32; i += 2) a_ids.push_back(i);
    for (int i = 1; i < 32; i += 2) b_ids.push_back(i);
    s.pattern_groups = {{"pathway-a", a_ids}, {"pathway-b", b_ids}};

    s.assertions = nlohmann::json::array({{{"kind", "sparsity_gap"},
                                           {"small_batch", 1},
                                           {"large_batch", 32},
                                           {"iterations", 1500},
                                           {"seeds", {1, 2, 3}},
                                           {"groups", {"redundant-level2", "redundant-level1"}},
                                           {"max_seconds", 5.0}}});
    return s;
}

inline std::vector<std::string> builtin_scenario_names() {
    return {"fig2-three-class", "fig3-bottleneck", "fig4-batch"};
}

Scenario load_scenario(const std::filesystem::path& dir);

// Built-in name or a path to a scenario bundle directory.
inline Scenario build_scenario(const std::string& name) {
    if (name == "fig2-three-class") return scenario_fig2_three_class();
    if (name == "fig3-bottleneck") return scenario_fig3_bottleneck();
    if (name == "fig4-batch") return scenario_fig4_batch();
    if (std::filesystem::is_directory(name)) return load_scenario(name);
    fail(ErrorCode::UnknownScenario, "no scenario named \"" + name + "\"");
}

// --- bundle directories: graph.json, dataset.json, config.json, expectations.json

inline void save_scenario(const Scenario& s, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_file(dir / "graph.json", serialize_graph_spec(s.graph));
    write_file(dir / "dataset.json", serialize_dataset(s.dataset));
    write_file(dir / "config.json", serialize_train_config(s.config, s.schedule));

    nlohmann::json e;
    e["name"] = s.name;
    e["description"] = s.description;
    e["node_groups"] = nlohmann::json::array();
    for (const auto& [name, ids] : s.node_groups)
        e["node_groups"].push_back({{"name", name}, {"nodes", ids}});
    e["redundant_groups"] = s.redundant_groups;
    e["pattern_groups"] = nlohmann::json::array();
    for (const auto& [name, ids] : s.pattern_groups)
        e["pattern_groups"].push_back({{"name", name}, {"patterns", ids}});
    e["assertions"] = s.assertions;
    write_file(dir / "expectations.json", e.dump(2) + "\n");
}

inline Scenario load_scenario(const std::filesystem::path& dir) {
    Graph graph = parse_graph_spec(read_file(dir / "graph.json"));
    Dataset dataset = parse_dataset(read_file(dir / "dataset.json"));
    validate_dataset(graph, dataset);
    TrainSetup setup = parse_train_config(read_file(dir / "config.json"));

    nlohmann::json e = detail::parse_json(read_file(dir / "expectations.json"));
    if (!e.is_object()) fail(ErrorCode::MalformedDocument, "expectations.json must be a JSON object");
    detail::reject_unknown_fields(
        e, {"name", "description", "node_groups", "redundant_groups", "pattern_groups", "assertions"},
        "expectations.json");

    Scenario s{.name = e.value("name", dir.filename().string()),
               .description = e.value("description", ""),
               .graph = std::move(graph),
               .dataset = std::move(dataset),
               .config = setup.config,
               .schedule = setup.schedule};
    if (e.contains("node_groups"))
        for (const auto& gj : e["node_groups"])
            s.node_groups.emplace_back(gj.at("name").get<std::string>(), gj.at("nodes").get<std::vector<int>>());
    if (e.contains("redundant_groups")) s.redundant_groups = e["redundant_groups"].get<std::vector<std::string>>();
    if (e.contains("pattern_groups"))
        for (const auto& gj : e["pattern_groups"])
            s.pattern_groups.emplace_back(gj.at("name").get<std::string>(), gj.at("patterns").get<std::vector<int>>());
    if (e.contains("assertions")) s.assertions = e["assertions"];

    for (const auto& [name, ids] : s.node_groups)
        for (NodeId id : ids)
            if (id < 0 || id >= s.graph.node_count())
                fail(ErrorCode::MalformedDocument, "node group \"" + name + "\" references unknown node");
    for (const auto& [name, ids] : s.pattern_groups)
        for (int id : ids)
            if (id < 0 || id >= static_cast<int>(s.dataset.patterns.size()))
                fail(ErrorCode::MalformedDocument, "pattern group \"" + name + "\" references unknown pattern");
    return s;
}

} // namespace neurashed
