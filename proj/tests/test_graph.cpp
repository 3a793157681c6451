#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <string>

#include "neurashed/dataset.hpp"
#include "neurashed/graph.hpp"
#include "neurashed/scenarios.hpp"

#include "oracles.hpp"

using namespace neurashed;

namespace {

// Minimal well-formed 3-level document: 2 inputs, 1 middle node, 2 classes.
const char* kMinimalGraph = R"({
  "levels": 3,
  "nodes": [
    {"id": 0, "level": 1}, {"id": 1, "level": 1},
    {"id": 2, "level": 2, "threshold": 1},
    {"id": 3, "level": 3}, {"id": 4, "level": 3}
  ],
  "edges": [[0, 2], [1, 2], [2, 3], [2, 4]],
  "class_nodes": [3, 4]
})";

ErrorCode code_of_parse(const std::string& text) {
    try {
        parse_graph_spec(text);
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected a parse error");
    return ErrorCode::MalformedDocument;
}

} // namespace

TEST_CASE("parse accepts a minimal well-formed document") {
    Graph g = parse_graph_spec(kMinimalGraph);
    CHECK(g.num_levels() == 3);
    CHECK(g.num_classes() == 2);
    CHECK(g.node_count() == 5);
    CHECK(g.threshold_of(2) == 1);
    CHECK(g.class_edges().size() == 2);
}

TEST_CASE("parse maps structural violations to named errors") {
    SECTION("level-skipping edge") {
        std::string text = R"({"levels": 3,
            "nodes": [{"id":0,"level":1},{"id":1,"level":2,"threshold":1},{"id":2,"level":3},{"id":3,"level":3}],
            "edges": [[0,1],[1,2],[1,3],[0,2]], "class_nodes": [2,3]})";
        CHECK(code_of_parse(text) == ErrorCode::EdgeSkipsLevel);
    }
    SECTION("threshold above indegree") {
        std::string text = R"({"levels": 3,
            "nodes": [{"id":0,"level":1},{"id":1,"level":2,"threshold":4},{"id":2,"level":3},{"id":3,"level":3}],
            "edges": [[0,1],[1,2],[1,3]], "class_nodes": [2,3]})";
        CHECK(code_of_parse(text) == ErrorCode::ThresholdOutOfRange);
    }
    SECTION("duplicate node id") {
        std::string text = R"({"levels": 2,
            "nodes": [{"id":0,"level":1},{"id":0,"level":1},{"id":1,"level":2},{"id":2,"level":2}],
            "edges": [], "class_nodes": [1,2]})";
        CHECK(code_of_parse(text) == ErrorCode::DuplicateNodeId);
    }
    SECTION("no class nodes") {
        std::string text = R"({"levels": 2,
            "nodes": [{"id":0,"level":1},{"id":1,"level":2}],
            "edges": [[0,1]], "class_nodes": [1]})";
        CHECK(code_of_parse(text) == ErrorCode::NoClassNodes);
    }
    SECTION("not JSON at all") {
        CHECK(code_of_parse("]{[") == ErrorCode::MalformedDocument);
    }
    SECTION("unknown fields rejected") {
        std::string text = R"({"levels": 2, "nodes": [{"id":0,"level":1},{"id":1,"level":2},{"id":2,"level":2}],
            "edges": [], "class_nodes": [1,2], "extra": 1})";
        CHECK(code_of_parse(text) == ErrorCode::MalformedDocument);
    }
}

TEST_CASE("validate reports violations instead of throwing") {
    GraphData data;
    data.num_levels = 3;
    data.nodes = {{0, 1, {}}, {1, 1, {}}, {2, 1, {}}, {3, 2, 4}, {4, 3, {}}, {5, 3, {}}};
    data.edges = {{0, 3}, {1, 3}, {2, 3}, {3, 4}, {3, 5}};
    data.class_nodes = {4, 5};

    auto violations = validate(data);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].code == ErrorCode::ThresholdOutOfRange);

    data.nodes[3].threshold = 2;
    CHECK(validate(data).empty());
}

TEST_CASE("fig3 scenario graph is accepted with thresholds (1,2,1,1,2,1)") {
    Scenario s = scenario_fig3_bottleneck();
    CHECK(validate(s.graph.data()).empty());
    CHECK(s.graph.nodes_at_level(1).size() == 13);
    CHECK(s.graph.nodes_at_level(2).size() == 6);
    CHECK(s.graph.num_classes() == 2);
    std::vector<int> thresholds;
    for (NodeId id : s.graph.nodes_at_level(2)) thresholds.push_back(s.graph.threshold_of(id));
    CHECK(thresholds == std::vector<int>{1, 2, 1, 1, 2, 1});
}

TEST_CASE("compute_firing follows the threshold rules") {
    Graph g = parse_graph_spec(kMinimalGraph);

    SECTION("threshold-1 node with no firing dependents stays dark") {
        // the middle node depends on {0,1}; fire neither
        GraphData data = g.data();
        data.nodes.push_back({5, 1, {}});
        data.edges.push_back({5, 2});
        Graph g2 = Graph::compile(data);
        FiringState state = compute_firing(g2, {{5}, 0, 1.0}, false);
        CHECK(state.fires(5));
        // node 2 has threshold 1 and dependent 5 firing
        CHECK(state.fires(2));
        FiringState state2 = compute_firing(g2, {{0}, 0, 1.0}, false);
        CHECK(state2.fires(2));
    }
    SECTION("supervised firing lights exactly the label's class node") {
        FiringState state = compute_firing(g, {{0}, 1, 1.0}, true);
        CHECK_FALSE(state.fires(3));
        CHECK(state.fires(4));
    }
    SECTION("unsupervised firing leaves the top level dark") {
        FiringState state = compute_firing(g, {{0}, 1, 1.0}, false);
        CHECK_FALSE(state.fires(3));
        CHECK_FALSE(state.fires(4));
    }
    SECTION("input nodes must be on level 1") {
        CHECK_THROWS_MATCHES(compute_firing(g, {{2}, 0, 1.0}, false), Error,
                             Catch::Matchers::Predicate<Error>([](const Error& e) {
                                 return e.code() == ErrorCode::InputNodeNotLevelOne;
                             }));
    }
}

TEST_CASE("threshold-2 node fires when two of three dependents fire") {
    // dependents {2,5,7} with threshold 2; dependents 2 and 7 fire
    Scenario s = scenario_fig3_bottleneck();
    FiringState state = compute_firing(s.graph, {{1, 6}, 0, 1.0}, false);
    CHECK(state.fires(14)); // the dominant node
}

TEST_CASE("fig3 pattern (1,2,7) fires level-2 nodes {n1, n2}") {
    Scenario s = scenario_fig3_bottleneck();
    InputPattern p{{0, 1, 6}, 0, 1.0};
    FiringState state = compute_firing(s.graph, p, true);
    CHECK(state.fires(13));
    CHECK(state.fires(14));
    CHECK_FALSE(state.fires(15));
    CHECK_FALSE(state.fires(16));
    CHECK_FALSE(state.fires(17));
    CHECK_FALSE(state.fires(18));

    // agree with the naive recursive evaluation
    for (NodeId id = 0; id < s.graph.node_count(); ++id)
        CHECK(state.fires(id) == oracle::fires(s.graph, p, id, true));
}

TEST_CASE("feature pathways") {
    Scenario s = scenario_fig2_three_class();

    SECTION("the 1a input induces its declared pathway") {
        FeaturePathway p = feature_pathway(s.graph, s.dataset.patterns[0]);
        CHECK(p.nodes == std::vector<NodeId>{0, 1, 2, 8, 9, 10, 13, 16});
    }
    SECTION("identical inputs give identical pathways") {
        InputPattern a{{0, 1, 2}, 0, 1.0};
        InputPattern b{{0, 1, 2}, 0, 1.0};
        FeaturePathway pa = feature_pathway(s.graph, a);
        FeaturePathway pb = feature_pathway(s.graph, b);
        CHECK(pa.nodes == pb.nodes);
        CHECK(pa.edges == pb.edges);
    }
    SECTION("firing all level-1 nodes fires every middle node") {
        InputPattern all{{0, 1, 2, 3, 4, 5, 6, 7}, 0, 1.0};
        FeaturePathway p = feature_pathway(s.graph, all);
        for (int level = 2; level < s.graph.num_levels(); ++level)
            for (NodeId id : s.graph.nodes_at_level(level))
                CHECK(std::count(p.nodes.begin(), p.nodes.end(), id) == 1);
    }
    SECTION("pathway edges stay level-monotone") {
        InputPattern a{{0, 1, 2}, 0, 1.0};
        for (const auto& [lo, hi] : feature_pathway(s.graph, a).edges)
            CHECK(s.graph.level_of(hi) == s.graph.level_of(lo) + 1);
    }
}

TEST_CASE("union firing uses per-sample pathways") {
    Scenario s = scenario_fig3_bottleneck();

    SECTION("batch of one equals that sample's pathway") {
        InputPattern p{{0, 1, 6}, 0, 1.0};
        std::vector<InputPattern> batch{p};
        FiringState u = union_firing(s.graph, batch);
        FeaturePathway path = feature_pathway(s.graph, p);
        std::set<NodeId> upath;
        for (NodeId id = 0; id < s.graph.node_count(); ++id)
            if (u.fires(id)) upath.insert(id);
        CHECK(upath == std::set<NodeId>(path.nodes.begin(), path.nodes.end()));
    }
    SECTION("fig3 two-pattern batch") {
        // (1,2,7) and (4,5,7): union fires level-1 {1,2,4,5,7}, all of {n1,n2,n3},
        // and the class-1 node
        std::vector<InputPattern> batch{{{0, 1, 6}, 0, 1.0}, {{3, 4, 6}, 0, 1.0}};
        FiringState u = union_firing(s.graph, batch);
        std::set<NodeId> expect{0, 1, 3, 4, 6, 13, 14, 15, 19};
        std::set<NodeId> got;
        for (NodeId id = 0; id < s.graph.node_count(); ++id)
            if (u.fires(id)) got.insert(id);
        CHECK(got == expect);
    }
    SECTION("empty batch is an error") {
        std::vector<InputPattern> batch;
        CHECK_THROWS_AS(union_firing(s.graph, batch), Error);
    }
}

TEST_CASE("union semantics pinned: per-sample pathways, not thresholds on merged inputs") {
    // Middle node with threshold 2 over dependents {0, 1}. Each sample fires
    // exactly one dependent, so the node is absent from the union; evaluating
    // the threshold on the merged input set would fire it.
    std::string text = R"({"levels": 3,
        "nodes": [{"id":0,"level":1},{"id":1,"level":1},
                  {"id":2,"level":2,"threshold":2},
                  {"id":3,"level":3},{"id":4,"level":3}],
        "edges": [[0,2],[1,2],[2,3],[2,4]], "class_nodes": [3,4]})";
    Graph g = parse_graph_spec(text);
    std::vector<InputPattern> batch{{{0}, 0, 1.0}, {{1}, 0, 1.0}};
    FiringState u = union_firing(g, batch);
    CHECK_FALSE(u.fires(2));

    InputPattern merged{{0, 1}, 0, 1.0};
    FiringState rejected_semantics = compute_firing(g, merged, false);
    CHECK(rejected_semantics.fires(2)); // what the wrong reading would do
}

TEST_CASE("union equals the union of per-sample pathway node sets") {
    oracle::Rng rng(2024);
    for (int trial = 0; trial < 50; ++trial) {
        Graph g = Graph::compile(oracle::random_graph_data(rng));
        int batch_size = 1 + static_cast<int>(rng.next_u64() % 4);
        std::vector<InputPattern> batch;
        std::set<NodeId> expected;
        for (int b = 0; b < batch_size; ++b) {
            batch.push_back(oracle::random_input(g, rng));
            FeaturePathway p = feature_pathway(g, batch.back());
            expected.insert(p.nodes.begin(), p.nodes.end());
        }
        FiringState u = union_firing(g, batch);
        std::set<NodeId> got;
        for (NodeId id = 0; id < g.node_count(); ++id)
            if (u.fires(id)) got.insert(id);
        CHECK(got == expected);
    }
}

TEST_CASE("monotone firing: growing the input never removes a firing middle node") {
    oracle::Rng rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        Graph g = Graph::compile(oracle::random_graph_data(rng));
        InputPattern small = oracle::random_input(g, rng);
        InputPattern big = small;
        for (NodeId id : g.nodes_at_level(1))
            if (std::find(big.fire.begin(), big.fire.end(), id) == big.fire.end() && rng.next_unit() < 0.5)
                big.fire.push_back(id);
        std::sort(big.fire.begin(), big.fire.end());
        FiringState fs = compute_firing(g, small, false);
        FiringState fb = compute_firing(g, big, false);
        for (NodeId id = 0; id < g.node_count(); ++id)
            if (fs.fires(id)) CHECK(fb.fires(id));
    }
}

TEST_CASE("parse and serialize round-trip on valid graphs") {
    oracle::Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        GraphData data = oracle::random_graph_data(rng);
        Graph g = Graph::compile(data);
        Graph g2 = parse_graph_spec(serialize_graph_spec(g));
        CHECK(g2.data() == g.data());
    }
}

TEST_CASE("parser accepts exactly what the independent validator clears") {
    oracle::Rng rng(4242);
    int checked = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        GraphData data = oracle::random_graph_data(rng);
        bool mutated = rng.next_unit() < 0.6 && oracle::mutate_graph_data(data, rng);
        (void)mutated;
        bool parser_accepts = true;
        try {
            parse_graph_spec(serialize_graph_spec(data));
        } catch (const Error&) {
            parser_accepts = false;
        }
        bool validator_clean = validate(data).empty();
        REQUIRE(parser_accepts == validator_clean);
        ++checked;
    }
    CHECK(checked == 1000);
}

TEST_CASE("dataset parsing and validation") {
    Graph g = parse_graph_spec(kMinimalGraph);

    SECTION("round-trip") {
        Dataset ds;
        ds.patterns = {{{0, 1}, 0, 1.0}, {{1}, 1, 2.5}};
        Dataset back = parse_dataset(serialize_dataset(ds));
        CHECK(back == ds);
    }
    SECTION("unknown fields rejected") {
        CHECK_THROWS_AS(parse_dataset(R"({"patterns": [{"fire": [0], "label": 0, "extra": 1}]})"), Error);
    }
    SECTION("weights must be positive") {
        CHECK_THROWS_AS(parse_dataset(R"({"patterns": [{"fire": [0], "label": 0, "weight": 0}]})"), Error);
    }
    SECTION("labels must have a class node") {
        Dataset ds;
        ds.patterns = {{{0}, 5, 1.0}};
        CHECK_THROWS_MATCHES(validate_dataset(g, ds), Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
                                 return e.code() == ErrorCode::LabelOutOfRange;
                             }));
    }
    SECTION("firing nodes must be on level 1") {
        Dataset ds;
        ds.patterns = {{{2}, 0, 1.0}};
        CHECK_THROWS_MATCHES(validate_dataset(g, ds), Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
                                 return e.code() == ErrorCode::InputNodeNotLevelOne;
                             }));
    }
}
