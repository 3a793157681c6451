#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>

#include "neurashed/cli.hpp"
#include "neurashed/dynamics.hpp"
#include "neurashed/graph.hpp"
#include "neurashed/scenarios.hpp"

#include "oracles.hpp"

using namespace neurashed;

namespace {

// Two level-1 nodes feeding one threshold-1 middle node wired to two classes.
Graph hand_graph() {
    GraphData data;
    data.num_levels = 3;
    data.nodes = {{0, 1, {}}, {1, 1, {}}, {2, 2, 1}, {3, 3, {}}, {4, 3, {}}};
    data.edges = {{0, 2}, {1, 2}, {2, 3}, {2, 4}};
    data.class_nodes = {3, 4};
    return Graph::compile(data);
}

ModelState hand_state(const Graph& g) {
    ModelState state;
    state.lambda.assign(static_cast<std::size_t>(g.node_count()), 0.0);
    state.lambda[0] = 0.5;
    state.lambda[1] = 1.5;
    state.lambda[2] = 2.0;
    state.eta = {1.0, 0.5}; // (2->3), (2->4)
    return state;
}

} // namespace

TEST_CASE("init_state modes") {
    Graph g = hand_graph();

    SECTION("zeros") {
        TrainConfig config;
        config.init = InitSpec::zeros();
        ModelState s = init_state(g, config);
        for (double v : s.lambda) CHECK(v == 0.0);
        for (double v : s.eta) CHECK(v == 0.0);
    }
    SECTION("constant") {
        TrainConfig config;
        config.init = InitSpec::constant(0.5);
        ModelState s = init_state(g, config);
        for (NodeId id = 0; id < g.node_count(); ++id)
            if (!g.is_top(id)) CHECK(s.lambda[static_cast<std::size_t>(id)] == 0.5);
        for (double v : s.eta) CHECK(v == 0.5);
    }
    SECTION("uniform draws are seeded and repeatable") {
        TrainConfig config;
        config.init = InitSpec::uniform(0.0, 0.01);
        config.seed = 123;
        ModelState a = init_state(g, config);
        ModelState b = init_state(g, config);
        CHECK(a == b);
        for (NodeId id = 0; id < g.node_count(); ++id)
            if (!g.is_top(id)) {
                CHECK(a.lambda[static_cast<std::size_t>(id)] >= 0.0);
                CHECK(a.lambda[static_cast<std::size_t>(id)] < 0.01);
            }
        config.seed = 124;
        CHECK(init_state(g, config) != a);
    }
    SECTION("uniform bounds validated") {
        TrainConfig config;
        config.init = InitSpec::uniform(0.5, 0.5);
        CHECK_THROWS_AS(init_state(g, config), Error);
    }
}

TEST_CASE("node scores follow the recursive definition") {
    Graph g = hand_graph();
    ModelState state = hand_state(g);

    SECTION("hand evaluation: S_m = 2 * (0.5 + 1.5) = 4") {
        InputPattern p{{0, 1}, 0, 1.0};
        std::vector<double> s = node_scores(g, state, p);
        CHECK(s[0] == 0.5);
        CHECK(s[1] == 1.5);
        CHECK(s[2] == 4.0);
        CHECK(s[2] == Catch::Approx(oracle::score(g, state, p, 2)));
    }
    SECTION("all lambda zero gives all-zero scores") {
        ModelState zero;
        zero.lambda.assign(5, 0.0);
        zero.eta = {0.0, 0.0};
        for (double v : node_scores(g, zero, {{0, 1}, 0, 1.0})) CHECK(v == 0.0);
    }
    SECTION("a non-firing middle node scores zero even with firing dependents") {
        GraphData data = g.data();
        data.nodes[2].threshold = 2; // now needs both dependents
        Graph g2 = Graph::compile(data);
        std::vector<double> s = node_scores(g2, state, {{0}, 0, 1.0});
        CHECK(s[0] == 0.5);
        CHECK(s[2] == 0.0);
    }
}

TEST_CASE("class logits weight second-last scores by eta") {
    Graph g = hand_graph();
    ModelState state = hand_state(g);

    SECTION("hand evaluation continues: Z = (4.0, 2.0)") {
        std::vector<double> z = class_logits(g, state, {{0, 1}, 0, 1.0});
        CHECK(z[0] == 4.0);
        CHECK(z[1] == 2.0);
        std::vector<double> zo = oracle::logits(g, state, {{0, 1}, 0, 1.0});
        CHECK(z[0] == Catch::Approx(zo[0]));
        CHECK(z[1] == Catch::Approx(zo[1]));
    }
    SECTION("all eta zero gives the zero vector") {
        ModelState s2 = state;
        s2.eta = {0.0, 0.0};
        for (double z : class_logits(g, s2, {{0, 1}, 0, 1.0})) CHECK(z == 0.0);
    }
    SECTION("a pathway that misses every dependent of class j gives Z_j = 0") {
        GraphData data = g.data();
        data.nodes[2].threshold = 2;
        Graph g2 = Graph::compile(data);
        std::vector<double> z = class_logits(g2, state, {{0}, 0, 1.0});
        CHECK(z[0] == 0.0);
        CHECK(z[1] == 0.0);
    }
}

TEST_CASE("predict_proba is a stabilized softmax") {
    SECTION("symmetry") {
        std::vector<double> z{0.0, 0.0, 0.0};
        for (double p : predict_proba(z)) CHECK(p == Catch::Approx(1.0 / 3.0));
    }
    SECTION("direct evaluation of 1/(1+e^-2)") {
        std::vector<double> z{4.0, 2.0};
        std::vector<double> p = predict_proba(z);
        CHECK(p[0] == Catch::Approx(0.880797).margin(1e-6));
        CHECK(p[1] == Catch::Approx(0.119203).margin(1e-6));
    }
    SECTION("huge logits do not overflow") {
        std::vector<double> z{1000.0, 0.0};
        std::vector<double> p = predict_proba(z);
        CHECK(p[0] == Catch::Approx(1.0).margin(1e-12));
        CHECK(p[1] == Catch::Approx(0.0).margin(1e-12));
    }
    SECTION("components sum to one within 1e-12") {
        std::vector<double> z{3.7, -2.2, 0.4, 11.0};
        std::vector<double> p = predict_proba(z);
        double sum = 0.0;
        for (double v : p) {
            CHECK(v > 0.0);
            sum += v;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
    SECTION("non-finite logits are rejected") {
        std::vector<double> z{1.0, std::numeric_limits<double>::infinity()};
        CHECK_THROWS_AS(predict_proba(z), Error);
    }
}

TEST_CASE("train_step applies the scenario update factors") {
    Graph g = hand_graph();
    ModelState state = hand_state(g);
    state.lambda[0] = 1.0;
    UpdateSchedule schedule;
    schedule.default_up = UpdateRule::multiplicative(std::pow(1.022, 11.0 / 4.0));
    schedule.default_down = UpdateRule::multiplicative(std::pow(1.022, -1.0 / 4.0));

    SECTION("firing node grows by 1.022^(11/4)") {
        std::vector<InputPattern> batch{{{0}, 0, 1.0}};
        ModelState next = train_step(g, state, batch, schedule, 1);
        CHECK(next.lambda[0] == Catch::Approx(1.061669).margin(1e-6));
    }
    SECTION("non-firing node decays by 1.022^(-1/4)") {
        std::vector<InputPattern> batch{{{1}, 0, 1.0}};
        ModelState next = train_step(g, state, batch, schedule, 1);
        CHECK(next.lambda[0] == Catch::Approx(0.994573).margin(1e-6));
    }
    SECTION("identity down-rule leaves non-firing values unchanged") {
        schedule.default_down = UpdateRule::multiplicative(1.0);
        std::vector<InputPattern> batch{{{1}, 0, 1.0}};
        ModelState next = train_step(g, state, batch, schedule, 1);
        CHECK(next.lambda[0] == 1.0);
    }
    SECTION("eta strengthens exactly when both endpoints are in the union") {
        std::vector<InputPattern> batch{{{0}, 0, 1.0}}; // label 0: class node 3 fires
        ModelState next = train_step(g, state, batch, schedule, 1);
        CHECK(next.eta[0] > state.eta[0]);  // (2->3): both fire
        CHECK(next.eta[1] < state.eta[1]);  // (2->4): class 4 not in batch
    }
}

TEST_CASE("per-node and per-iteration schedule overrides") {
    UpdateSchedule schedule;
    schedule.default_up = UpdateRule::multiplicative(2.0);
    schedule.default_down = UpdateRule::multiplicative(0.5);
    schedule.node_overrides[3] = {UpdateRule::multiplicative(3.0), {}};
    schedule.per_iteration_hook = [](std::int64_t iteration) -> std::optional<ScheduleTable> {
        if (iteration != 10) return std::nullopt;
        ScheduleTable t;
        t.default_down = UpdateRule::multiplicative(0.25);
        return t;
    };
    CHECK(schedule.resolve(0, 1).up.amount == 2.0);
    CHECK(schedule.resolve(3, 1).up.amount == 3.0);
    CHECK(schedule.resolve(3, 1).down.amount == 0.5);
    CHECK(schedule.resolve(0, 10).down.amount == 0.25);
    CHECK(schedule.resolve(3, 10).up.amount == 3.0);
}

TEST_CASE("rule invariants are validated") {
    UpdateSchedule schedule;
    schedule.default_up = UpdateRule::multiplicative(0.99);
    CHECK_THROWS_AS(validate_schedule(schedule), Error);
    schedule.default_up = UpdateRule::additive(-1.0);
    CHECK_THROWS_AS(validate_schedule(schedule), Error);
    schedule.default_up = UpdateRule::additive(0.1);
    schedule.default_down = UpdateRule::multiplicative(1.5);
    CHECK_THROWS_AS(validate_schedule(schedule), Error);
    schedule.default_down = UpdateRule::additive(-0.5);
    CHECK_NOTHROW(validate_schedule(schedule));
    // clamped additive decay keeps values non-negative
    CHECK(schedule.default_down.apply_down(0.2) == 0.0);
}

TEST_CASE("zero init with multiplicative up-rules is rejected") {
    Scenario s = scenario_fig2_three_class();
    TrainConfig config = s.config;
    config.init = InitSpec::zeros();
    CHECK_THROWS_MATCHES(run_training(s.graph, s.dataset, config, s.schedule), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.code() == ErrorCode::InvalidConfig; }));
}

TEST_CASE("run_training basics") {
    Scenario s = scenario_fig2_three_class();

    SECTION("zero iterations holds only the initial state") {
        TrainConfig config = s.config;
        config.iterations = 0;
        Trajectory traj = run_training(s.graph, s.dataset, config, s.schedule);
        REQUIRE(traj.snapshots.size() == 1);
        CHECK(traj.snapshots[0].iteration == 0);
        CHECK(traj.sampled_indices.empty());
    }
    SECTION("empty dataset is an error") {
        Dataset empty;
        CHECK_THROWS_MATCHES(run_training(s.graph, empty, s.config, s.schedule), Error,
                             Catch::Matchers::Predicate<Error>(
                                 [](const Error& e) { return e.code() == ErrorCode::EmptyDataset; }));
    }
    SECTION("identical seeds give bit-identical snapshot CSVs") {
        TrainConfig config = s.config;
        config.iterations = 137;
        config.snapshot_every = 10;
        Trajectory a = run_training(s.graph, s.dataset, config, s.schedule);
        Trajectory b = run_training(s.graph, s.dataset, config, s.schedule);
        std::string csv_a = render_csv(cli::detail::snapshots_to_table(s.graph, a));
        std::string csv_b = render_csv(cli::detail::snapshots_to_table(s.graph, b));
        CHECK(csv_a == csv_b);
        config.seed += 1;
        Trajectory c = run_training(s.graph, s.dataset, config, s.schedule);
        CHECK(render_csv(cli::detail::snapshots_to_table(s.graph, c)) != csv_a);
    }
    SECTION("snapshots land on the cadence plus the final iteration") {
        TrainConfig config = s.config;
        config.iterations = 25;
        config.snapshot_every = 10;
        Trajectory traj = run_training(s.graph, s.dataset, config, s.schedule);
        std::vector<std::int64_t> iters;
        for (const auto& snap : traj.snapshots) iters.push_back(snap.iteration);
        CHECK(iters == std::vector<std::int64_t>{0, 10, 20, 25});
    }
}

TEST_CASE("training dynamics invariants") {
    oracle::Rng rng(555);

    SECTION("non-negativity and monotone moves across random steps") {
        for (int trial = 0; trial < 30; ++trial) {
            Graph g = Graph::compile(oracle::random_graph_data(rng));
            ModelState state = oracle::random_state(g, rng);
            UpdateSchedule schedule;
            schedule.default_up = rng.next_unit() < 0.5 ? UpdateRule::multiplicative(1.0 + rng.uniform(0.01, 1.0))
                                                        : UpdateRule::additive(rng.uniform(0.01, 1.0));
            schedule.default_down = rng.next_unit() < 0.5 ? UpdateRule::multiplicative(rng.uniform(0.1, 1.0))
                                                          : UpdateRule::additive(-rng.uniform(0.0, 0.5));
            for (int step = 0; step < 20; ++step) {
                std::vector<InputPattern> batch{oracle::random_input(g, rng)};
                FiringState u = union_firing(g, batch);
                ModelState next = train_step(g, state, batch, schedule, step);
                for (NodeId id = 0; id < g.node_count(); ++id) {
                    if (g.is_top(id)) continue;
                    double before = state.lambda[static_cast<std::size_t>(id)];
                    double after = next.lambda[static_cast<std::size_t>(id)];
                    CHECK(after >= 0.0);
                    if (u.fires(id)) CHECK(after >= before);
                    else CHECK(after <= before);
                }
                state = next;
            }
        }
    }

    SECTION("argmax of probabilities equals argmax of logits") {
        for (int trial = 0; trial < 100; ++trial) {
            Graph g = Graph::compile(oracle::random_graph_data(rng));
            ModelState state = oracle::random_state(g, rng);
            InputPattern input = oracle::random_input(g, rng);
            std::vector<double> z = class_logits(g, state, input);
            std::vector<double> p = predict_proba(z);
            auto argmax = [](const std::vector<double>& v) {
                return std::max_element(v.begin(), v.end()) - v.begin();
            };
            CHECK(argmax(z) == argmax(p));
        }
    }

    SECTION("batch-size-1 with identity decay leaves untouched nodes untouched") {
        Scenario s = scenario_fig2_three_class();
        UpdateSchedule schedule = s.schedule;
        schedule.default_down = UpdateRule::multiplicative(1.0);
        TrainConfig config = s.config;
        config.iterations = 50;
        config.batch_size = 1;
        Trajectory traj = run_training(s.graph, s.dataset, config, schedule);

        std::set<NodeId> touched;
        std::set<int> touched_eta;
        for (const auto& indices : traj.sampled_indices) {
            for (int idx : indices) {
                FeaturePathway p = feature_pathway(s.graph, s.dataset.patterns[static_cast<std::size_t>(idx)]);
                touched.insert(p.nodes.begin(), p.nodes.end());
            }
        }
        for (std::size_t e = 0; e < s.graph.class_edges().size(); ++e) {
            const auto& [f, cls] = s.graph.class_edges()[e];
            if (touched.count(f) && touched.count(cls)) touched_eta.insert(static_cast<int>(e));
        }

        const ModelState& first = traj.snapshots.front().state;
        const ModelState& last = traj.snapshots.back().state;
        for (NodeId id = 0; id < s.graph.node_count(); ++id)
            if (!s.graph.is_top(id) && !touched.count(id))
                CHECK(last.lambda[static_cast<std::size_t>(id)] == first.lambda[static_cast<std::size_t>(id)]);
        for (std::size_t e = 0; e < s.graph.class_edges().size(); ++e)
            if (!touched_eta.count(static_cast<int>(e))) CHECK(last.eta[e] == first.eta[e]);
    }

    SECTION("scores and logits agree with the naive recursive oracle") {
        for (int trial = 0; trial < 200; ++trial) {
            Graph g = Graph::compile(oracle::random_graph_data(rng));
            ModelState state = oracle::random_state(g, rng);
            InputPattern input = oracle::random_input(g, rng);
            std::vector<double> s = node_scores(g, state, input);
            for (NodeId id = 0; id < g.node_count(); ++id) {
                if (g.is_top(id)) continue;
                double expect = oracle::score(g, state, input, id);
                CHECK(s[static_cast<std::size_t>(id)] ==
                      Catch::Approx(expect).epsilon(1e-9).margin(1e-300));
            }
            std::vector<double> z = class_logits(g, state, input);
            std::vector<double> zo = oracle::logits(g, state, input);
            for (std::size_t j = 0; j < z.size(); ++j)
                CHECK(z[j] == Catch::Approx(zo[j]).epsilon(1e-9).margin(1e-300));
        }
    }
}

TEST_CASE("config file parsing round-trips and validates") {
    Scenario s = scenario_fig3_bottleneck();
    std::string text = serialize_train_config(s.config, s.schedule);
    TrainSetup setup = parse_train_config(text);
    CHECK(setup.config == s.config);
    CHECK(setup.schedule.default_up == s.schedule.default_up);
    CHECK(setup.schedule.default_down == s.schedule.default_down);
    CHECK(setup.schedule.node_overrides == s.schedule.node_overrides);

    CHECK_THROWS_AS(parse_train_config(R"({"batch_size": 1})"), Error);
    CHECK_THROWS_AS(parse_train_config(R"({"batch_size": 1, "iterations": 10, "seed": 1,
        "init": {"kind": "uniform", "lo": 1.0, "hi": 0.5}})"),
                    Error);
    CHECK_THROWS_AS(parse_train_config(R"({"batch_size": 1, "iterations": 10, "seed": 1,
        "init": {"kind": "zeros"}, "surprise": true})"),
                    Error);
}
