#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "neurashed/dataset.hpp"
#include "neurashed/errors.hpp"
#include "neurashed/graph.hpp"
#include "neurashed/rng.hpp"

namespace neurashed {

// One growth/decay map. Whether an instance is legal depends on the direction
// it is used in: up-rules must satisfy g+(x) > x for x >= 0 (multiplicative
// factors > 1, which strictly increase only positive values - hence the
// positive-init requirement checked in validate_train_setup), down-rules must
// satisfy 0 <= g-(x) <= x and be non-decreasing (factors in (0,1], offsets
// <= 0 applied with a clamp at zero).
struct UpdateRule {
    enum class Kind { Multiplicative, Additive };
    Kind kind = Kind::Multiplicative;
    double amount = 1.0; // factor or offset

    static UpdateRule multiplicative(double factor) { return {Kind::Multiplicative, factor}; }
    static UpdateRule additive(double offset) { return {Kind::Additive, offset}; }

    double apply_up(double x) const {
        return kind == Kind::Multiplicative ? amount * x : x + amount;
    }
    double apply_down(double x) const {
        return kind == Kind::Multiplicative ? amount * x : std::max(0.0, x + amount);
    }

    friend bool operator==(const UpdateRule&, const UpdateRule&) = default;
};

inline void validate_up_rule(const UpdateRule& r) {
    if (r.kind == UpdateRule::Kind::Multiplicative && !(r.amount > 1.0))
        fail(ErrorCode::InvalidConfig, "multiplicative up-rule needs factor > 1");
    if (r.kind == UpdateRule::Kind::Additive && !(r.amount > 0.0))
        fail(ErrorCode::InvalidConfig, "additive up-rule needs offset > 0");
}

inline void validate_down_rule(const UpdateRule& r) {
    if (r.kind == UpdateRule::Kind::Multiplicative && !(r.amount > 0.0 && r.amount <= 1.0))
        fail(ErrorCode::InvalidConfig, "multiplicative down-rule needs factor in (0, 1]");
    if (r.kind == UpdateRule::Kind::Additive && !(r.amount <= 0.0))
        fail(ErrorCode::InvalidConfig, "additive down-rule needs offset <= 0");
}

struct RulePair {
    UpdateRule up;
    UpdateRule down;
};

struct PartialRulePair {
    std::optional<UpdateRule> up;
    std::optional<UpdateRule> down;

    friend bool operator==(const PartialRulePair&, const PartialRulePair&) = default;
};

// Optional per-iteration override table returned by the hook.
struct ScheduleTable {
    std::optional<UpdateRule> default_up;
    std::optional<UpdateRule> default_down;
    std::map<NodeId, PartialRulePair> node_overrides;
};

// Rules may vary per node and per iteration. Static defaults and per-node
// overrides come from the config file; the per-iteration hook is code-only.
// Resolution precedence: hook per-node > hook defaults > static per-node >
// static defaults, separately for the up and down slots.
struct UpdateSchedule {
    UpdateRule default_up = UpdateRule::multiplicative(1.05);
    UpdateRule default_down = UpdateRule::multiplicative(0.98);
    std::map<NodeId, PartialRulePair> node_overrides;
    std::function<std::optional<ScheduleTable>(std::int64_t)> per_iteration_hook;

    RulePair resolve(NodeId node, std::int64_t iteration) const {
        RulePair pair{default_up, default_down};
        if (auto it = node_overrides.find(node); it != node_overrides.end()) {
            if (it->second.up) pair.up = *it->second.up;
            if (it->second.down) pair.down = *it->second.down;
        }
        if (per_iteration_hook) {
            if (auto table = per_iteration_hook(iteration)) {
                if (table->default_up) pair.up = *table->default_up;
                if (table->default_down) pair.down = *table->default_down;
                if (auto it = table->node_overrides.find(node); it != table->node_overrides.end()) {
                    if (it->second.up) pair.up = *it->second.up;
                    if (it->second.down) pair.down = *it->second.down;
                }
                validate_up_rule(pair.up);
                validate_down_rule(pair.down);
            }
        }
        return pair;
    }
};

inline void validate_schedule(const UpdateSchedule& s) {
    validate_up_rule(s.default_up);
    validate_down_rule(s.default_down);
    for (const auto& [node, pair] : s.node_overrides) {
        if (pair.up) validate_up_rule(*pair.up);
        if (pair.down) validate_down_rule(*pair.down);
    }
}

struct InitSpec {
    enum class Kind { Zeros, Constant, Uniform };
    Kind kind = Kind::Zeros;
    double value = 0.0; // constant
    double lo = 0.0, hi = 0.0; // uniform

    static InitSpec zeros() { return {}; }
    static InitSpec constant(double c) { return {Kind::Constant, c, 0, 0}; }
    static InitSpec uniform(double lo, double hi) { return {Kind::Uniform, 0, lo, hi}; }

    friend bool operator==(const InitSpec&, const InitSpec&) = default;
};

struct TrainConfig {
    int batch_size = 1;
    std::int64_t iterations = 0;
    std::uint64_t seed = 0;
    InitSpec init;
    std::int64_t snapshot_every = 1;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// The learnable quantities: one lambda per non-top node (top entries stay 0),
// one eta per second-last-to-class edge in the graph's canonical order.
struct ModelState {
    std::vector<double> lambda;
    std::vector<double> eta;

    friend bool operator==(const ModelState&, const ModelState&) = default;
};

// Uniform draws fill lambda in ascending node id over levels 1..L-1, then eta
// in the graph's class-edge order. Fixed so runs are reproducible.
inline ModelState init_state_with_rng(const Graph& g, const InitSpec& init, Rng& rng) {
    auto draw = [&]() -> double {
        switch (init.kind) {
        case InitSpec::Kind::Zeros: return 0.0;
        case InitSpec::Kind::Constant: return init.value;
        case InitSpec::Kind::Uniform: return rng.uniform(init.lo, init.hi);
        }
        return 0.0;
    };
    ModelState state;
    state.lambda.assign(static_cast<std::size_t>(g.node_count()), 0.0);
    for (NodeId id = 0; id < g.node_count(); ++id)
        if (!g.is_top(id)) state.lambda[static_cast<std::size_t>(id)] = draw();
    state.eta.reserve(g.class_edges().size());
    for (std::size_t i = 0; i < g.class_edges().size(); ++i)
        state.eta.push_back(draw());
    return state;
}

inline void validate_init(const InitSpec& init) {
    if (init.kind == InitSpec::Kind::Constant && !(init.value >= 0.0))
        fail(ErrorCode::InvalidConfig, "constant init needs c >= 0");
    if (init.kind == InitSpec::Kind::Uniform && !(init.lo >= 0.0 && init.lo < init.hi))
        fail(ErrorCode::InvalidConfig, "uniform init needs 0 <= lo < hi");
}

inline ModelState init_state(const Graph& g, const TrainConfig& config) {
    validate_init(config.init);
    Rng rng(config.seed);
    return init_state_with_rng(g, config.init, rng);
}

// Bottom-up score pass: S = lambda for firing level-1 nodes, S = lambda times
// the sum of dependent scores for firing middle nodes, 0 otherwise. Top-level
// nodes carry no score; prediction reads the logits instead.
inline std::vector<double> node_scores(const Graph& g, const ModelState& state, const InputPattern& input) {
    FiringState firing = compute_firing(g, input, /*supervised=*/false);
    std::vector<double> score(static_cast<std::size_t>(g.node_count()), 0.0);
    for (NodeId id : g.nodes_at_level(1))
        if (firing.fires(id)) score[static_cast<std::size_t>(id)] = state.lambda[static_cast<std::size_t>(id)];
    for (int level = 2; level < g.num_levels(); ++level) {
        for (NodeId id : g.nodes_at_level(level)) {
            if (!firing.fires(id)) continue;
            double sum = 0.0;
            for (NodeId dep : g.dependents(id)) sum += score[static_cast<std::size_t>(dep)];
            score[static_cast<std::size_t>(id)] = state.lambda[static_cast<std::size_t>(id)] * sum;
        }
    }
    return score;
}

// Z_j = sum over second-last-level dependents f of class j of eta_fj * S_f.
inline std::vector<double> class_logits(const Graph& g, const ModelState& state, const InputPattern& input) {
    std::vector<double> score = node_scores(g, state, input);
    std::vector<double> logits(static_cast<std::size_t>(g.num_classes()), 0.0);
    for (int j = 0; j < g.num_classes(); ++j) {
        NodeId cls = g.class_nodes()[static_cast<std::size_t>(j)];
        double z = 0.0;
        for (NodeId f : g.dependents(cls))
            z += state.eta[static_cast<std::size_t>(g.class_edge_index(f, cls))] * score[static_cast<std::size_t>(f)];
        logits[static_cast<std::size_t>(j)] = z;
    }
    return logits;
}

// Max-subtracted softmax.
inline std::vector<double> predict_proba(std::span<const double> logits) {
    for (double z : logits)
        if (!std::isfinite(z)) fail(ErrorCode::NonFiniteLogit, "logit is not finite");
    double zmax = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - zmax);
        total += p[i];
    }
    for (double& v : p) v /= total;
    return p;
}

// One backpropagation analog. Every non-top lambda moves up if its node is in
// the union firing state, down otherwise; an eta moves up iff both of its
// endpoints are (the class node fires iff its label is present in the batch).
// All updates read the pre-step state.
inline ModelState train_step(const Graph& g, const ModelState& state, std::span<const InputPattern> batch,
                             const UpdateSchedule& schedule, std::int64_t iteration) {
    FiringState u = union_firing(g, batch);
    ModelState next = state;
    for (NodeId id = 0; id < g.node_count(); ++id) {
        if (g.is_top(id)) continue;
        RulePair rules = schedule.resolve(id, iteration);
        double x = state.lambda[static_cast<std::size_t>(id)];
        next.lambda[static_cast<std::size_t>(id)] = u.fires(id) ? rules.up.apply_up(x) : rules.down.apply_down(x);
    }
    for (std::size_t i = 0; i < g.class_edges().size(); ++i) {
        const auto& [f, cls] = g.class_edges()[i];
        // Eta overrides are keyed by the second-last-level endpoint.
        RulePair rules = schedule.resolve(f, iteration);
        double x = state.eta[i];
        next.eta[i] = (u.fires(f) && u.fires(cls)) ? rules.up.apply_up(x) : rules.down.apply_down(x);
    }
    return next;
}

struct Trajectory {
    struct Snapshot {
        std::int64_t iteration;
        ModelState state;
    };
    std::vector<Snapshot> snapshots;
    std::vector<std::vector<int>> sampled_indices; // per iteration
};

inline bool schedule_uses_multiplicative_up(const UpdateSchedule& s) {
    if (s.default_up.kind == UpdateRule::Kind::Multiplicative) return true;
    for (const auto& [node, pair] : s.node_overrides)
        if (pair.up && pair.up->kind == UpdateRule::Kind::Multiplicative) return true;
    return false;
}

inline void validate_train_setup(const Graph& g, const Dataset& dataset, const TrainConfig& config,
                                 const UpdateSchedule& schedule) {
    validate_dataset(g, dataset);
    validate_init(config.init);
    validate_schedule(schedule);
    if (config.batch_size < 1) fail(ErrorCode::InvalidConfig, "batch_size must be >= 1");
    if (config.iterations < 0) fail(ErrorCode::InvalidConfig, "iterations must be >= 0");
    if (config.snapshot_every < 1) fail(ErrorCode::InvalidConfig, "snapshot_every must be >= 1");
    // Multiplicative up-rules leave zero at zero, so they need positive init.
    bool zero_init = config.init.kind == InitSpec::Kind::Zeros ||
                     (config.init.kind == InitSpec::Kind::Constant && config.init.value == 0.0);
    if (zero_init && schedule_uses_multiplicative_up(schedule))
        fail(ErrorCode::InvalidConfig, "multiplicative up-rules require a strictly positive init");
}

// Seeded weighted sampling with replacement; one rng stream covers the init
// draws and then the batch draws. Snapshots are taken at iteration 0, after
// every snapshot_every-th iteration, and after the final iteration.
inline Trajectory run_training(const Graph& g, const Dataset& dataset, const TrainConfig& config,
                               const UpdateSchedule& schedule) {
    validate_train_setup(g, dataset, config, schedule);

    Rng rng(config.seed);
    ModelState state = init_state_with_rng(g, config.init, rng);

    std::vector<double> weights;
    weights.reserve(dataset.patterns.size());
    for (const auto& p : dataset.patterns) weights.push_back(p.weight);
    WeightedSampler sampler(weights);

    Trajectory traj;
    traj.snapshots.push_back({0, state});
    std::vector<InputPattern> batch;
    for (std::int64_t t = 1; t <= config.iterations; ++t) {
        std::vector<int> indices(static_cast<std::size_t>(config.batch_size));
        batch.clear();
        for (int b = 0; b < config.batch_size; ++b) {
            int idx = sampler.sample(rng);
            indices[static_cast<std::size_t>(b)] = idx;
            batch.push_back(dataset.patterns[static_cast<std::size_t>(idx)]);
        }
        state = train_step(g, state, batch, schedule, t);
        traj.sampled_indices.push_back(std::move(indices));
        if (t % config.snapshot_every == 0 || t == config.iterations)
            traj.snapshots.push_back({t, state});
    }
    return traj;
}

// --- config file parsing ----------------------------------------------------
// { "batch_size", "iterations", "seed", "init": {"kind", ...},
//   "snapshot_every", "rules": {"default_up", "default_down", "node_overrides"} }

namespace detail {

inline UpdateRule parse_rule(const nlohmann::json& j, const std::string& context) {
    if (!j.is_object()) fail(ErrorCode::MalformedDocument, context + " must be an object");
    reject_unknown_fields(j, {"kind", "factor", "offset"}, context);
    if (!j.contains("kind") || !j["kind"].is_string())
        fail(ErrorCode::MalformedDocument, context + " needs a \"kind\" string");
    std::string kind = j["kind"].get<std::string>();
    if (kind == "multiplicative") {
        if (!j.contains("factor") || !j["factor"].is_number())
            fail(ErrorCode::MalformedDocument, context + " needs a numeric \"factor\"");
        return UpdateRule::multiplicative(j["factor"].get<double>());
    }
    if (kind == "additive") {
        if (!j.contains("offset") || !j["offset"].is_number())
            fail(ErrorCode::MalformedDocument, context + " needs a numeric \"offset\"");
        return UpdateRule::additive(j["offset"].get<double>());
    }
    fail(ErrorCode::MalformedDocument, context + " kind must be \"multiplicative\" or \"additive\"");
}

inline nlohmann::json rule_to_json(const UpdateRule& r) {
    nlohmann::json j;
    if (r.kind == UpdateRule::Kind::Multiplicative) {
        j["kind"] = "multiplicative";
        j["factor"] = r.amount;
    } else {
        j["kind"] = "additive";
        j["offset"] = r.amount;
    }
    return j;
}

} // namespace detail

struct TrainSetup {
    TrainConfig config;
    UpdateSchedule schedule;
};

inline TrainSetup parse_train_config(const std::string& text) {
    using nlohmann::json;
    json j = detail::parse_json(text);
    if (!j.is_object()) fail(ErrorCode::MalformedDocument, "config document must be a JSON object");
    detail::reject_unknown_fields(j, {"batch_size", "iterations", "seed", "init", "snapshot_every", "rules"},
                                  "config document");

    TrainSetup setup;
    setup.config.batch_size = detail::get_int(j, "batch_size", "config document");
    if (!j.contains("iterations") || !j["iterations"].is_number_integer())
        fail(ErrorCode::MalformedDocument, "config needs integer \"iterations\"");
    setup.config.iterations = j["iterations"].get<std::int64_t>();
    if (!j.contains("seed") || !j["seed"].is_number_integer())
        fail(ErrorCode::MalformedDocument, "config needs integer \"seed\"");
    setup.config.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("snapshot_every")) {
        if (!j["snapshot_every"].is_number_integer())
            fail(ErrorCode::MalformedDocument, "snapshot_every must be an integer");
        setup.config.snapshot_every = j["snapshot_every"].get<std::int64_t>();
    }

    if (!j.contains("init") || !j["init"].is_object())
        fail(ErrorCode::MalformedDocument, "config needs an \"init\" object");
    const json& ij = j["init"];
    detail::reject_unknown_fields(ij, {"kind", "value", "lo", "hi"}, "init");
    if (!ij.contains("kind") || !ij["kind"].is_string())
        fail(ErrorCode::MalformedDocument, "init needs a \"kind\" string");
    std::string kind = ij["kind"].get<std::string>();
    if (kind == "zeros") {
        setup.config.init = InitSpec::zeros();
    } else if (kind == "constant") {
        if (!ij.contains("value") || !ij["value"].is_number())
            fail(ErrorCode::MalformedDocument, "constant init needs a numeric \"value\"");
        setup.config.init = InitSpec::constant(ij["value"].get<double>());
    } else if (kind == "uniform") {
        if (!ij.contains("lo") || !ij.contains("hi") || !ij["lo"].is_number() || !ij["hi"].is_number())
            fail(ErrorCode::MalformedDocument, "uniform init needs numeric \"lo\" and \"hi\"");
        setup.config.init = InitSpec::uniform(ij["lo"].get<double>(), ij["hi"].get<double>());
    } else {
        fail(ErrorCode::MalformedDocument, "init kind must be \"zeros\", \"constant\" or \"uniform\"");
    }
    validate_init(setup.config.init);

    if (j.contains("rules")) {
        const json& rj = j["rules"];
        if (!rj.is_object()) fail(ErrorCode::MalformedDocument, "rules must be an object");
        detail::reject_unknown_fields(rj, {"default_up", "default_down", "node_overrides"}, "rules");
        if (rj.contains("default_up")) setup.schedule.default_up = detail::parse_rule(rj["default_up"], "default_up");
        if (rj.contains("default_down"))
            setup.schedule.default_down = detail::parse_rule(rj["default_down"], "default_down");
        if (rj.contains("node_overrides")) {
            if (!rj["node_overrides"].is_object())
                fail(ErrorCode::MalformedDocument, "node_overrides must be an object keyed by node id");
            for (auto it = rj["node_overrides"].begin(); it != rj["node_overrides"].end(); ++it) {
                NodeId id = 0;
                try {
                    std::size_t pos = 0;
                    id = std::stoi(it.key(), &pos);
                    if (pos != it.key().size()) throw std::invalid_argument("trailing");
                } catch (const std::exception&) {
                    fail(ErrorCode::MalformedDocument, "node_overrides key \"" + it.key() + "\" is not a node id");
                }
                const json& oj = it.value();
                if (!oj.is_object()) fail(ErrorCode::MalformedDocument, "node override must be an object");
                detail::reject_unknown_fields(oj, {"up", "down"}, "node override");
                PartialRulePair pair;
                if (oj.contains("up")) pair.up = detail::parse_rule(oj["up"], "override up");
                if (oj.contains("down")) pair.down = detail::parse_rule(oj["down"], "override down");
                setup.schedule.node_overrides[id] = pair;
            }
        }
    }
    validate_schedule(setup.schedule);
    return setup;
}

inline std::string serialize_train_config(const TrainConfig& config, const UpdateSchedule& schedule) {
    nlohmann::json j;
    j["batch_size"] = config.batch_size;
    j["iterations"] = config.iterations;
    j["seed"] = config.seed;
    j["snapshot_every"] = config.snapshot_every;
    switch (config.init.kind) {
    case InitSpec::Kind::Zeros: j["init"] = {{"kind", "zeros"}}; break;
    case InitSpec::Kind::Constant: j["init"] = {{"kind", "constant"}, {"value", config.init.value}}; break;
    case InitSpec::Kind::Uniform:
        j["init"] = {{"kind", "uniform"}, {"lo", config.init.lo}, {"hi", config.init.hi}};
        break;
    }
    j["rules"]["default_up"] = detail::rule_to_json(schedule.default_up);
    j["rules"]["default_down"] = detail::rule_to_json(schedule.default_down);
    if (!schedule.node_overrides.empty()) {
        nlohmann::json oj = nlohmann::json::object();
        for (const auto& [id, pair] : schedule.node_overrides) {
            nlohmann::json entry = nlohmann::json::object();
            if (pair.up) entry["up"] = detail::rule_to_json(*pair.up);
            if (pair.down) entry["down"] = detail::rule_to_json(*pair.down);
            oj[std::to_string(id)] = entry;
        }
        j["rules"]["node_overrides"] = oj;
    }
    return j.dump(2) + "\n";
}

} // namespace neurashed
