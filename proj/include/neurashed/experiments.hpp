#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "neurashed/dynamics.hpp"
#include "neurashed/errors.hpp"
#include "neurashed/metrics.hpp"
#include "neurashed/rng.hpp"
#include "neurashed/scenarios.hpp"

namespace neurashed {

struct MICurveRow {
    std::int64_t iteration;
    int level;
    double mi_input_bits;
    double mi_label_bits;
};

// Trains per the scenario and estimates the noisy MI between every hidden
// level and the input / the labels at each snapshot. MC noise seeds are
// derived from (seed, iteration, level) so the whole curve is reproducible.
inline std::vector<MICurveRow> run_info_bottleneck(const Scenario& scenario, std::int64_t eval_every, double sigma,
                                                   int mc_samples, std::uint64_t seed) {
    if (scenario.graph.num_classes() < 2)
        fail(ErrorCode::InvalidConfig, "information bottleneck study needs at least 2 classes");
    TrainConfig config = scenario.config;
    config.seed = seed;
    config.snapshot_every = eval_every;
    Trajectory traj = run_training(scenario.graph, scenario.dataset, config, scenario.schedule);

    std::vector<MICurveRow> rows;
    for (const auto& snap : traj.snapshots) {
        for (int level = 1; level < scenario.graph.num_levels(); ++level) {
            LabeledActivations data;
            for (const auto& p : scenario.dataset.patterns) {
                data.activations.push_back(level_activations(scenario.graph, snap.state, p, level));
                data.weights.push_back(p.weight);
                data.labels.push_back(p.label);
            }
            MIEstimate est = estimate_mutual_information(
                data, sigma, mc_samples,
                derive_seed(seed, static_cast<std::uint64_t>(snap.iteration), static_cast<std::uint64_t>(level)));
            rows.push_back({snap.iteration, level, est.mi_input_bits, est.mi_label_bits});
        }
    }
    return rows;
}

struct SparsityRow {
    std::string group;
    int batch_size;
    std::uint64_t seed;
    double entropy;
};

struct BatchComparison {
    std::vector<SparsityRow> rows;                          // merged by (batch, seed) key order
    std::vector<std::pair<std::string, double>> mean_gaps;  // per group: mean(large - small) over seeds
};

inline BatchComparison run_batch_comparison(const Scenario& scenario, int small_batch, int large_batch,
                                            std::span<const std::uint64_t> seeds) {
    if (small_batch < 1 || small_batch > large_batch ||
        large_batch > static_cast<int>(scenario.dataset.patterns.size()))
        fail(ErrorCode::InvalidConfig, "need 1 <= small_batch <= large_batch <= dataset size");
    if (seeds.empty()) fail(ErrorCode::InvalidConfig, "need at least one seed");

    BatchComparison result;
    std::map<std::string, std::map<std::pair<int, std::uint64_t>, double>> by_group;
    for (int batch : {small_batch, large_batch}) {
        for (std::uint64_t seed : seeds) {
            TrainConfig config = scenario.config;
            config.batch_size = batch;
            config.seed = seed;
            Trajectory traj = run_training(scenario.graph, scenario.dataset, config, scenario.schedule);
            const ModelState& final_state = traj.snapshots.back().state;
            for (const auto& [group, entropy] : sparsity_profile(final_state, scenario.node_groups)) {
                result.rows.push_back({group, batch, seed, entropy});
                by_group[group][{batch, seed}] = entropy;
            }
        }
    }
    for (const auto& [group, _] : scenario.node_groups) {
        double gap = 0.0;
        for (std::uint64_t seed : seeds)
            gap += by_group[group][{large_batch, seed}] - by_group[group][{small_batch, seed}];
        result.mean_gaps.emplace_back(group, gap / static_cast<double>(seeds.size()));
    }
    return result;
}

struct ElasticityRow {
    int base_id;
    int test_id;
    double le_value;
};

struct GroupMedianRow {
    std::string base_group;
    std::string test_group;
    double median;
};

struct ElasticityStudy {
    std::vector<ElasticityRow> pairs;
    std::vector<GroupMedianRow> group_medians;
};

namespace detail {

inline double median_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

} // namespace detail

// Trains, then measures LE for every (base, test) pattern pair at the final
// state. Rules are resolved at the iteration right after training.
inline ElasticityStudy run_elasticity_study(const Scenario& scenario, std::int64_t train_iterations,
                                            std::uint64_t seed) {
    if (scenario.pattern_groups.size() < 3)
        fail(ErrorCode::InvalidConfig, "elasticity study needs at least 3 pattern groups");
    TrainConfig config = scenario.config;
    config.iterations = train_iterations;
    config.seed = seed;
    Trajectory traj = run_training(scenario.graph, scenario.dataset, config, scenario.schedule);
    const ModelState& state = traj.snapshots.back().state;
    std::int64_t measure_iteration = train_iterations + 1;

    ElasticityStudy study;
    const auto& patterns = scenario.dataset.patterns;
    std::map<std::pair<int, int>, double> le_by_pair;
    for (int i = 0; i < static_cast<int>(patterns.size()); ++i) {
        for (int j = 0; j < static_cast<int>(patterns.size()); ++j) {
            double le = local_elasticity(scenario.graph, state, patterns[static_cast<std::size_t>(i)],
                                         patterns[static_cast<std::size_t>(j)], scenario.schedule, measure_iteration);
            study.pairs.push_back({i, j, le});
            le_by_pair[{i, j}] = le;
        }
    }
    for (const auto& [base_name, base_ids] : scenario.pattern_groups) {
        for (const auto& [test_name, test_ids] : scenario.pattern_groups) {
            std::vector<double> values;
            for (int i : base_ids)
                for (int j : test_ids)
                    if (i != j) values.push_back(le_by_pair[{i, j}]);
            if (values.empty()) {
                // same singleton group: only the identity pair exists
                for (int i : base_ids)
                    for (int j : test_ids) values.push_back(le_by_pair[{i, j}]);
            }
            study.group_medians.push_back({base_name, test_name, detail::median_of(std::move(values))});
        }
    }
    return study;
}

// --- expected-outcome assertions ---------------------------------------------

struct ExpectationResult {
    std::string name;
    bool pass = false;
    std::string details{};
    double seconds = 0.0;
};

namespace detail {

inline ExpectationResult check_convergence(const Scenario& scenario, const nlohmann::json& a) {
    ExpectationResult r{.name = "convergence"};
    TrainConfig config = scenario.config;
    config.batch_size = a.value("batch_size", scenario.config.batch_size);
    config.iterations = a.value("iterations", scenario.config.iterations);
    double min_prob_required = a.at("min_true_class_prob").get<double>();
    double worst = 1.0;
    for (std::uint64_t seed : a.at("seeds").get<std::vector<std::uint64_t>>()) {
        config.seed = seed;
        Trajectory traj = run_training(scenario.graph, scenario.dataset, config, scenario.schedule);
        const ModelState& state = traj.snapshots.back().state;
        for (const auto& p : scenario.dataset.patterns) {
            std::vector<double> probs = predict_proba(class_logits(scenario.graph, state, p));
            worst = std::min(worst, probs[static_cast<std::size_t>(p.label)]);
        }
    }
    r.pass = worst >= min_prob_required;
    r.details = "min true-class probability " + format_double(worst) + " (needs >= " +
                format_double(min_prob_required) + ")";
    return r;
}

inline ExpectationResult check_mi_bottleneck(const Scenario& scenario, const nlohmann::json& a) {
    ExpectationResult r{.name = "mi_bottleneck"};
    int level = a.at("level").get<int>();
    Scenario run = scenario;
    run.config.iterations = a.value("iterations", scenario.config.iterations);
    std::vector<MICurveRow> rows =
        run_info_bottleneck(run, a.at("eval_every").get<std::int64_t>(), a.at("sigma").get<double>(),
                            a.at("mc_samples").get<int>(), a.value("seed", scenario.config.seed));
    double peak = -1e300, final_input = 0.0, final_label = 0.0;
    for (const auto& row : rows) {
        if (row.level != level) continue;
        peak = std::max(peak, row.mi_input_bits);
        final_input = row.mi_input_bits;
        final_label = row.mi_label_bits;
    }
    bool peak_ok = peak >= a.at("peak_min").get<double>();
    bool final_ok = std::abs(final_input - a.at("final_value").get<double>()) <= a.at("final_tol").get<double>();
    bool label_ok =
        std::abs(final_label - a.at("label_final_value").get<double>()) <= a.at("label_final_tol").get<double>();
    r.pass = peak_ok && final_ok && label_ok;
    r.details = "level " + std::to_string(level) + ": peak mi_input " + format_double(peak) + ", final mi_input " +
                format_double(final_input) + ", final mi_label " + format_double(final_label);
    return r;
}

inline ExpectationResult check_elasticity_order(const Scenario& scenario, const nlohmann::json& a) {
    ExpectationResult r{.name = "elasticity_order"};
    std::string base_group = a.at("base_group").get<std::string>();
    std::vector<std::string> ordered = a.at("ordered_test_groups").get<std::vector<std::string>>();
    std::int64_t iters = a.value("train_iterations", scenario.config.iterations);
    bool ok = true;
    std::ostringstream details;
    for (std::uint64_t seed : a.at("seeds").get<std::vector<std::uint64_t>>()) {
        ElasticityStudy study = run_elasticity_study(scenario, iters, seed);
        for (const auto& row : study.pairs)
            if (row.base_id == row.test_id && row.le_value != 1.0) ok = false;
        std::map<std::string, double> medians;
        for (const auto& gm : study.group_medians)
            if (gm.base_group == base_group) medians[gm.test_group] = gm.median;
        details << "seed " << seed << ":";
        for (std::size_t i = 0; i < ordered.size(); ++i) {
            details << " LE(" << base_group << "->" << ordered[i] << ")=" << format_double(medians[ordered[i]]);
            if (i + 1 < ordered.size() && !(medians[ordered[i]] > medians[ordered[i + 1]])) ok = false;
        }
        details << "; ";
    }
    r.pass = ok;
    r.details = details.str();
    return r;
}

inline ExpectationResult check_sparsity_gap(const Scenario& scenario, const nlohmann::json& a) {
    ExpectationResult r{.name = "sparsity_gap"};
    Scenario run = scenario;
    run.config.iterations = a.value("iterations", scenario.config.iterations);
    std::vector<std::uint64_t> seeds = a.at("seeds").get<std::vector<std::uint64_t>>();
    std::vector<std::string> groups = a.at("groups").get<std::vector<std::string>>();
    BatchComparison cmp =
        run_batch_comparison(run, a.at("small_batch").get<int>(), a.at("large_batch").get<int>(), seeds);
    std::map<std::pair<std::string, std::pair<int, std::uint64_t>>, double> lookup;
    for (const auto& row : cmp.rows) lookup[{row.group, {row.batch_size, row.seed}}] = row.entropy;
    bool ok = true;
    std::ostringstream details;
    for (const auto& group : groups) {
        for (std::uint64_t seed : seeds) {
            double small = lookup[{group, {a.at("small_batch").get<int>(), seed}}];
            double large = lookup[{group, {a.at("large_batch").get<int>(), seed}}];
            if (!(small < large)) ok = false;
            details << group << "/seed " << seed << ": " << format_double(small) << " vs " << format_double(large)
                    << "; ";
        }
    }
    r.pass = ok;
    r.details = details.str();
    return r;
}

} // namespace detail

// Evaluates every machine-checkable assertion the scenario declares. Each
// result carries its wall-clock time; an assertion with max_seconds fails if
// it overruns.
inline std::vector<ExpectationResult> run_expectations(const Scenario& scenario) {
    std::vector<ExpectationResult> results;
    for (const auto& a : scenario.assertions) {
        std::string kind = a.at("kind").get<std::string>();
        auto start = std::chrono::steady_clock::now();
        ExpectationResult r;
        if (kind == "convergence") r = detail::check_convergence(scenario, a);
        else if (kind == "mi_bottleneck") r = detail::check_mi_bottleneck(scenario, a);
        else if (kind == "elasticity_order") r = detail::check_elasticity_order(scenario, a);
        else if (kind == "sparsity_gap") r = detail::check_sparsity_gap(scenario, a);
        else fail(ErrorCode::MalformedDocument, "unknown assertion kind \"" + kind + "\"");
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (a.contains("max_seconds") && r.seconds > a["max_seconds"].get<double>()) {
            r.pass = false;
            r.details += " [exceeded " + format_double(a["max_seconds"].get<double>()) + "s budget]";
        }
        r.name = scenario.name + "/" + r.name;
        results.push_back(std::move(r));
    }
    return results;
}

} // namespace neurashed
