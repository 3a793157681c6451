#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "neurashed/csv.hpp"
#include "neurashed/dataset.hpp"
#include "neurashed/dynamics.hpp"
#include "neurashed/errors.hpp"
#include "neurashed/experiments.hpp"
#include "neurashed/graph.hpp"
#include "neurashed/manifest.hpp"
#include "neurashed/metrics.hpp"
#include "neurashed/scenarios.hpp"
#include "neurashed/svg.hpp"

namespace neurashed::cli {

namespace fs = std::filesystem;

struct CommonOptions {
    std::string graph_path, dataset_path, config_path, scenario;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> iters;
    std::optional<int> batch_size;
    std::optional<std::int64_t> snapshot_every;
    std::string out_dir;
    bool force = false;
};

namespace detail {

inline void add_input_options(CLI::App* cmd, CommonOptions& opt, bool scenario_allowed = true) {
    cmd->add_option("-g,--graph", opt.graph_path, "graph spec JSON file");
    cmd->add_option("-d,--dataset", opt.dataset_path, "dataset JSON file");
    cmd->add_option("-c,--config", opt.config_path, "training config JSON file");
    if (scenario_allowed)
        cmd->add_option("--scenario", opt.scenario, "built-in scenario name or bundle directory");
}

inline void add_run_options(CLI::App* cmd, CommonOptions& opt) {
    cmd->add_option("--seed", opt.seed, "seed for all randomness");
    cmd->add_option("--iters", opt.iters, "training iterations");
    cmd->add_option("--batch-size", opt.batch_size, "mini-batch size");
    cmd->add_option("--snapshot-every", opt.snapshot_every, "snapshot/eval cadence");
    cmd->add_option("--out", opt.out_dir, "output directory")->required();
    cmd->add_flag("--force", opt.force, "allow writing into a non-empty directory");
}

// Loads either a scenario or the explicit file triple, applies overrides and
// records input hashes for the manifest.
inline Scenario resolve_inputs(const CommonOptions& opt, RunManifest& manifest) {
    Scenario s = [&]() {
        if (!opt.scenario.empty()) {
            if (!opt.graph_path.empty() || !opt.dataset_path.empty() || !opt.config_path.empty())
                fail(ErrorCode::InvalidConfig, "--scenario cannot be combined with -g/-d/-c");
            return build_scenario(opt.scenario);
        }
        if (opt.graph_path.empty() || opt.dataset_path.empty() || opt.config_path.empty())
            fail(ErrorCode::InvalidConfig, "need --scenario or all of -g, -d, -c");
        Graph graph = parse_graph_spec(read_file(opt.graph_path));
        Dataset dataset = parse_dataset(read_file(opt.dataset_path));
        validate_dataset(graph, dataset);
        TrainSetup setup = parse_train_config(read_file(opt.config_path));
        return Scenario{.name = "custom",
                        .description = "",
                        .graph = std::move(graph),
                        .dataset = std::move(dataset),
                        .config = setup.config,
                        .schedule = setup.schedule};
    }();
    if (opt.seed) s.config.seed = *opt.seed;
    if (opt.iters) s.config.iterations = *opt.iters;
    if (opt.batch_size) s.config.batch_size = *opt.batch_size;
    if (opt.snapshot_every) s.config.snapshot_every = *opt.snapshot_every;

    manifest.config_hashes.emplace_back("graph", sha256_hex(serialize_graph_spec(s.graph)));
    manifest.config_hashes.emplace_back("dataset", sha256_hex(serialize_dataset(s.dataset)));
    manifest.config_hashes.emplace_back("config", sha256_hex(serialize_train_config(s.config, s.schedule)));
    manifest.seeds.push_back(s.config.seed);
    return s;
}

inline void prepare_out_dir(const std::string& out, bool force) {
    fs::path dir(out);
    if (fs::exists(dir) && !fs::is_directory(dir))
        fail(ErrorCode::IoError, out + " exists and is not a directory");
    if (fs::is_directory(dir) && !fs::is_empty(dir) && !force)
        fail(ErrorCode::IoError, "output directory " + out + " is not empty (use --force to overwrite)");
    fs::create_directories(dir);
}

inline void record_output(RunManifest& manifest, const fs::path& dir, const std::string& name) {
    manifest.outputs.emplace_back(name, sha256_file(dir / name));
}

inline Table snapshots_to_table(const Graph& g, const Trajectory& traj) {
    Table t;
    t.header = {"iteration", "kind", "id", "value"};
    for (const auto& snap : traj.snapshots) {
        for (NodeId id = 0; id < g.node_count(); ++id) {
            if (g.is_top(id)) continue;
            t.add_row({std::to_string(snap.iteration), "lambda", std::to_string(id),
                       format_double(snap.state.lambda[static_cast<std::size_t>(id)])});
        }
        for (std::size_t e = 0; e < g.class_edges().size(); ++e) {
            const auto& [f, cls] = g.class_edges()[e];
            t.add_row({std::to_string(snap.iteration), "eta", std::to_string(f) + "->" + std::to_string(cls),
                       format_double(snap.state.eta[e])});
        }
    }
    return t;
}

inline Table mi_rows_to_table(const std::vector<MICurveRow>& rows) {
    Table t;
    t.header = {"iteration", "level", "mi_input_bits", "mi_label_bits"};
    for (const auto& row : rows)
        t.add_row({std::to_string(row.iteration), std::to_string(row.level), format_double(row.mi_input_bits),
                   format_double(row.mi_label_bits)});
    return t;
}

} // namespace detail

inline int run_validate(const CommonOptions& opt) {
    if (opt.graph_path.empty()) fail(ErrorCode::InvalidConfig, "validate needs -g/--graph");
    Graph graph = parse_graph_spec(read_file(opt.graph_path));
    if (!opt.dataset_path.empty()) {
        Dataset dataset = parse_dataset(read_file(opt.dataset_path));
        validate_dataset(graph, dataset);
    }
    if (!opt.config_path.empty()) parse_train_config(read_file(opt.config_path));
    std::cout << "OK\n";
    return 0;
}

inline int run_train(const CommonOptions& opt, const std::vector<std::string>& command) {
    RunManifest manifest;
    manifest.command = command;
    manifest.started_at = iso8601_utc_now();
    Scenario s = detail::resolve_inputs(opt, manifest);
    detail::prepare_out_dir(opt.out_dir, opt.force);

    Trajectory traj = run_training(s.graph, s.dataset, s.config, s.schedule);
    fs::path dir(opt.out_dir);
    emit_csv(detail::snapshots_to_table(s.graph, traj), dir / "snapshots.csv");
    detail::record_output(manifest, dir, "snapshots.csv");
    manifest.finished_at = iso8601_utc_now();
    write_manifest(manifest, dir);
    return 0;
}

inline int run_mi(const CommonOptions& opt, double sigma, int mc_samples, const std::vector<std::string>& command) {
    RunManifest manifest;
    manifest.command = command;
    manifest.started_at = iso8601_utc_now();
    Scenario s = detail::resolve_inputs(opt, manifest);
    detail::prepare_out_dir(opt.out_dir, opt.force);

    std::vector<MICurveRow> rows =
        run_info_bottleneck(s, s.config.snapshot_every, sigma, mc_samples, s.config.seed);
    fs::path dir(opt.out_dir);
    emit_csv(detail::mi_rows_to_table(rows), dir / "mi_curve.csv");

    std::vector<Series> series;
    for (int level = 1; level < s.graph.num_levels(); ++level) {
        Series input_series{"level " + std::to_string(level) + " I(X;T)", {}};
        Series label_series{"level " + std::to_string(level) + " I(T;Y)", {}};
        for (const auto& row : rows) {
            if (row.level != level) continue;
            input_series.points.emplace_back(static_cast<double>(row.iteration), row.mi_input_bits);
            label_series.points.emplace_back(static_cast<double>(row.iteration), row.mi_label_bits);
        }
        series.push_back(std::move(input_series));
        series.push_back(std::move(label_series));
    }
    emit_svg_line_chart(series, "noisy mutual information during training", "iteration", "bits",
                        dir / "mi_curve.svg");

    detail::record_output(manifest, dir, "mi_curve.csv");
    detail::record_output(manifest, dir, "mi_curve.svg");
    manifest.finished_at = iso8601_utc_now();
    write_manifest(manifest, dir);
    return 0;
}

inline int run_elasticity(const CommonOptions& opt, const std::vector<std::string>& command) {
    RunManifest manifest;
    manifest.command = command;
    manifest.started_at = iso8601_utc_now();
    Scenario s = detail::resolve_inputs(opt, manifest);
    detail::prepare_out_dir(opt.out_dir, opt.force);

    ElasticityStudy study = run_elasticity_study(s, s.config.iterations, s.config.seed);
    fs::path dir(opt.out_dir);
    Table pairs;
    pairs.header = {"base_id", "test_id", "le_value"};
    for (const auto& row : study.pairs)
        pairs.add_row({std::to_string(row.base_id), std::to_string(row.test_id), format_double(row.le_value)});
    emit_csv(pairs, dir / "elasticity.csv");

    Table medians;
    medians.header = {"base_group", "test_group", "median_le"};
    for (const auto& gm : study.group_medians)
        medians.add_row({gm.base_group, gm.test_group, format_double(gm.median)});
    emit_csv(medians, dir / "elasticity_groups.csv");

    // one bar group per test group, one bar per base group
    std::vector<BarGroup> bars;
    for (const auto& [test_name, _] : s.pattern_groups) {
        BarGroup group{test_name, {}};
        for (const auto& gm : study.group_medians)
            if (gm.test_group == test_name) group.bars.emplace_back(gm.base_group, gm.median);
        bars.push_back(std::move(group));
    }
    emit_svg_grouped_bars(bars, "median local elasticity by group", "LE", dir / "elasticity.svg");

    detail::record_output(manifest, dir, "elasticity.csv");
    detail::record_output(manifest, dir, "elasticity_groups.csv");
    detail::record_output(manifest, dir, "elasticity.svg");
    manifest.finished_at = iso8601_utc_now();
    write_manifest(manifest, dir);
    return 0;
}

inline int run_compare_batch(const CommonOptions& opt, std::vector<std::uint64_t> seeds,
                             const std::vector<std::string>& command) {
    RunManifest manifest;
    manifest.command = command;
    manifest.started_at = iso8601_utc_now();
    Scenario s = detail::resolve_inputs(opt, manifest);
    detail::prepare_out_dir(opt.out_dir, opt.force);

    if (seeds.empty()) seeds = {1, 2, 3};
    manifest.seeds = seeds;
    int small = opt.batch_size.value_or(1);
    int large = static_cast<int>(s.dataset.patterns.size()); // "full batch"
    BatchComparison cmp = run_batch_comparison(s, small, large, seeds);

    fs::path dir(opt.out_dir);
    Table rows;
    rows.header = {"group", "batch_size", "seed", "entropy"};
    for (const auto& row : cmp.rows)
        rows.add_row({row.group, std::to_string(row.batch_size), std::to_string(row.seed),
                      format_double(row.entropy)});
    emit_csv(rows, dir / "sparsity.csv");

    Table gaps;
    gaps.header = {"group", "mean_gap_large_minus_small"};
    for (const auto& [group, gap] : cmp.mean_gaps) gaps.add_row({group, format_double(gap)});
    emit_csv(gaps, dir / "sparsity_gaps.csv");

    detail::record_output(manifest, dir, "sparsity.csv");
    detail::record_output(manifest, dir, "sparsity_gaps.csv");
    manifest.finished_at = iso8601_utc_now();
    write_manifest(manifest, dir);
    return 0;
}

inline int run_scenarios() {
    for (const auto& name : builtin_scenario_names()) {
        Scenario s = build_scenario(name);
        std::cout << name << ": " << s.description << "\n";
    }
    return 0;
}

// Entry point shared by the binary and the tests. args excludes the program
// name. Exit codes: 0 success, 1 domain error, 2 usage error.
inline int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"neurashed: a simulator for leveled feature-pathway training dynamics"};
    app.require_subcommand(1);

    CommonOptions opt;
    double sigma = 0.05;
    int mc_samples = 10000;
    std::vector<std::uint64_t> seeds;

    CLI::App* validate_cmd = app.add_subcommand("validate", "check graph/dataset/config files");
    detail::add_input_options(validate_cmd, opt, /*scenario_allowed=*/false);

    CLI::App* train_cmd = app.add_subcommand("train", "run training and emit state snapshots");
    detail::add_input_options(train_cmd, opt);
    detail::add_run_options(train_cmd, opt);

    CLI::App* mi_cmd = app.add_subcommand("mi", "information-bottleneck study (MI curves)");
    detail::add_input_options(mi_cmd, opt);
    detail::add_run_options(mi_cmd, opt);
    mi_cmd->add_option("--sigma", sigma, "noise standard deviation");
    mi_cmd->add_option("--mc-samples", mc_samples, "Monte Carlo sample count");

    CLI::App* elasticity_cmd = app.add_subcommand("elasticity", "all-pairs local elasticity after training");
    detail::add_input_options(elasticity_cmd, opt);
    detail::add_run_options(elasticity_cmd, opt);

    // compare-batch runs one training per seed, so --seed is a list here;
    // --batch-size names the small batch and the large batch is the dataset size.
    CLI::App* compare_cmd = app.add_subcommand("compare-batch", "small-batch vs full-batch sparsity comparison");
    detail::add_input_options(compare_cmd, opt);
    compare_cmd->add_option("--seed", seeds, "seeds, one run per seed (repeatable, default 1 2 3)");
    compare_cmd->add_option("--iters", opt.iters, "training iterations");
    compare_cmd->add_option("--batch-size", opt.batch_size, "the small batch size");
    compare_cmd->add_option("--snapshot-every", opt.snapshot_every, "snapshot cadence");
    compare_cmd->add_option("--out", opt.out_dir, "output directory")->required();
    compare_cmd->add_flag("--force", opt.force, "allow writing into a non-empty directory");

    CLI::App* scenarios_cmd = app.add_subcommand("scenarios", "list built-in scenarios");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << std::flush;
        return 2;
    }

    std::vector<std::string> command;
    command.push_back("neurashed");
    command.insert(command.end(), args.begin(), args.end());

    try {
        if (validate_cmd->parsed()) return run_validate(opt);
        if (train_cmd->parsed()) return run_train(opt, command);
        if (mi_cmd->parsed()) return run_mi(opt, sigma, mc_samples, command);
        if (elasticity_cmd->parsed()) return run_elasticity(opt, command);
        if (compare_cmd->parsed()) return run_compare_batch(opt, seeds, command);
        if (scenarios_cmd->parsed()) return run_scenarios();
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

} // namespace neurashed::cli
