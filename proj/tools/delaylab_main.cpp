// delaylab: deterministic replay laboratory for stochastic optimization
// under arbitrary gradient delays.
//
// Subcommands:
//   gen-schedule        generate a delay schedule (JSONL) + histogram CSV
//   run                 replay one config; writes trajectory CSV + summary JSON
//   sweep               run one config across oracle seeds; aggregate CSV/JSON
//   compare             sweep every (schedule, policy) combination in a config
//   audit               invariant checks: schedule validity, determinism,
//                       update-count bound, expected-descent inequality
//   recommend-threshold pilot-run distance logging + percentile threshold
//
// Exit codes: 0 ok, 2 invalid config/arguments, 3 replay fault,
// 4 audit violation.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "delaylab/config.hpp"
#include "delaylab/io.hpp"
#include "delaylab/metrics.hpp"
#include "delaylab/objectives.hpp"
#include "delaylab/replay.hpp"
#include "delaylab/schedule.hpp"

namespace {

namespace fs = std::filesystem;
using namespace delaylab;

constexpr int kExitOk = 0;
constexpr int kExitBadConfig = 2;
constexpr int kExitReplayFault = 3;
constexpr int kExitAuditViolation = 4;

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::vector<std::uint64_t> seeds;
    bool drain_tail = false;
    int threads = 0;
};

ExperimentConfig load_config(const CommonArgs& args) {
    ExperimentConfig config = ExperimentConfig::load(args.config_path);
    if (!args.out_dir.empty()) config.out_dir = args.out_dir;
    if (!args.seeds.empty()) config.seeds = args.seeds;
    if (args.drain_tail) config.drain_tail = true;
    return config;
}

WaitDistribution parse_mixture(const std::string& spec, double lambda, double second_wait_scale) {
    // "0.92:1,0.08:150" -> weighted mixture of scaled Poisson components.
    std::vector<WaitComponent> components;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) {
            throw std::invalid_argument("mixture component '" + item + "' is not weight:scale");
        }
        components.push_back(
            {std::stod(item.substr(0, colon)), std::stod(item.substr(colon + 1))});
    }
    return WaitDistribution::poisson_mixture(lambda, components, second_wait_scale);
}

int cmd_gen_schedule(const std::string& preset_name, int workers, double lambda,
                     const std::string& mixture, double second_wait_scale, std::int64_t steps,
                     std::uint64_t seed, const std::string& out_dir) {
    DelaySchedule schedule;
    if (!preset_name.empty()) {
        schedule = preset(preset_from_string(preset_name), steps, seed);
    } else {
        const WaitDistribution wait =
            mixture.empty() ? WaitDistribution::single_poisson(lambda, second_wait_scale)
                            : parse_mixture(mixture, lambda, second_wait_scale);
        schedule = generate_schedule(workers, steps, wait, seed);
    }
    const ScheduleStats stats = schedule_stats(schedule);

    fs::create_directories(out_dir);
    const std::string schedule_path = (fs::path(out_dir) / "schedule.jsonl").string();
    const std::string histogram_path = (fs::path(out_dir) / "histogram.csv").string();
    write_schedule_file(schedule, schedule_path);
    write_file_atomic(histogram_path, [&](std::ostream& out) { write_histogram_csv(stats, out); });

    std::cout << "schedule: " << schedule_path << "\n"
              << "histogram: " << histogram_path << "\n"
              << "tau_avg=" << stats.tau_avg << " tau_max=" << stats.tau_max << "\n";
    return kExitOk;
}

int cmd_run(const CommonArgs& args) {
    const ExperimentConfig config = load_config(args);
    const ResolvedExperiment experiment = resolve(config);
    NoisyGradientOracle oracle(experiment.objective, experiment.sigma, experiment.oracle_seed);

    ReplayOptions options;
    options.drain_tail = config.drain_tail;
    const TargetResult result =
        run_to_target(experiment.schedule, config.primary_policy(), *experiment.objective, oracle,
                      experiment.x1, config.eps, config.variant, options);

    fs::create_directories(config.out_dir);
    const fs::path dir(config.out_dir);
    write_file_atomic((dir / "trajectory.csv").string(),
                      [&](std::ostream& out) { write_trajectory_csv(result.record, out); });
    nlohmann::json summary = summary_to_json(result.record);
    summary["success"] = result.success;
    summary["first_hit_step"] = result.first_hit_step;
    summary["eps"] = config.eps;
    write_file_atomic((dir / "summary.json").string(),
                      [&](std::ostream& out) { out << summary.dump(2) << "\n"; });
    write_file_atomic((dir / "config.json").string(),
                      [&](std::ostream& out) { out << config.canonical_bytes(); });

    std::cout << "steps=" << result.record.summary.num_steps
              << " updates=" << result.record.summary.updates
              << " min_grad_norm=" << result.record.summary.min_grad_norm
              << " success=" << (result.success ? 1 : 0)
              << " first_hit_step=" << result.first_hit_step
              << " hash=" << trajectory_hash_hex(result.record) << "\n";
    return kExitOk;
}

int cmd_sweep(const CommonArgs& args) {
    ExperimentConfig config = load_config(args);
    if (config.seeds.empty()) {
        throw std::invalid_argument("sweep: config has no seeds (use \"seeds\" or --seeds)");
    }
    const ResolvedExperiment experiment = resolve(config);
    const SweepResult result =
        sweep(experiment.run_args(config), config.seeds, args.threads);

    fs::create_directories(config.out_dir);
    const fs::path dir(config.out_dir);
    write_file_atomic((dir / "sweep.csv").string(),
                      [&](std::ostream& out) { write_sweep_csv(result, out); });
    write_file_atomic((dir / "sweep.json").string(), [&](std::ostream& out) {
        out << sweep_to_json(result).dump(2) << "\n";
    });

    std::cout << "seeds=" << result.rows.size() << " success_rate=" << result.success_rate
              << " median_first_hit_step=" << result.median_first_hit_step << "\n";
    return kExitOk;
}

int cmd_compare(const CommonArgs& args) {
    ExperimentConfig config = load_config(args);
    if (config.seeds.empty()) throw std::invalid_argument("compare: config has no seeds");
    if (config.policies.empty()) throw std::invalid_argument("compare: config has no policies");
    const ResolvedExperiment experiment = resolve(config);

    const NamedSchedule named{config.schedule.preset ? to_string(*config.schedule.preset)
                                                     : std::string("schedule"),
                              &experiment.schedule};
    const std::vector<CompareRow> table =
        compare_policies({&named, 1}, config.policies, experiment.run_args(config), config.seeds,
                         args.threads);

    fs::create_directories(config.out_dir);
    write_file_atomic((fs::path(config.out_dir) / "compare.csv").string(),
                      [&](std::ostream& out) { write_compare_csv(table, out); });
    for (const auto& row : table) {
        std::cout << row.schedule_name << "," << row.policy_name
                  << " success_rate=" << row.success_rate
                  << " median_first_hit_step=" << row.median_first_hit_step << "\n";
    }
    return kExitOk;
}

int cmd_audit(const CommonArgs& args) {
    const ExperimentConfig config = load_config(args);
    const ResolvedExperiment experiment = resolve(config);

    auto fail = [](const std::string& name, const std::string& detail) {
        std::cout << "[VIOLATION] " << name << ": " << detail << "\n";
        std::cerr << "audit failed: " << name << "\n";
        return kExitAuditViolation;
    };

    // 1. Schedule invariants.
    if (const auto violation = validate_schedule(experiment.schedule)) {
        return fail("schedule", violation->message + " at pair " +
                                    std::to_string(violation->pair_index));
    }
    std::cout << "[OK] schedule: " << experiment.schedule.num_steps << " pairs valid\n";

    // 2. Determinism: two replays of the same config must hash identically.
    NoisyGradientOracle oracle(experiment.objective, experiment.sigma, experiment.oracle_seed);
    ReplayOptions options;
    options.keep_rows = false;
    options.drain_tail = config.drain_tail;
    const RunRecord first = replay(experiment.schedule, config.primary_policy(),
                                   *experiment.objective, oracle, experiment.x1, options);
    const RunRecord second = replay(experiment.schedule, config.primary_policy(),
                                    *experiment.objective, oracle, experiment.x1, options);
    if (first.trajectory_hash != second.trajectory_hash) {
        return fail("determinism", "two replays produced different trajectory hashes");
    }
    std::cout << "[OK] determinism: hash " << trajectory_hash_hex(first) << " reproduced\n";

    // 3. Update-count bound on a drained distance-gated run.
    if (config.primary_policy().kind == PolicyKind::Picky) {
        ReplayOptions drained = options;
        drained.drain_tail = true;
        const RunRecord run = replay(experiment.schedule, config.primary_policy(),
                                     *experiment.objective, oracle, experiment.x1, drained);
        const ScheduleStats stats = schedule_stats(experiment.schedule);
        const bool holds = update_count_bound_holds(run.summary.updates, run.summary.num_steps,
                                                    stats.total_delay);
        const double bound = update_count_bound(run.summary.num_steps, stats.tau_avg);
        if (!holds) {
            return fail("update-count",
                        "k=" + std::to_string(run.summary.updates) + " below bound " +
                            std::to_string(bound));
        }
        if (stats.total_delay == 0 && run.summary.updates != run.summary.num_steps) {
            return fail("update-count", "zero-delay run must accept every step");
        }
        std::cout << "[OK] update-count: k=" << run.summary.updates << " >= T/(4(tau+1))=" << bound
                  << "\n";
    } else {
        std::cout << "[--] update-count: not a distance-gated policy, skipped\n";
    }

    // 4. Expected one-step descent under the theorem step size.
    const auto cases = descent_check(*experiment.objective, config.eps > 0.0 ? config.eps : 0.5,
                                     experiment.sigma, experiment.oracle_seed, 10, 10000);
    for (std::size_t i = 0; i < cases.size(); ++i) {
        if (!cases[i].passed) {
            return fail("descent", "case " + std::to_string(i) + ": estimate " +
                                       std::to_string(cases[i].mc_estimate) + " below bound " +
                                       std::to_string(cases[i].bound));
        }
    }
    std::cout << "[OK] descent: " << cases.size() << " sampled pairs satisfy the bound\n";
    return kExitOk;
}

int cmd_recommend_threshold(const CommonArgs& args, double percentile_flag) {
    ExperimentConfig config = load_config(args);
    if (percentile_flag > 0.0) config.percentile = percentile_flag;
    const ResolvedExperiment experiment = resolve(config);

    // Pilot run with oracle seed 0; the logged accept-test distances stand in
    // for a "typical execution" of this schedule.
    NoisyGradientOracle oracle(experiment.objective, experiment.sigma, 0);
    std::vector<double> distances;
    ReplayOptions options;
    options.keep_rows = false;
    options.record_exact = false;
    options.drain_tail = config.drain_tail;
    options.distance_sink = &distances;
    replay(experiment.schedule, config.primary_policy(), *experiment.objective, oracle,
           experiment.x1, options);

    const ThresholdRecommendation rec = recommend_threshold(distances, config.percentile);
    nlohmann::json j;
    j["percentile"] = rec.percentile;
    j["recommended_threshold"] = rec.recommended_threshold;
    j["sample_count"] = rec.sample_count;
    fs::create_directories(config.out_dir);
    write_file_atomic((fs::path(config.out_dir) / "threshold.json").string(),
                      [&](std::ostream& out) { out << j.dump(2) << "\n"; });
    std::cout << "recommended_threshold=" << rec.recommended_threshold
              << " (percentile=" << rec.percentile << ", samples=" << rec.sample_count << ")\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deterministic replay laboratory for delayed-gradient optimization"};
    app.require_subcommand(1);

    CommonArgs common;

    // gen-schedule
    std::string preset_name;
    int workers = 1;
    double lambda = 4.06;
    std::string mixture;
    double second_wait_scale = 0.2;
    std::int64_t steps = 0;
    std::uint64_t seed = 0;
    std::string gen_out = "out";
    auto* gen = app.add_subcommand("gen-schedule", "generate a delay schedule");
    gen->add_option("--preset", preset_name, "preset name A|B|C|D");
    gen->add_option("--workers", workers, "number of simulated workers");
    gen->add_option("--lambda", lambda, "Poisson rate of the base wait");
    gen->add_option("--mixture", mixture, "mixture components as weight:scale,...");
    gen->add_option("--second-wait-scale", second_wait_scale, "scale of the post-record wait");
    gen->add_option("--steps", steps, "number of schedule steps")->required();
    gen->add_option("--seed", seed, "generator seed");
    gen->add_option("--out", gen_out, "output directory");

    auto add_common = [&](CLI::App* cmd, bool with_seeds) {
        cmd->add_option("--config", common.config_path, "experiment config JSON")->required();
        cmd->add_option("--out", common.out_dir, "override the config's output directory");
        cmd->add_flag("--drain-tail", common.drain_tail, "apply gradients pending at the end");
        if (with_seeds) {
            cmd->add_option("--seeds", common.seeds, "override the config's oracle seeds");
            cmd->add_option("--threads", common.threads, "sweep worker threads (0 = all)");
        }
    };

    auto* run = app.add_subcommand("run", "replay one configuration");
    add_common(run, false);
    auto* swp = app.add_subcommand("sweep", "replay one configuration across oracle seeds");
    add_common(swp, true);
    auto* cmp = app.add_subcommand("compare", "sweep each policy in the config");
    add_common(cmp, true);
    auto* aud = app.add_subcommand("audit", "run the invariant checks");
    add_common(aud, false);
    double percentile_flag = 0.0;
    auto* rec = app.add_subcommand("recommend-threshold",
                                   "suggest an acceptance radius from logged distances");
    add_common(rec, false);
    rec->add_option("--percentile", percentile_flag, "order statistic to report, in (0,1]");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitBadConfig;
    }

    try {
        if (gen->parsed()) {
            return cmd_gen_schedule(preset_name, workers, lambda, mixture, second_wait_scale,
                                    steps, seed, gen_out);
        }
        if (run->parsed()) return cmd_run(common);
        if (swp->parsed()) return cmd_sweep(common);
        if (cmp->parsed()) return cmd_compare(common);
        if (aud->parsed()) return cmd_audit(common);
        if (rec->parsed()) return cmd_recommend_threshold(common, percentile_flag);
    } catch (const ReplayFault& e) {
        std::cerr << "replay fault: " << e.what() << "\n";
        return kExitReplayFault;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadConfig;
    }
    return kExitBadConfig;
}
