#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "delaylab/objectives.hpp"
#include "delaylab/optim.hpp"
#include "delaylab/replay.hpp"
#include "delaylab/schedule.hpp"

namespace delaylab {

/// Everything a single replay needs except the oracle seed.
struct RunArgs {
    const DelaySchedule* schedule = nullptr;
    std::shared_ptr<const Objective> objective;
    double sigma = 0.0;
    PolicyDescriptor policy;
    std::vector<double> x1;
    double eps = 0.0;
    SuccessVariant variant = SuccessVariant::Nonconvex;
    bool drain_tail = false;
};

struct SeedOutcome {
    std::uint64_t seed = 0;
    bool success = false;
    std::int64_t first_hit_step = -1;
    std::int64_t updates = 0;
    double min_grad_norm = 0.0;
    std::string error;  // nonempty if this seed's replay faulted
};

struct SweepResult {
    std::vector<SeedOutcome> rows;
    double success_rate = 0.0;
    std::int64_t median_first_hit_step = -1;  // over successful seeds; -1 if none
    double tau_avg = 0.0;
    std::int64_t tau_max = 0;
};

/// Runs one replay per oracle seed and aggregates. Seeds run independently;
/// with threads != 1 they fan out across an OpenMP loop, and because every
/// row is a pure function of its seed the result is identical to the serial
/// pass (threads = 1, the reference path).
SweepResult sweep(const RunArgs& args, std::span<const std::uint64_t> seeds, int threads = 0);

/// Recomputes the aggregate fields from the per-seed rows.
void aggregate_sweep(SweepResult& result);

struct ThresholdRecommendation {
    double percentile = 0.0;
    double recommended_threshold = 0.0;
    std::size_t sample_count = 0;
};

/// Nearest-rank order statistic: the ceil(percentile * n)-th smallest value.
/// The result is always one of the observed distances.
ThresholdRecommendation recommend_threshold(std::span<const double> distances, double percentile);

struct NamedSchedule {
    std::string name;
    const DelaySchedule* schedule = nullptr;
};

struct CompareRow {
    std::string schedule_name;
    std::string policy_name;
    double tau_avg = 0.0;
    double success_rate = 0.0;
    std::int64_t median_first_hit_step = -1;
    std::int64_t median_updates = 0;
};

/// Sweeps every (schedule, policy) combination with the same seeds.
std::vector<CompareRow> compare_policies(std::span<const NamedSchedule> schedules,
                                         std::span<const PolicyDescriptor> policies,
                                         const RunArgs& base_args,
                                         std::span<const std::uint64_t> seeds, int threads = 0);

void write_sweep_csv(const SweepResult& result, std::ostream& out);
nlohmann::json sweep_to_json(const SweepResult& result);
void write_compare_csv(std::span<const CompareRow> rows, std::ostream& out);

// ---- Invariant oracles -----------------------------------------------------

/// Exact check of the update-count lower bound k >= T / (4 (tau_avg + 1)) on
/// a drained distance-gated run. Evaluated in integer arithmetic:
/// 4 k (sum_d + T) >= T^2, with tau_avg = sum_d / T.
bool update_count_bound_holds(std::int64_t updates, std::int64_t num_steps,
                              std::int64_t total_delay);

/// The bound itself, for reporting.
double update_count_bound(std::int64_t num_steps, double tau_avg);

struct DescentCheckCase {
    double grad_norm_at_stale = 0.0;
    double mc_estimate = 0.0;   // Monte-Carlo mean of f(x) - f(x - eta (grad + N))
    double bound = 0.0;         // (eta / 4) * ||grad f(x')||^2
    double std_error = 0.0;
    bool passed = false;
};

/// Draws (x, x') pairs with ||x - x'|| <= eps/(2 beta) and ||grad f(x')|| >
/// eps, then verifies the expected one-step decrease of f under the
/// theorem's step size against the (eta/4) ||grad f(x')||^2 bound, within
/// three standard errors of the Monte-Carlo mean. With sigma = 0 the check
/// is a deterministic inequality.
std::vector<DescentCheckCase> descent_check(const Objective& objective, double eps, double sigma,
                                            std::uint64_t seed, int num_pairs, int num_draws);

}  // namespace delaylab
