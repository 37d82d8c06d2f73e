#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "delaylab/objectives.hpp"
#include "delaylab/optim.hpp"
#include "delaylab/schedule.hpp"

namespace delaylab {

/// Internal-consistency failure of the replay engine (an invariant breach,
/// not a user error).
class ReplayFault : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct StepRow {
    std::int64_t t = 0;
    std::int64_t delay = 0;
    bool accepted = false;
    double grad_norm = 0.0;  // exact gradient norm at the pre-step iterate
    double f_value = 0.0;    // objective at the pre-step iterate
    double eta = 0.0;
};

struct RunSummary {
    std::int64_t num_steps = 0;
    double tau_avg = 0.0;
    std::int64_t tau_max = 0;
    std::int64_t updates = 0;  // accepted steps k
    double min_grad_norm = 0.0;
    std::int64_t argmin_step = -1;
    double f_initial = 0.0;  // F, measured at the starting iterate
    double f_final = 0.0;
    double wall_time_sec = 0.0;  // excluded from the trajectory hash
};

struct RunRecord {
    std::vector<StepRow> rows;  // one per stage 0..T-1 (empty if not kept)
    RunSummary summary;
    std::vector<double> final_iterate;
    std::uint64_t trajectory_hash = 0;
};

struct ReplayOptions {
    /// Record exact gradient norms per step (needed for stationarity
    /// detection; the policy itself never sees exact gradients).
    bool record_exact = true;
    /// Apply gradients still pending when the pair list is exhausted. Off by
    /// default: the engine then stops at the last catch-up point.
    bool drain_tail = false;
    /// Keep per-step rows in the returned record (summary and hash are
    /// always computed).
    bool keep_rows = true;
    std::function<void(const StepRow&)> row_callback;
    /// If set, receives every accept-test distance ||x_t - x_stale||.
    std::vector<double>* distance_sink = nullptr;
    /// If set, receives the iterate after every applied stage.
    std::vector<std::vector<double>>* iterate_sink = nullptr;
};

/// Deterministic sequential replay of a delay schedule against a policy.
/// For each sorted pair (r, w): record that stage w's gradient comes from
/// stage r, catch the iterate up to stage r by applying pending gradients
/// through the policy, then query the oracle at the current iterate with
/// draw index r and hold the result for stage w. Noise is keyed on the
/// compute stage, so identical inputs give bitwise-identical records.
RunRecord replay(const DelaySchedule& schedule, const PolicyDescriptor& policy,
                 const Objective& objective, const NoisyGradientOracle& oracle,
                 std::vector<double> x1, const ReplayOptions& options = {});

enum class SuccessVariant { Nonconvex, Convex };

struct TargetResult {
    bool success = false;
    std::int64_t first_hit_step = -1;  // 0-based trajectory row
    RunRecord record;
};

/// Replays to completion and observes whether any visited iterate meets the
/// target: gradient norm <= eps (nonconvex) or f - f_min <= eps (convex;
/// requires an objective with a known minimum value).
TargetResult run_to_target(const DelaySchedule& schedule, const PolicyDescriptor& policy,
                           const Objective& objective, const NoisyGradientOracle& oracle,
                           std::vector<double> x1, double eps, SuccessVariant variant,
                           ReplayOptions options = {});

/// Success-probability amplification: up to k_restarts independent runs from
/// the same starting iterate with oracle seeds base_seed, base_seed+1, ...;
/// true as soon as any run hits the target.
bool restart_runner(int k_restarts, std::uint64_t base_seed, const DelaySchedule& schedule,
                    const PolicyDescriptor& policy,
                    const std::shared_ptr<const Objective>& objective, double sigma,
                    const std::vector<double>& x1, double eps, SuccessVariant variant,
                    const ReplayOptions& options = {});

void write_trajectory_csv(const RunRecord& record, std::ostream& out);
nlohmann::json summary_to_json(const RunRecord& record);

/// Hash of the canonical byte serialization of the rows (wall time excluded).
std::string trajectory_hash_hex(const RunRecord& record);

}  // namespace delaylab
