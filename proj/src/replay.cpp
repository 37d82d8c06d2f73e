#include "delaylab/replay.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <utility>

#include "delaylab/io.hpp"
#include "delaylab/vec.hpp"

namespace delaylab {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

inline void fnv_mix(std::uint64_t& h, std::uint64_t value) {
    for (int i = 0; i < 8; ++i) {
        h ^= (value >> (8 * i)) & 0xffu;
        h *= kFnvPrime;
    }
}

inline void fnv_mix_double(std::uint64_t& h, double value) {
    fnv_mix(h, std::bit_cast<std::uint64_t>(value));
}

struct PendingGradient {
    std::vector<double> gradient;
    std::vector<double> iterate_at_compute;
};

// The engine's working state while consuming a schedule.
struct Engine {
    const DelaySchedule& schedule;
    const PolicyDescriptor& policy;
    const Objective& objective;
    const ReplayOptions& options;

    std::int64_t stage = 0;                                   // S
    std::vector<double> iterate;                              // X
    std::map<std::pair<std::int64_t, std::int64_t>, PendingGradient> pending;  // G
    std::vector<std::int64_t> compute_of;                     // F, apply stage -> compute stage

    RunRecord record;
    std::uint64_t hash = kFnvOffset;
    std::vector<double> grad_buffer;

    Engine(const DelaySchedule& s, const PolicyDescriptor& p, const Objective& obj,
           const ReplayOptions& opts, std::vector<double> x1)
        : schedule(s), policy(p), objective(obj), options(opts), iterate(std::move(x1)) {
        compute_of.assign(static_cast<std::size_t>(s.num_steps), -1);
        grad_buffer.resize(objective.dimension());
        record.summary.num_steps = s.num_steps;
        record.summary.f_initial = objective.eval(iterate);
        record.summary.min_grad_norm = std::numeric_limits<double>::infinity();
        if (options.keep_rows) record.rows.reserve(static_cast<std::size_t>(s.num_steps));
    }

    void emit(const StepRow& row) {
        fnv_mix(hash, static_cast<std::uint64_t>(row.t));
        fnv_mix(hash, static_cast<std::uint64_t>(row.delay));
        fnv_mix(hash, row.accepted ? 1 : 0);
        fnv_mix_double(hash, row.grad_norm);
        fnv_mix_double(hash, row.f_value);
        fnv_mix_double(hash, row.eta);
        if (row.accepted) ++record.summary.updates;
        if (options.record_exact && row.grad_norm < record.summary.min_grad_norm) {
            record.summary.min_grad_norm = row.grad_norm;
            record.summary.argmin_step = row.t;
        }
        if (options.keep_rows) record.rows.push_back(row);
        if (options.row_callback) options.row_callback(row);
    }

    StepRow measure(std::int64_t t, std::int64_t delay) {
        StepRow row;
        row.t = t;
        row.delay = delay;
        row.eta = lr_at(policy.lr, t);
        row.f_value = objective.eval(iterate);
        if (options.record_exact) {
            objective.gradient(iterate, grad_buffer);
            row.grad_norm = norm(grad_buffer);
        } else {
            row.grad_norm = std::numeric_limits<double>::quiet_NaN();
        }
        return row;
    }

    // Applies the gradient pending for the current stage through the policy.
    void apply_stage() {
        const std::int64_t s = stage;
        const std::int64_t r = compute_of[static_cast<std::size_t>(s)];
        if (r < 0) throw ReplayFault("replay: no compute stage recorded for stage " +
                                     std::to_string(s));
        const auto it = pending.find({r, s});
        if (it == pending.end()) {
            throw ReplayFault("replay: missing pending gradient for stage " + std::to_string(s));
        }
        PendingGradient entry = std::move(it->second);
        pending.erase(it);

        StepRow row = measure(s, s - r);
        if (options.distance_sink) {
            options.distance_sink->push_back(distance(iterate, entry.iterate_at_compute));
        }
        StepDecision decision = policy.apply(s, iterate, entry.iterate_at_compute, entry.gradient);
        row.accepted = decision.accepted;
        emit(row);
        iterate = std::move(decision.new_iterate);
        if (options.iterate_sink) options.iterate_sink->push_back(iterate);
        ++stage;
    }
};

}  // namespace

RunRecord replay(const DelaySchedule& schedule, const PolicyDescriptor& policy,
                 const Objective& objective, const NoisyGradientOracle& oracle,
                 std::vector<double> x1, const ReplayOptions& options) {
    if (const auto violation = validate_schedule(schedule)) {
        throw std::invalid_argument("replay: invalid schedule (" + violation->message +
                                    " at pair " + std::to_string(violation->pair_index) + ")");
    }
    if (x1.size() != objective.dimension()) {
        throw std::invalid_argument("replay: x1 has wrong dimension");
    }
    if (!all_finite(x1)) throw std::invalid_argument("replay: x1 is not finite");

    const auto start_time = std::chrono::steady_clock::now();
    Engine engine(schedule, policy, objective, options, std::move(x1));

    for (const auto& pair : schedule.pairs) {
        engine.compute_of[static_cast<std::size_t>(pair.apply_stage)] = pair.compute_stage;
        while (engine.stage < pair.compute_stage) engine.apply_stage();
        PendingGradient entry;
        entry.gradient = oracle.sample(engine.iterate,
                                       static_cast<std::uint64_t>(pair.compute_stage));
        entry.iterate_at_compute = engine.iterate;
        engine.pending.emplace(std::make_pair(pair.compute_stage, pair.apply_stage),
                               std::move(entry));
    }

    if (options.drain_tail) {
        while (engine.stage < schedule.num_steps) engine.apply_stage();
    } else {
        // Gradients whose apply stage lies beyond the last catch-up point are
        // never applied; their stages still get rows so the trajectory always
        // has exactly T of them.
        for (std::int64_t s = engine.stage; s < schedule.num_steps; ++s) {
            StepRow row =
                engine.measure(s, s - engine.compute_of[static_cast<std::size_t>(s)]);
            row.accepted = false;
            engine.emit(row);
        }
    }

    RunRecord record = std::move(engine.record);
    record.final_iterate = std::move(engine.iterate);
    record.trajectory_hash = engine.hash;

    const ScheduleStats stats = schedule_stats(schedule);
    record.summary.tau_avg = stats.tau_avg;
    record.summary.tau_max = stats.tau_max;
    record.summary.f_final = objective.eval(record.final_iterate);
    if (!options.record_exact) {
        record.summary.min_grad_norm = std::numeric_limits<double>::quiet_NaN();
    }
    record.summary.wall_time_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
    return record;
}

TargetResult run_to_target(const DelaySchedule& schedule, const PolicyDescriptor& policy,
                           const Objective& objective, const NoisyGradientOracle& oracle,
                           std::vector<double> x1, double eps, SuccessVariant variant,
                           ReplayOptions options) {
    if (!(eps > 0.0)) throw std::invalid_argument("run_to_target: eps must be positive");
    double f_min = 0.0;
    if (variant == SuccessVariant::Convex) {
        const auto known = objective.min_value();
        if (!known) {
            throw std::invalid_argument(
                "run_to_target: convex success criterion needs an objective with a known minimum");
        }
        f_min = *known;
    }
    options.record_exact = true;

    TargetResult result;
    auto downstream = options.row_callback;
    options.row_callback = [&](const StepRow& row) {
        if (result.first_hit_step < 0) {
            const bool hit = variant == SuccessVariant::Nonconvex
                                 ? row.grad_norm <= eps
                                 : row.f_value - f_min <= eps;
            if (hit) result.first_hit_step = row.t;
        }
        if (downstream) downstream(row);
    };

    result.record = replay(schedule, policy, objective, oracle, std::move(x1), options);
    result.success = result.first_hit_step >= 0;
    return result;
}

bool restart_runner(int k_restarts, std::uint64_t base_seed, const DelaySchedule& schedule,
                    const PolicyDescriptor& policy,
                    const std::shared_ptr<const Objective>& objective, double sigma,
                    const std::vector<double>& x1, double eps, SuccessVariant variant,
                    const ReplayOptions& options) {
    if (k_restarts < 1) throw std::invalid_argument("restart_runner: need at least one run");
    for (int i = 0; i < k_restarts; ++i) {
        NoisyGradientOracle oracle(objective, sigma, base_seed + static_cast<std::uint64_t>(i));
        ReplayOptions opts = options;
        opts.keep_rows = false;
        const TargetResult result =
            run_to_target(schedule, policy, *objective, oracle, x1, eps, variant, opts);
        if (result.success) return true;
    }
    return false;
}

void write_trajectory_csv(const RunRecord& record, std::ostream& out) {
    out << "t,d,accepted,grad_norm,f,eta\n";
    for (const auto& row : record.rows) {
        out << row.t << ',' << row.delay << ',' << (row.accepted ? 1 : 0) << ','
            << format_double(row.grad_norm) << ',' << format_double(row.f_value) << ','
            << format_double(row.eta) << '\n';
    }
}

nlohmann::json summary_to_json(const RunRecord& record) {
    const RunSummary& s = record.summary;
    nlohmann::json j;
    j["steps"] = s.num_steps;
    j["tau_avg"] = s.tau_avg;
    j["tau_max"] = s.tau_max;
    j["updates"] = s.updates;
    j["min_grad_norm"] = s.min_grad_norm;
    j["argmin_step"] = s.argmin_step;
    j["f_initial"] = s.f_initial;
    j["f_final"] = s.f_final;
    j["wall_time_sec"] = s.wall_time_sec;
    j["trajectory_hash"] = trajectory_hash_hex(record);
    return j;
}

std::string trajectory_hash_hex(const RunRecord& record) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(record.trajectory_hash));
    return buf;
}

}  // namespace delaylab
