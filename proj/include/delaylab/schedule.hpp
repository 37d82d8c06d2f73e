#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "delaylab/rng.hpp"

namespace delaylab {

/// Base-wait distribution drawn by simulated workers. Either a weighted
/// mixture of scaled Poisson(lambda) variables, or a fixed value (used by
/// tests that need hand-checkable event timings). The second wait of each
/// task is a fresh base draw scaled by second_wait_scale.
struct WaitComponent {
    double weight = 1.0;
    double scale = 1.0;
};

struct WaitDistribution {
    enum class Kind { PoissonMixture, Fixed };

    Kind kind = Kind::PoissonMixture;
    double lambda = 1.0;
    std::vector<WaitComponent> components{{1.0, 1.0}};
    double second_wait_scale = 1.0;
    double fixed_value = 1.0;

    static WaitDistribution poisson_mixture(double lambda, std::vector<WaitComponent> components,
                                            double second_wait_scale);
    static WaitDistribution single_poisson(double lambda, double second_wait_scale);
    static WaitDistribution fixed(double value, double second_wait_scale);

    /// One base draw (first-phase wait). Second-phase waits are
    /// second_wait_scale * sample(rng) with a fresh draw.
    double sample(CounterRng& rng) const;

    nlohmann::json to_json() const;
    static WaitDistribution from_json(const nlohmann::json& j);
};

struct SchedulePair {
    std::int64_t compute_stage = 0;  // r: stage observed before the gradient wait
    std::int64_t apply_stage = 0;    // w: stage at which the gradient lands

    friend bool operator==(const SchedulePair&, const SchedulePair&) = default;
};

struct ScheduleMetadata {
    int n_workers = 1;
    WaitDistribution wait;
    std::uint64_t seed = 0;
};

/// The sorted sequence Q of (compute-stage, apply-stage) pairs that uniquely
/// determines an asynchronous run. Every apply stage in 0..T-1 appears
/// exactly once; compute_stage <= apply_stage for every pair.
struct DelaySchedule {
    std::vector<SchedulePair> pairs;
    std::int64_t num_steps = 0;
    ScheduleMetadata metadata;

    std::int64_t delay(std::size_t i) const {
        return pairs[i].apply_stage - pairs[i].compute_stage;
    }
};

struct ScheduleViolation {
    std::string message;
    std::size_t pair_index = 0;
};

struct ScheduleStats {
    double tau_avg = 0.0;
    std::int64_t tau_max = 0;
    std::int64_t total_delay = 0;
    double delay_variance = 0.0;
    std::map<std::int64_t, std::int64_t> delay_histogram;
    std::int64_t p50 = 0;
    std::int64_t p90 = 0;
    std::int64_t p99 = 0;
    std::int64_t p999 = 0;
};

/// Deterministic discrete-event simulation of n concurrent workers that
/// share a stage counter: each worker repeatedly records the stage, waits,
/// records the stage again while atomically advancing it, waits again, and
/// appends its (r, w) pair, until num_steps pairs exist. Ties in virtual
/// time break toward the lower worker index. Pure function of its arguments.
DelaySchedule generate_schedule(int n_workers, std::int64_t num_steps, const WaitDistribution& wait,
                                std::uint64_t seed, std::vector<int>* worker_of_pair = nullptr);

/// Checks the three schedule invariants (apply stages are a permutation of
/// 0..T-1, r <= w, lexicographic order); reports the first offending pair.
std::optional<ScheduleViolation> validate_schedule(const DelaySchedule& schedule);

ScheduleStats schedule_stats(const DelaySchedule& schedule);
/// Stats over a bare delay sequence (schedule_stats uses this internally).
ScheduleStats compute_delay_stats(std::span<const std::int64_t> delays);

enum class PresetName { A, B, C, D };

PresetName preset_from_string(const std::string& name);
std::string to_string(PresetName name);

/// Wait distribution and worker count for the named preset.
std::pair<int, WaitDistribution> preset_parameters(PresetName name);

DelaySchedule preset(PresetName name, std::int64_t num_steps, std::uint64_t seed);

// File format: one JSON header line with the metadata, then one "r,w" line
// per pair in sorted order.
void write_schedule_jsonl(const DelaySchedule& schedule, std::ostream& out);
DelaySchedule read_schedule_jsonl(std::istream& in);
void write_schedule_file(const DelaySchedule& schedule, const std::string& path);
DelaySchedule read_schedule_file(const std::string& path);

/// CSV histogram "delay,count" in increasing delay order.
void write_histogram_csv(const ScheduleStats& stats, std::ostream& out);

}  // namespace delaylab
