#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "delaylab/objectives.hpp"

namespace delaylab {

enum class PickyVariant { Nonconvex, Convex };

/// Parameters of the distance-gated policy: a stale gradient is applied only
/// when the current iterate lies within `threshold` of the iterate the
/// gradient was computed at.
struct PickyConfig {
    double eta = 0.0;
    double threshold = 0.0;
    PickyVariant variant = PickyVariant::Nonconvex;
};

struct StepDecision {
    bool accepted = false;
    std::vector<double> new_iterate;
};

/// Distance test is inclusive: distance exactly equal to the threshold
/// still accepts.
StepDecision picky_step(const PickyConfig& cfg, std::span<const double> x_t,
                        std::span<const double> x_stale, std::span<const double> g);

/// Unconditional update x - eta * g.
StepDecision sgd_step(double eta, std::span<const double> x_t, std::span<const double> g);

// Step-size and iteration-count calculators. sigma = 0 selects the
// noise-free branch of each formula.
double step_size_nonconvex(double beta, double eps, double sigma);
double step_size_convex(double beta, double eps, double sigma);
std::int64_t min_steps_nonconvex(double beta, double f_bound, double eps, double sigma,
                                 double tau_avg);
std::int64_t min_steps_convex(double dist_bound, double beta, double eps, double sigma,
                              double tau_avg);

struct LrSchedule {
    enum class Kind { Constant, Piecewise, Cosine };

    Kind kind = Kind::Constant;
    double base_eta = 0.0;
    /// Piecewise: (step, multiplier) breakpoints, sorted by step; the active
    /// multiplier is the last breakpoint at or before the current step
    /// (1 before the first breakpoint).
    std::vector<std::pair<std::int64_t, double>> breakpoints;
    /// Cosine: decay duration in steps; the rate is floored at 1e-8 of base.
    std::int64_t decay_steps = 1;

    static LrSchedule constant(double base_eta);
    static LrSchedule piecewise(double base_eta, std::vector<std::pair<std::int64_t, double>> bps);
    static LrSchedule cosine(double base_eta, std::int64_t decay_steps);

    nlohmann::json to_json() const;
    static LrSchedule from_json(const nlohmann::json& j, double base_eta);
};

double lr_at(const LrSchedule& schedule, std::int64_t step);

enum class PolicyKind { Picky, Sgd };

/// Serializable policy description, resolved per step by the replay engine.
struct PolicyDescriptor {
    PolicyKind kind = PolicyKind::Sgd;
    PickyVariant variant = PickyVariant::Nonconvex;
    double eta = 0.0;
    double threshold = 0.0;  // picky only
    LrSchedule lr = LrSchedule::constant(0.0);

    /// One policy step with the rate for `step` taken from the lr schedule.
    StepDecision apply(std::int64_t step, std::span<const double> x_t,
                       std::span<const double> x_stale, std::span<const double> g) const;

    std::string name() const;
    nlohmann::json to_json() const;
    static PolicyDescriptor from_json(const nlohmann::json& j);
};

enum class WorkerPhase { AwaitingGradient, AwaitingServer };

/// Worker-side state of the parameter-server protocol: the local iterate the
/// next gradient is computed at, plus the protocol phase.
struct WorkerState {
    std::vector<double> local_iterate;
    WorkerPhase phase = WorkerPhase::AwaitingServer;
};

struct WorkerTickResult {
    std::optional<std::vector<double>> update_to_send;
    WorkerState next_state;
};

/// One protocol iteration: computes the stochastic gradient at the local
/// iterate, reads the server iterate exactly once, and either ships the
/// gradient and jumps to the post-update point, or adopts the server
/// iterate unchanged.
WorkerTickResult worker_tick(const WorkerState& state, const PickyConfig& cfg,
                             std::span<const double> server_iterate,
                             const NoisyGradientOracle& oracle, std::uint64_t draw_index);

}  // namespace delaylab
