#include "delaylab/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "delaylab/vec.hpp"

namespace delaylab {

namespace {

void check_step_inputs(std::span<const double> x_t, std::span<const double> g) {
    if (x_t.size() != g.size()) throw std::invalid_argument("step: dimension mismatch");
    if (!all_finite(x_t) || !all_finite(g)) throw std::invalid_argument("step: non-finite input");
}

PickyVariant variant_from_string(const std::string& s) {
    if (s == "nonconvex") return PickyVariant::Nonconvex;
    if (s == "convex") return PickyVariant::Convex;
    throw std::invalid_argument("unknown policy variant '" + s + "'");
}

std::string to_string(PickyVariant v) {
    return v == PickyVariant::Nonconvex ? "nonconvex" : "convex";
}

}  // namespace

StepDecision picky_step(const PickyConfig& cfg, std::span<const double> x_t,
                        std::span<const double> x_stale, std::span<const double> g) {
    check_step_inputs(x_t, g);
    if (x_stale.size() != x_t.size()) throw std::invalid_argument("picky_step: dimension mismatch");
    if (!all_finite(x_stale)) throw std::invalid_argument("picky_step: non-finite input");

    StepDecision decision;
    decision.new_iterate.assign(x_t.begin(), x_t.end());
    if (distance(x_t, x_stale) <= cfg.threshold) {
        decision.accepted = true;
        step_towards(x_t, cfg.eta, g, decision.new_iterate);
    }
    return decision;
}

StepDecision sgd_step(double eta, std::span<const double> x_t, std::span<const double> g) {
    check_step_inputs(x_t, g);
    StepDecision decision;
    decision.accepted = true;
    decision.new_iterate.resize(x_t.size());
    step_towards(x_t, eta, g, decision.new_iterate);
    return decision;
}

double step_size_nonconvex(double beta, double eps, double sigma) {
    if (!(beta > 0.0) || !(eps > 0.0)) {
        throw std::invalid_argument("step_size_nonconvex: beta and eps must be positive");
    }
    const double noise_factor =
        sigma > 0.0 ? std::min(1.0, (eps * eps) / (sigma * sigma)) : 1.0;
    return noise_factor / (4.0 * beta);
}

double step_size_convex(double beta, double eps, double sigma) {
    if (!(beta > 0.0) || !(eps > 0.0)) {
        throw std::invalid_argument("step_size_convex: beta and eps must be positive");
    }
    const double smooth_term = 1.0 / (16.0 * beta);
    if (sigma <= 0.0) return smooth_term;
    return std::min(smooth_term, eps / (8.0 * sigma * sigma));
}

std::int64_t min_steps_nonconvex(double beta, double f_bound, double eps, double sigma,
                                 double tau_avg) {
    if (!(beta > 0.0) || !(f_bound > 0.0) || !(eps > 0.0)) {
        throw std::invalid_argument("min_steps_nonconvex: beta, F, eps must be positive");
    }
    const double eps2 = eps * eps;
    const double value =
        500.0 * beta * f_bound * (sigma * sigma / (eps2 * eps2) + (tau_avg + 1.0) / eps2);
    return static_cast<std::int64_t>(std::ceil(value));
}

std::int64_t min_steps_convex(double dist_bound, double beta, double eps, double sigma,
                              double tau_avg) {
    if (!(beta > 0.0) || !(dist_bound > 0.0) || !(eps > 0.0)) {
        throw std::invalid_argument("min_steps_convex: F, beta, eps must be positive");
    }
    const double value = 1600.0 * dist_bound * dist_bound *
                         (sigma * sigma / (eps * eps) + beta * (tau_avg + 1.0) / eps);
    return static_cast<std::int64_t>(std::ceil(value));
}

LrSchedule LrSchedule::constant(double base_eta) {
    LrSchedule s;
    s.kind = Kind::Constant;
    s.base_eta = base_eta;
    return s;
}

LrSchedule LrSchedule::piecewise(double base_eta,
                                 std::vector<std::pair<std::int64_t, double>> bps) {
    LrSchedule s;
    s.kind = Kind::Piecewise;
    s.base_eta = base_eta;
    std::sort(bps.begin(), bps.end());
    for (const auto& [step, multiplier] : bps) {
        if (!(multiplier > 0.0)) {
            throw std::invalid_argument("lr schedule: multipliers must be positive");
        }
    }
    s.breakpoints = std::move(bps);
    return s;
}

LrSchedule LrSchedule::cosine(double base_eta, std::int64_t decay_steps) {
    if (decay_steps < 1) throw std::invalid_argument("lr schedule: decay_steps must be positive");
    LrSchedule s;
    s.kind = Kind::Cosine;
    s.base_eta = base_eta;
    s.decay_steps = decay_steps;
    return s;
}

double lr_at(const LrSchedule& schedule, std::int64_t step) {
    if (step < 0) throw std::invalid_argument("lr_at: step must be nonnegative");
    switch (schedule.kind) {
        case LrSchedule::Kind::Constant:
            return schedule.base_eta;
        case LrSchedule::Kind::Piecewise: {
            double multiplier = 1.0;
            for (const auto& [bp_step, bp_mult] : schedule.breakpoints) {
                if (step >= bp_step) multiplier = bp_mult;
                else break;
            }
            return schedule.base_eta * multiplier;
        }
        case LrSchedule::Kind::Cosine: {
            const double progress =
                static_cast<double>(std::min(step, schedule.decay_steps)) /
                static_cast<double>(schedule.decay_steps);
            const double factor =
                0.5 * (1.0 + std::cos(3.141592653589793238462643383279502884 * progress));
            return schedule.base_eta * std::max(factor, 1e-8);
        }
    }
    throw std::logic_error("lr_at: unknown schedule kind");
}

nlohmann::json LrSchedule::to_json() const {
    nlohmann::json j;
    switch (kind) {
        case Kind::Constant:
            j["kind"] = "constant";
            break;
        case Kind::Piecewise: {
            j["kind"] = "piecewise";
            nlohmann::json bps = nlohmann::json::array();
            for (const auto& [step, mult] : breakpoints) {
                bps.push_back(nlohmann::json::array({step, mult}));
            }
            j["breakpoints"] = bps;
            break;
        }
        case Kind::Cosine:
            j["kind"] = "cosine";
            j["decay_steps"] = decay_steps;
            break;
    }
    return j;
}

LrSchedule LrSchedule::from_json(const nlohmann::json& j, double base_eta) {
    const std::string kind = j.value("kind", std::string("constant"));
    if (kind == "constant") return constant(base_eta);
    if (kind == "piecewise") {
        std::vector<std::pair<std::int64_t, double>> bps;
        for (const auto& bp : j.at("breakpoints")) {
            bps.emplace_back(bp.at(0).get<std::int64_t>(), bp.at(1).get<double>());
        }
        return piecewise(base_eta, std::move(bps));
    }
    if (kind == "cosine") return cosine(base_eta, j.at("decay_steps").get<std::int64_t>());
    throw std::invalid_argument("unknown lr schedule kind '" + kind + "'");
}

StepDecision PolicyDescriptor::apply(std::int64_t step, std::span<const double> x_t,
                                     std::span<const double> x_stale,
                                     std::span<const double> g) const {
    const double eta_t = lr_at(lr, step);
    if (kind == PolicyKind::Sgd) return sgd_step(eta_t, x_t, g);
    PickyConfig cfg{eta_t, threshold, variant};
    return picky_step(cfg, x_t, x_stale, g);
}

std::string PolicyDescriptor::name() const {
    if (kind == PolicyKind::Sgd) return "sgd";
    return variant == PickyVariant::Convex ? "picky-convex" : "picky";
}

nlohmann::json PolicyDescriptor::to_json() const {
    nlohmann::json j;
    j["policy"] = kind == PolicyKind::Picky ? "picky" : "sgd";
    j["eta"] = eta;
    if (kind == PolicyKind::Picky) {
        j["variant"] = to_string(variant);
        j["threshold"] = threshold;
    }
    j["lr"] = lr.to_json();
    return j;
}

PolicyDescriptor PolicyDescriptor::from_json(const nlohmann::json& j) {
    PolicyDescriptor p;
    const std::string kind = j.at("policy").get<std::string>();
    if (kind == "picky") {
        p.kind = PolicyKind::Picky;
        p.variant = variant_from_string(j.value("variant", std::string("nonconvex")));
        p.threshold = j.at("threshold").get<double>();
        if (!(p.threshold > 0.0)) {
            throw std::invalid_argument("policy: threshold must be positive");
        }
    } else if (kind == "sgd") {
        p.kind = PolicyKind::Sgd;
    } else {
        throw std::invalid_argument("unknown policy '" + kind + "'");
    }
    p.eta = j.at("eta").get<double>();
    if (!(p.eta > 0.0)) throw std::invalid_argument("policy: eta must be positive");
    p.lr = j.contains("lr") ? LrSchedule::from_json(j.at("lr"), p.eta)
                            : LrSchedule::constant(p.eta);
    return p;
}

WorkerTickResult worker_tick(const WorkerState& state, const PickyConfig& cfg,
                             std::span<const double> server_iterate,
                             const NoisyGradientOracle& oracle, std::uint64_t draw_index) {
    if (state.phase != WorkerPhase::AwaitingServer) {
        throw std::invalid_argument("worker_tick: worker is not awaiting the server iterate");
    }
    if (server_iterate.size() != state.local_iterate.size()) {
        throw std::invalid_argument("worker_tick: dimension mismatch");
    }

    WorkerTickResult result;
    result.next_state.phase = WorkerPhase::AwaitingServer;

    std::vector<double> g = oracle.sample(state.local_iterate, draw_index);
    if (distance(state.local_iterate, server_iterate) <= cfg.threshold) {
        result.next_state.local_iterate.resize(server_iterate.size());
        step_towards(server_iterate, cfg.eta, g, result.next_state.local_iterate);
        result.update_to_send = std::move(g);
    } else {
        result.next_state.local_iterate.assign(server_iterate.begin(), server_iterate.end());
    }
    return result;
}

}  // namespace delaylab
