#include "delaylab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "delaylab/io.hpp"
#include "delaylab/rng.hpp"
#include "delaylab/vec.hpp"

namespace delaylab {

namespace {

// Lower median of a sorted vector; deterministic for even counts.
std::int64_t lower_median(std::vector<std::int64_t> values) {
    if (values.empty()) return -1;
    std::sort(values.begin(), values.end());
    return values[(values.size() - 1) / 2];
}

SeedOutcome run_one_seed(const RunArgs& args, std::uint64_t seed) {
    SeedOutcome outcome;
    outcome.seed = seed;
    try {
        NoisyGradientOracle oracle(args.objective, args.sigma, seed);
        ReplayOptions options;
        options.keep_rows = false;
        options.drain_tail = args.drain_tail;
        const TargetResult result = run_to_target(*args.schedule, args.policy, *args.objective,
                                                  oracle, args.x1, args.eps, args.variant, options);
        outcome.success = result.success;
        outcome.first_hit_step = result.first_hit_step;
        outcome.updates = result.record.summary.updates;
        outcome.min_grad_norm = result.record.summary.min_grad_norm;
    } catch (const std::exception& e) {
        outcome.error = e.what();
        outcome.success = false;
    }
    return outcome;
}

}  // namespace

SweepResult sweep(const RunArgs& args, std::span<const std::uint64_t> seeds, int threads) {
    if (!args.schedule) throw std::invalid_argument("sweep: null schedule");
    if (!args.objective) throw std::invalid_argument("sweep: null objective");
    if (seeds.empty()) throw std::invalid_argument("sweep: need at least one seed");

    SweepResult result;
    result.rows.resize(seeds.size());

    const auto n = static_cast<std::int64_t>(seeds.size());
#ifdef _OPENMP
    if (threads != 1) {
        const int num_threads = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(num_threads)
        for (std::int64_t i = 0; i < n; ++i) result.rows[i] = run_one_seed(args, seeds[i]);
    } else {
        for (std::int64_t i = 0; i < n; ++i) result.rows[i] = run_one_seed(args, seeds[i]);
    }
#else
    (void)threads;
    for (std::int64_t i = 0; i < n; ++i) result.rows[i] = run_one_seed(args, seeds[i]);
#endif

    const ScheduleStats stats = schedule_stats(*args.schedule);
    result.tau_avg = stats.tau_avg;
    result.tau_max = stats.tau_max;
    aggregate_sweep(result);
    return result;
}

void aggregate_sweep(SweepResult& result) {
    std::size_t successes = 0;
    std::vector<std::int64_t> hits;
    for (const auto& row : result.rows) {
        if (row.success) {
            ++successes;
            hits.push_back(row.first_hit_step);
        }
    }
    result.success_rate =
        result.rows.empty() ? 0.0
                            : static_cast<double>(successes) / static_cast<double>(result.rows.size());
    result.median_first_hit_step = lower_median(std::move(hits));
}

ThresholdRecommendation recommend_threshold(std::span<const double> distances, double percentile) {
    if (distances.empty()) {
        throw std::invalid_argument("recommend_threshold: empty distance list");
    }
    if (!(percentile > 0.0) || percentile > 1.0) {
        throw std::invalid_argument("recommend_threshold: percentile must be in (0, 1]");
    }
    std::vector<double> sorted(distances.begin(), distances.end());
    std::sort(sorted.begin(), sorted.end());
    const auto n = sorted.size();
    auto rank = static_cast<std::size_t>(std::ceil(percentile * static_cast<double>(n)));
    if (rank < 1) rank = 1;
    if (rank > n) rank = n;
    return ThresholdRecommendation{percentile, sorted[rank - 1], n};
}

std::vector<CompareRow> compare_policies(std::span<const NamedSchedule> schedules,
                                         std::span<const PolicyDescriptor> policies,
                                         const RunArgs& base_args,
                                         std::span<const std::uint64_t> seeds, int threads) {
    if (schedules.empty() || policies.empty()) {
        throw std::invalid_argument("compare_policies: need at least one schedule and one policy");
    }
    std::vector<CompareRow> table;
    table.reserve(schedules.size() * policies.size());
    for (const auto& named : schedules) {
        for (const auto& policy : policies) {
            RunArgs args = base_args;
            args.schedule = named.schedule;
            args.policy = policy;
            const SweepResult swept = sweep(args, seeds, threads);
            CompareRow row;
            row.schedule_name = named.name;
            row.policy_name = policy.name();
            row.tau_avg = swept.tau_avg;
            row.success_rate = swept.success_rate;
            row.median_first_hit_step = swept.median_first_hit_step;
            std::vector<std::int64_t> updates;
            updates.reserve(swept.rows.size());
            for (const auto& r : swept.rows) updates.push_back(r.updates);
            row.median_updates = lower_median(std::move(updates));
            table.push_back(std::move(row));
        }
    }
    return table;
}

void write_sweep_csv(const SweepResult& result, std::ostream& out) {
    out << "seed,success,first_hit_step,updates,min_grad_norm,error\n";
    for (const auto& row : result.rows) {
        out << row.seed << ',' << (row.success ? 1 : 0) << ',' << row.first_hit_step << ','
            << row.updates << ',' << format_double(row.min_grad_norm) << ',' << row.error << '\n';
    }
}

nlohmann::json sweep_to_json(const SweepResult& result) {
    nlohmann::json per_seed = nlohmann::json::array();
    for (const auto& row : result.rows) {
        nlohmann::json r;
        r["seed"] = row.seed;
        r["success"] = row.success;
        r["first_hit_step"] = row.first_hit_step;
        r["updates"] = row.updates;
        r["min_grad_norm"] = row.min_grad_norm;
        if (!row.error.empty()) r["error"] = row.error;
        per_seed.push_back(std::move(r));
    }
    nlohmann::json j;
    j["rows"] = per_seed;
    j["success_rate"] = result.success_rate;
    j["median_first_hit_step"] = result.median_first_hit_step;
    j["tau_avg"] = result.tau_avg;
    j["tau_max"] = result.tau_max;
    return j;
}

void write_compare_csv(std::span<const CompareRow> rows, std::ostream& out) {
    out << "schedule,policy,tau_avg,success_rate,median_first_hit_step,median_updates\n";
    for (const auto& row : rows) {
        out << row.schedule_name << ',' << row.policy_name << ',' << format_double(row.tau_avg)
            << ',' << format_double(row.success_rate) << ',' << row.median_first_hit_step << ','
            << row.median_updates << '\n';
    }
}

bool update_count_bound_holds(std::int64_t updates, std::int64_t num_steps,
                              std::int64_t total_delay) {
    // k >= T / (4 (sum_d / T + 1))  <=>  4 k (sum_d + T) >= T^2
    const auto lhs = static_cast<unsigned __int128>(4) *
                     static_cast<unsigned __int128>(updates) *
                     static_cast<unsigned __int128>(total_delay + num_steps);
    const auto rhs = static_cast<unsigned __int128>(num_steps) *
                     static_cast<unsigned __int128>(num_steps);
    return lhs >= rhs;
}

double update_count_bound(std::int64_t num_steps, double tau_avg) {
    return static_cast<double>(num_steps) / (4.0 * (tau_avg + 1.0));
}

std::vector<DescentCheckCase> descent_check(const Objective& objective, double eps, double sigma,
                                            std::uint64_t seed, int num_pairs, int num_draws) {
    if (!(eps > 0.0)) throw std::invalid_argument("descent_check: eps must be positive");
    if (num_pairs < 1 || num_draws < 1) {
        throw std::invalid_argument("descent_check: need at least one pair and one draw");
    }
    const std::size_t d = objective.dimension();
    const double beta = objective.beta();
    const double eta = step_size_nonconvex(beta, eps, sigma);
    const double radius = eps / (2.0 * beta);
    const int draws = sigma == 0.0 ? 1 : num_draws;

    CounterRng sampler(seed, 0);
    std::vector<DescentCheckCase> cases;
    cases.reserve(static_cast<std::size_t>(num_pairs));

    std::vector<double> x_stale(d), x(d), grad_stale(d), noise(d), stepped(d);
    for (int pair_index = 0; pair_index < num_pairs; ++pair_index) {
        // Stale point with a gradient strictly larger than eps.
        double grad_norm = 0.0;
        for (int attempt = 0; attempt < 1000; ++attempt) {
            for (std::size_t i = 0; i < d; ++i) x_stale[i] = 4.0 * sampler.next_unit() - 2.0;
            objective.gradient(x_stale, grad_stale);
            grad_norm = norm(grad_stale);
            if (grad_norm > eps) break;
        }
        if (!(grad_norm > eps)) {
            throw std::runtime_error("descent_check: could not sample a point with a large gradient");
        }
        // Current point within the acceptance radius of the stale point.
        double direction_norm = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            x[i] = sampler.next_gaussian();
            direction_norm += x[i] * x[i];
        }
        direction_norm = std::sqrt(direction_norm);
        const double r = radius * sampler.next_unit();
        for (std::size_t i = 0; i < d; ++i) x[i] = x_stale[i] + r * x[i] / direction_norm;

        const double f_x = objective.eval(x);
        double sum = 0.0;
        double sum_sq = 0.0;
        for (int j = 0; j < draws; ++j) {
            if (sigma > 0.0) {
                gaussian_noise_vector(seed + 1, static_cast<std::uint64_t>(pair_index) * draws + j,
                                      sigma, noise);
                for (std::size_t i = 0; i < d; ++i) {
                    stepped[i] = x[i] - eta * (grad_stale[i] + noise[i]);
                }
            } else {
                for (std::size_t i = 0; i < d; ++i) stepped[i] = x[i] - eta * grad_stale[i];
            }
            const double delta = f_x - objective.eval(stepped);
            sum += delta;
            sum_sq += delta * delta;
        }
        DescentCheckCase c;
        c.grad_norm_at_stale = grad_norm;
        c.mc_estimate = sum / draws;
        c.bound = 0.25 * eta * grad_norm * grad_norm;
        const double variance =
            draws > 1 ? std::max(0.0, (sum_sq - sum * sum / draws) / (draws - 1)) : 0.0;
        c.std_error = std::sqrt(variance / draws);
        c.passed = c.mc_estimate >= c.bound - 3.0 * c.std_error;
        cases.push_back(c);
    }
    return cases;
}

}  // namespace delaylab
