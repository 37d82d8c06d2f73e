#include "delaylab/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "delaylab/io.hpp"

namespace delaylab {

WaitDistribution WaitDistribution::poisson_mixture(double lambda,
                                                   std::vector<WaitComponent> components,
                                                   double second_wait_scale) {
    if (!(lambda > 0.0)) throw std::invalid_argument("wait distribution: lambda must be positive");
    if (components.empty()) throw std::invalid_argument("wait distribution: empty mixture");
    double total_weight = 0.0;
    for (const auto& c : components) {
        if (!(c.weight >= 0.0)) throw std::invalid_argument("wait distribution: negative weight");
        if (!(c.scale > 0.0)) throw std::invalid_argument("wait distribution: scale must be positive");
        total_weight += c.weight;
    }
    if (std::abs(total_weight - 1.0) > 1e-12) {
        throw std::invalid_argument("wait distribution: mixture weights must sum to 1");
    }
    if (!(second_wait_scale >= 0.0)) {
        throw std::invalid_argument("wait distribution: second_wait_scale must be nonnegative");
    }
    WaitDistribution w;
    w.kind = Kind::PoissonMixture;
    w.lambda = lambda;
    w.components = std::move(components);
    w.second_wait_scale = second_wait_scale;
    return w;
}

WaitDistribution WaitDistribution::single_poisson(double lambda, double second_wait_scale) {
    return poisson_mixture(lambda, {{1.0, 1.0}}, second_wait_scale);
}

WaitDistribution WaitDistribution::fixed(double value, double second_wait_scale) {
    if (!(value >= 0.0)) throw std::invalid_argument("wait distribution: fixed value must be nonnegative");
    WaitDistribution w;
    w.kind = Kind::Fixed;
    w.fixed_value = value;
    w.second_wait_scale = second_wait_scale;
    w.components.clear();
    return w;
}

double WaitDistribution::sample(CounterRng& rng) const {
    if (kind == Kind::Fixed) return fixed_value;
    double scale = components.back().scale;
    if (components.size() > 1) {
        const double u = rng.next_unit();
        double cumulative = 0.0;
        for (const auto& c : components) {
            cumulative += c.weight;
            if (u < cumulative) {
                scale = c.scale;
                break;
            }
        }
    }
    return scale * static_cast<double>(rng.next_poisson(lambda));
}

nlohmann::json WaitDistribution::to_json() const {
    nlohmann::json j;
    j["second_wait_scale"] = second_wait_scale;
    if (kind == Kind::Fixed) {
        j["kind"] = "fixed";
        j["value"] = fixed_value;
        return j;
    }
    j["kind"] = "poisson_mixture";
    j["lambda"] = lambda;
    nlohmann::json mixture = nlohmann::json::array();
    for (const auto& c : components) {
        mixture.push_back(nlohmann::json{{"weight", c.weight}, {"scale", c.scale}});
    }
    j["mixture"] = mixture;
    return j;
}

WaitDistribution WaitDistribution::from_json(const nlohmann::json& j) {
    const std::string kind = j.value("kind", std::string("poisson_mixture"));
    const double sws = j.value("second_wait_scale", 1.0);
    if (kind == "fixed") return fixed(j.at("value").get<double>(), sws);
    if (kind != "poisson_mixture") {
        throw std::invalid_argument("wait distribution: unknown kind '" + kind + "'");
    }
    std::vector<WaitComponent> components;
    if (j.contains("mixture")) {
        for (const auto& c : j.at("mixture")) {
            components.push_back({c.at("weight").get<double>(), c.at("scale").get<double>()});
        }
    } else {
        components = {{1.0, 1.0}};
    }
    return poisson_mixture(j.at("lambda").get<double>(), std::move(components), sws);
}

namespace {

enum class WorkerPhase { Start, Record, Append };

struct WorkerSim {
    WorkerPhase phase = WorkerPhase::Start;
    std::int64_t compute_stage = 0;
    std::int64_t apply_stage = 0;
    CounterRng rng;

    explicit WorkerSim(CounterRng r) : rng(r) {}
};

struct Event {
    double time;
    int worker;
};

struct EventLater {
    bool operator()(const Event& a, const Event& b) const {
        if (a.time != b.time) return a.time > b.time;
        return a.worker > b.worker;
    }
};

}  // namespace

DelaySchedule generate_schedule(int n_workers, std::int64_t num_steps, const WaitDistribution& wait,
                                std::uint64_t seed, std::vector<int>* worker_of_pair) {
    if (n_workers < 1) throw std::invalid_argument("generate_schedule: need at least one worker");
    if (num_steps < 1) throw std::invalid_argument("generate_schedule: num_steps must be positive");

    std::vector<WorkerSim> workers;
    workers.reserve(static_cast<std::size_t>(n_workers));
    for (int i = 0; i < n_workers; ++i) {
        workers.emplace_back(CounterRng(seed, static_cast<std::uint64_t>(i)));
    }

    std::priority_queue<Event, std::vector<Event>, EventLater> queue;
    for (int i = 0; i < n_workers; ++i) queue.push({0.0, i});

    std::int64_t stage = 0;
    std::int64_t tasks = num_steps;
    std::vector<SchedulePair> pairs;
    pairs.reserve(static_cast<std::size_t>(num_steps));
    std::vector<int> owners;
    if (worker_of_pair) owners.reserve(static_cast<std::size_t>(num_steps));

    while (!queue.empty()) {
        const Event event = queue.top();
        queue.pop();
        WorkerSim& w = workers[static_cast<std::size_t>(event.worker)];
        switch (w.phase) {
            case WorkerPhase::Start: {
                if (tasks == 0) break;  // worker halts
                --tasks;
                w.compute_stage = stage;
                w.phase = WorkerPhase::Record;
                queue.push({event.time + wait.sample(w.rng), event.worker});
                break;
            }
            case WorkerPhase::Record: {
                w.apply_stage = stage;
                ++stage;
                w.phase = WorkerPhase::Append;
                queue.push({event.time + wait.second_wait_scale * wait.sample(w.rng), event.worker});
                break;
            }
            case WorkerPhase::Append: {
                pairs.push_back({w.compute_stage, w.apply_stage});
                if (worker_of_pair) owners.push_back(event.worker);
                w.phase = WorkerPhase::Start;
                queue.push({event.time, event.worker});
                break;
            }
        }
    }

    if (static_cast<std::int64_t>(pairs.size()) != num_steps) {
        throw std::logic_error("generate_schedule: simulation produced wrong pair count");
    }

    // Sort pairs lexicographically, keeping the worker attribution aligned.
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (pairs[a].compute_stage != pairs[b].compute_stage) {
            return pairs[a].compute_stage < pairs[b].compute_stage;
        }
        return pairs[a].apply_stage < pairs[b].apply_stage;
    });
    std::vector<SchedulePair> sorted;
    sorted.reserve(pairs.size());
    for (std::size_t i : order) sorted.push_back(pairs[i]);
    if (worker_of_pair) {
        worker_of_pair->clear();
        worker_of_pair->reserve(owners.size());
        for (std::size_t i : order) worker_of_pair->push_back(owners[i]);
    }

    DelaySchedule schedule;
    schedule.pairs = std::move(sorted);
    schedule.num_steps = num_steps;
    schedule.metadata = {n_workers, wait, seed};
    return schedule;
}

std::optional<ScheduleViolation> validate_schedule(const DelaySchedule& schedule) {
    const std::int64_t T = schedule.num_steps;
    if (T < 1) return ScheduleViolation{"num_steps must be positive", 0};
    if (static_cast<std::int64_t>(schedule.pairs.size()) != T) {
        return ScheduleViolation{"pair count does not match num_steps", 0};
    }
    std::vector<char> seen(static_cast<std::size_t>(T), 0);
    for (std::size_t i = 0; i < schedule.pairs.size(); ++i) {
        const auto& p = schedule.pairs[i];
        if (p.compute_stage < 0) {
            return ScheduleViolation{"negative compute-stage", i};
        }
        if (p.compute_stage > p.apply_stage) {
            return ScheduleViolation{"compute-stage exceeds apply-stage (r > w)", i};
        }
        if (p.apply_stage < 0 || p.apply_stage >= T) {
            return ScheduleViolation{"apply-stage outside 0..T-1", i};
        }
        if (seen[static_cast<std::size_t>(p.apply_stage)]) {
            return ScheduleViolation{"duplicate apply-stage", i};
        }
        seen[static_cast<std::size_t>(p.apply_stage)] = 1;
        if (i > 0) {
            const auto& prev = schedule.pairs[i - 1];
            const bool ordered = prev.compute_stage < p.compute_stage ||
                                 (prev.compute_stage == p.compute_stage &&
                                  prev.apply_stage < p.apply_stage);
            if (!ordered) return ScheduleViolation{"pairs not sorted lexicographically", i};
        }
    }
    return std::nullopt;
}

ScheduleStats compute_delay_stats(std::span<const std::int64_t> delays) {
    ScheduleStats stats;
    if (delays.empty()) return stats;
    const auto n = static_cast<std::int64_t>(delays.size());
    for (std::int64_t d : delays) {
        stats.total_delay += d;
        stats.tau_max = std::max(stats.tau_max, d);
        ++stats.delay_histogram[d];
    }
    stats.tau_avg = static_cast<double>(stats.total_delay) / static_cast<double>(n);
    double variance = 0.0;
    for (std::int64_t d : delays) {
        const double centered = static_cast<double>(d) - stats.tau_avg;
        variance += centered * centered;
    }
    stats.delay_variance = variance / static_cast<double>(n);

    // Nearest-rank percentiles from the histogram's cumulative counts.
    auto nearest_rank = [&](double p) -> std::int64_t {
        const auto rank = static_cast<std::int64_t>(
            std::ceil(p * static_cast<double>(n)));
        std::int64_t cumulative = 0;
        for (const auto& [delay, count] : stats.delay_histogram) {
            cumulative += count;
            if (cumulative >= rank) return delay;
        }
        return stats.tau_max;
    };
    stats.p50 = nearest_rank(0.50);
    stats.p90 = nearest_rank(0.90);
    stats.p99 = nearest_rank(0.99);
    stats.p999 = nearest_rank(0.999);
    return stats;
}

ScheduleStats schedule_stats(const DelaySchedule& schedule) {
    std::vector<std::int64_t> delays;
    delays.reserve(schedule.pairs.size());
    for (const auto& p : schedule.pairs) delays.push_back(p.apply_stage - p.compute_stage);
    return compute_delay_stats(delays);
}

PresetName preset_from_string(const std::string& name) {
    if (name == "A" || name == "a") return PresetName::A;
    if (name == "B" || name == "b") return PresetName::B;
    if (name == "C" || name == "c") return PresetName::C;
    if (name == "D" || name == "d") return PresetName::D;
    throw std::invalid_argument("unknown schedule preset '" + name + "'");
}

std::string to_string(PresetName name) {
    switch (name) {
        case PresetName::A: return "A";
        case PresetName::B: return "B";
        case PresetName::C: return "C";
        case PresetName::D: return "D";
    }
    return "?";
}

std::pair<int, WaitDistribution> preset_parameters(PresetName name) {
    constexpr double kLambda = 4.06;
    constexpr double kSecondWaitScale = 0.2;
    switch (name) {
        case PresetName::A:
            return {10, WaitDistribution::single_poisson(kLambda, kSecondWaitScale)};
        case PresetName::B:
            return {75, WaitDistribution::poisson_mixture(kLambda, {{0.92, 1.0}, {0.08, 150.0}},
                                                          kSecondWaitScale)};
        case PresetName::C:
            return {75, WaitDistribution::poisson_mixture(kLambda, {{0.935, 1.0}, {0.065, 240.0}},
                                                          kSecondWaitScale)};
        case PresetName::D:
            return {75, WaitDistribution::poisson_mixture(kLambda, {{0.95, 1.0}, {0.05, 330.0}},
                                                          kSecondWaitScale)};
    }
    throw std::invalid_argument("unknown schedule preset");
}

DelaySchedule preset(PresetName name, std::int64_t num_steps, std::uint64_t seed) {
    const auto [workers, wait] = preset_parameters(name);
    return generate_schedule(workers, num_steps, wait, seed);
}

void write_schedule_jsonl(const DelaySchedule& schedule, std::ostream& out) {
    nlohmann::json header;
    header["schema_version"] = 1;
    header["n_workers"] = schedule.metadata.n_workers;
    header["seed"] = schedule.metadata.seed;
    header["steps"] = schedule.num_steps;
    header["wait"] = schedule.metadata.wait.to_json();
    out << header.dump() << '\n';
    for (const auto& p : schedule.pairs) {
        out << p.compute_stage << ',' << p.apply_stage << '\n';
    }
}

DelaySchedule read_schedule_jsonl(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("schedule file: missing header");
    const nlohmann::json header = nlohmann::json::parse(line);
    DelaySchedule schedule;
    schedule.num_steps = header.at("steps").get<std::int64_t>();
    schedule.metadata.n_workers = header.value("n_workers", 1);
    schedule.metadata.seed = header.value("seed", std::uint64_t{0});
    if (header.contains("wait")) {
        schedule.metadata.wait = WaitDistribution::from_json(header.at("wait"));
    }
    schedule.pairs.reserve(static_cast<std::size_t>(schedule.num_steps));
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw std::runtime_error("schedule file: malformed pair line '" + line + "'");
        }
        SchedulePair p;
        p.compute_stage = std::stoll(line.substr(0, comma));
        p.apply_stage = std::stoll(line.substr(comma + 1));
        schedule.pairs.push_back(p);
    }
    return schedule;
}

void write_schedule_file(const DelaySchedule& schedule, const std::string& path) {
    write_file_atomic(path, [&](std::ostream& out) { write_schedule_jsonl(schedule, out); });
}

DelaySchedule read_schedule_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open schedule file: " + path);
    return read_schedule_jsonl(in);
}

void write_histogram_csv(const ScheduleStats& stats, std::ostream& out) {
    out << "delay,count\n";
    for (const auto& [delay, count] : stats.delay_histogram) {
        out << delay << ',' << count << '\n';
    }
}

}  // namespace delaylab
