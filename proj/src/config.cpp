#include "delaylab/config.hpp"

#include <stdexcept>

#include "delaylab/io.hpp"

namespace delaylab {

nlohmann::json ScheduleSource::to_json() const {
    nlohmann::json j;
    if (preset) {
        j["preset"] = to_string(*preset);
        j["steps"] = steps;
        j["seed"] = seed;
    } else if (file) {
        j["file"] = *file;
    } else {
        j["workers"] = workers.value_or(1);
        j["wait"] = wait.to_json();
        j["steps"] = steps;
        j["seed"] = seed;
    }
    return j;
}

ScheduleSource ScheduleSource::from_json(const nlohmann::json& j) {
    ScheduleSource s;
    if (j.contains("file")) {
        s.file = j.at("file").get<std::string>();
        return s;
    }
    s.steps = j.at("steps").get<std::int64_t>();
    s.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("preset")) {
        s.preset = preset_from_string(j.at("preset").get<std::string>());
        return s;
    }
    s.workers = j.at("workers").get<int>();
    s.wait = WaitDistribution::from_json(j.at("wait"));
    return s;
}

DelaySchedule ScheduleSource::resolve() const {
    if (file) return read_schedule_file(*file);
    if (preset) return delaylab::preset(*preset, steps, seed);
    return generate_schedule(workers.value_or(1), steps, wait, seed);
}

nlohmann::json InitialIterate::to_json() const {
    if (fill) return nlohmann::json{{"fill", *fill}};
    return nlohmann::json(values);
}

InitialIterate InitialIterate::from_json(const nlohmann::json& j) {
    InitialIterate x;
    if (j.is_object()) {
        x.fill = j.at("fill").get<double>();
    } else if (j.is_array()) {
        x.values = j.get<std::vector<double>>();
    } else {
        throw std::invalid_argument("config: x1 must be an array or {\"fill\": v}");
    }
    return x;
}

std::vector<double> InitialIterate::resolve(std::size_t dim) const {
    if (fill) return std::vector<double>(dim, *fill);
    if (values.size() != dim) {
        throw std::invalid_argument("config: x1 has dimension " + std::to_string(values.size()) +
                                    ", objective expects " + std::to_string(dim));
    }
    return values;
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json j;
    j["schema_version"] = schema_version;
    j["objective"] = objective;
    j["schedule"] = schedule.to_json();
    if (policies.size() == 1) {
        j["policy"] = policies.front().to_json();
    } else {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& p : policies) arr.push_back(p.to_json());
        j["policies"] = arr;
    }
    j["x1"] = x1.to_json();
    j["eps"] = eps;
    j["variant"] = variant == SuccessVariant::Nonconvex ? "nonconvex" : "convex";
    j["seeds"] = seeds;
    j["drain_tail"] = drain_tail;
    j["percentile"] = percentile;
    j["out_dir"] = out_dir;
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    c.schema_version = j.at("schema_version").get<int>();
    if (c.schema_version != 1) {
        throw std::invalid_argument("config: unsupported schema_version " +
                                    std::to_string(c.schema_version));
    }
    c.objective = j.at("objective");
    c.schedule = ScheduleSource::from_json(j.at("schedule"));
    if (j.contains("policy")) {
        c.policies.push_back(PolicyDescriptor::from_json(j.at("policy")));
    } else if (j.contains("policies")) {
        for (const auto& p : j.at("policies")) {
            c.policies.push_back(PolicyDescriptor::from_json(p));
        }
    }
    if (c.policies.empty()) throw std::invalid_argument("config: no policy given");
    c.x1 = InitialIterate::from_json(j.at("x1"));
    c.eps = j.value("eps", 0.0);
    const std::string variant = j.value("variant", std::string("nonconvex"));
    if (variant == "nonconvex") {
        c.variant = SuccessVariant::Nonconvex;
    } else if (variant == "convex") {
        c.variant = SuccessVariant::Convex;
    } else {
        throw std::invalid_argument("config: unknown variant '" + variant + "'");
    }
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    c.drain_tail = j.value("drain_tail", false);
    c.percentile = j.value("percentile", 0.99);
    c.out_dir = j.value("out_dir", std::string("out"));
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument("config: " + path + " is not valid JSON (" + e.what() + ")");
    }
    return from_json(j);
}

std::string ExperimentConfig::canonical_bytes() const { return to_json().dump(2) + "\n"; }

const PolicyDescriptor& ExperimentConfig::primary_policy() const {
    if (policies.empty()) throw std::logic_error("config: no policy");
    return policies.front();
}

ResolvedExperiment resolve(const ExperimentConfig& config) {
    ResolvedExperiment r;
    r.objective = objective_from_descriptor(config.objective);
    r.sigma = config.objective.value("sigma", 0.0);
    r.oracle_seed = config.objective.value("seed", std::uint64_t{0});
    r.schedule = config.schedule.resolve();
    r.x1 = config.x1.resolve(r.objective->dimension());
    return r;
}

RunArgs ResolvedExperiment::run_args(const ExperimentConfig& config) const {
    RunArgs args;
    args.schedule = &schedule;
    args.objective = objective;
    args.sigma = sigma;
    args.policy = config.primary_policy();
    args.x1 = x1;
    args.eps = config.eps;
    args.variant = config.variant;
    args.drain_tail = config.drain_tail;
    return args;
}

}  // namespace delaylab
