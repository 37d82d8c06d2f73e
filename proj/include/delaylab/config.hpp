#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "delaylab/metrics.hpp"
#include "delaylab/objectives.hpp"
#include "delaylab/optim.hpp"
#include "delaylab/schedule.hpp"

namespace delaylab {

struct ScheduleSource {
    // Exactly one of the three forms: preset, file, or explicit parameters.
    std::optional<PresetName> preset;
    std::optional<std::string> file;
    std::optional<int> workers;
    WaitDistribution wait;
    std::int64_t steps = 0;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const;
    static ScheduleSource from_json(const nlohmann::json& j);
    DelaySchedule resolve() const;
};

struct InitialIterate {
    std::optional<double> fill;        // x1 = fill * ones(d)
    std::vector<double> values;        // explicit vector

    nlohmann::json to_json() const;
    static InitialIterate from_json(const nlohmann::json& j);
    std::vector<double> resolve(std::size_t dim) const;
};

/// Declarative description of a whole experiment; every run is a pure
/// function of these bytes. Parsing then serializing is canonical: the
/// emitted form re-parses and re-emits to identical bytes.
struct ExperimentConfig {
    int schema_version = 1;
    nlohmann::json objective;  // objective descriptor incl. oracle sigma/seed
    ScheduleSource schedule;
    std::vector<PolicyDescriptor> policies;  // one entry for run/sweep/audit
    InitialIterate x1;
    double eps = 0.0;
    SuccessVariant variant = SuccessVariant::Nonconvex;
    std::vector<std::uint64_t> seeds;
    bool drain_tail = false;
    double percentile = 0.99;
    std::string out_dir = "out";

    nlohmann::json to_json() const;
    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig load(const std::string& path);
    std::string canonical_bytes() const;

    const PolicyDescriptor& primary_policy() const;
};

/// Inputs of a resolved experiment, ready to replay.
struct ResolvedExperiment {
    std::shared_ptr<const Objective> objective;
    double sigma = 0.0;
    std::uint64_t oracle_seed = 0;
    DelaySchedule schedule;
    std::vector<double> x1;

    RunArgs run_args(const ExperimentConfig& config) const;
};

ResolvedExperiment resolve(const ExperimentConfig& config);

}  // namespace delaylab
