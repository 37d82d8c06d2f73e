#include <stdexcept>

#include "doctest.h"

#include "delaylab/config.hpp"

using namespace delaylab;

namespace {

nlohmann::json sample_config_json() {
    return nlohmann::json::parse(R"({
      "schema_version": 1,
      "objective": {"kind": "logsquare", "dim": 4, "sigma": 0.5, "seed": 3},
      "schedule": {"preset": "A", "steps": 300, "seed": 1},
      "policy": {"policy": "picky", "variant": "nonconvex", "eta": 0.05,
                 "threshold": 0.1, "lr": {"kind": "constant"}},
      "x1": {"fill": 0.5},
      "eps": 0.2,
      "variant": "nonconvex",
      "seeds": [1, 2, 3],
      "drain_tail": true,
      "percentile": 0.99,
      "out_dir": "out"
    })");
}

}  // namespace

TEST_CASE("config round-trips to identical bytes") {
    const auto config = ExperimentConfig::from_json(sample_config_json());
    const std::string bytes = config.canonical_bytes();
    const auto reparsed = ExperimentConfig::from_json(nlohmann::json::parse(bytes));
    CHECK(reparsed.canonical_bytes() == bytes);
}

TEST_CASE("config resolves to concrete module inputs") {
    const auto config = ExperimentConfig::from_json(sample_config_json());
    const auto experiment = resolve(config);
    CHECK(experiment.objective->dimension() == 4);
    CHECK(experiment.sigma == 0.5);
    CHECK(experiment.oracle_seed == 3);
    CHECK(experiment.schedule.num_steps == 300);
    CHECK(experiment.schedule.metadata.n_workers == 10);
    CHECK(experiment.x1 == std::vector<double>(4, 0.5));

    const RunArgs args = experiment.run_args(config);
    CHECK(args.eps == 0.2);
    CHECK(args.drain_tail);
    CHECK(args.policy.kind == PolicyKind::Picky);
}

TEST_CASE("explicit schedule parameters and policy lists") {
    auto j = sample_config_json();
    j["schedule"] = nlohmann::json::parse(R"({
      "workers": 3, "steps": 50, "seed": 9,
      "wait": {"kind": "poisson_mixture", "lambda": 2.0,
               "mixture": [{"weight": 0.5, "scale": 1.0}, {"weight": 0.5, "scale": 4.0}],
               "second_wait_scale": 0.2}
    })");
    j.erase("policy");
    j["policies"] = nlohmann::json::array(
        {nlohmann::json{{"policy", "picky"}, {"eta", 0.1}, {"threshold", 0.2}},
         nlohmann::json{{"policy", "sgd"}, {"eta", 0.1}}});

    const auto config = ExperimentConfig::from_json(j);
    CHECK(config.policies.size() == 2);
    const auto experiment = resolve(config);
    CHECK(experiment.schedule.metadata.n_workers == 3);
    CHECK(experiment.schedule.num_steps == 50);

    const std::string bytes = config.canonical_bytes();
    CHECK(ExperimentConfig::from_json(nlohmann::json::parse(bytes)).canonical_bytes() == bytes);
}

TEST_CASE("explicit x1 vectors must match the objective dimension") {
    auto j = sample_config_json();
    j["x1"] = nlohmann::json::array({0.1, 0.2});
    const auto config = ExperimentConfig::from_json(j);
    CHECK_THROWS_AS(resolve(config), std::invalid_argument);

    j["x1"] = nlohmann::json::array({0.1, 0.2, 0.3, 0.4});
    const auto good = resolve(ExperimentConfig::from_json(j));
    CHECK(good.x1 == std::vector<double>{0.1, 0.2, 0.3, 0.4});
}

TEST_CASE("malformed configs are contract violations") {
    auto j = sample_config_json();
    j["schema_version"] = 2;
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), std::invalid_argument);

    j = sample_config_json();
    j.erase("policy");
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), std::invalid_argument);

    j = sample_config_json();
    j["variant"] = "concave";
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), std::invalid_argument);

    j = sample_config_json();
    j["schedule"] = nlohmann::json{{"preset", "Z"}, {"steps", 10}, {"seed", 1}};
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), std::invalid_argument);
}

TEST_CASE("schedule sources resolve files too") {
    const auto schedule = preset(PresetName::A, 40, 2);
    const std::string path = "test_schedule_roundtrip.jsonl";
    write_schedule_file(schedule, path);

    ScheduleSource source;
    source.file = path;
    const auto loaded = source.resolve();
    CHECK(loaded.pairs == schedule.pairs);
    std::remove(path.c_str());
}
