#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "doctest.h"

#include "delaylab/metrics.hpp"
#include "delaylab/rng.hpp"

using namespace delaylab;

namespace {

RunArgs small_run_args(const DelaySchedule& schedule,
                       std::shared_ptr<const Objective> objective) {
    RunArgs args;
    args.schedule = &schedule;
    args.objective = std::move(objective);
    args.sigma = 0.5;
    PolicyDescriptor policy;
    policy.kind = PolicyKind::Picky;
    policy.eta = 0.05;
    policy.threshold = 0.1;
    policy.lr = LrSchedule::constant(policy.eta);
    args.policy = policy;
    args.x1.assign(args.objective->dimension(), 0.5);
    args.eps = 0.2;
    args.variant = SuccessVariant::Nonconvex;
    args.drain_tail = true;
    return args;
}

}  // namespace

TEST_CASE("nearest-rank threshold recommendation") {
    std::vector<double> distances;
    for (int i = 1; i <= 100; ++i) distances.push_back(static_cast<double>(i));
    auto rec = recommend_threshold(distances, 0.99);
    CHECK(rec.recommended_threshold == 99.0);
    CHECK(rec.sample_count == 100);

    rec = recommend_threshold(std::vector<double>{5.0}, 0.37);
    CHECK(rec.recommended_threshold == 5.0);

    rec = recommend_threshold(distances, 1.0);
    CHECK(rec.recommended_threshold == 100.0);

    CHECK_THROWS_AS(recommend_threshold({}, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(recommend_threshold(distances, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(recommend_threshold(distances, 1.5), std::invalid_argument);
}

TEST_CASE("recommendation matches the normal quantile on |N(0,1)| samples") {
    CounterRng rng(606, 0);
    std::vector<double> samples;
    samples.reserve(10000);
    for (int i = 0; i < 10000; ++i) samples.push_back(std::abs(rng.next_gaussian()));
    const auto rec = recommend_threshold(samples, 0.99);
    CHECK(rec.recommended_threshold == doctest::Approx(2.5758).epsilon(0.04));
    CHECK(std::abs(rec.recommended_threshold - 2.5758) < 0.1);
}

TEST_CASE("recommendation is monotone in the percentile and order invariant") {
    CounterRng rng(607, 0);
    std::vector<double> samples;
    for (int i = 0; i < 500; ++i) samples.push_back(rng.next_unit());

    double previous = 0.0;
    for (double p : {0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0}) {
        const double value = recommend_threshold(samples, p).recommended_threshold;
        CHECK(value >= previous);
        previous = value;
    }

    std::vector<double> shuffled = samples;
    // Deterministic shuffle via the counter rng.
    for (std::size_t i = shuffled.size(); i > 1; --i) {
        std::swap(shuffled[i - 1], shuffled[rng.next_u32() % i]);
    }
    CHECK(shuffled != samples);
    for (double p : {0.2, 0.8, 0.99}) {
        CHECK(recommend_threshold(shuffled, p).recommended_threshold ==
              recommend_threshold(samples, p).recommended_threshold);
    }
}

TEST_CASE("a trivially large target makes every seed succeed") {
    const DelaySchedule schedule = preset(PresetName::A, 200, 1);
    auto args = small_run_args(schedule, std::make_shared<LogSquareObjective>(3));
    args.eps = 1e6;
    const std::uint64_t seeds[] = {1};
    const SweepResult result = sweep(args, seeds, 1);
    CHECK(result.success_rate == 1.0);
    CHECK(result.rows.size() == 1);
    CHECK(result.rows[0].first_hit_step == 0);
}

TEST_CASE("sweep rows are a pure function of the seed") {
    const DelaySchedule schedule = preset(PresetName::A, 500, 2);
    const auto args = small_run_args(schedule, std::make_shared<LogSquareObjective>(4));
    const std::uint64_t seeds[] = {7, 7, 8};
    const SweepResult result = sweep(args, seeds, 1);
    CHECK(result.rows[0].success == result.rows[1].success);
    CHECK(result.rows[0].first_hit_step == result.rows[1].first_hit_step);
    CHECK(result.rows[0].updates == result.rows[1].updates);
    CHECK(result.rows[0].min_grad_norm == result.rows[1].min_grad_norm);
}

TEST_CASE("parallel sweep equals the serial reference pass") {
    const DelaySchedule schedule = preset(PresetName::B, 1500, 3);
    const auto args = small_run_args(schedule, std::make_shared<LogSquareObjective>(5));
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t s = 1; s <= 12; ++s) seeds.push_back(s);

    const SweepResult serial = sweep(args, seeds, 1);
    const SweepResult parallel = sweep(args, seeds, 0);
    REQUIRE(serial.rows.size() == parallel.rows.size());
    for (std::size_t i = 0; i < serial.rows.size(); ++i) {
        CHECK(serial.rows[i].seed == parallel.rows[i].seed);
        CHECK(serial.rows[i].success == parallel.rows[i].success);
        CHECK(serial.rows[i].first_hit_step == parallel.rows[i].first_hit_step);
        CHECK(serial.rows[i].updates == parallel.rows[i].updates);
        CHECK(serial.rows[i].min_grad_norm == parallel.rows[i].min_grad_norm);
    }
    CHECK(serial.success_rate == parallel.success_rate);
    CHECK(serial.median_first_hit_step == parallel.median_first_hit_step);
}

TEST_CASE("sweep aggregates recompute from the rows") {
    const DelaySchedule schedule = preset(PresetName::A, 400, 4);
    const auto args = small_run_args(schedule, std::make_shared<LogSquareObjective>(3));
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    SweepResult result = sweep(args, seeds, 1);

    std::size_t successes = 0;
    for (const auto& row : result.rows) successes += row.success ? 1 : 0;
    CHECK(result.success_rate == static_cast<double>(successes) / 5.0);

    const double rate = result.success_rate;
    const auto median = result.median_first_hit_step;
    aggregate_sweep(result);
    CHECK(result.success_rate == rate);
    CHECK(result.median_first_hit_step == median);
}

TEST_CASE("comparison degenerates to a sweep for one schedule and one policy") {
    const DelaySchedule schedule = preset(PresetName::A, 400, 6);
    const auto args = small_run_args(schedule, std::make_shared<LogSquareObjective>(3));
    std::vector<std::uint64_t> seeds{1, 2, 3};
    const SweepResult swept = sweep(args, seeds, 1);

    const NamedSchedule named{"A", &schedule};
    const PolicyDescriptor policies[] = {args.policy};
    const auto table = compare_policies({&named, 1}, policies, args, seeds, 1);
    REQUIRE(table.size() == 1);
    CHECK(table[0].success_rate == swept.success_rate);
    CHECK(table[0].median_first_hit_step == swept.median_first_hit_step);
    CHECK(table[0].schedule_name == "A");
}

TEST_CASE("identical policies produce identical comparison rows") {
    const DelaySchedule schedule = preset(PresetName::A, 300, 8);
    const auto args = small_run_args(schedule, std::make_shared<LogSquareObjective>(3));
    std::vector<std::uint64_t> seeds{1, 2};
    const NamedSchedule named{"A", &schedule};
    const PolicyDescriptor policies[] = {args.policy, args.policy};
    const auto table = compare_policies({&named, 1}, policies, args, seeds, 1);
    REQUIRE(table.size() == 2);
    CHECK(table[0].success_rate == table[1].success_rate);
    CHECK(table[0].median_first_hit_step == table[1].median_first_hit_step);
    CHECK(table[0].median_updates == table[1].median_updates);
}

TEST_CASE("zero-delay comparison: gated and plain policies tie") {
    DelaySchedule schedule;
    schedule.num_steps = 150;
    for (std::int64_t w = 0; w < schedule.num_steps; ++w) schedule.pairs.push_back({w, w});

    auto args = small_run_args(schedule, std::make_shared<LogSquareObjective>(3));
    args.sigma = 0.0;
    args.eps = 0.3;
    PolicyDescriptor sgd;
    sgd.kind = PolicyKind::Sgd;
    sgd.eta = args.policy.eta;
    sgd.lr = LrSchedule::constant(sgd.eta);

    const NamedSchedule named{"zero", &schedule};
    const PolicyDescriptor policies[] = {args.policy, sgd};
    const std::uint64_t seeds[] = {1};
    const auto table = compare_policies({&named, 1}, policies, args, seeds, 1);
    REQUIRE(table.size() == 2);
    CHECK(table[0].median_first_hit_step == table[1].median_first_hit_step);
}

TEST_CASE("sweep CSV and JSON mirror each other") {
    const DelaySchedule schedule = preset(PresetName::A, 200, 9);
    const auto args = small_run_args(schedule, std::make_shared<LogSquareObjective>(3));
    const std::uint64_t seeds[] = {1, 2};
    const SweepResult result = sweep(args, seeds, 1);

    std::ostringstream csv;
    write_sweep_csv(result, csv);
    CHECK(csv.str().starts_with("seed,success,first_hit_step,updates,min_grad_norm,error\n"));

    const nlohmann::json j = sweep_to_json(result);
    CHECK(j.at("rows").size() == 2);
    CHECK(j.at("success_rate").get<double>() == result.success_rate);
}

TEST_CASE("update-count bound arithmetic is exact") {
    CHECK(update_count_bound_holds(500, 500, 0));       // zero delay, k = T
    CHECK(update_count_bound_holds(1, 4, 6));           // 4*1*(6+4) = 40 >= 16
    CHECK(!update_count_bound_holds(1, 100, 100));      // 4*200 = 800 < 10000
    CHECK(update_count_bound(100, 0.0) == 25.0);
    CHECK(update_count_bound(100, 4.0) == 5.0);
}

TEST_CASE("expected descent holds for sampled pairs") {
    const QuadraticObjective quad(std::vector<double>(6, 1.0), std::vector<double>(6, 0.0));

    // Noisy case: Monte-Carlo mean against the bound minus three SEs.
    auto cases = descent_check(quad, 0.4, 0.5, 17, 10, 2000);
    CHECK(cases.size() == 10);
    for (const auto& c : cases) {
        CHECK(c.passed);
        CHECK(c.grad_norm_at_stale > 0.4);
        CHECK(c.bound > 0.0);
    }

    // Noise-free case reduces to a deterministic inequality.
    cases = descent_check(quad, 0.4, 0.0, 18, 10, 1);
    for (const auto& c : cases) {
        CHECK(c.std_error == 0.0);
        CHECK(c.passed);
    }
}
