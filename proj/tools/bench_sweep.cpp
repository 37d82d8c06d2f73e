// Seed-sweep throughput: serial reference pass vs the OpenMP fan-out.
// Both paths produce identical rows; this target only compares wall time.

#include <chrono>
#include <iostream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "delaylab/metrics.hpp"
#include "delaylab/objectives.hpp"
#include "delaylab/optim.hpp"
#include "delaylab/schedule.hpp"

using namespace delaylab;

namespace {

double time_sweep(const RunArgs& args, const std::vector<std::uint64_t>& seeds, int threads,
                  SweepResult& out) {
    const auto start = std::chrono::steady_clock::now();
    out = sweep(args, seeds, threads);
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

int main(int argc, char** argv) {
    std::int64_t steps = 200000;
    int num_seeds = 16;
    if (argc > 1) steps = std::atoll(argv[1]);
    if (argc > 2) num_seeds = std::atoi(argv[2]);

    const DelaySchedule schedule = preset(PresetName::A, steps, 1);

    RunArgs args;
    args.schedule = &schedule;
    args.objective = std::make_shared<LogSquareObjective>(20);
    args.sigma = 0.5;
    PolicyDescriptor policy;
    policy.kind = PolicyKind::Picky;
    policy.eta = step_size_nonconvex(2.0, 0.2, 0.5);
    policy.threshold = 0.2 / (2.0 * 2.0);
    policy.lr = LrSchedule::constant(policy.eta);
    args.policy = policy;
    args.x1.assign(20, 0.3);
    args.eps = 0.2;
    args.variant = SuccessVariant::Nonconvex;
    args.drain_tail = true;

    std::vector<std::uint64_t> seeds(static_cast<std::size_t>(num_seeds));
    for (int i = 0; i < num_seeds; ++i) seeds[static_cast<std::size_t>(i)] = i + 1;

    std::cout << "sweep benchmark: steps=" << steps << " seeds=" << num_seeds << "\n";

    SweepResult serial;
    const double t_serial = time_sweep(args, seeds, 1, serial);
    std::cout << "serial   " << t_serial << " s  success_rate=" << serial.success_rate << "\n";

#ifdef _OPENMP
    SweepResult parallel;
    const double t_parallel = time_sweep(args, seeds, 0, parallel);
    std::cout << "parallel " << t_parallel << " s  (" << omp_get_max_threads()
              << " threads)  success_rate=" << parallel.success_rate << "\n";
    std::cout << "speedup  " << (t_parallel > 0 ? t_serial / t_parallel : 0.0) << "x\n";

    bool identical = parallel.rows.size() == serial.rows.size();
    for (std::size_t i = 0; identical && i < serial.rows.size(); ++i) {
        identical = serial.rows[i].seed == parallel.rows[i].seed &&
                    serial.rows[i].success == parallel.rows[i].success &&
                    serial.rows[i].first_hit_step == parallel.rows[i].first_hit_step &&
                    serial.rows[i].updates == parallel.rows[i].updates &&
                    serial.rows[i].min_grad_norm == parallel.rows[i].min_grad_norm;
    }
    std::cout << "rows identical: " << (identical ? "yes" : "NO") << "\n";
    return identical ? 0 : 1;
#else
    std::cout << "built without OpenMP; serial pass only\n";
    return 0;
#endif
}
