// Compares the serial reference dispatch against the OpenMP worker pool on a
// seed sweep of tabular reverse TD runs. Both paths must produce identical
// curves; the table reports wall time and speedup.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <vector>

#include "rrl/harness.hpp"
#include "rrl/oracle.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double run_sweep(int threads, int n_runs, long steps, std::vector<double>& final_mves) {
    const rrl::MdpWithPolicy preset = rrl::build_microdrone();
    const Eigen::VectorXd reference = rrl::reverse_gvf(preset.mdp, preset.policy);
    final_mves.assign(n_runs, 0.0);

    const auto start = Clock::now();
    rrl::for_each_run(n_runs, threads, [&](int i) {
        rrl::LearnerConfig config;
        config.lambda = 0.0;
        config.schedule = rrl::StepSchedule::constant_step(5e-3);
        config.total_steps = steps;
        config.eval_every = steps;
        config.seed = rrl::derive_seed(7, i);
        rrl::LinearValueModel model = rrl::LinearValueModel::tabular(preset.mdp.n_states);
        const rrl::LearningCurve curve =
            rrl::run_learner(preset.mdp, {preset.policy, {}}, config, model, reference);
        final_mves[i] = curve.back().mve;
    });
    return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

int main(int argc, char** argv) {
    const int n_runs = argc > 1 ? std::atoi(argv[1]) : 32;
    const long steps = argc > 2 ? std::atol(argv[2]) : 200000;

    std::printf("seed sweep: %d runs x %ld steps of tabular reverse TD\n", n_runs, steps);

    std::vector<double> serial_mves, parallel_mves;
    const double serial = run_sweep(1, n_runs, steps, serial_mves);
    std::printf("%-24s %8.3f s\n", "serial reference", serial);

    const int max_threads = omp_get_max_threads();
    for (int threads = 2; threads <= max_threads; threads *= 2) {
        const double elapsed = run_sweep(threads, n_runs, steps, parallel_mves);
        const bool identical = parallel_mves == serial_mves;
        std::printf("%-17s %2d   %8.3f s   speedup %.2fx   curves %s\n", "openmp, threads",
                    threads, elapsed, serial / elapsed,
                    identical ? "identical" : "DIFFER (bug!)");
        if (!identical) return 1;
    }
    return 0;
}
