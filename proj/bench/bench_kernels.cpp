// Timing harness comparing the OpenMP kernels against their plain serial
// references. Bit-exactness across worker counts is covered by the unit
// tests; this target reports throughput.

#include "wbsde/ensemble.hpp"
#include "wbsde/exec.hpp"
#include "wbsde/rng.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Plain serial references.
void brownian_serial(const wbsde::PathEnsemble& ens, std::vector<double>& out) {
    for (int p = 0; p < ens.n_paths; ++p)
        for (int i = 0; i < ens.grid.n_steps; ++i)
            out[static_cast<std::size_t>(p) * ens.grid.n_steps + i] = ens.increment(p, i, 0);
}

double sum_serial(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc;
}

void euler_serial(const wbsde::PathEnsemble& ens, std::vector<double>& states) {
    const int N = ens.grid.n_steps;
    const double dt = ens.grid.dt;
    for (int p = 0; p < ens.n_paths; ++p) {
        double x = 0.0;
        states[static_cast<std::size_t>(p) * (N + 1)] = x;
        for (int i = 0; i < N; ++i) {
            x += -x * dt + ens.increment(p, i, 0);
            states[static_cast<std::size_t>(p) * (N + 1) + i + 1] = x;
        }
    }
}

struct Row {
    const char* name;
    double serial_s;
    double parallel_s;
};

}  // namespace

int main() {
    using namespace wbsde;
    const int n_paths = 20000;
    const int n_steps = 256;
    const TimeGrid grid = make_grid(1.0, n_steps);
    PathEnsemble ens = simulate_brownian(grid, n_paths, 1, 42);

    std::vector<Row> rows;

    {
        std::vector<double> buf(static_cast<std::size_t>(n_paths) * n_steps);
        auto t0 = Clock::now();
        brownian_serial(ens, buf);
        const double ts = seconds_since(t0);
        t0 = Clock::now();
        exec::for_each_index(static_cast<std::size_t>(n_paths), [&](std::size_t p) {
            for (int i = 0; i < n_steps; ++i)
                buf[p * n_steps + i] = ens.increment(static_cast<int>(p), i, 0);
        });
        rows.push_back({"brownian increments", ts, seconds_since(t0)});

        t0 = Clock::now();
        const double s1 = sum_serial(buf);
        const double ts2 = seconds_since(t0);
        t0 = Clock::now();
        const double s2 = exec::pairwise_sum(buf);
        rows.push_back({"reduction", ts2, seconds_since(t0)});
        std::printf("serial sum %.12g vs pairwise %.12g (diff %.3e)\n", s1, s2,
                    std::abs(s1 - s2));
    }

    {
        SdeSpec ou;
        ou.state_dim = 1;
        ou.d = 1;
        ou.unit_diffusion = true;
        ou.drift = [](double, std::span<const double> x, std::span<double> out) {
            out[0] = -x[0];
        };
        std::vector<double> buf(static_cast<std::size_t>(n_paths) * (n_steps + 1));
        auto t0 = Clock::now();
        euler_serial(ens, buf);
        const double ts = seconds_since(t0);
        PathEnsemble work = simulate_brownian(grid, n_paths, 1, 42);
        t0 = Clock::now();
        euler_maruyama(ou, 0.0, std::vector<double>{0.0}, work);
        rows.push_back({"euler-maruyama", ts, seconds_since(t0)});
    }

    std::printf("%-24s %12s %12s %8s\n", "kernel", "serial [s]", "openmp [s]", "speedup");
    for (const auto& r : rows)
        std::printf("%-24s %12.4f %12.4f %8.2fx\n", r.name, r.serial_s, r.parallel_s,
                    r.serial_s / r.parallel_s);
    return 0;
}
