#include "wbsde/exec.hpp"

#include <atomic>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace wbsde::exec {

namespace {
std::atomic<int> g_workers{0};
}

void set_workers(int n) { g_workers.store(n < 0 ? 0 : n); }

int workers() { return g_workers.load(); }

int resolved_workers() {
    int w = g_workers.load();
    if (w > 0) return w;
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

namespace detail {

void run_blocks(std::size_t n_blocks, void* ctx, void (*fn)(void*, std::size_t)) {
    if (n_blocks == 0) return;
    const int w = resolved_workers();
    if (w == 1 || n_blocks == 1) {
        for (std::size_t b = 0; b < n_blocks; ++b) fn(ctx, b);
        return;
    }
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(w)
    for (long long b = 0; b < static_cast<long long>(n_blocks); ++b)
        fn(ctx, static_cast<std::size_t>(b));
#else
    for (std::size_t b = 0; b < n_blocks; ++b) fn(ctx, b);
#endif
}

}  // namespace detail

double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 16) {
        double acc = 0.0;
        for (double x : v) acc += x;
        return acc;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

MeanSe mean_se(std::span<const double> values) {
    MeanSe out;
    out.n = values.size();
    if (out.n == 0) return out;
    out.mean = pairwise_sum(values) / static_cast<double>(out.n);
    if (out.n == 1) return out;
    std::vector<double> sq(exec::block_count(values.size()), 0.0);
    for_blocks(values.size(), [&](std::size_t b, std::size_t lo, std::size_t hi) {
        double acc = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            const double d = values[i] - out.mean;
            acc += d * d;
        }
        sq[b] = acc;
    });
    const double var = pairwise_sum(sq) / static_cast<double>(out.n - 1);
    out.se = std::sqrt(var / static_cast<double>(out.n));
    return out;
}

}  // namespace wbsde::exec
