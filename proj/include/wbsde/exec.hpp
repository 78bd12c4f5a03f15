#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

namespace wbsde::exec {

// Worker-count control for the OpenMP kernels. 0 means "use all hardware
// threads"; 1 selects the serial code path. The value is process-global and
// read by every kernel at call time.
void set_workers(int n);
int workers();
int resolved_workers();

// Fixed work-block width shared by all parallel kernels. Block boundaries
// depend only on the problem size, never on the worker count, so any
// assignment of blocks to threads yields identical per-block results.
inline constexpr std::size_t kBlockWidth = 2048;

inline std::size_t block_count(std::size_t n) {
    return (n + kBlockWidth - 1) / kBlockWidth;
}

namespace detail {
void run_blocks(std::size_t n_blocks, void* ctx, void (*fn)(void*, std::size_t));
}

/// Runs fn(block, begin, end) over fixed-width index blocks, in parallel when
/// workers() != 1. fn must only write to state owned by its own block.
template <typename Fn>
void for_blocks(std::size_t n, Fn&& fn) {
    struct Ctx {
        Fn* fn;
        std::size_t n;
    } ctx{&fn, n};
    detail::run_blocks(block_count(n), &ctx, [](void* c, std::size_t b) {
        auto* x = static_cast<Ctx*>(c);
        const std::size_t lo = b * kBlockWidth;
        const std::size_t hi = std::min(x->n, lo + kBlockWidth);
        (*x->fn)(b, lo, hi);
    });
}

/// Element-wise parallel loop; fn(i) must touch only slot i.
template <typename Fn>
void for_each_index(std::size_t n, Fn&& fn) {
    for_blocks(n, [&](std::size_t, std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
}

// Pairwise tree sum whose reduction shape depends only on v.size().
double pairwise_sum(std::span<const double> v);

/// Deterministic sum of fn(i) for i < n: left-to-right partial sums within
/// fixed blocks (computed in parallel), pairwise-combined in block order.
template <typename Fn>
double deterministic_sum(std::size_t n, Fn&& fn) {
    std::vector<double> partial(block_count(n), 0.0);
    for_blocks(n, [&](std::size_t b, std::size_t lo, std::size_t hi) {
        double acc = 0.0;
        for (std::size_t i = lo; i < hi; ++i) acc += fn(i);
        partial[b] = acc;
    });
    return pairwise_sum(partial);
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

// Sample mean and standard error of the mean, deterministic reduction order.
MeanSe mean_se(std::span<const double> values);

}  // namespace wbsde::exec
