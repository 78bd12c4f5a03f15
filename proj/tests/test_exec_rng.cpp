#include "wbsde/exec.hpp"
#include "wbsde/rng.hpp"

#include <doctest.h>

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <vector>

using namespace wbsde;

TEST_SUITE_BEGIN("exec_rng");

TEST_CASE("pairwise sum matches naive summation") {
    std::vector<double> v(10001);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sin(0.1 * static_cast<double>(i));
    double naive = 0.0;
    for (double x : v) naive += x;
    CHECK(exec::pairwise_sum(v) == doctest::Approx(naive).epsilon(1e-12));
}

TEST_CASE("deterministic reductions are bitwise stable across worker counts") {
    std::vector<double> v(50000);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::cos(0.37 * static_cast<double>(i));

    exec::set_workers(1);
    const double s1 = exec::deterministic_sum(v.size(), [&](std::size_t i) { return v[i]; });
    const auto m1 = exec::mean_se(v);
    exec::set_workers(3);
    const double s3 = exec::deterministic_sum(v.size(), [&](std::size_t i) { return v[i]; });
    const auto m3 = exec::mean_se(v);
    exec::set_workers(0);

    CHECK(s1 == s3);  // bitwise
    CHECK(m1.mean == m3.mean);
    CHECK(m1.se == m3.se);
}

TEST_CASE("for_blocks covers every index exactly once for any worker count") {
    for (int workers : {1, 2, 5}) {
        exec::set_workers(workers);
        std::vector<int> counts(9001, 0);
        exec::for_each_index(counts.size(), [&](std::size_t i) { counts[i] += 1; });
        for (int c : counts) CHECK(c == 1);
    }
    exec::set_workers(0);
}

TEST_CASE("mean_se on a known sample") {
    std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
    const auto ms = exec::mean_se(v);
    CHECK(ms.mean == doctest::Approx(2.5));
    // sd = sqrt(5/3), se = sd/2
    CHECK(ms.se == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
}

TEST_CASE("philox streams are reproducible and distinct") {
    const double a = rng::uniform01(42, 7, 3, 1);
    const double b = rng::uniform01(42, 7, 3, 1);
    CHECK(a == b);
    CHECK(rng::uniform01(42, 7, 3, 2) != a);
    CHECK(rng::uniform01(42, 8, 3, 1) != a);
    CHECK(rng::uniform01(43, 7, 3, 1) != a);
    CHECK(a > 0.0);
    CHECK(a < 1.0);
    CHECK(rng::derive_stream(1, 2, 3) != rng::derive_stream(1, 2, 4));
    CHECK(rng::derive_stream(1, 2, 3) == rng::derive_stream(1, 2, 3));
}

TEST_CASE("inverse normal CDF tracks the reference quantile") {
    boost::math::normal_distribution<double> nd;
    double worst = 0.0;
    for (int i = 1; i < 100000; ++i) {
        const double u = i / 100000.0;
        worst = std::max(worst,
                         std::abs(rng::inverse_normal_cdf(u) - boost::math::quantile(nd, u)));
    }
    // Deep tails, including the exact-fallback region.
    for (double u : {1e-12, 1e-15, 1e-17, 1.0 - 1e-12}) {
        worst = std::max(worst,
                         std::abs(rng::inverse_normal_cdf(u) - boost::math::quantile(nd, u)));
    }
    CHECK(worst < 2e-8);
}

TEST_CASE("normal draws are monotone in the underlying uniform") {
    double prev = -1e308;
    for (int i = 1; i < 2000; ++i) {
        const double x = rng::inverse_normal_cdf(i / 2000.0);
        CHECK(x > prev);
        prev = x;
    }
}

TEST_SUITE_END();
