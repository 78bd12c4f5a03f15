#include "wbsde/rng.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <vector>

namespace wbsde::rng {

namespace {

constexpr std::uint32_t kMultA = 0xD2511F53u;
constexpr std::uint32_t kMultB = 0xCD9E8D57u;
constexpr std::uint32_t kWeylA = 0x9E3779B9u;
constexpr std::uint32_t kWeylB = 0xBB67AE85u;

inline void mul_hi_lo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo,
                      std::uint32_t& hi) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    lo = static_cast<std::uint32_t>(p);
    hi = static_cast<std::uint32_t>(p >> 32);
}

inline std::array<std::uint32_t, 4> round_once(std::array<std::uint32_t, 4> c,
                                               std::uint32_t k0, std::uint32_t k1) {
    std::uint32_t lo0, hi0, lo1, hi1;
    mul_hi_lo(kMultA, c[0], lo0, hi0);
    mul_hi_lo(kMultB, c[2], lo1, hi1);
    return {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
}

inline double to_unit_interval(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
    // 53 significant bits, shifted into (0,1) so the inverse CDF never sees 0 or 1.
    return static_cast<double>(bits >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

inline std::array<std::uint32_t, 4> stream_block(std::uint64_t seed, std::uint64_t path,
                                                 std::uint32_t node, std::uint32_t word) {
    return philox4x32({node, word, static_cast<std::uint32_t>(path),
                       static_cast<std::uint32_t>(path >> 32)},
                      seed);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

// Quantile table on a uniform x-grid; cubic Hermite interpolation in p using
// the exact inverse-CDF slopes 1/phi(x) at the knots. A coarse uniform-u
// index narrows the binary search to a few knots for central draws.
struct QuantileTable {
    static constexpr double kXMax = 8.5;
    static constexpr double kDx = 1.0 / 256.0;
    static constexpr int kCells = 4096;

    std::vector<double> x, p, slope;  // slope = 1/phi(x)
    std::vector<int> cell_lo, cell_hi;

    QuantileTable() {
        const int n = static_cast<int>(2 * kXMax / kDx) + 1;
        x.resize(n);
        p.resize(n);
        slope.resize(n);
        for (int i = 0; i < n; ++i) {
            x[i] = -kXMax + i * kDx;
            p[i] = normal_cdf(x[i]);
            slope[i] = std::sqrt(2.0 * M_PI) * std::exp(0.5 * x[i] * x[i]);
        }
        cell_lo.assign(kCells, 0);
        cell_hi.assign(kCells, 0);
        int j = 0;
        for (int c = 0; c < kCells; ++c) {
            const double u_lo = static_cast<double>(c) / kCells;
            const double u_hi = static_cast<double>(c + 1) / kCells;
            while (j + 1 < n && p[j + 1] < u_lo) ++j;
            cell_lo[c] = j;
            int k = j;
            while (k + 1 < n && p[k] < u_hi) ++k;
            cell_hi[c] = k;
        }
    }

    double invert(double u) const {
        // Quantiles near 1 lose precision against the clustered p knots;
        // 1 - u is exact for u in [0.5, 1], so reflect to the lower tail.
        if (u > 0.5) return -invert(1.0 - u);
        if (u <= p.front()) {
            // Extreme tail: exact via erfc_inv (x with Phi(x) = u).
            return -M_SQRT2 * boost::math::erfc_inv(2.0 * u);
        }
        const int c = std::min(kCells - 1, static_cast<int>(u * kCells));
        int lo = cell_lo[c], hi = cell_hi[c];
        while (hi - lo > 1) {
            const int mid = (lo + hi) / 2;
            if (p[mid] <= u)
                lo = mid;
            else
                hi = mid;
        }
        const double dp = p[lo + 1] - p[lo];
        const double t = (u - p[lo]) / dp;
        const double t2 = t * t, t3 = t2 * t;
        const double h00 = 2 * t3 - 3 * t2 + 1;
        const double h10 = t3 - 2 * t2 + t;
        const double h01 = -2 * t3 + 3 * t2;
        const double h11 = t3 - t2;
        return h00 * x[lo] + h01 * x[lo + 1] + dp * (h10 * slope[lo] + h11 * slope[lo + 1]);
    }
};

const QuantileTable& quantile_table() {
    static const QuantileTable table;
    return table;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::uint64_t key) {
    std::uint32_t k0 = static_cast<std::uint32_t>(key);
    std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
    for (int r = 0; r < 10; ++r) {
        counter = round_once(counter, k0, k1);
        k0 += kWeylA;
        k1 += kWeylB;
    }
    return counter;
}

double uniform01(std::uint64_t seed, std::uint64_t path, std::uint32_t node,
                 std::uint32_t idx) {
    const auto w = stream_block(seed, path, node, idx >> 1);
    return (idx & 1u) ? to_unit_interval(w[2], w[3]) : to_unit_interval(w[0], w[1]);
}

double normal(std::uint64_t seed, std::uint64_t path, std::uint32_t node,
              std::uint32_t idx) {
    return inverse_normal_cdf(uniform01(seed, path, node, idx));
}

std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t purpose, std::uint64_t a,
                            std::uint64_t b) {
    // Distinct key offset keeps derived streams disjoint from draw streams.
    const std::uint64_t key = seed + purpose * 0x9E3779B97F4A7C15ull;
    const auto w = philox4x32({static_cast<std::uint32_t>(a),
                               static_cast<std::uint32_t>(a >> 32),
                               static_cast<std::uint32_t>(b),
                               static_cast<std::uint32_t>(b >> 32)},
                              key);
    return (static_cast<std::uint64_t>(w[0]) << 32) | w[1];
}

double inverse_normal_cdf(double u) { return quantile_table().invert(u); }

}  // namespace wbsde::rng
