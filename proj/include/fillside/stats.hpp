#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fillside::stats {

// Deterministic RNG with a portable bit stream (xoshiro256++ seeded via
// splitmix64). std:: distributions are not bit-stable across standard
// libraries, so sampling is done here.
std::uint64_t splitmix64(std::uint64_t& state);
// Stable per-task seed for parallel work.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    double uniform01();                         // [0, 1)
    double uniform(double lo, double hi);
    std::uint64_t uniform_int(std::uint64_t n); // [0, n)
    double normal();                            // standard normal, polar method
    double exponential(double rate);

    // Independent stream for a sub-task; parallel work derives one stream
    // per task index so results are schedule-invariant.
    static Rng derive(std::uint64_t seed, std::uint64_t stream);

private:
    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

double mean(std::span<const double> xs);
double sample_std(std::span<const double> xs); // n-1 denominator
// Nearest-rank (type-1) quantile on a copy of xs; q in (0, 1].
double quantile_nearest_rank(std::vector<double> xs, double q);
// Excess kurtosis g2 - 3 (bias-uncorrected moments).
double excess_kurtosis(std::span<const double> xs);

double normal_cdf(double z);
double normal_quantile(double p);          // p in (0, 1)
double student_t_sf(double t, double dof); // P(T > t)

// OLS slope of y on x (with intercept); mean-centered closed form.
double ols_slope(std::span<const double> x, std::span<const double> y);

// Average ranks with ties -> mean rank; 1-based ranks.
std::vector<double> average_ranks(std::span<const double> xs);

// Deterministic parallel sum: terms accumulate into fixed-size blocks and
// block partials combine in index order, so the result is bit-identical for
// any thread count.
inline constexpr std::size_t kSumBlock = 1024;

template <class Term>
double block_sum(std::size_t n, Term&& term) {
    if (n == 0) return 0.0;
    const std::size_t n_blocks = (n + kSumBlock - 1) / kSumBlock;
    std::vector<double> partial(n_blocks, 0.0);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(n_blocks); ++b) {
        const std::size_t lo = static_cast<std::size_t>(b) * kSumBlock;
        const std::size_t hi = lo + kSumBlock < n ? lo + kSumBlock : n;
        double acc = 0.0;
        for (std::size_t i = lo; i < hi; ++i) acc += term(i);
        partial[static_cast<std::size_t>(b)] = acc;
    }
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

} // namespace fillside::stats
