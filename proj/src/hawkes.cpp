#include "fillside/micropanel.hpp"
#include "fillside/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

namespace fillside::micro {

// lambda(t) = mu + alpha * sum_i exp(-beta (t - t_i)); the recursion
// A_i = exp(-beta dt) (1 + A_{i-1}) keeps the likelihood O(n).
double hawkes_loglik(const std::vector<double>& times, double horizon, double mu, double alpha,
                     double beta) {
    if (mu <= 0 || alpha < 0 || beta <= 0) return -std::numeric_limits<double>::infinity();
    double ll = 0;
    double a = 0; // A_i
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (i > 0) a = std::exp(-beta * (times[i] - times[i - 1])) * (1.0 + a);
        const double intensity = mu + alpha * a;
        if (intensity <= 0) return -std::numeric_limits<double>::infinity();
        ll += std::log(intensity);
    }
    double compensator = mu * horizon;
    for (double t : times) compensator += alpha / beta * (1.0 - std::exp(-beta * (horizon - t)));
    return ll - compensator;
}

namespace {

constexpr double kMaxBranching = 0.999;

struct Objective {
    const std::vector<double>& times;
    double horizon;

    // Negative penalized log-likelihood over theta = (log mu, log alpha, log beta).
    double operator()(const std::array<double, 3>& theta) const {
        const double mu = std::exp(theta[0]);
        const double alpha = std::exp(theta[1]);
        const double beta = std::exp(theta[2]);
        double ll = hawkes_loglik(times, horizon, mu, alpha, beta);
        const double eta = alpha / beta;
        if (eta > kMaxBranching) ll -= 1e6 * (eta - kMaxBranching); // stationarity barrier
        if (!std::isfinite(ll)) return 1e18;
        return -ll;
    }
};

// Plain Nelder-Mead; deterministic given the start simplex.
std::array<double, 3> nelder_mead(const Objective& f, std::array<double, 3> start,
                                  std::size_t max_iter, double& best_value) {
    constexpr std::size_t n = 3;
    std::array<std::array<double, 3>, n + 1> simplex;
    std::array<double, n + 1> value;
    simplex[0] = start;
    value[0] = f(start);
    for (std::size_t i = 0; i < n; ++i) {
        auto v = start;
        v[i] += 0.5;
        simplex[i + 1] = v;
        value[i + 1] = f(v);
    }

    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        std::array<std::size_t, n + 1> order{};
        for (std::size_t i = 0; i <= n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return value[a] < value[b]; });
        const std::size_t best = order[0], worst = order[n], second_worst = order[n - 1];

        if (std::abs(value[worst] - value[best]) < 1e-10 * (1.0 + std::abs(value[best]))) break;

        std::array<double, 3> centroid{};
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t k = 0; k < n; ++k) centroid[k] += simplex[i][k];
        }
        for (auto& c : centroid) c /= static_cast<double>(n);

        const auto blend = [&](double t) {
            std::array<double, 3> p{};
            for (std::size_t k = 0; k < n; ++k)
                p[k] = centroid[k] + t * (simplex[worst][k] - centroid[k]);
            return p;
        };

        const auto reflected = blend(-1.0);
        const double fr = f(reflected);
        if (fr < value[best]) {
            const auto expanded = blend(-2.0);
            const double fe = f(expanded);
            if (fe < fr) {
                simplex[worst] = expanded;
                value[worst] = fe;
            } else {
                simplex[worst] = reflected;
                value[worst] = fr;
            }
        } else if (fr < value[second_worst]) {
            simplex[worst] = reflected;
            value[worst] = fr;
        } else {
            const auto contracted = blend(fr < value[worst] ? -0.5 : 0.5);
            const double fc = f(contracted);
            if (fc < std::min(fr, value[worst])) {
                simplex[worst] = contracted;
                value[worst] = fc;
            } else {
                for (std::size_t i = 1; i <= n; ++i) {
                    const std::size_t idx = order[i];
                    for (std::size_t k = 0; k < n; ++k)
                        simplex[idx][k] = simplex[order[0]][k] +
                                          0.5 * (simplex[idx][k] - simplex[order[0]][k]);
                    value[idx] = f(simplex[idx]);
                }
            }
        }
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i <= n; ++i)
        if (value[i] < value[best]) best = i;
    best_value = value[best];
    return simplex[best];
}

} // namespace

HawkesFit hawkes_branching(const std::vector<double>& times, double horizon, std::uint64_t seed,
                           std::size_t min_events) {
    HawkesFit fit;
    if (times.size() < min_events || horizon <= 0) return fit;

    const double n = static_cast<double>(times.size());
    const double rate = n / horizon;
    double mean_dt = horizon / n;
    if (times.size() >= 2) {
        double s = 0;
        for (std::size_t i = 1; i < times.size(); ++i) s += times[i] - times[i - 1];
        mean_dt = std::max(s / (n - 1.0), 1e-12);
    }

    const Objective obj{times, horizon};
    stats::Rng rng(seed);
    std::vector<std::array<double, 3>> starts;
    for (double eta0 : {0.2, 0.5, 0.8}) {
        for (double beta0 : {0.5 / mean_dt, 2.0 / mean_dt}) {
            const double mu0 = std::max(rate * (1.0 - eta0), 1e-12);
            std::array<double, 3> s = {std::log(mu0), std::log(eta0 * beta0), std::log(beta0)};
            for (auto& v : s) v += 0.05 * rng.normal(); // deterministic jitter per seed
            starts.push_back(s);
        }
    }

    double best_neg = std::numeric_limits<double>::infinity();
    std::array<double, 3> best_theta{};
    for (const auto& s : starts) {
        double val = 0;
        const auto theta = nelder_mead(obj, s, 400, val);
        if (val < best_neg) {
            best_neg = val;
            best_theta = theta;
        }
    }
    if (!std::isfinite(best_neg) || best_neg >= 1e18) return fit; // no convergent start

    fit.mu = std::exp(best_theta[0]);
    fit.alpha = std::exp(best_theta[1]);
    fit.beta = std::exp(best_theta[2]);
    fit.log_likelihood = -best_neg;
    fit.converged = true;
    fit.eta = std::clamp(fit.alpha / fit.beta, 0.0, kMaxBranching);
    return fit;
}

HawkesFit hawkesfit_from_series(const MarketSeries& series, std::uint64_t seed,
                                std::size_t min_events) {
    if (series.fills.size() < min_events) return {};
    std::vector<double> times;
    times.reserve(series.fills.size());
    const std::int64_t t0 = series.start_ts();
    for (const auto& f : series.fills) times.push_back(static_cast<double>(f.ts - t0));
    const double horizon = times.back() + 1.0;
    return hawkes_branching(times, horizon, seed, min_events);
}

HawkesFit hawkes_branching(const MarketSeries& series, std::uint64_t seed, std::size_t min_events) {
    return hawkesfit_from_series(series, seed, min_events);
}

} // namespace fillside::micro
