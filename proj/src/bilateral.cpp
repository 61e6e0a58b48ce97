#include "fillside/bilateral.hpp"

#include "fillside/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace fillside::bilateral {

using nlohmann::json;

ShareTable archetype_shares(const std::vector<FillRecord>& fills,
                            const std::map<std::string, std::string>& labels) {
    const auto group_of = [&](const std::string& addr) -> std::string {
        auto it = labels.find(addr);
        return it == labels.end() ? "UNKNOWN" : it->second;
    };

    std::map<std::string, std::map<std::string, double>> market_group; // market -> group -> notional
    std::map<std::string, double> market_total;
    for (const auto& f : fills) {
        const double v = static_cast<double>(f.notional) / kMicro;
        market_group[f.market_token][group_of(f.maker)] += v;
        market_group[f.market_token][group_of(f.taker)] += v;
        market_total[f.market_token] += 2.0 * v;
    }

    ShareTable out;
    std::set<std::string> groups;
    for (const auto& [market, by_group] : market_group) {
        const double total = market_total[market];
        if (total <= 0) continue;
        for (const auto& [group, notional] : by_group) {
            out.rows.push_back({market, group, notional / total});
            groups.insert(group);
        }
    }
    out.groups.assign(groups.begin(), groups.end());
    return out;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
    if (x.size() < 3) throw std::invalid_argument("spearman: need n >= 3");
    const auto rx = stats::average_ranks(x);
    const auto ry = stats::average_ranks(y);
    const double mx = stats::mean(rx);
    const double my = stats::mean(ry);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx <= 0 || syy <= 0) throw std::invalid_argument("spearman: constant input");
    return sxy / std::sqrt(sxx * syy);
}

double spearman_pvalue(double rho, std::size_t n) {
    if (n < 3) throw std::invalid_argument("spearman_pvalue: need n >= 3");
    const double r = std::clamp(rho, -1.0, 1.0);
    if (std::abs(r) >= 1.0) return 0.0;
    const double dof = static_cast<double>(n - 2);
    const double t = r * std::sqrt(dof / (1.0 - r * r));
    return std::clamp(2.0 * stats::student_t_sf(std::abs(t), dof), 0.0, 1.0);
}

BhResult bh_fdr(const std::vector<double>& p_values, double alpha) {
    const std::size_t m = p_values.size();
    BhResult out;
    out.q_values.assign(m, 1.0);
    out.significant.assign(m, false);
    if (m == 0) return out;

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });

    double running_min = 1.0;
    for (std::size_t i = m; i-- > 0;) {
        const double q =
            p_values[order[i]] * static_cast<double>(m) / static_cast<double>(i + 1);
        running_min = std::min(running_min, q);
        out.q_values[order[i]] = std::min(running_min, 1.0);
    }
    for (std::size_t i = 0; i < m; ++i) out.significant[i] = out.q_values[i] <= alpha;
    return out;
}

BcaInterval bca_ci(const std::vector<double>& x, const std::vector<double>& y,
                   std::size_t iterations, double level, std::uint64_t seed) {
    const std::size_t n = x.size();
    if (n != y.size() || n < 3) throw std::invalid_argument("bca_ci: need paired n >= 3");
    if (iterations < 2) throw std::invalid_argument("bca_ci: need >= 2 iterations");

    const double theta_hat = spearman(x, y);

    std::vector<double> boot(iterations);
    std::vector<double> bx(n), by(n);
    stats::Rng rng(seed);
    for (std::size_t b = 0; b < iterations; ++b) {
        bool ok = false;
        // Degenerate resamples (constant x or y ranks) retry a few times, then
        // fall back to the point estimate.
        for (int attempt = 0; attempt < 8 && !ok; ++attempt) {
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t j = rng.uniform_int(n);
                bx[i] = x[j];
                by[i] = y[j];
            }
            try {
                boot[b] = spearman(bx, by);
                ok = true;
            } catch (const std::invalid_argument&) {
            }
        }
        if (!ok) boot[b] = theta_hat;
    }

    std::vector<double> sorted = boot;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() == sorted.back()) {
        return {theta_hat, theta_hat, true};
    }

    // Bias correction from the bootstrap fraction strictly below the point
    // estimate (halving ties keeps z0 finite on lumpy distributions).
    std::size_t below = 0, equal = 0;
    for (double v : boot) {
        if (v < theta_hat) ++below;
        else if (v == theta_hat) ++equal;
    }
    double frac = (static_cast<double>(below) + 0.5 * static_cast<double>(equal)) /
                  static_cast<double>(iterations);
    frac = std::clamp(frac, 1.0 / (2.0 * static_cast<double>(iterations)),
                      1.0 - 1.0 / (2.0 * static_cast<double>(iterations)));
    const double z0 = stats::normal_quantile(frac);

    // Acceleration from jackknife skewness.
    std::vector<double> jack(n);
    std::vector<double> jx(n - 1), jy(n - 1);
    for (std::size_t leave = 0; leave < n; ++leave) {
        std::size_t k = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (i == leave) continue;
            jx[k] = x[i];
            jy[k] = y[i];
            ++k;
        }
        try {
            jack[leave] = spearman(jx, jy);
        } catch (const std::invalid_argument&) {
            jack[leave] = theta_hat;
        }
    }
    const double jmean = stats::mean(jack);
    double num = 0, den = 0;
    for (double v : jack) {
        const double d = jmean - v;
        num += d * d * d;
        den += d * d;
    }
    const double a = den > 0 ? num / (6.0 * std::pow(den, 1.5)) : 0.0;

    const double alpha_each = (1.0 - level) / 2.0;
    const auto adjusted = [&](double z_alpha) {
        const double t = z0 + z_alpha;
        return stats::normal_cdf(z0 + t / (1.0 - a * t));
    };
    const double a1 = adjusted(stats::normal_quantile(alpha_each));
    const double a2 = adjusted(stats::normal_quantile(1.0 - alpha_each));

    const auto percentile = [&](double p) {
        const auto idx = static_cast<std::size_t>(
            std::clamp(std::floor(p * static_cast<double>(iterations)), 0.0,
                       static_cast<double>(iterations - 1)));
        return sorted[idx];
    };
    return {percentile(a1), percentile(a2), false};
}

MannWhitneyResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("mann_whitney_u: empty sample");
    const double n1 = static_cast<double>(a.size());
    const double n2 = static_cast<double>(b.size());

    std::vector<double> all;
    all.reserve(a.size() + b.size());
    all.insert(all.end(), a.begin(), a.end());
    all.insert(all.end(), b.begin(), b.end());
    const auto ranks = stats::average_ranks(all);

    double rank_sum_a = 0;
    for (std::size_t i = 0; i < a.size(); ++i) rank_sum_a += ranks[i];
    const double u = rank_sum_a - n1 * (n1 + 1.0) / 2.0;

    // Tie-corrected variance.
    std::vector<double> sorted = all;
    std::sort(sorted.begin(), sorted.end());
    double tie_term = 0;
    std::size_t i = 0;
    const double n = n1 + n2;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    const double var = n1 * n2 / 12.0 * (n + 1.0 - tie_term / (n * (n - 1.0)));

    MannWhitneyResult out;
    out.u = u;
    if (var <= 0) {
        out.p_value = 1.0; // all observations tied
        return out;
    }
    const double mean_u = n1 * n2 / 2.0;
    // Continuity correction toward the mean.
    const double z = (u - mean_u - (u > mean_u ? 0.5 : (u < mean_u ? -0.5 : 0.0))) / std::sqrt(var);
    out.p_value = std::clamp(2.0 * (1.0 - stats::normal_cdf(std::abs(z))), 0.0, 1.0);
    return out;
}

// --------------------------------------------------------------------------
// run_bilateral
// --------------------------------------------------------------------------

std::vector<BilateralResult> run_bilateral(const ShareTable& shares,
                                           const std::vector<micro::MarketMetricsRow>& metrics,
                                           const BilateralConfig& config) {
    // market -> row index
    std::map<std::string, std::size_t> metric_index;
    for (std::size_t i = 0; i < metrics.size(); ++i) metric_index[metrics[i].market_token] = i;
    // group -> (market -> share)
    std::map<std::string, std::map<std::string, double>> by_group;
    for (const auto& r : shares.rows)
        if (r.volume_share > 0) by_group[r.group][r.market_token] = r.volume_share;

    const auto& names = micro::panel_metric_names();
    struct Pair {
        std::string group;
        std::size_t metric = 0;
    };
    std::vector<Pair> pairs;
    for (const auto& g : shares.groups)
        for (std::size_t m = 0; m < names.size(); ++m) pairs.push_back({g, m});

    std::vector<BilateralResult> results(pairs.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t pi = 0; pi < static_cast<std::ptrdiff_t>(pairs.size()); ++pi) {
        const auto& pair = pairs[static_cast<std::size_t>(pi)];
        auto& res = results[static_cast<std::size_t>(pi)];
        res.group = pair.group;
        res.metric = names[pair.metric];

        std::vector<double> xs, ys;
        for (const auto& [market, share] : by_group[pair.group]) {
            auto it = metric_index.find(market);
            if (it == metric_index.end()) continue;
            const auto v = metrics[it->second].metric(pair.metric);
            if (!v) continue;
            xs.push_back(share);
            ys.push_back(*v);
        }
        res.n = xs.size();
        if (res.n < 3) {
            res.skipped = true;
            continue;
        }
        try {
            res.rho = spearman(xs, ys);
        } catch (const std::invalid_argument&) { // constant shares or metric
            res.skipped = true;
            continue;
        }
        res.p_value = spearman_pvalue(res.rho, res.n);
        const auto ci = bca_ci(xs, ys, config.bootstrap_iterations, config.ci_level,
                               stats::derive_seed(config.seed, static_cast<std::uint64_t>(pi)));
        res.ci_low = ci.lo;
        res.ci_high = ci.hi;
        res.ci_degenerate = ci.degenerate;
    }

    // One BH family across every non-skipped test.
    std::vector<double> pvals;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (results[i].skipped) continue;
        pvals.push_back(results[i].p_value);
        idx.push_back(i);
    }
    const BhResult bh = bh_fdr(pvals, config.alpha);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        results[idx[i]].q_value = bh.q_values[i];
        results[idx[i]].significant = bh.significant[i];
    }
    return results;
}

void write_bilateral_table(const std::vector<BilateralResult>& results, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write bilateral table: " + path);
    out << "group\tmetric\tn\trho\tp_value\tq_value\tsignificant\tci_low\tci_high\tci_degenerate\t"
           "skipped\n";
    char buf[64];
    for (const auto& r : results) {
        out << r.group << '\t' << r.metric << '\t' << r.n << '\t';
        std::snprintf(buf, sizeof buf, "%.12g\t%.6e\t%.6e", r.rho, r.p_value, r.q_value);
        out << buf << '\t' << (r.significant ? 1 : 0) << '\t';
        std::snprintf(buf, sizeof buf, "%.12g\t%.12g", r.ci_low, r.ci_high);
        out << buf << '\t' << (r.ci_degenerate ? 1 : 0) << '\t' << (r.skipped ? 1 : 0) << '\n';
    }
}

std::string bilateral_summary_json(const std::vector<BilateralResult>& results,
                                   const BilateralConfig& config) {
    std::size_t tested = 0, significant = 0;
    for (const auto& r : results) {
        if (r.skipped) continue;
        ++tested;
        if (r.significant) ++significant;
    }
    json j;
    j["alpha"] = config.alpha;
    j["bootstrap_iterations"] = config.bootstrap_iterations;
    j["seed"] = config.seed;
    j["tests_total"] = results.size();
    j["tests_run"] = tested;
    j["tests_significant"] = significant;
    return j.dump(2);
}

} // namespace fillside::bilateral
