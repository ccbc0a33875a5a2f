#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace bulkq {

namespace detail {

inline double log_gamma(double x) { return std::lgamma(x); }

// Regularized lower incomplete gamma P(a, x) by series expansion.
inline double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 500; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - log_gamma(a));
}

// Regularized upper incomplete gamma Q(a, x) by continued fraction.
inline double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - log_gamma(a)) * h;
}

}  // namespace detail

/// Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a).
inline double gamma_q(double a, double x) {
    if (!(a > 0.0) || !(x >= 0.0)) throw std::invalid_argument("gamma_q: requires a > 0, x >= 0");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
    return detail::gamma_q_cf(a, x);
}

/// Survival function of the chi-squared distribution with `dof` degrees of
/// freedom, i.e. the p-value of an observed statistic.
inline double chi_squared_pvalue(double statistic, int dof) {
    if (dof < 1) throw std::invalid_argument("chi_squared_pvalue: dof must be positive");
    return gamma_q(0.5 * dof, 0.5 * statistic);
}

/// Poisson pmf, computed in log space.
inline double poisson_pmf(int n, double mean) {
    if (mean == 0.0) return n == 0 ? 1.0 : 0.0;
    return std::exp(-mean + n * std::log(mean) - detail::log_gamma(n + 1.0));
}

struct GofResult {
    double statistic = 0.0;
    int dof = 0;
    double p_value = 1.0;
};

/// Chi-squared goodness-of-fit of observed event counts against a Poisson
/// distribution with known mean. Cells are the counts 0, 1, 2, ... with the
/// right tail merged so every cell has expected frequency at least 5.
inline GofResult poisson_gof(const std::vector<long>& histogram, double mean, double n_samples) {
    if (histogram.empty()) throw std::invalid_argument("poisson_gof: empty histogram");

    // Find the last count whose expected frequency still reaches 5; everything
    // beyond is pooled into one tail cell.
    int tail_start = 0;
    double cum = 0.0;
    for (int m = 0;; ++m) {
        const double e = n_samples * poisson_pmf(m, mean);
        if (m > mean && e < 5.0) {
            tail_start = m;
            break;
        }
        cum += e;
        if (m > 10000) throw std::runtime_error("poisson_gof: tail search did not terminate");
    }

    double stat = 0.0;
    int cells = 0;
    for (int m = 0; m < tail_start; ++m) {
        const double expected = n_samples * poisson_pmf(m, mean);
        const double observed =
            m < static_cast<int>(histogram.size()) ? static_cast<double>(histogram[m]) : 0.0;
        stat += (observed - expected) * (observed - expected) / expected;
        ++cells;
    }
    double tail_expected = n_samples - cum;
    double tail_observed = 0.0;
    for (std::size_t m = static_cast<std::size_t>(tail_start); m < histogram.size(); ++m) {
        tail_observed += static_cast<double>(histogram[m]);
    }
    if (tail_expected > 0.0) {
        stat += (tail_observed - tail_expected) * (tail_observed - tail_expected) / tail_expected;
        ++cells;
    }

    GofResult res;
    res.statistic = stat;
    res.dof = cells - 1;
    res.p_value = chi_squared_pvalue(stat, res.dof);
    return res;
}

}  // namespace bulkq
