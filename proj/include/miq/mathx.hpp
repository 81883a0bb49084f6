#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>

namespace miq::mathx {

// Survival function of chi-squared with 1 degree of freedom.
// P(X > x) = erfc(sqrt(x/2)).
inline double chi2_survival_1df(double x) {
    if (x <= 0.0) return 1.0;
    return std::erfc(std::sqrt(x / 2.0));
}

namespace detail {

// Continued fraction for the regularized incomplete beta function
// (modified Lentz algorithm).
inline double beta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-16;
    constexpr double kTiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace detail

// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * detail::beta_cf(a, b, x) / a;
    }
    return 1.0 - front * detail::beta_cf(b, a, 1.0 - x) / b;
}

// Two-sided p-value of Student's t with df degrees of freedom.
inline double student_t_two_sided_p(double t, double df) {
    if (df <= 0.0) throw std::invalid_argument("df must be positive");
    if (!std::isfinite(t)) return 0.0;
    const double x = df / (df + t * t);
    return incomplete_beta(df / 2.0, 0.5, x);
}

// P(X <= k) for X ~ Binomial(n, 1/2). Exact enough through n ~ 1000.
inline double binomial_half_cdf(std::size_t k, std::size_t n) {
    if (k >= n) return 1.0;
    const double log_half_n = -static_cast<double>(n) * std::log(2.0);
    double sum = 0.0;
    for (std::size_t i = 0; i <= k; ++i) {
        const double log_pmf = std::lgamma(static_cast<double>(n) + 1.0) -
                               std::lgamma(static_cast<double>(i) + 1.0) -
                               std::lgamma(static_cast<double>(n - i) + 1.0) + log_half_n;
        sum += std::exp(log_pmf);
    }
    return sum < 1.0 ? sum : 1.0;
}

inline double mean(const double* data, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += data[i];
    return n > 0 ? s / static_cast<double>(n) : 0.0;
}

// Population standard deviation (divide by n).
inline double population_std(const double* data, std::size_t n, double mu) {
    if (n == 0) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = data[i] - mu;
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(n));
}

// Sample standard deviation (divide by n-1).
inline double sample_std(const double* data, std::size_t n, double mu) {
    if (n < 2) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = data[i] - mu;
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(n - 1));
}

// Pearson correlation; returns 0 when either side has zero variance.
inline double pearson(const double* x, const double* y, std::size_t n) {
    if (n < 2) return 0.0;
    const double mx = mean(x, n);
    const double my = mean(y, n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace miq::mathx
