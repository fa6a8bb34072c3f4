#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace treefuse {

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779399461;

inline double gauss_pdf(double y, double mean, double sigma) {
    const double z = (y - mean) / sigma;
    return kInvSqrt2Pi / sigma * std::exp(-0.5 * z * z);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z * 0.70710678118654752440); }

struct Interval {
    double low = 0.0;
    double high = 0.0;
};

// Wilson score interval for a binomial proportion.
inline Interval wilson_ci(std::size_t successes, std::size_t n, double z = 1.959963984540054) {
    if (n == 0) return {0.0, 1.0};
    const double p = static_cast<double>(successes) / static_cast<double>(n);
    const double z2n = z * z / static_cast<double>(n);
    const double denom = 1.0 + z2n;
    const double center = (p + 0.5 * z2n) / denom;
    const double hw = z *
                      std::sqrt(p * (1.0 - p) / static_cast<double>(n) +
                                0.25 * z2n / static_cast<double>(n)) /
                      denom;
    return {std::max(0.0, center - hw), std::min(1.0, center + hw)};
}

namespace detail {

// Regularized incomplete gamma P(a, x), series and continued-fraction
// branches as in the usual numerical treatments.
inline double gamma_p(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_p: bad arguments");
    if (x == 0.0) return 0.0;
    const double lg = std::lgamma(a);
    if (x < a + 1.0) {
        double ap = a, sum = 1.0 / a, del = sum;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * 1e-15) break;
        }
        return sum * std::exp(-x + a * std::log(x) - lg);
    }
    // Lentz continued fraction for Q(a, x).
    double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::abs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    return 1.0 - std::exp(-x + a * std::log(x) - lg) * h;
}

}  // namespace detail

// Upper tail of the chi-square distribution with k degrees of freedom.
inline double chi_square_tail(double stat, std::size_t dof) {
    return 1.0 - detail::gamma_p(0.5 * static_cast<double>(dof), 0.5 * stat);
}

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double variance_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

}  // namespace treefuse
