#pragma once

#include <array>
#include <vector>
#include <cmath>
#include <cstddef>
#include <string>

#include "treefuse/errors.hpp"

namespace treefuse {

namespace detail {

// Legendre nodes/weights on [-1, 1] via Newton iteration on P_n.
// Computed once at startup; accurate to machine precision.
template <std::size_t N>
struct GaussLegendreRule {
    std::array<double, N> x{};
    std::array<double, N> w{};

    GaussLegendreRule() {
        for (std::size_t i = 0; i < N; ++i) {
            // Chebyshev-based initial guess for the i-th root.
            double xi = std::cos(3.14159265358979323846 * (static_cast<double>(i) + 0.75) /
                                 (static_cast<double>(N) + 0.5));
            double dp = 0.0;
            for (int iter = 0; iter < 100; ++iter) {
                // P_N and P_{N-1} by the three-term recurrence.
                double p0 = 1.0, p1 = xi;
                for (std::size_t k = 2; k <= N; ++k) {
                    const double pk = ((2.0 * static_cast<double>(k) - 1.0) * xi * p1 -
                                       (static_cast<double>(k) - 1.0) * p0) /
                                      static_cast<double>(k);
                    p0 = p1;
                    p1 = pk;
                }
                dp = static_cast<double>(N) * (xi * p1 - p0) / (xi * xi - 1.0);
                const double dx = p1 / dp;
                xi -= dx;
                if (std::abs(dx) < 1e-16) break;
            }
            x[i] = xi;
            w[i] = 2.0 / ((1.0 - xi * xi) * dp * dp);
        }
    }
};

inline const GaussLegendreRule<7>& gl7() {
    static const GaussLegendreRule<7> rule;
    return rule;
}

inline const GaussLegendreRule<15>& gl15() {
    static const GaussLegendreRule<15> rule;
    return rule;
}

template <std::size_t N, typename F>
double gl_panel(const GaussLegendreRule<N>& rule, F&& f, double a, double b) {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double sum = 0.0;
    for (std::size_t i = 0; i < N; ++i) sum += rule.w[i] * f(mid + half * rule.x[i]);
    return half * sum;
}

// Local tolerance halves per split so accepted-panel errors telescope to
// the global budget. A panel whose residual is already below `floor`
// (a small fraction of the global budget) is accepted outright; only a
// handful of panels straddling an integrand discontinuity ever use this
// path, so the total stays within ~1.1x the requested tolerance.
template <typename F>
double adaptive_gl_rec(F&& f, double a, double b, double tol, double floor, int depth,
                       int max_depth) {
    const double coarse = gl_panel(gl7(), f, a, b);
    const double fine = gl_panel(gl15(), f, a, b);
    const double residual = std::abs(fine - coarse);
    if (residual <= tol || residual <= floor || (b - a) < 1e-300) return fine;
    if (depth >= max_depth) {
        throw numerical_error("adaptive quadrature failed to converge on [" + std::to_string(a) +
                              ", " + std::to_string(b) + "]: residual " + std::to_string(residual));
    }
    const double mid = 0.5 * (a + b);
    return adaptive_gl_rec(f, a, mid, 0.5 * tol, floor, depth + 1, max_depth) +
           adaptive_gl_rec(f, mid, b, 0.5 * tol, floor, depth + 1, max_depth);
}

}  // namespace detail

struct QuadratureConfig {
    double abs_tol = 1e-9;
    int max_depth = 60;
};

// Adaptive Gauss-Legendre on [a, b] with absolute tolerance. Handles the
// piecewise-smooth integrands used here (densities times decision
// indicators); throws numerical_error with diagnostics on non-convergence.
template <typename F>
double integrate(F&& f, double a, double b, const QuadratureConfig& cfg = {}) {
    if (!(a < b)) return 0.0;
    return detail::adaptive_gl_rec(f, a, b, cfg.abs_tol, 1e-3 * cfg.abs_tol, 0, cfg.max_depth);
}

// Adaptive integration over a pre-partitioned interval. The anchor list
// pins the initial panels so that integrand features (decision-boundary
// sign bands, density edges) cannot slip between the quadrature nodes of
// one wide panel; each panel gets a width-proportional share of the
// tolerance budget.
template <typename F>
double integrate_with_anchors(F&& f, const std::vector<double>& anchors,
                              const QuadratureConfig& cfg = {}) {
    if (anchors.size() < 2) return 0.0;
    const double total_width = anchors.back() - anchors.front();
    if (!(total_width > 0.0)) return 0.0;
    const double floor = 1e-3 * cfg.abs_tol;
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < anchors.size(); ++i) {
        const double a = anchors[i], b = anchors[i + 1];
        if (!(a < b)) continue;
        const double tol = std::max(cfg.abs_tol * (b - a) / total_width, floor);
        total += detail::adaptive_gl_rec(f, a, b, tol, floor, 0, cfg.max_depth);
    }
    return total;
}

}  // namespace treefuse
