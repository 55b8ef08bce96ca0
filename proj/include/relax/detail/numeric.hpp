#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdint>
#include <functional>
#include <numbers>
#include <vector>

#include "../matspace.hpp"

namespace relax::detail {

/// Golden-section minimization of f on [lo, hi]. Returns the best point seen.
/// `evals` is incremented per call of f; stops at width < tol or max_evals.
struct ScalarMin {
    double x;
    double fx;
};

inline ScalarMin golden_section(const std::function<double(double)>& f, double lo, double hi, double tol,
                                int max_evals, int& evals) {
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - r * (b - a), d = a + r * (b - a);
    if (max_evals < 2) return {c, std::numeric_limits<double>::infinity()};
    double fc = f(c), fd = f(d);
    evals += 2;
    int used = 2;
    ScalarMin best = fc <= fd ? ScalarMin{c, fc} : ScalarMin{d, fd};
    while (b - a > tol && used < max_evals) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
            if (fc < best.fx) best = {c, fc};
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
            if (fd < best.fx) best = {d, fd};
        }
        ++evals;
        ++used;
    }
    return best;
}

/// Deterministic near-uniform unit vectors (Fibonacci spiral).
inline std::vector<Vec3> sphere_points(std::size_t n) {
    std::vector<Vec3> pts;
    pts.reserve(n);
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (std::size_t i = 0; i < n; ++i) {
        double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(n);
        double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
        double phi = golden * static_cast<double>(i);
        pts.push_back({rho * std::cos(phi), rho * std::sin(phi), z});
    }
    return pts;
}

/// n unit vectors on the half circle, angles k*pi/n.
inline std::vector<Vec2> circle_points(std::size_t n) {
    std::vector<Vec2> pts;
    for (std::size_t k = 0; k < n; ++k) {
        double th = std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
        pts.push_back({std::cos(th), std::sin(th)});
    }
    return pts;
}

template <std::size_t N>
std::vector<Vec<N>> direction_set(std::size_t n) {
    if constexpr (N == 2)
        return circle_points(n);
    else
        return sphere_points(n);
}

/// Gauss-Legendre nodes and weights on (-1/2, 1/2), weights summing to 1.
struct Quadrature {
    std::vector<double> nodes;
    std::vector<double> weights;
};

inline Quadrature gauss_legendre_centered(int n) {
    Quadrature q;
    for (int i = 1; i <= n; ++i) {
        double x = std::cos(std::numbers::pi * (i - 0.25) / (n + 0.5));
        double dp = 1.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            double pn = n == 0 ? 1.0 : p1;
            double pm = n == 1 ? 1.0 : p0;
            dp = n * (x * pn - pm) / (x * x - 1.0);
            double dx = pn / dp;
            x -= dx;
            if (std::fabs(dx) < 1e-16) break;
        }
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        q.nodes.push_back(0.5 * x);
        q.weights.push_back(0.5 * w);
    }
    return q;
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double n = static_cast<double>(x.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace relax::detail
