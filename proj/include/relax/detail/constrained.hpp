#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "../ext_value.hpp"
#include "../matspace.hpp"
#include "numeric.hpp"

namespace relax {

/// {zeta : <normal, zeta> >= offset}.
struct HalfSpace {
    Vec3 normal{};
    double offset = 0.0;
    [[nodiscard]] bool contains(const Vec3& z) const { return dot(normal, z) >= offset; }
    /// Euclidean projection onto the half-space.
    [[nodiscard]] Vec3 project(const Vec3& z) const {
        double g = offset - dot(normal, z);
        if (g <= 0) return z;
        return z + (g / dot(normal, normal)) * normal;
    }
};

namespace detail {

struct ConstrainedMin {
    Vec3 zeta{};
    ExtValue value = ExtValue::infinity();
    int evaluations = 0;
};

/// Minimizes f over the intersection of half-spaces, starting from a feasible
/// point: an 11^3 grid on the ball of the given radius plus coordinate
/// golden-section refinement in the frame of the first normal.
inline ConstrainedMin constrained_minimize(const std::function<ExtValue(const Vec3&)>& f,
                                           const std::vector<HalfSpace>& sets, const Vec3& start, double radius,
                                           int budget = 2000) {
    Mat33 B = Mat33::identity();
    if (!sets.empty() && norm(sets[0].normal) > 0) {
        Vec3 n = (1.0 / norm(sets[0].normal)) * sets[0].normal;
        Vec3 t1 = any_orthogonal(n);
        B.set_col(0, t1);
        B.set_col(1, cross(n, t1));
        B.set_col(2, n);
    }
    ConstrainedMin out;
    Vec3 best_y = transpose(B) * start;
    auto probe = [&](const Vec3& y, const Vec3& z) -> double {
        for (const auto& h : sets)
            if (!h.contains(z)) return std::numeric_limits<double>::infinity();
        ++out.evaluations;
        ExtValue v = f(z);
        if (v < out.value) {
            out.value = v;
            out.zeta = z;
            best_y = y;
        }
        return v.raw();
    };
    probe(best_y, start);
    const int g = 11;
    const double h = 2.0 * radius / (g - 1);
    for (int i = 0; i < g; ++i)
        for (int j = 0; j < g; ++j)
            for (int k = 0; k < g && out.evaluations < budget; ++k) {
                Vec3 y{-radius + i * h, -radius + j * h, -radius + k * h};
                if (norm(y) > radius * (1.0 + 1e-12)) continue;
                probe(y, B * y);
            }
    double step = h;
    for (int pass = 0; pass < 64 && out.evaluations < budget && out.value.is_finite(); ++pass) {
        const double before = out.value.raw();
        for (int c = 0; c < 3; ++c) {
            const Vec3 y = best_y;
            int evals = 0;
            golden_section(
                [&](double x) {
                    Vec3 q = y;
                    q[c] = x;
                    return probe(q, B * q);
                },
                y[c] - step, y[c] + step, 1e-10, std::max(2, budget - out.evaluations), evals);
        }
        if (before - out.value.raw() <= 1e-15 * (1.0 + before)) {
            if (step <= 1e-7) break;
            step *= 0.25;
        } else {
            step = std::max(0.5 * step, 1e-7);
        }
    }
    return out;
}

}  // namespace detail
}  // namespace relax
