#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "detail/numeric.hpp"
#include "ext_value.hpp"
#include "matspace.hpp"

namespace relax {

struct DomainMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

enum class ConstraintMode { strict_positive, nonzero, abs_barrier, none };

inline const char* to_string(ConstraintMode m) {
    switch (m) {
        case ConstraintMode::strict_positive: return "strict_positive";
        case ConstraintMode::nonzero: return "nonzero";
        case ConstraintMode::abs_barrier: return "abs_barrier";
        case ConstraintMode::none: return "none";
    }
    return "?";
}

/// Barrier profile h: [0, inf) -> [0, +inf].
struct HFunction {
    enum class Kind { reciprocal_power, table };
    Kind kind = Kind::reciprocal_power;
    double alpha = 1.0;
    /// Piecewise-linear (t, h) knots, t increasing; constant beyond the last knot.
    std::vector<std::pair<double, double>> table;

    static HFunction reciprocal(double alpha) {
        if (!(alpha > 0)) throw std::invalid_argument("HFunction: alpha must be > 0");
        return {Kind::reciprocal_power, alpha, {}};
    }
    static HFunction from_table(std::vector<std::pair<double, double>> knots) {
        if (knots.empty()) throw std::invalid_argument("HFunction: empty table");
        return {Kind::table, 0.0, std::move(knots)};
    }

    ExtValue operator()(double t) const {
        if (t <= 0.0) return ExtValue::infinity();
        if (kind == Kind::reciprocal_power) return ExtValue(std::pow(t, -alpha));
        if (t <= table.front().first) return ExtValue(table.front().second);
        for (std::size_t i = 1; i < table.size(); ++i)
            if (t <= table[i].first) {
                auto [t0, h0] = table[i - 1];
                auto [t1, h1] = table[i];
                return ExtValue(h0 + (h1 - h0) * (t - t0) / (t1 - t0));
            }
        return ExtValue(table.back().second);
    }
};

/// Energy density on 3 x N matrices.
template <std::size_t N>
struct Density {
    using Mat = Ambient<N>;
    std::function<ExtValue(const Mat&)> evaluator;
    double p = 2.0;
    double C = 1.0;
    ConstraintMode mode = ConstraintMode::none;
    /// W(R F S) = W(F) for R in SO(3), S in SO(N).
    bool isotropic = false;
    std::string name;

    ExtValue operator()(const Mat& F) const { return evaluator(F); }
};

using Density3 = Density<3>;
using Density2 = Density<2>;

using AnyDensity = std::variant<Density3, Density2>;
using AnyMatrix = std::variant<Mat33, Mat32>;

template <std::size_t N>
ExtValue eval(const Density<N>& W, const Ambient<N>& F) {
    return W(F);
}

inline ExtValue eval(const AnyDensity& W, const AnyMatrix& F) {
    if (W.index() != F.index()) throw DomainMismatch("eval: matrix shape does not match density domain");
    if (W.index() == 0) return std::get<0>(W)(std::get<0>(F));
    return std::get<1>(W)(std::get<1>(F));
}

inline ExtValue barrier_term(double det, const HFunction& h, ConstraintMode mode) {
    switch (mode) {
        case ConstraintMode::strict_positive: return det > 0 ? h(det) : ExtValue::infinity();
        case ConstraintMode::nonzero: return det != 0 ? h(std::fabs(det)) : ExtValue::infinity();
        case ConstraintMode::abs_barrier: return h(std::fabs(det));
        case ConstraintMode::none: return ExtValue{};
    }
    return ExtValue::infinity();
}

/// |F|^p + h(det F) with the determinant rule given by `mode`.
inline Density3 make_det_barrier(double p, HFunction h, ConstraintMode mode) {
    if (!(p > 1)) throw std::invalid_argument("make_det_barrier: p must be > 1");
    Density3 W;
    W.p = p;
    W.C = 1.0;
    W.mode = mode;
    W.isotropic = true;
    W.name = std::string("det_barrier(") + to_string(mode) + ")";
    W.evaluator = [p, h = std::move(h), mode](const Mat33& F) {
        ExtValue growth(std::pow(frob2(F), 0.5 * p));
        return growth + barrier_term(det3(F), h, mode);
    };
    return W;
}

/// |xi|^p + h(|xi_1 ^ xi_2|).
inline Density2 make_membrane_barrier(double p, HFunction h) {
    if (!(p > 1)) throw std::invalid_argument("make_membrane_barrier: p must be > 1");
    Density2 W;
    W.p = p;
    W.C = 1.0;
    W.mode = ConstraintMode::abs_barrier;
    W.isotropic = true;
    W.name = "membrane_barrier";
    W.evaluator = [p, h = std::move(h)](const Mat32& xi) {
        ExtValue growth(std::pow(frob2(xi), 0.5 * p));
        return growth + h(norm(cross_columns(xi)));
    };
    return W;
}

/// |F|^p, convex; used as the no-relaxation control.
template <std::size_t N>
Density<N> make_power(double p) {
    Density<N> W;
    W.p = p;
    W.C = 1.0;
    W.mode = ConstraintMode::none;
    W.isotropic = true;
    W.name = "power";
    W.evaluator = [p](const Ambient<N>& F) { return ExtValue(std::pow(frob2(F), 0.5 * p)); };
    return W;
}

// ---- membrane reduction

struct MembraneReduction {
    ExtValue value = ExtValue::infinity();
    Vec3 zeta{};
    bool has_certificate = false;
    bool budget_exhausted = false;
    int evaluations = 0;
};

/// Orthonormal frame adapted to xi: (t1, t2, n) with n the unit normal when
/// xi has rank 2; standard basis otherwise.
inline Mat33 membrane_frame(const Mat32& xi) {
    Vec3 c = cross_columns(xi);
    double nc = norm(c);
    if (!(nc > 0)) return Mat33::identity();
    Vec3 t1 = xi.col(0);
    t1 = (1.0 / norm(t1)) * t1;
    Vec3 n = (1.0 / nc) * c;
    Vec3 t2 = cross(n, t1);
    Mat33 B;
    B.set_col(0, t1);
    B.set_col(1, t2);
    B.set_col(2, n);
    return B;
}

/// Upper approximation of W_0(xi) = inf_zeta W(xi | zeta).
/// `probes` are evaluated first and always count towards the minimum.
inline MembraneReduction membrane_reduce(const Density3& W, const Mat32& xi, int budget = 2000,
                                         const std::vector<Vec3>& probes = {}) {
    MembraneReduction out;
    const Mat33 B = membrane_frame(xi);
    const Mat33 Bt = transpose(B);
    Vec3 best_y{};
    bool have = false;
    auto exhausted = [&] { return out.evaluations >= budget; };
    // Evaluates at zeta exactly; y is the frame coordinate used by the search.
    auto probe = [&](const Vec3& y, const Vec3& zeta) -> double {
        ++out.evaluations;
        ExtValue v = W(adjoin_column(xi, zeta));
        if (v.is_finite() && (!have || v < out.value)) {
            out.value = v;
            out.zeta = zeta;
            best_y = y;
            have = true;
        }
        return v.raw();
    };
    auto probe_y = [&](const Vec3& y) { return probe(y, B * y); };

    for (const auto& z : probes) {
        if (exhausted()) break;
        probe(Bt * z, z);
    }
    // Seeds along the normal direction give a finite value for barriers.
    const double scale = 1.0 + frob(xi);
    for (double s : {0.0, 1.0, -1.0, 0.25, -0.25, 4.0, -4.0}) {
        if (exhausted()) break;
        probe_y({0, 0, s * scale});
    }
    double radius = have ? std::pow(out.value.raw() / W.C, 1.0 / W.p) : 2.0 * scale;
    if (!(radius > 0)) radius = 1e-3;

    const int g = 11;
    const double h = 2.0 * radius / (g - 1);
    for (int i = 0; i < g && !exhausted(); ++i)
        for (int j = 0; j < g && !exhausted(); ++j)
            for (int k = 0; k < g && !exhausted(); ++k) {
                Vec3 y{-radius + i * h, -radius + j * h, -radius + k * h};
                if (norm(y) > radius * (1.0 + 1e-12)) continue;
                probe_y(y);
            }

    if (have) {
        double step = h;
        for (int pass = 0; pass < 64 && !exhausted(); ++pass) {
            double before = out.value.raw();
            for (int c = 0; c < 3 && !exhausted(); ++c) {
                const Vec3 y = best_y;
                auto line = [&](double x) {
                    Vec3 q = y;
                    q[c] = x;
                    return probe_y(q);
                };
                int evals = 0;
                detail::golden_section(line, y[c] - step, y[c] + step, 1e-8, budget - out.evaluations, evals);
            }
            if (before - out.value.raw() <= 1e-15 * (1.0 + before)) break;
            step = std::max(0.5 * step, 1e-6);
        }
    }
    out.budget_exhausted = exhausted();
    out.has_certificate = have;
    if (!have) out.value = ExtValue::infinity();
    return out;
}

/// W_n = W on det > 0, n (1 + |F|^p) otherwise.
inline Density3 monotone_family(const Density3& W, int n) {
    if (n < 1) throw std::invalid_argument("monotone_family: n must be >= 1");
    Density3 Wn = W;
    Wn.name = W.name + "_n" + std::to_string(n);
    Wn.mode = ConstraintMode::none;
    const double p = W.p;
    Wn.evaluator = [W, n, p](const Mat33& F) {
        if (det3(F) > 0) return W(F);
        return ExtValue(n * (1.0 + std::pow(frob2(F), 0.5 * p)));
    };
    return Wn;
}

// ---- growth audit

template <std::size_t N>
struct GrowthSample {
    Ambient<N> F;
    double bound = 0;
    ExtValue measured;
    bool pass = true;
};

template <std::size_t N>
struct GrowthReport {
    std::vector<GrowthSample<N>> samples;
    double c = 0;
    double p = 0;
    double worst_ratio = 0;  ///< max measured / bound; +inf if some value is infinite
    std::size_t failures = 0;
    [[nodiscard]] bool all_pass() const { return failures == 0; }
};

template <std::size_t N>
GrowthReport<N> check_growth(const std::vector<std::pair<Ambient<N>, ExtValue>>& values, double c, double p) {
    GrowthReport<N> rep;
    rep.c = c;
    rep.p = p;
    for (const auto& [F, v] : values) {
        GrowthSample<N> s{F, c * (1.0 + std::pow(frob2(F), 0.5 * p)), v, true};
        s.pass = v.is_finite() && v.raw() <= s.bound;
        double ratio = v.is_finite() ? v.raw() / s.bound : std::numeric_limits<double>::infinity();
        rep.worst_ratio = std::max(rep.worst_ratio, ratio);
        if (!s.pass) ++rep.failures;
        rep.samples.push_back(s);
    }
    return rep;
}

}  // namespace relax
