#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <vector>

#include "densities.hpp"
#include "detail/constrained.hpp"
#include "detail/numeric.hpp"
#include "detail/parallel.hpp"
#include "interchange.hpp"
#include "membrane.hpp"

namespace relax {

/// Director d: per-region constants, optionally blended towards zeta-bar
/// near the interfaces with alpha_n = min(n dist, 1).
struct Director {
    std::vector<Vec3> zeta;
    Vec3 bar{};
    int blend_n = 0;  ///< 0: piecewise constant

    [[nodiscard]] Vec3 at(const PlanarPiecewiseAffineMap& psi, std::size_t r, const Vec2& x) const {
        if (blend_n <= 0) return zeta[r];
        Vec2 dir;
        const double dist = psi.interface_distance(r, x, dir);
        const double al = std::isinf(dist) ? 1.0 : blend_profile(blend_n * dist);
        return al == 1.0 ? zeta[r] : (1.0 - al) * bar + al * zeta[r];
    }

    /// Gradient of d (3 x 2); zero where d is locally constant.
    [[nodiscard]] Mat32 grad(const PlanarPiecewiseAffineMap& psi, std::size_t r, const Vec2& x) const {
        Mat32 g;
        if (blend_n <= 0) return g;
        Vec2 dir;
        const double dist = psi.interface_distance(r, x, dir);
        if (std::isinf(dist) || blend_n * dist >= 1.0) return g;
        const Vec3 diff = zeta[r] - bar;
        for (int c = 0; c < 2; ++c) g.set_col(static_cast<std::size_t>(c), (blend_n * dir[static_cast<std::size_t>(c)]) * diff);
        return g;
    }
};

/// phi(x, x3) = psi(x) + x3 d(x).
struct AnsatzField {
    PlanarPiecewiseAffineMap psi;
    Director d;
};

struct EpsSchedule {
    std::vector<double> eps;
    [[nodiscard]] bool valid() const {
        for (std::size_t i = 0; i < eps.size(); ++i) {
            if (!(eps[i] > 0 && eps[i] < 0.5)) return false;
            if (i > 0 && !(eps[i] < eps[i - 1])) return false;
        }
        return true;
    }
};

/// pi_eps of the ansatz: the odd x3 term averages out, leaving psi.
inline PlanarPiecewiseAffineMap pi_eps(const AnsatzField& phi) { return phi.psi; }

/// (1/eps) int_{-eps/2}^{eps/2} phi(x, x3) dx3 by Gauss-Legendre.
inline Vec3 pi_eps(const std::function<Vec3(const Vec2&, double)>& phi, double eps, const Vec2& x, int quad = 4) {
    auto q = detail::gauss_legendre_centered(quad);
    Vec3 s{};
    for (std::size_t i = 0; i < q.nodes.size(); ++i) s = s + q.weights[i] * phi(x, eps * q.nodes[i]);
    return s;
}

struct ThinFilmGrid {
    int cells = 32;  ///< per side on Sigma = (0,1)^2
    int quad = 4;    ///< Gauss points in x3
};

namespace detail {

/// Visits every (cell, Gauss point) with the rescaled gradient
/// (grad psi + eps y grad d | d) split as (in-plane A, director z). Cells
/// where d is locally constant are visited once with the full cell weight.
template <class Fn>
void for_each_point(const AnsatzField& phi, double eps, const ThinFilmGrid& g, Fn&& fn) {
    const double h = 1.0 / g.cells;
    const auto q = gauss_legendre_centered(g.quad);
    for (int a = 0; a < g.cells; ++a)
        for (int b = 0; b < g.cells; ++b) {
            const Vec2 x{(a + 0.5) * h, (b + 0.5) * h};
            const std::size_t r = phi.psi.region_of(x);
            const Vec3 z = phi.d.at(phi.psi, r, x);
            const Mat32 gd = phi.d.grad(phi.psi, r, x);
            const Mat32& gp = phi.psi.regions[r].grad;
            if (gd == Mat32{}) {
                fn(h * h, gp, z);
                continue;
            }
            for (std::size_t k = 0; k < q.nodes.size(); ++k) {
                const Mat32 A = gp + (eps * q.nodes[k]) * gd;
                fn(h * h * q.weights[k], A, z);
            }
        }
}

}  // namespace detail

/// I_eps(phi) = int_Sigma int_{-1/2}^{1/2} W(grad psi + eps y grad d | d) dy dx.
inline ExtValue energy_eps(const Density3& W, const AnsatzField& phi, double eps, const ThinFilmGrid& g = {}) {
    if (!(eps > 0)) throw std::invalid_argument("energy_eps: eps must be > 0");
    if (!phi.psi.has_geometry()) throw BadParams("energy_eps: map needs strip geometry");
    ExtValue s;
    detail::for_each_point(phi, eps, g, [&](double w, const Mat32& A, const Vec3& z) {
        s += W(adjoin_column(A, z)).scaled(w);
    });
    return s;
}

/// int_Sigma W(grad psi | d): the eps -> 0 limit of I_eps for the ansatz.
inline ExtValue recovery_target(const Density3& W, const AnsatzField& phi, const ThinFilmGrid& g = {}) {
    ExtValue s;
    const double h = 1.0 / g.cells;
    for (int a = 0; a < g.cells; ++a)
        for (int b = 0; b < g.cells; ++b) {
            const Vec2 x{(a + 0.5) * h, (b + 0.5) * h};
            const std::size_t r = phi.psi.region_of(x);
            s += W(adjoin_column(phi.psi.regions[r].grad, phi.d.at(phi.psi, r, x))).scaled(h * h);
        }
    return s;
}

struct Recovery {
    AnsatzField field;
    RegionalMultifunction lambda;
    std::vector<ExtValue> region_values;  ///< W(xi_i | zeta_i)
};

/// Directors zeta_i = argmin W(xi_i | .) on {det(xi_i | zeta) >= 1/j}, blended
/// with a common witness zeta-bar over width 1/n (n = 0: piecewise constant).
inline Recovery recovery_sequence(const Density3& W, const PlanarPiecewiseAffineMap& psi, double j, int n,
                                  int budget = 2000) {
    Recovery rec;
    rec.lambda = build_multifunction(psi, j, MultifunctionKind::lambda);
    FiberIntegrand fi = density_fibers(W, psi, budget);
    InterchangeTable t = interchange_gap(fi, rec.lambda, 1, {}, true);
    rec.field.psi = psi;
    rec.field.d.bar = t.witness;
    rec.field.d.blend_n = n;
    for (std::size_t r = 0; r < psi.regions.size(); ++r) {
        auto m = pointwise_min(fi, rec.lambda, r, {0.5, 0.5});
        if (m.value.is_infinite()) throw Infeasible("recovery_sequence: no finite director in region");
        rec.field.d.zeta.push_back(m.zeta);
        rec.region_values.push_back(m.value);
    }
    return rec;
}

struct GammaConfig {
    double j = 2;
    int blend_n = 8;
    ThinFilmGrid grid;
    MembraneConfig membrane;
    unsigned threads = 1;
};

struct GammaRow {
    double eps = 0;
    ExtValue L;       ///< int W_0-estimate at the in-plane gradient (director probed)
    ExtValue U;       ///< I_eps(recovery)
    ExtValue M;       ///< I_mem(psi)
    ExtValue target;  ///< int W(grad psi | d)
    [[nodiscard]] double gap() const { return U.raw() - M.raw(); }
};

struct GammaReport {
    std::vector<GammaRow> rows;
    std::size_t points_checked = 0;
    std::size_t sandwich_violations = 0;  ///< W(A | d) < membrane_reduce(A; probe d)
    std::size_t order_violations = 0;     ///< L > U
};

inline GammaReport gamma_report(const Density3& W, const PlanarPiecewiseAffineMap& psi, const EpsSchedule& sched,
                                const GammaConfig& cfg = {}) {
    if (!sched.valid()) throw std::invalid_argument("gamma_report: invalid eps schedule");
    const Recovery rec = recovery_sequence(W, psi, cfg.j, cfg.blend_n, cfg.membrane.zeta_budget);
    MembraneDensityHandle handle(W, cfg.membrane);
    const ExtValue M = membrane_functional(handle, psi);
    const ExtValue target = recovery_target(W, rec.field, cfg.grid);

    GammaReport rep;
    rep.rows.resize(sched.eps.size());
    std::vector<std::size_t> checked(sched.eps.size()), bad(sched.eps.size());
    detail::parallel_for(sched.eps.size(), cfg.threads, [&](std::size_t e) {
        const double eps = sched.eps[e];
        ExtValue L, U;
        std::map<std::pair<std::array<double, 6>, std::array<double, 3>>, ExtValue> memo;
        detail::for_each_point(rec.field, eps, cfg.grid, [&](double w, const Mat32& A, const Vec3& z) {
            const ExtValue wz = W(adjoin_column(A, z));
            auto key = std::make_pair(A.e, z);
            auto it = memo.find(key);
            if (it == memo.end())
                it = memo.emplace(key, membrane_reduce(W, A, cfg.membrane.zeta_budget, {z}).value).first;
            ++checked[e];
            if (wz < it->second) ++bad[e];
            L += it->second.scaled(w);
            U += wz.scaled(w);
        });
        rep.rows[e] = {eps, L, U, M, target};
    });
    for (std::size_t e = 0; e < sched.eps.size(); ++e) {
        rep.points_checked += checked[e];
        rep.sandwich_violations += bad[e];
        if (rep.rows[e].L > rep.rows[e].U) ++rep.order_violations;
    }
    return rep;
}

}  // namespace relax
