#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "densities.hpp"
#include "detail/constrained.hpp"
#include "detail/numeric.hpp"
#include "membrane.hpp"

namespace relax {

/// {zeta : sign * det(xi | zeta) >= 1/j}, a closed half-space with normal
/// sign * (xi_1 ^ xi_2).
struct ConvexCellSet {
    Vec3 cross{};   ///< xi_1 ^ xi_2
    int sign = 1;   ///< +1 (U+) or -1 (U-)
    double j = 1;   ///< offset 1/j

    [[nodiscard]] HalfSpace halfspace() const { return {static_cast<double>(sign) * cross, 1.0 / j}; }
    [[nodiscard]] bool nonempty() const { return norm(cross) > 0; }
    [[nodiscard]] bool contains(const Vec3& z) const { return halfspace().contains(z); }
};

enum class MultifunctionKind { gamma, lambda };

struct RegionalMultifunction {
    MultifunctionKind kind = MultifunctionKind::lambda;
    PlanarPiecewiseAffineMap psi;
    std::vector<ConvexCellSet> cells;  ///< one per region
    Vec3 witness{};                    ///< common feasible zeta-bar
    double j = 1;                      ///< requested j
    double j_psi = 1;                  ///< gamma: smallest j for which the witness is feasible
    double j_eff = 1;                  ///< max(j, j_psi)
};

/// Unit direction d maximizing min_i s_i <c_i, d> / |c_i| over a direction grid;
/// s_i = +1 (lambda) or s_i = sign <c_i, d> (gamma).
inline std::optional<Vec3> witness_direction(const std::vector<Vec3>& normals, bool signed_free) {
    std::vector<Vec3> dirs = detail::sphere_points(92);
    Vec3 sum{};
    for (const auto& c : normals) sum = sum + (1.0 / norm(c)) * c;
    if (norm(sum) > 0) dirs.insert(dirs.begin(), (1.0 / norm(sum)) * sum);
    const Vec3 E[3] = {{0, 0, 1}, {0, 1, 0}, {1, 0, 0}};
    for (const auto& e : E) dirs.insert(dirs.begin(), e);
    for (const auto& e : E) dirs.push_back(-e);
    double best = 0;
    std::optional<Vec3> out;
    for (const auto& d : dirs) {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& c : normals) {
            double v = dot(c, d) / norm(c);
            m = std::min(m, signed_free ? std::fabs(v) : v);
        }
        if (m > best + 1e-12) {
            best = m;
            out = d;
        }
    }
    return out;
}

inline RegionalMultifunction build_multifunction(const PlanarPiecewiseAffineMap& psi, double j,
                                                 MultifunctionKind kind) {
    if (!(j > 0)) throw BadParams("build_multifunction: j must be > 0");
    RegionalMultifunction m;
    m.kind = kind;
    m.psi = psi;
    m.j = j;
    std::vector<Vec3> normals;
    for (const auto& r : psi.regions) {
        Vec3 c = cross_columns(r.grad);
        if (!(norm(c) > 0)) throw Infeasible("build_multifunction: region gradient has rank < 2");
        normals.push_back(c);
    }
    auto d = witness_direction(normals, kind == MultifunctionKind::gamma);
    if (!d) throw Infeasible("build_multifunction: no common witness on the direction grid");
    double mind = std::numeric_limits<double>::infinity();
    for (const auto& c : normals) mind = std::min(mind, std::fabs(dot(c, *d)));
    if (kind == MultifunctionKind::gamma) {
        m.witness = *d;
        m.j_psi = std::ceil(1.0 / mind);
        m.j_eff = std::max(j, m.j_psi);
        for (const auto& c : normals) m.cells.push_back({c, dot(c, *d) > 0 ? 1 : -1, m.j_eff});
    } else {
        m.j_psi = std::ceil(1.0 / mind);
        m.j_eff = j;
        m.witness = std::max(1.0, 2.0 / (j * mind)) * *d;
        for (const auto& c : normals) m.cells.push_back({c, 1, j});
    }
    return m;
}

/// f(x, zeta) on the fibres; `center` marks the quadratic case
/// f = |zeta - center(x)|^2, minimized exactly by projection.
struct FiberIntegrand {
    std::function<ExtValue(std::size_t region, const Vec2& x, const Vec3& zeta)> f;
    bool region_constant = false;
    std::function<Vec3(std::size_t region, const Vec2& x)> center;
    double C = 1.0;
    double p = 2.0;
    int budget = 2000;
};

inline FiberIntegrand density_fibers(const Density3& W, const PlanarPiecewiseAffineMap& psi, int budget = 2000) {
    FiberIntegrand fi;
    fi.f = [W, psi](std::size_t r, const Vec2&, const Vec3& z) { return W(adjoin_column(psi.regions[r].grad, z)); };
    fi.region_constant = true;
    fi.C = W.C;
    fi.p = W.p;
    fi.budget = budget;
    return fi;
}

/// min over the region's cell set of f(x, .) with its argmin.
inline detail::ConstrainedMin pointwise_min(const FiberIntegrand& fi, const RegionalMultifunction& G, std::size_t r,
                                            const Vec2& x) {
    const HalfSpace H = G.cells[r].halfspace();
    if (fi.center) {
        detail::ConstrainedMin out;
        out.zeta = H.project(fi.center(r, x));
        out.value = fi.f(r, x, out.zeta);
        out.evaluations = 1;
        return out;
    }
    const Vec3 start = G.witness;
    ExtValue v0 = fi.f(r, x, start);
    double radius = v0.is_finite() ? std::pow(v0.raw() / fi.C, 1.0 / fi.p) : 1.0 + norm(start);
    return detail::constrained_minimize([&](const Vec3& z) { return fi.f(r, x, z); }, {H}, start, radius, fi.budget);
}

struct InterchangeResult {
    double lhs = 0;
    double rhs = 0;
    double gap = 0;
    int n = 0;
};

struct InterchangeTable {
    std::vector<InterchangeResult> rows;
    Vec3 witness{};
};

inline double blend_profile(double t) { return std::min(t, 1.0); }

/// lhs: energy of phi_n = (1 - alpha_n) zeta-bar + alpha_n zeta_i(x); rhs: grid
/// quadrature of the pointwise constrained minima; both on a grid x grid mesh.
inline InterchangeTable interchange_gap(const FiberIntegrand& fi, const RegionalMultifunction& G, int grid,
                                        const std::vector<int>& blends, bool refine_witness = true) {
    if (!G.psi.has_geometry()) throw BadParams("interchange_gap: map needs strip geometry");
    const double h = 1.0 / grid;
    const std::size_t cells = static_cast<std::size_t>(grid) * static_cast<std::size_t>(grid);
    std::vector<detail::ConstrainedMin> mins(cells);
    std::vector<std::size_t> region(cells);
    std::vector<Vec2> centers(cells);
    std::vector<std::optional<detail::ConstrainedMin>> per_region(G.cells.size());
    for (int a = 0; a < grid; ++a)
        for (int b = 0; b < grid; ++b) {
            const std::size_t idx = static_cast<std::size_t>(a) * grid + b;
            centers[idx] = {(a + 0.5) * h, (b + 0.5) * h};
            region[idx] = G.psi.region_of(centers[idx]);
            if (fi.region_constant) {
                auto& pr = per_region[region[idx]];
                if (!pr) pr = pointwise_min(fi, G, region[idx], centers[idx]);
                mins[idx] = *pr;
            } else {
                mins[idx] = pointwise_min(fi, G, region[idx], centers[idx]);
            }
        }

    InterchangeTable tab;
    tab.witness = G.witness;
    if (refine_witness && fi.region_constant) {
        std::vector<HalfSpace> all;
        for (const auto& c : G.cells) all.push_back(c.halfspace());
        Vec2 x0{0.5, 0.5};
        auto avg = [&](const Vec3& z) {
            ExtValue s;
            for (std::size_t r = 0; r < G.cells.size(); ++r) s += fi.f(r, x0, z).scaled(G.psi.regions[r].fraction);
            return s;
        };
        ExtValue v0 = avg(G.witness);
        double radius = v0.is_finite() ? std::pow(v0.raw() / fi.C, 1.0 / fi.p) : 1.0 + norm(G.witness);
        auto r = detail::constrained_minimize(avg, all, G.witness, radius, fi.budget);
        if (r.value.is_finite()) tab.witness = r.zeta;
    }

    double rhs = 0;
    for (std::size_t i = 0; i < cells; ++i) rhs += h * h * mins[i].value.raw();
    for (int n : blends) {
        double lhs = 0;
        for (std::size_t i = 0; i < cells; ++i) {
            Vec2 dir;
            const double dist = G.psi.interface_distance(region[i], centers[i], dir);
            const double al = std::isinf(dist) ? 1.0 : blend_profile(n * dist);
            const Vec3 z = al == 1.0 ? mins[i].zeta : (1.0 - al) * tab.witness + al * mins[i].zeta;
            lhs += h * h * fi.f(region[i], centers[i], z).raw();
        }
        tab.rows.push_back({lhs, rhs, lhs - rhs, n});
    }
    return tab;
}

}  // namespace relax
