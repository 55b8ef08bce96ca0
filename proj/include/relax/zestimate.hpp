#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "densities.hpp"
#include "detail/numeric.hpp"
#include "detail/parallel.hpp"
#include "detail/rng.hpp"
#include "ext_value.hpp"
#include "matspace.hpp"

namespace relax {

struct BadParams : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

enum class Construction { identity, diamond, square, octahedron, fonseca, ks_realization };

inline const char* to_string(Construction c) {
    switch (c) {
        case Construction::identity: return "identity";
        case Construction::diamond: return "diamond";
        case Construction::square: return "square";
        case Construction::octahedron: return "octahedron";
        case Construction::fonseca: return "fonseca";
        case Construction::ks_realization: return "ks_realization";
    }
    return "?";
}

template <std::size_t N>
struct Cell {
    double w = 1.0;
    Ambient<N> G;
};

/// Piecewise-constant gradient offsets of an Aff_0 test function.
template <std::size_t N>
struct PiecewiseAffineField {
    std::vector<Cell<N>> cells;
    std::string name = "identity";
    std::string params;

    static PiecewiseAffineField identity() { return {{Cell<N>{1.0, Ambient<N>{}}}, "identity", ""}; }

    [[nodiscard]] double weight_sum() const {
        double s = 0;
        for (const auto& c : cells) s += c.w;
        return s;
    }
    [[nodiscard]] Ambient<N> mean_offset() const {
        Ambient<N> m;
        for (const auto& c : cells) m = m + c.w * c.G;
        return m;
    }
    /// Sum w = 1, sum w G = 0 (within tol), all w > 0.
    [[nodiscard]] bool valid(double tol = 1e-12) const {
        double scale = 1.0;
        for (const auto& c : cells) {
            if (!(c.w > 0)) return false;
            scale = std::max(scale, frob(c.G));
        }
        return std::fabs(weight_sum() - 1.0) <= tol && frob(mean_offset()) <= tol * scale;
    }
};

template <std::size_t N>
struct ConstructionParams {
    Construction variant = Construction::diamond;
    Vec3 nu{};         ///< diamond, square, octahedron
    double s = 1.0;    ///< octahedron third-column factor
    int axis = N - 1;  ///< octahedron: column carrying s nu
    Vec<N> a{};        ///< fonseca, ks_realization
    Vec3 b{};          ///< fonseca, ks_realization
    double theta = 0.5;
    int k = 64;
    int k0 = 4;
    Ambient<N> xi{};  ///< ks_realization base matrix
    double t = 0.5;
    int n = 10;
    double l = 0.0;  ///< ks_realization perturbation index; 0 means l = inf

    [[nodiscard]] std::string describe() const {
        char buf[512];
        auto v3 = [](const Vec3& v) {
            char b[128];
            std::snprintf(b, sizeof b, "(%.17g,%.17g,%.17g)", v[0], v[1], v[2]);
            return std::string(b);
        };
        auto vn = [](const Vec<N>& v) {
            std::string s = "(";
            for (std::size_t i = 0; i < N; ++i) {
                char b[40];
                std::snprintf(b, sizeof b, "%s%.17g", i ? "," : "", v[i]);
                s += b;
            }
            return s + ")";
        };
        switch (variant) {
            case Construction::identity: return "identity";
            case Construction::diamond:
            case Construction::square: return std::string(to_string(variant)) + " nu=" + v3(nu);
            case Construction::octahedron:
                std::snprintf(buf, sizeof buf, " s=%.17g axis=%d", s, axis);
                return "octahedron nu=" + v3(nu) + buf;
            case Construction::fonseca:
                std::snprintf(buf, sizeof buf, " theta=%.17g k=%d k0=%d", theta, k, k0);
                return "fonseca a=" + vn(a) + " b=" + v3(b) + buf;
            case Construction::ks_realization:
                std::snprintf(buf, sizeof buf, " t=%.17g n=%d l=%.17g", t, n, l);
                return "ks_realization a=" + vn(a) + " b=" + v3(b) + buf;
        }
        return "?";
    }
};

namespace detail {

template <std::size_t N>
Ambient<N> dyad(const Vec<N>& a, const Vec3& b) {
    return rank_one_matrix(RankOneDyad<N>{a, b});
}

inline Mat32 cols2(const Vec3& c0, const Vec3& c1) {
    Mat32 m;
    m.set_col(0, c0);
    m.set_col(1, c1);
    return m;
}

}  // namespace detail

namespace detail {

/// Cell table without the parameter description.
template <std::size_t N>
PiecewiseAffineField<N> construct_cells(const ConstructionParams<N>& P) {
    PiecewiseAffineField<N> f;
    f.name = to_string(P.variant);
    const Vec3 z{};
    switch (P.variant) {
        case Construction::identity: return PiecewiseAffineField<N>::identity();
        case Construction::diamond:
        case Construction::square: {
            if constexpr (N != 2) {
                throw BadParams("diamond/square constructions need a 3x2 ambient");
            } else {
                const Vec3 v = P.nu, m = -P.nu;
                if (P.variant == Construction::diamond) {
                    for (auto [c0, c1] : {std::pair{m, v}, {m, m}, {v, m}, {v, v}})
                        f.cells.push_back({0.25, detail::cols2(c0, c1)});
                } else {
                    for (auto [c0, c1] : {std::pair{z, v}, {m, z}, {z, m}, {v, z}})
                        f.cells.push_back({0.25, detail::cols2(c0, c1)});
                }
            }
            return f;
        }
        case Construction::octahedron: {
            if constexpr (N != 3) {
                throw BadParams("octahedron construction needs a 3x3 ambient");
            } else {
                if (P.s == 0.0) throw BadParams("octahedron: s must be nonzero");
                if (P.axis < 0 || P.axis > 2) throw BadParams("octahedron: axis out of range");
                const int ax = P.axis;
                const int c0 = ax == 0 ? 1 : 0;
                const int c1 = ax == 2 ? 1 : 2;
                // Sign table of the eight tetrahedra: (col c0, col c1, axis column / s).
                const int table[8][3] = {{-1, -1, -1}, {1, -1, -1}, {1, 1, -1}, {-1, 1, -1},
                                         {-1, -1, 1},  {1, -1, 1},  {1, 1, 1},  {-1, 1, 1}};
                for (const auto& sg : table) {
                    Mat33 G;
                    G.set_col(c0, static_cast<double>(sg[0]) * P.nu);
                    G.set_col(c1, static_cast<double>(sg[1]) * P.nu);
                    G.set_col(ax, (sg[2] * P.s) * P.nu);
                    f.cells.push_back({0.125, G});
                }
            }
            return f;
        }
        case Construction::fonseca: {
            const double na = norm(P.a);
            if (!(na > 0)) throw BadParams("fonseca: a must be nonzero");
            if (!(P.theta > 0 && P.theta < 1)) throw BadParams("fonseca: theta must be in (0,1)");
            if (!(P.k0 > 0 && P.k > P.k0)) throw BadParams("fonseca: need k > k0 > 0");
            const Vec<N> a = (1.0 / na) * P.a;
            const double th = P.theta, k = P.k, k0 = P.k0;
            const Ambient<N> ab = detail::dyad<N>(a, P.b);
            const double side = 2.0 * th / k0;
            if constexpr (N == 3) {
                const Vec3 tau = any_orthogonal(a);
                const Vec3 eta = cross(a, tau);
                const double S = k * k + (k - k0) * (k - k0) + k * (k - k0);
                const double k2 = k * k;
                f.cells.push_back({th * S / (3 * k2), ab});
                f.cells.push_back({(1 - th) * S / (3 * k2), (-th / (1 - th)) * ab});
                const double wT = (k2 - S / 3) / (4 * k2);
                for (const Vec3& dir : {tau, eta, -tau, -eta}) f.cells.push_back({wT, detail::dyad<3>(side * dir, P.b)});
            } else {
                const Vec2 tau{-a[1], a[0]};
                f.cells.push_back({th * (2 * k - k0) / (2 * k), ab});
                f.cells.push_back({(1 - th) * (2 * k - k0) / (2 * k), (-th / (1 - th)) * ab});
                for (const Vec2& dir : {tau, -tau}) f.cells.push_back({k0 / (4 * k), detail::dyad<2>(side * dir, P.b)});
            }
            return f;
        }
        case Construction::ks_realization: {
            if constexpr (N != 2) {
                throw BadParams("ks_realization needs a 3x2 ambient");
            } else {
                const double t = P.t, n = P.n;
                if (!(t > 0 && t < 1)) throw BadParams("ks_realization: t must be in (0,1)");
                if (P.n < 3) throw BadParams("ks_realization: n must be >= 3");
                if (P.l < 0) throw BadParams("ks_realization: l must be >= 0");
                Vec3 bl = P.b;
                // b_l = b + nu / l when b lies in Im xi, nu normal to Im xi.
                if (P.l > 0) {
                    const Vec3 c = cross_columns(P.xi);
                    Vec3 nu;
                    bool in_image;
                    if (norm(c) > 0) {
                        nu = (1.0 / norm(c)) * c;
                        in_image = std::fabs(dot(nu, P.b)) <= 1e-12 * (1.0 + norm(P.b));
                    } else {
                        const Vec3 c0 = norm(P.xi.col(0)) >= norm(P.xi.col(1)) ? P.xi.col(0) : P.xi.col(1);
                        nu = norm(c0) > 0 ? any_orthogonal(c0) : Vec3{0, 0, 1};
                        in_image = norm(c0) > 0 ? norm(cross(c0, P.b)) <= 1e-12 * (1.0 + norm(P.b)) * norm(c0)
                                                : norm(P.b) == 0.0;
                    }
                    if (in_image) bl = P.b + (1.0 / P.l) * nu;
                }
                const Vec2 a = P.a, ap{-P.a[1], P.a[0]};
                f.cells.push_back({(1 - t) * (1 - 2 / n), detail::dyad<2>((-t) * a, bl)});
                f.cells.push_back({t * (1 - 2 / n) + t / n, detail::dyad<2>((1 - t) * a, bl)});
                f.cells.push_back({(1 - t) / (2 * n), detail::dyad<2>((-t) * (a + ap), bl)});
                f.cells.push_back({(1 - t) / (2 * n), detail::dyad<2>((-t) * (a - ap), bl)});
                f.cells.push_back({1 / n, Mat32{}});
            }
            return f;
        }
    }
    throw BadParams("construct: unknown variant");
}

}  // namespace detail

/// Cell table of the named construction.
template <std::size_t N>
PiecewiseAffineField<N> construct(const ConstructionParams<N>& P) {
    PiecewiseAffineField<N> f = detail::construct_cells(P);
    if (P.variant != Construction::identity) f.params = P.describe();
    return f;
}

/// Exact integral: sum_c w_c W(F + G_c); +inf if any cell is infinite.
template <std::size_t N>
ExtValue energy_of(const Density<N>& W, const Ambient<N>& F, const PiecewiseAffineField<N>& field) {
    ExtValue s;
    for (const auto& c : field.cells) {
        ExtValue v = W(F + c.G);
        if (v.is_infinite()) return v;
        s += v.scaled(c.w);
    }
    return s;
}

/// Vitali pasting: cell c is replaced by its refinement (weights multiply, offsets add).
template <std::size_t N>
PiecewiseAffineField<N> compose(const PiecewiseAffineField<N>& outer,
                                const std::map<std::size_t, PiecewiseAffineField<N>>& refinements) {
    PiecewiseAffineField<N> out;
    out.name = refinements.empty() ? outer.name : "composed(" + outer.name + ")";
    out.params = outer.params;
    for (std::size_t i = 0; i < outer.cells.size(); ++i) {
        auto it = refinements.find(i);
        if (it == refinements.end()) {
            out.cells.push_back(outer.cells[i]);
            continue;
        }
        out.params += " | cell " + std::to_string(i) + ": " + it->second.params;
        for (const auto& r : it->second.cells) out.cells.push_back({outer.cells[i].w * r.w, outer.cells[i].G + r.G});
    }
    return out;
}

/// Offsets G -> P G Q; weights unchanged.
template <std::size_t N>
PiecewiseAffineField<N> conjugate_transform(const PiecewiseAffineField<N>& field, const Mat33& P,
                                            const Matrix<N, N>& Q) {
    PiecewiseAffineField<N> out = field;
    for (auto& c : out.cells) c.G = P * c.G * Q;
    return out;
}

// ---- optimizer

struct ZestConfig {
    long budget = 5000;
    std::uint64_t seed = 0;
    bool compose = true;
    bool polish = true;
    int random_dirs = 8;
    unsigned threads = 1;
};

template <std::size_t N>
struct ZestResult {
    ExtValue value = ExtValue::infinity();
    ExtValue baseline = ExtValue::infinity();
    PiecewiseAffineField<N> field = PiecewiseAffineField<N>::identity();
    std::string winner = "identity";
    long evaluations = 0;
    bool budget_exhausted = false;
};

namespace detail {

template <std::size_t N>
std::vector<ConstructionParams<N>> zest_candidates(const Ambient<N>& F, std::uint64_t seed, int random_dirs,
                                                   std::size_t limit = std::numeric_limits<std::size_t>::max()) {
    std::vector<ConstructionParams<N>> out;
    auto add = [&](const ConstructionParams<N>& p) {
        out.push_back(p);
        return out.size() < limit;
    };
    const double sigma = std::max(1.0, frob(F));
    std::vector<double> mags{0.125, 0.25, 0.5, 1.0, 2.0, 4.0};
    if (sigma > 2.0) {
        mags.push_back(0.5 * sigma);
        mags.push_back(sigma);
    }
    const Vec3 E[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    std::vector<Vec3> sweep(E, E + 3);
    static const std::vector<Vec3> sphere = sphere_points(92);
    sweep.insert(sweep.end(), sphere.begin(), sphere.end());
    CounterRng rng(seed, 0x5eed);
    for (int i = 0; i < random_dirs; ++i) sweep.push_back(rng.unit<3>());
    const double thetas[3] = {0.25, 0.5, 0.75};

    if constexpr (N == 2) {
        // Default nu along xi_1 ^ xi_2, else orthogonal to a nonzero column.
        std::vector<Vec3> defaults;
        const Vec3 c = cross_columns(F);
        if (norm(c) > 0) {
            defaults.push_back((1.0 / norm(c)) * c);
        } else {
            Vec3 col = norm(F.col(0)) > 0 ? F.col(0) : F.col(1);
            if (norm(col) > 0) {
                Vec3 u = any_orthogonal(col);
                defaults.push_back(u);
                Vec3 w = cross((1.0 / norm(col)) * col, u);
                defaults.push_back(w);
            } else {
                defaults.assign(E, E + 3);
            }
        }
        for (const auto& v : defaults)
            for (double m : mags)
                for (auto var : {Construction::diamond, Construction::square}) {
                    ConstructionParams<2> p;
                    p.variant = var;
                    p.nu = m * v;
                    if (!add(p)) return out;
                }
        std::vector<Vec3> bdirs(E, E + 3);
        for (const auto& v : defaults) bdirs.push_back(v);
        for (const auto& a : circle_points(4))
            for (const auto& b : bdirs)
                for (double th : thetas)
                    for (double m : {0.25, 0.5, 1.0, 2.0}) {
                        ConstructionParams<2> p;
                        p.variant = Construction::fonseca;
                        p.a = a;
                        p.b = m * b;
                        p.theta = th;
                        if (!add(p)) return out;
                    }
        for (const auto& v : sweep)
            for (double m : mags)
                for (auto var : {Construction::diamond, Construction::square}) {
                    ConstructionParams<2> p;
                    p.variant = var;
                    p.nu = m * v;
                    if (!add(p)) return out;
                }
    } else {
        const double svals[10] = {1, -1, 0.5, -0.5, 2, -2, 0.25, -0.25, 4, -4};
        auto octa = [&](const Vec3& nu, double s, int axis) {
            ConstructionParams<3> p;
            p.variant = Construction::octahedron;
            p.nu = nu;
            p.s = s;
            p.axis = axis;
            return add(p);
        };
        // Column-pair analysis: nu = F_i ^ F_j / |F_i ^ F_j|^2 for the best pair.
        const Vec3 cols[3] = {F.col(0), F.col(1), F.col(2)};
        int bi = 0, bj = 1;
        double bc = -1;
        for (int i = 0; i < 3; ++i)
            for (int j = i + 1; j < 3; ++j) {
                double c = norm(cross(cols[i], cols[j]));
                if (c > bc) bc = c, bi = i, bj = j;
            }
        const int axis = 3 - bi - bj;
        if (is_invertible(F)) {
            for (int i = 0; i < 3; ++i)
                for (double s : {1.0, -1.0})
                    if (!octa(2.0 * E[i], s, 2)) return out;
        }
        if (bc > 0) {
            Vec3 c = cross(cols[bi], cols[bj]);
            Vec3 nu = (1.0 / (bc * bc)) * c;
            for (double m : {1.0, 0.5, 2.0, 0.25, 4.0})
                for (double s : svals)
                    if (!octa(m * nu, s, axis)) return out;
        } else {
            int nz = -1;
            for (int i = 0; i < 3; ++i)
                if (norm(cols[i]) > 0) nz = i;
            std::vector<Vec3> nus;
            if (nz >= 0) {
                Vec3 u = any_orthogonal(cols[nz]);
                nus = {u, cross((1.0 / norm(cols[nz])) * cols[nz], u)};
            } else {
                nus.assign(E, E + 3);
            }
            for (const auto& v : nus)
                for (double m : {1.0, 0.5, 2.0})
                    for (int ax = 0; ax < 3; ++ax)
                        for (double s : svals)
                            if (!octa(m * v, s, ax)) return out;
        }
        for (int ia = 0; ia < 3; ++ia)
            for (int ib = 0; ib < 3; ++ib)
                for (double th : thetas)
                    for (double m : {0.5, 1.0}) {
                        ConstructionParams<3> p;
                        p.variant = Construction::fonseca;
                        p.a = E[ia];
                        p.b = m * E[ib];
                        p.theta = th;
                        if (!add(p)) return out;
                    }
        for (const auto& v : sweep)
            for (double m : {0.25, 0.5, 1.0, 2.0})
                for (double s : {1.0, -1.0, 2.0, -2.0, 0.5, -0.5})
                    if (!octa(m * sigma * v, s, 2)) return out;
    }
    return out;
}

template <std::size_t N>
struct CellStats {
    std::size_t infinite = 0;
    double finite_sum = 0;
};

template <std::size_t N>
CellStats<N> cell_stats(const Density<N>& W, const Ambient<N>& F, const PiecewiseAffineField<N>& f) {
    CellStats<N> s;
    for (const auto& c : f.cells) {
        ExtValue v = W(F + c.G);
        if (v.is_infinite())
            ++s.infinite;
        else
            s.finite_sum += c.w * v.raw();
    }
    return s;
}

template <std::size_t N>
ZestResult<N> zest_search(const Density<N>& W, const Ambient<N>& F, const ZestConfig& cfg, bool allow_compose) {
    ZestResult<N> out;
    out.baseline = W(F);
    out.value = out.baseline;
    out.evaluations = 1;
    const long budget = std::max<long>(cfg.budget, 1);
    const long sweep_budget = allow_compose ? budget * 6 / 10 : budget * 9 / 10;

    // Every candidate has at least four cells.
    const std::size_t limit = static_cast<std::size_t>(sweep_budget / 4 + 1);
    const auto cands = zest_candidates<N>(F, cfg.seed, cfg.random_dirs, limit);
    if (cands.size() >= limit) out.budget_exhausted = true;
    std::vector<PiecewiseAffineField<N>> fields;
    fields.reserve(cands.size());
    long planned = out.evaluations;
    for (const auto& p : cands) {
        auto f = construct_cells(p);
        if (planned + static_cast<long>(f.cells.size()) > sweep_budget) {
            out.budget_exhausted = true;
            break;
        }
        planned += static_cast<long>(f.cells.size());
        fields.push_back(std::move(f));
    }
    std::vector<ExtValue> vals(fields.size());
    parallel_for(fields.size(), cfg.threads, [&](std::size_t i) { vals[i] = energy_of(W, F, fields[i]); });
    out.evaluations = planned;

    std::size_t win = fields.size();
    for (std::size_t i = 0; i < fields.size(); ++i)
        if (vals[i] < out.value) {
            out.value = vals[i];
            win = i;
        }
    ConstructionParams<N> win_params;
    if (win < fields.size()) win_params = cands[win];

    // Golden polish of the winner's scale (nu magnitude or theta).
    if (cfg.polish && win < fields.size()) {
        const ConstructionParams<N> p = win_params;
        const long polish_budget = budget / 10;
        long used = 0;
        auto try_params = [&](const ConstructionParams<N>& q) {
            auto f = construct_cells(q);
            used += static_cast<long>(f.cells.size());
            ExtValue v = energy_of(W, F, f);
            if (v < out.value) {
                out.value = v;
                fields[win] = std::move(f);
                win_params = q;
            }
            return v.raw();
        };
        const int max_evals = static_cast<int>(std::max<long>(2, polish_budget / (2 * static_cast<long>(fields[win].cells.size()))));
        int evals = 0;
        if (p.variant == Construction::fonseca) {
            detail::golden_section(
                [&](double th) {
                    auto q = p;
                    q.theta = th;
                    return try_params(q);
                },
                std::max(0.02, p.theta - 0.25), std::min(0.98, p.theta + 0.25), 1e-6, max_evals, evals);
        } else {
            detail::golden_section(
                [&](double ls) {
                    auto q = p;
                    q.nu = std::exp(ls) * p.nu;
                    return try_params(q);
                },
                -std::log(2.0), std::log(2.0), 1e-6, max_evals, evals);
        }
        out.evaluations += used;
    }

    if (win < fields.size()) {
        fields[win].params = win_params.describe();
        out.field = fields[win];
        out.winner = fields[win].name;
    }

    if (allow_compose) {
        // Refine the winner, or the least-infinite candidate when nothing is finite.
        std::size_t target = win;
        if (out.value.is_infinite()) {
            std::size_t best_inf = std::numeric_limits<std::size_t>::max();
            double best_sum = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < fields.size(); ++i) {
                auto st = cell_stats(W, F, fields[i]);
                if (st.infinite < best_inf || (st.infinite == best_inf && st.finite_sum < best_sum)) {
                    best_inf = st.infinite;
                    best_sum = st.finite_sum;
                    target = i;
                }
            }
            out.evaluations += static_cast<long>(fields.size()) * 4;
        }
        if (target < fields.size()) {
            const auto& outer = fields[target];
            long remaining = budget - out.evaluations;
            long sub_budget = std::max<long>(remaining / static_cast<long>(outer.cells.size()), 16);
            std::map<std::size_t, PiecewiseAffineField<N>> refine;
            for (std::size_t c = 0; c < outer.cells.size(); ++c) {
                ZestConfig sc = cfg;
                sc.budget = sub_budget;
                sc.threads = 1;
                auto sub = zest_search<N>(W, F + outer.cells[c].G, sc, false);
                out.evaluations += sub.evaluations;
                if (sub.value < sub.baseline) refine.emplace(c, sub.field);
            }
            if (!refine.empty()) {
                auto composed = relax::compose(outer, refine);
                ExtValue v = energy_of(W, F, composed);
                out.evaluations += static_cast<long>(composed.cells.size());
                if (v < out.value) {
                    out.value = v;
                    out.field = std::move(composed);
                    out.winner = out.field.name;
                }
            }
        }
    }
    return out;
}

/// Sorted signed canonical frame: F = R diag(d) S^T with R, S in SO(3).
inline RotationFrame sorted_rotation_frame(const Mat33& F) {
    Svd<3> sv = svd(F);
    std::array<int, 3> idx{0, 1, 2};
    std::stable_sort(idx.begin(), idx.end(), [&](int i, int j) { return sv.s[i] > sv.s[j]; });
    RotationFrame fr;
    for (int k = 0; k < 3; ++k) {
        fr.R.set_col(k, sv.U.col(idx[k]));
        fr.S.set_col(k, sv.V.col(idx[k]));
        fr.d[k] = sv.s[idx[k]];
    }
    auto flip_last = [&](Mat33& M) {
        for (int i = 0; i < 3; ++i) M(i, 2) = -M(i, 2);
        fr.d[2] = -fr.d[2];
    };
    if (det3(fr.R) < 0) flip_last(fr.R);
    if (det3(fr.S) < 0) flip_last(fr.S);
    return fr;
}

inline PlanarFrame sorted_planar_frame(const Mat32& xi) {
    PlanarFrame fr = planar_frame(xi);
    if (fr.d[1] > fr.d[0]) {
        std::swap(fr.d[0], fr.d[1]);
        Mat33 R = fr.R;
        fr.R.set_col(0, R.col(1));
        fr.R.set_col(1, R.col(0));
        fr.R.set_col(2, -R.col(2));
        Mat22 S = fr.S;
        fr.S.set_col(0, S.col(1));
        fr.S.set_col(1, S.col(0));
    }
    return fr;
}

}  // namespace detail

/// Upper bound for Z W(F) over the construction library.
template <std::size_t N>
ZestResult<N> optimize_upper(const Density<N>& W, const Ambient<N>& F, const ZestConfig& cfg = {}) {
    if (!W.isotropic) return detail::zest_search<N>(W, F, cfg, cfg.compose);
    // Search at the canonical diagonal, then map the winner back.
    Ambient<N> D;
    Mat33 P;
    Matrix<N, N> Q;
    if constexpr (N == 3) {
        auto fr = detail::sorted_rotation_frame(F);
        for (int i = 0; i < 3; ++i) D(i, i) = fr.d[i];
        P = fr.R;
        Q = transpose(fr.S);
    } else {
        auto fr = detail::sorted_planar_frame(F);
        D(0, 0) = fr.d[0];
        D(1, 1) = fr.d[1];
        P = fr.R;
        Q = transpose(fr.S);
    }
    ZestResult<N> r = detail::zest_search<N>(W, D, cfg, cfg.compose);
    ZestResult<N> out;
    out.baseline = W(F);
    out.value = out.baseline;
    out.evaluations = r.evaluations + 1;
    out.budget_exhausted = r.budget_exhausted;
    if (r.winner != "identity") {
        auto field = conjugate_transform(r.field, P, Q);
        field.params = r.field.params + " [canonical frame]";
        ExtValue v = energy_of(W, F, field);
        out.evaluations += static_cast<long>(field.cells.size());
        if (v < out.value) {
            out.value = v;
            out.field = std::move(field);
            out.winner = r.winner;
        }
    }
    return out;
}

/// Zest W as a density (each evaluation runs the optimizer).
template <std::size_t N>
Density<N> zest_density(const Density<N>& W, ZestConfig cfg) {
    Density<N> Z = W;
    Z.name = "Zest(" + W.name + ")";
    cfg.threads = 1;
    Z.evaluator = [W, cfg](const Ambient<N>& F) { return optimize_upper<N>(W, F, cfg).value; };
    return Z;
}

}  // namespace relax
