#pragma once

#include <cmath>
#include <cstring>
#include <limits>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "densities.hpp"
#include "detail/parallel.hpp"
#include "lamination.hpp"
#include "zestimate.hpp"

namespace relax {

struct Infeasible : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PlanarRegion {
    double fraction = 1.0;
    Mat32 grad;
};

/// Piecewise-affine psi on Sigma = (0,1)^2. With geometry, region i is the
/// vertical strip [breaks[i], breaks[i+1]] x [0,1].
struct PlanarPiecewiseAffineMap {
    std::vector<PlanarRegion> regions;
    std::vector<double> breaks;

    [[nodiscard]] bool has_geometry() const { return breaks.size() == regions.size() + 1; }

    [[nodiscard]] bool valid(double tol = 1e-12) const {
        double s = 0;
        for (const auto& r : regions) {
            if (!(r.fraction > 0)) return false;
            s += r.fraction;
        }
        return !regions.empty() && std::fabs(s - 1.0) <= tol;
    }

    static PlanarPiecewiseAffineMap single(const Mat32& xi) { return {{{1.0, xi}}, {0.0, 1.0}}; }

    /// Strips with breaks 0 = b_0 < ... < b_k = 1. Neighbouring gradients must
    /// share the second column so that psi is continuous.
    static PlanarPiecewiseAffineMap strips(std::vector<double> breaks, const std::vector<Mat32>& grads) {
        if (breaks.size() != grads.size() + 1 || grads.empty()) throw BadParams("strips: breaks/gradients mismatch");
        if (breaks.front() != 0.0 || breaks.back() != 1.0) throw BadParams("strips: breaks must span [0,1]");
        PlanarPiecewiseAffineMap m;
        for (std::size_t i = 0; i < grads.size(); ++i) {
            if (!(breaks[i + 1] > breaks[i])) throw BadParams("strips: breaks must increase");
            if (i > 0 && norm(grads[i].col(1) - grads[i - 1].col(1)) > 1e-12)
                throw BadParams("strips: gradients must agree in the second column");
            m.regions.push_back({breaks[i + 1] - breaks[i], grads[i]});
        }
        m.breaks = std::move(breaks);
        return m;
    }

    [[nodiscard]] std::size_t region_of(const Vec2& x) const {
        for (std::size_t i = 0; i + 1 < regions.size(); ++i)
            if (x[0] < breaks[i + 1]) return i;
        return regions.size() - 1;
    }

    /// Distance to the interior interfaces of region i (x1 = breaks), +inf for
    /// a single region; `dir` receives the gradient of that distance.
    [[nodiscard]] double interface_distance(std::size_t i, const Vec2& x, Vec2& dir) const {
        double d = std::numeric_limits<double>::infinity();
        dir = {0, 0};
        if (i > 0 && x[0] - breaks[i] < d) {
            d = x[0] - breaks[i];
            dir = {1, 0};
        }
        if (i + 1 < regions.size() && breaks[i + 1] - x[0] < d) {
            d = breaks[i + 1] - x[0];
            dir = {-1, 0};
        }
        return d;
    }

    /// psi(x) with psi(0) = 0, continuous across strips.
    [[nodiscard]] Vec3 value(const Vec2& x) const {
        Vec3 y{};
        double x0 = 0.0;
        const std::size_t r = region_of(x);
        for (std::size_t i = 0; i < r; ++i) {
            y = y + (breaks[i + 1] - x0) * regions[i].grad.col(0);
            x0 = breaks[i + 1];
        }
        y = y + (x[0] - x0) * regions[r].grad.col(0);
        return y + x[1] * regions[r].grad.col(1);
    }
};

struct MembraneConfig {
    int zeta_budget = 2000;
    ZestConfig zest;
};

/// W -> W_0 (cached zeta search) -> Zest W_0.
class MembraneDensityHandle {
public:
    MembraneDensityHandle(Density3 W, MembraneConfig cfg)
        : W_(std::move(W)), cfg_(cfg), cache_(std::make_shared<Cache>()) {}

    [[nodiscard]] const Density3& source() const { return W_; }
    [[nodiscard]] const MembraneConfig& config() const { return cfg_; }

    [[nodiscard]] MembraneReduction reduce(const Mat32& xi) const {
        detail::MatrixKey<2> key{xi};
        {
            std::lock_guard lk(cache_->mu);
            if (auto it = cache_->map.find(key); it != cache_->map.end()) return it->second;
        }
        MembraneReduction r = membrane_reduce(W_, xi, cfg_.zeta_budget);
        std::lock_guard lk(cache_->mu);
        cache_->map.emplace(key, r);
        return r;
    }

    [[nodiscard]] ExtValue w0(const Mat32& xi) const { return reduce(xi).value; }

    [[nodiscard]] Density2 w0_density() const {
        Density2 D;
        D.p = W_.p;
        D.C = W_.C;
        D.mode = ConstraintMode::abs_barrier;
        D.isotropic = W_.isotropic;
        D.name = "W0(" + W_.name + ")";
        MembraneDensityHandle self = *this;
        D.evaluator = [self](const Mat32& xi) { return self.w0(xi); };
        return D;
    }

    [[nodiscard]] ZestResult<2> wmem(const Mat32& xi) const { return optimize_upper<2>(w0_density(), xi, cfg_.zest); }

private:
    struct Cache {
        std::mutex mu;
        std::unordered_map<detail::MatrixKey<2>, MembraneReduction, detail::MatrixKeyHash<2>> map;
    };
    Density3 W_;
    MembraneConfig cfg_;
    std::shared_ptr<Cache> cache_;
};

/// Zest(W_0)(xi).
inline ZestResult<2> membrane_density(const Density3& W, const Mat32& xi, const MembraneConfig& cfg = {}) {
    return MembraneDensityHandle(W, cfg).wmem(xi);
}

/// Route A nests three searches, so the defaults are far below the
/// single-search defaults.
struct IdentityConfig {
    ZestConfig outer{.budget = 300};  ///< 2D optimizer, both routes
    int zeta_budget = 300;
    ZestConfig inner{.budget = 300};  ///< 3D optimizer inside route A
    unsigned threads = 1;             ///< sample-parallel
};

struct IdentityRow {
    Mat32 xi;
    ExtValue route_a;  ///< Zest((Zest W)_0)(xi)
    ExtValue route_b;  ///< Zest(W_0)(xi)
    double gap = 0;    ///< |A - B| / (1 + min(A, B)); +inf if exactly one route is infinite
    std::string winner_a, winner_b;
};

struct IdentityReport {
    std::vector<IdentityRow> rows;
    [[nodiscard]] double max_gap() const {
        double g = 0;
        for (const auto& r : rows) g = std::max(g, r.gap);
        return g;
    }
};

inline double relative_gap(ExtValue a, ExtValue b) {
    if (a.is_infinite() && b.is_infinite()) return 0.0;
    if (a.is_infinite() || b.is_infinite()) return std::numeric_limits<double>::infinity();
    return std::fabs(a.raw() - b.raw()) / (1.0 + std::min(a.raw(), b.raw()));
}

/// Consistency diagnostic for Z[ZW]_0 = ZW_0.
inline IdentityReport identity_check(const Density3& W, const std::vector<Mat32>& samples, const IdentityConfig& cfg = {}) {
    IdentityReport rep;
    rep.rows.resize(samples.size());
    const Density3 ZW = zest_density(W, cfg.inner);
    detail::parallel_for(samples.size(), cfg.threads, [&](std::size_t i) {
        MembraneConfig mb{cfg.zeta_budget, cfg.outer};
        mb.zest.threads = 1;
        MembraneDensityHandle route_a(ZW, mb), route_b(W, mb);
        auto a = route_a.wmem(samples[i]);
        auto b = route_b.wmem(samples[i]);
        rep.rows[i] = {samples[i], a.value, b.value, relative_gap(a.value, b.value), a.winner, b.winner};
    });
    return rep;
}

/// I_mem(psi) = sum_i |V_i| W_mem(xi_i).
inline ExtValue membrane_functional(const MembraneDensityHandle& h, const PlanarPiecewiseAffineMap& psi) {
    ExtValue s;
    for (const auto& r : psi.regions) s += h.wmem(r.grad).value.scaled(r.fraction);
    return s;
}

}  // namespace relax
