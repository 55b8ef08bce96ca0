#pragma once

#include <cmath>
#include <cstring>
#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "densities.hpp"
#include "detail/numeric.hpp"
#include "detail/rng.hpp"
#include "ext_value.hpp"
#include "matspace.hpp"

namespace relax {

struct DepthBudget : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SingularDecomposition : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <std::size_t N>
struct LaminateTree;
template <std::size_t N>
using TreePtr = std::shared_ptr<const LaminateTree<N>>;

/// Leaf(matrix) or Node(t, a(x)b, minus, plus) with
/// matrix = (1-t) minus + t plus and plus - minus = a(x)b.
template <std::size_t N>
struct LaminateTree {
    Ambient<N> matrix;
    double t = 0.0;
    RankOneDyad<N> dyad;
    TreePtr<N> minus;
    TreePtr<N> plus;

    [[nodiscard]] bool is_leaf() const { return !minus; }

    static TreePtr<N> leaf(const Ambient<N>& F) {
        auto n = std::make_shared<LaminateTree>();
        n->matrix = F;
        return n;
    }
    static TreePtr<N> node(const Ambient<N>& F, double t, const RankOneDyad<N>& d, TreePtr<N> m, TreePtr<N> p) {
        auto n = std::make_shared<LaminateTree>();
        n->matrix = F;
        n->t = t;
        n->dyad = d;
        n->minus = std::move(m);
        n->plus = std::move(p);
        return n;
    }
};

/// Bottom-up value: leaves W(leaf), nodes (1-t) v(minus) + t v(plus).
template <std::size_t N>
ExtValue replay(const LaminateTree<N>& tree, const std::function<ExtValue(const Ambient<N>&)>& W) {
    if (tree.is_leaf()) return W(tree.matrix);
    return replay(*tree.minus, W).scaled(1.0 - tree.t) + replay(*tree.plus, W).scaled(tree.t);
}

struct TreeAudit {
    double max_reconstruction = 0;  ///< |(1-t) minus + t plus - node|, relative to 1 + |node|
    double max_dyad_mismatch = 0;   ///< |(plus - minus) - a(x)b|
    double max_minor = 0;           ///< largest 2x2 minor of plus - minus
    std::size_t leaves = 0;
    std::size_t depth = 0;
};

template <std::size_t N>
void audit_into(const LaminateTree<N>& tr, TreeAudit& a, std::size_t level) {
    a.depth = std::max(a.depth, level);
    if (tr.is_leaf()) {
        ++a.leaves;
        return;
    }
    const auto& m = tr.minus->matrix;
    const auto& p = tr.plus->matrix;
    a.max_reconstruction =
        std::max(a.max_reconstruction, frob((1.0 - tr.t) * m + tr.t * p - tr.matrix) / (1.0 + frob(tr.matrix)));
    a.max_dyad_mismatch = std::max(a.max_dyad_mismatch, frob((p - m) - rank_one_matrix(tr.dyad)));
    a.max_minor = std::max(a.max_minor, max_minor2(p - m));
    audit_into(*tr.minus, a, level + 1);
    audit_into(*tr.plus, a, level + 1);
}

template <std::size_t N>
TreeAudit audit(const LaminateTree<N>& tree) {
    TreeAudit a;
    audit_into(tree, a, 0);
    return a;
}

/// Leaves with their laminate weights (product of t / 1-t along the path).
template <std::size_t N>
void collect_leaves(const LaminateTree<N>& tr, double w, std::vector<std::pair<double, Ambient<N>>>& out) {
    if (tr.is_leaf()) {
        out.emplace_back(w, tr.matrix);
        return;
    }
    collect_leaves(*tr.minus, w * (1.0 - tr.t), out);
    collect_leaves(*tr.plus, w * tr.t, out);
}

// ---- Kohn-Strang recursion

struct KsConfig {
    int t_steps = 16;      ///< t grid {k / t_steps}, interior points
    int a_dirs = 0;        ///< 0: 32 half-circle angles (N=2) or 92 sphere points (N=3)
    int b_dirs = 92;       ///< sphere points for b
    int radii = 8;         ///< geometric radius grid, ratio 1/2 from the coercivity cap
    int depth = 1;         ///< max recursion depth i
    int refine_passes = 1; ///< golden polish passes on (t, r) around the discrete winner
    std::size_t node_cap = 4'000'000;
    double C = 1.0;        ///< coercivity constant of the oracle
    double p = 2.0;        ///< growth exponent of the oracle
};

template <std::size_t N>
struct KsStep {
    ExtValue value = ExtValue::infinity();
    bool split = false;
    double t = 0.0;
    RankOneDyad<N> dyad;
    std::size_t evaluations = 0;
};

/// One Kohn-Strang step: min over the discrete (t, a, b, r) set of
/// (1-t) R(F - t D) + t R(F + (1-t) D), with D = r a(x)b, and R(F) itself.
template <std::size_t N>
KsStep<N> ks_step(const std::function<ExtValue(const Ambient<N>&)>& R, const Ambient<N>& F, const KsConfig& cfg) {
    if (cfg.t_steps < 2 || cfg.b_dirs < 1 || cfg.radii < 1) throw std::invalid_argument("KsConfig: grid too small");
    KsStep<N> out;
    out.value = R(F);
    out.evaluations = 1;
    const std::size_t na = cfg.a_dirs > 0 ? static_cast<std::size_t>(cfg.a_dirs) : (N == 2 ? 32 : 92);
    const auto as = detail::direction_set<N>(na);
    const auto bs = detail::sphere_points(static_cast<std::size_t>(cfg.b_dirs));
    const double base_r =
        out.value.is_finite() ? 2.0 * std::pow(out.value.raw() / cfg.C, 1.0 / cfg.p) : 2.0 * (1.0 + frob(F));
    if (!(base_r > 0)) return out;

    auto pair_value = [&](double t, const Ambient<N>& D) -> ExtValue {
        ExtValue vm = R(F - t * D);
        ++out.evaluations;
        if (vm.is_infinite()) return ExtValue::infinity();
        ExtValue vp = R(F + (1.0 - t) * D);
        ++out.evaluations;
        if (vp.is_infinite()) return ExtValue::infinity();
        return vm.scaled(1.0 - t) + vp.scaled(t);
    };
    auto take = [&](double t, const RankOneDyad<N>& d, ExtValue v) {
        if (v < out.value) {
            out.value = v;
            out.split = true;
            out.t = t;
            out.dyad = d;
        }
    };

    for (int k = 1; k < cfg.t_steps; ++k) {
        const double t = static_cast<double>(k) / cfg.t_steps;
        const double rmax = base_r / std::min(t, 1.0 - t);
        for (const auto& a : as)
            for (const auto& b : bs) {
                double r = rmax;
                for (int j = 0; j < cfg.radii; ++j, r *= 0.5) {
                    RankOneDyad<N> d{r * a, b};
                    take(t, d, pair_value(t, rank_one_matrix(d)));
                }
            }
    }

    for (int pass = 0; pass < cfg.refine_passes && out.split; ++pass) {
        const double h = 1.0 / cfg.t_steps;
        const auto d0 = out.dyad;
        const auto D0 = rank_one_matrix(d0);
        int evals = 0;
        auto ft = [&](double t) {
            ExtValue v = pair_value(t, D0);
            take(t, d0, v);
            return v.raw();
        };
        detail::golden_section(ft, std::max(out.t - h, 1e-9), std::min(out.t + h, 1.0 - 1e-9), 1e-9, 60, evals);
        const double t1 = out.t;
        const auto d1 = out.dyad;
        auto fr = [&](double logs) {
            const double s = std::exp(logs);
            RankOneDyad<N> d{s * d1.a, d1.b};
            ExtValue v = pair_value(t1, rank_one_matrix(d));
            take(t1, d, v);
            return v.raw();
        };
        detail::golden_section(fr, -std::log(2.0), std::log(2.0), 1e-9, 60, evals);
    }
    return out;
}

template <std::size_t N>
struct KsEnvelope {
    ExtValue value;
    std::vector<ExtValue> chain;  ///< R_0(F), ..., R_depth(F)
    TreePtr<N> tree;
    std::size_t memo_entries = 0;
};

namespace detail {

template <std::size_t N>
struct MatrixKey {
    Ambient<N> m;
    bool operator==(const MatrixKey& o) const { return std::memcmp(m.e.data(), o.m.e.data(), sizeof(m.e)) == 0; }
};
template <std::size_t N>
struct MatrixKeyHash {
    std::size_t operator()(const MatrixKey<N>& k) const {
        std::uint64_t h = 0x84222325cbf29ce4ULL;
        for (double x : k.m.e) {
            std::uint64_t bits;
            std::memcpy(&bits, &x, sizeof bits);
            h = mix64(h ^ bits);
        }
        return static_cast<std::size_t>(h);
    }
};

template <std::size_t N>
class KsEngine {
public:
    using Entry = std::pair<ExtValue, TreePtr<N>>;

    KsEngine(const Density<N>& W, KsConfig cfg) : W_(W), cfg_(cfg), memo_(static_cast<std::size_t>(cfg.depth) + 1) {
        cfg_.C = W.C;
        cfg_.p = W.p;
    }

    Entry level(int i, const Ambient<N>& F) {
        if (i == 0) return {W_(F), LaminateTree<N>::leaf(F)};
        auto& memo = memo_[static_cast<std::size_t>(i)];
        MatrixKey<N> key{F};
        if (auto it = memo.find(key); it != memo.end()) return it->second;
        std::function<ExtValue(const Ambient<N>&)> below = [&](const Ambient<N>& G) { return level(i - 1, G).first; };
        KsStep<N> st = ks_step<N>(below, F, cfg_);
        Entry e;
        if (!st.split) {
            e = level(i - 1, F);
        } else {
            const auto D = rank_one_matrix(st.dyad);
            Entry m = level(i - 1, F - st.t * D);
            Entry p = level(i - 1, F + (1.0 - st.t) * D);
            e.first = m.first.scaled(1.0 - st.t) + p.first.scaled(st.t);
            e.second = LaminateTree<N>::node(F, st.t, st.dyad, m.second, p.second);
        }
        if (++entries_ > cfg_.node_cap) throw DepthBudget("ks_envelope: memo node cap exceeded");
        memo.emplace(key, e);
        return e;
    }

    [[nodiscard]] std::size_t entries() const { return entries_; }

private:
    const Density<N>& W_;
    KsConfig cfg_;
    std::vector<std::unordered_map<MatrixKey<N>, Entry, MatrixKeyHash<N>>> memo_;
    std::size_t entries_ = 0;
};

}  // namespace detail

/// R_depth W(F) by memoized recursion, with the full chain and a certificate.
template <std::size_t N>
KsEnvelope<N> ks_envelope(const Density<N>& W, const Ambient<N>& F, int depth, KsConfig cfg = {}) {
    if (depth < 0) throw std::invalid_argument("ks_envelope: depth must be >= 0");
    cfg.depth = depth;
    detail::KsEngine<N> eng(W, cfg);
    KsEnvelope<N> out;
    for (int i = 0; i <= depth; ++i) {
        auto e = eng.level(i, F);
        out.chain.push_back(e.first);
        if (i == depth) {
            out.value = e.first;
            out.tree = e.second;
        }
    }
    out.memo_entries = eng.entries();
    return out;
}

// ---- singular-value lifting

template <std::size_t N>
struct SvLift {
    TreePtr<N> tree;
    double bound = 0;  ///< 2^N beta (1 + 2^{p/2} N^{p/2} alpha^p) (1 + |F|^p)
    std::vector<std::pair<double, Ambient<N>>> leaves;
    [[nodiscard]] double beta_leaf_sum(double beta, double p) const {
        double s = 0;
        for (const auto& [w, L] : leaves) s += beta * (1.0 + std::pow(frob2(L), 0.5 * p));
        return s;
    }
};

/// Smallest singular value.
template <std::size_t N>
double min_singular(const Ambient<N>& F) {
    auto d = svd(F);
    double m = d.s[0];
    for (double x : d.s) m = std::min(m, x);
    return m;
}

/// Replaces every singular value below alpha by -alpha / +alpha with weights
/// 1-t / t, t = (v + alpha) / (2 alpha), one rank-one split per value.
template <std::size_t N>
SvLift<N> sv_lift(const Ambient<N>& F, double alpha, double beta, double p) {
    if (!(alpha >= 1.0)) throw std::invalid_argument("sv_lift: alpha must be >= 1");
    if (!all_finite(F)) throw SingularDecomposition("sv_lift: non-finite input");
    const Svd<N> d = svd(F);
    std::vector<std::size_t> small;
    for (std::size_t i = 0; i < N; ++i)
        if (d.s[i] < alpha) small.push_back(i);

    auto assemble = [&](const Vec<N>& w) {
        Svd<N> e = d;
        e.s = w;
        return svd_reconstruct(e);
    };
    std::function<TreePtr<N>(std::size_t, Vec<N>)> build = [&](std::size_t k, Vec<N> w) -> TreePtr<N> {
        if (k == small.size()) return LaminateTree<N>::leaf(assemble(w));
        const std::size_t i = small[k];
        const double t = (d.s[i] + alpha) / (2.0 * alpha);
        Vec<N> wm = w, wp = w;
        wm[i] = -alpha;
        wp[i] = alpha;
        RankOneDyad<N> dy{(2.0 * alpha) * d.V.col(i), d.U.col(i)};
        return LaminateTree<N>::node(k == 0 ? F : assemble(w), t, dy, build(k + 1, wm), build(k + 1, wp));
    };

    SvLift<N> out;
    out.tree = small.empty() ? LaminateTree<N>::leaf(F) : build(0, d.s);
    const double n = static_cast<double>(N);
    out.bound = std::pow(2.0, n) * beta * (1.0 + std::pow(2.0, p / 2) * std::pow(n, p / 2) * std::pow(alpha, p)) *
                (1.0 + std::pow(frob2(F), 0.5 * p));
    collect_leaves(*out.tree, 1.0, out.leaves);
    return out;
}

}  // namespace relax
