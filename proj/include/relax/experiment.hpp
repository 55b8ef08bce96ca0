#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "densities.hpp"
#include "detail/parallel.hpp"
#include "detail/rng.hpp"
#include "interchange.hpp"
#include "lamination.hpp"
#include "membrane.hpp"
#include "serialize.hpp"
#include "thinfilm.hpp"
#include "zestimate.hpp"

namespace relax {

inline constexpr const char* kVersion = "relax 0.1.0";

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

/// Typed access to one JSON object with unknown-key rejection.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string ctx, std::set<std::string> allowed) : j_(j), ctx_(std::move(ctx)) {
        if (!j.is_object()) throw ConfigError(ctx_ + ": expected an object");
        for (const auto& [k, v] : j.items())
            if (!allowed.count(k)) throw ConfigError(ctx_ + ": unknown key '" + k + "'");
    }

    [[nodiscard]] bool has(const std::string& k) const { return j_.contains(k); }
    [[nodiscard]] const json& at(const std::string& k) const {
        if (!j_.contains(k)) throw ConfigError(ctx_ + ": missing key '" + k + "'");
        return j_.at(k);
    }
    [[nodiscard]] std::string path(const std::string& k) const { return ctx_ + "." + k; }

    double number(const std::string& k, double def) const { return has(k) ? number_from_json(j_.at(k), path(k)) : def; }
    long integer(const std::string& k, long def) const {
        if (!has(k)) return def;
        if (!j_.at(k).is_number_integer()) throw ConfigError(path(k) + ": expected an integer");
        return j_.at(k).get<long>();
    }
    std::uint64_t u64(const std::string& k, std::uint64_t def) const {
        if (!has(k)) return def;
        if (!j_.at(k).is_number_unsigned() && !(j_.at(k).is_number_integer() && j_.at(k).get<long long>() >= 0))
            throw ConfigError(path(k) + ": expected a non-negative integer");
        return j_.at(k).get<std::uint64_t>();
    }
    bool boolean(const std::string& k, bool def) const {
        if (!has(k)) return def;
        if (!j_.at(k).is_boolean()) throw ConfigError(path(k) + ": expected true/false");
        return j_.at(k).get<bool>();
    }
    std::string string(const std::string& k, const std::string& def) const {
        if (!has(k)) return def;
        if (!j_.at(k).is_string()) throw ConfigError(path(k) + ": expected a string");
        return j_.at(k).get<std::string>();
    }
    std::vector<double> numbers(const std::string& k, std::vector<double> def) const {
        if (!has(k)) return def;
        if (!j_.at(k).is_array()) throw ConfigError(path(k) + ": expected an array");
        std::vector<double> out;
        for (const auto& x : j_.at(k)) out.push_back(number_from_json(x, path(k)));
        return out;
    }
    std::vector<int> integers(const std::string& k, std::vector<int> def) const {
        if (!has(k)) return def;
        if (!j_.at(k).is_array()) throw ConfigError(path(k) + ": expected an array");
        std::vector<int> out;
        for (const auto& x : j_.at(k)) {
            if (!x.is_number_integer()) throw ConfigError(path(k) + ": expected integers");
            out.push_back(x.get<int>());
        }
        return out;
    }

private:
    const json& j_;
    std::string ctx_;
};

}  // namespace detail

struct DensitySpec {
    std::string kind = "det_barrier";  ///< det_barrier | membrane_barrier | power
    double p = 2.0;
    HFunction h = HFunction::reciprocal(1.0);
    ConstraintMode mode = ConstraintMode::strict_positive;
    int dim = 3;  ///< number of columns N

    [[nodiscard]] Density3 density3() const {
        if (dim != 3) throw ConfigError("density: experiment needs a 3x3 density");
        if (kind == "power") return make_power<3>(p);
        return make_det_barrier(p, h, mode);
    }
    [[nodiscard]] Density2 density2() const {
        if (dim != 2) throw ConfigError("density: experiment needs a 3x2 density");
        if (kind == "power") return make_power<2>(p);
        return make_membrane_barrier(p, h);
    }
};

struct SampleSpec {
    json matrices = json::array();
    long random = 0;
    double scale = 1.0;
    long rank_deficient = 0;  ///< the first k random samples get a last column parallel to the first
    bool include_zero = false;

    template <std::size_t N>
    [[nodiscard]] std::vector<Ambient<N>> generate(std::uint64_t seed) const {
        std::vector<Ambient<N>> out;
        for (std::size_t i = 0; i < matrices.size(); ++i)
            out.push_back(matrix_from_json<3, N>(matrices[i], "samples.matrices[" + std::to_string(i) + "]"));
        if (include_zero) out.push_back(Ambient<N>{});
        for (long i = 0; i < random; ++i) {
            CounterRng rng(seed, static_cast<std::uint64_t>(i));
            Ambient<N> F = rng.matrix<3, N>(scale);
            if (i < rank_deficient) F.set_col(N - 1, rng.uniform(-2.0, 2.0) * F.col(0));
            out.push_back(F);
        }
        return out;
    }
};

struct ExperimentConfig {
    std::string experiment;
    std::uint64_t seed = 0;
    DensitySpec density;
    SampleSpec samples;
    long budget = 5000;
    int zeta_budget = 2000;
    // envelope
    std::string method = "zest";
    int depth = 1;
    KsConfig ks;
    bool certificates = false;
    // identity
    long inner_budget = 300;
    double tolerance = 0.05;
    // thinfilm / interchange
    PlanarPiecewiseAffineMap psi;
    double j = 2.0;
    int blend = 8;
    std::vector<double> schedule{1e-1, 1e-2, 1e-3, 1e-4};
    int grid = 32;
    int quad = 4;
    MultifunctionKind kind = MultifunctionKind::gamma;
    std::vector<int> blends{4, 8, 16, 32};
    // growth
    double alpha = 1.0;
    double beta = 1.0;
    double constant = 0.0;  ///< 0: max(1, alpha^p) beta 2^(3p+2)
    // family
    std::vector<int> levels;

    json source;  ///< effective config, echoed in the report
};

namespace detail {

inline const std::set<std::string>& experiment_kinds() {
    static const std::set<std::string> k{"envelope", "membrane", "identity", "thinfilm", "interchange", "growth", "family"};
    return k;
}

inline ConstraintMode parse_mode(const std::string& s) {
    if (s == "strict_positive") return ConstraintMode::strict_positive;
    if (s == "nonzero") return ConstraintMode::nonzero;
    if (s == "abs_barrier") return ConstraintMode::abs_barrier;
    if (s == "none") return ConstraintMode::none;
    throw ConfigError("density.mode: unknown mode '" + s + "'");
}

inline DensitySpec parse_density(const json& j) {
    ObjectReader r(j, "density", {"kind", "p", "h", "mode", "dim"});
    DensitySpec d;
    d.kind = r.string("kind", d.kind);
    d.p = r.number("p", d.p);
    if (!(d.p > 1)) throw ConfigError("density.p: must be > 1");
    if (d.kind == "det_barrier") {
        d.dim = static_cast<int>(r.integer("dim", 3));
        if (d.dim != 3) throw ConfigError("density.dim: det_barrier is 3x3");
        d.mode = parse_mode(r.string("mode", "strict_positive"));
    } else if (d.kind == "membrane_barrier") {
        d.dim = static_cast<int>(r.integer("dim", 2));
        if (d.dim != 2) throw ConfigError("density.dim: membrane_barrier is 3x2");
        if (r.has("mode")) throw ConfigError("density.mode: membrane_barrier has a fixed mode");
        d.mode = ConstraintMode::abs_barrier;
    } else if (d.kind == "power") {
        d.dim = static_cast<int>(r.integer("dim", 3));
        if (d.dim != 2 && d.dim != 3) throw ConfigError("density.dim: must be 2 or 3");
        if (r.has("mode") || r.has("h")) throw ConfigError("density: power takes no barrier");
        d.mode = ConstraintMode::none;
    } else {
        throw ConfigError("density.kind: unknown kind '" + d.kind + "'");
    }
    if (r.has("h")) {
        ObjectReader h(r.at("h"), "density.h", {"kind", "alpha", "knots"});
        const std::string hk = h.string("kind", "reciprocal");
        try {
            if (hk == "reciprocal") {
                if (h.has("knots")) throw ConfigError("density.h: reciprocal takes no knots");
                d.h = HFunction::reciprocal(h.number("alpha", 1.0));
            } else if (hk == "table") {
                if (h.has("alpha")) throw ConfigError("density.h: table takes no alpha");
                std::vector<std::pair<double, double>> knots;
                for (const auto& kn : h.at("knots")) {
                    if (!kn.is_array() || kn.size() != 2) throw ConfigError("density.h.knots: expected [t, h] pairs");
                    knots.emplace_back(number_from_json(kn[0], "density.h.knots"), number_from_json(kn[1], "density.h.knots"));
                }
                d.h = HFunction::from_table(std::move(knots));
            } else {
                throw ConfigError("density.h.kind: unknown kind '" + hk + "'");
            }
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("density.h: ") + e.what());
        }
    }
    return d;
}

inline SampleSpec parse_samples(const json& j) {
    ObjectReader r(j, "samples", {"matrices", "random", "scale", "rank_deficient", "include_zero"});
    SampleSpec s;
    if (r.has("matrices")) {
        if (!r.at("matrices").is_array()) throw ConfigError("samples.matrices: expected an array");
        s.matrices = r.at("matrices");
    }
    s.random = r.integer("random", 0);
    s.scale = r.number("scale", 1.0);
    s.rank_deficient = r.integer("rank_deficient", 0);
    s.include_zero = r.boolean("include_zero", false);
    if (s.random < 0 || s.rank_deficient < 0 || s.rank_deficient > s.random)
        throw ConfigError("samples: need 0 <= rank_deficient <= random");
    if (!(s.scale > 0)) throw ConfigError("samples.scale: must be > 0");
    return s;
}

inline PlanarPiecewiseAffineMap parse_psi(const json& j) {
    ObjectReader r(j, "psi", {"breaks", "grads"});
    std::vector<Mat32> grads;
    if (!r.at("grads").is_array()) throw ConfigError("psi.grads: expected an array");
    for (const auto& g : r.at("grads")) grads.push_back(matrix_from_json<3, 2>(g, "psi.grads"));
    std::vector<double> breaks = r.numbers("breaks", {});
    if (breaks.empty()) {
        for (std::size_t i = 0; i <= grads.size(); ++i) breaks.push_back(static_cast<double>(i) / static_cast<double>(grads.size()));
        breaks.back() = 1.0;
    }
    try {
        return PlanarPiecewiseAffineMap::strips(std::move(breaks), grads);
    } catch (const BadParams& e) {
        throw ConfigError(std::string("psi: ") + e.what());
    }
}

}  // namespace detail

/// Validates and parses a config object. Unknown keys are rejected per kind.
inline ExperimentConfig parse_config(const json& j) {
    if (!j.is_object()) throw ConfigError("config: expected an object");
    if (!j.contains("experiment") || !j.at("experiment").is_string()) throw ConfigError("config: missing 'experiment'");
    ExperimentConfig c;
    c.experiment = j.at("experiment").get<std::string>();
    if (!detail::experiment_kinds().count(c.experiment))
        throw ConfigError("config.experiment: unknown kind '" + c.experiment + "'");

    std::set<std::string> keys{"experiment", "seed", "density", "budget", "zeta_budget"};
    const std::string& e = c.experiment;
    if (e == "envelope" || e == "membrane" || e == "identity" || e == "growth" || e == "family") keys.insert("samples");
    if (e == "envelope") keys.insert({"method", "depth", "ks", "certificates"});
    if (e == "identity") keys.insert({"inner_budget", "tolerance"});
    if (e == "thinfilm") keys.insert({"psi", "j", "blend", "schedule", "grid", "quad"});
    if (e == "interchange") keys.insert({"psi", "j", "kind", "grid", "blends"});
    if (e == "growth") keys.insert({"alpha", "beta", "constant"});
    if (e == "family") keys.insert("levels");
    detail::ObjectReader r(j, "config", keys);

    c.seed = r.u64("seed", 0);
    c.density = r.has("density") ? detail::parse_density(r.at("density")) : DensitySpec{};
    if (r.has("samples")) c.samples = detail::parse_samples(r.at("samples"));
    c.budget = r.integer("budget", e == "identity" ? 300 : 5000);
    c.zeta_budget = static_cast<int>(r.integer("zeta_budget", e == "identity" ? 300 : 2000));
    if (c.budget < 1 || c.zeta_budget < 1) throw ConfigError("config: budgets must be >= 1");

    c.method = r.string("method", "zest");
    if (c.method != "zest" && c.method != "ks") throw ConfigError("config.method: expected 'zest' or 'ks'");
    c.depth = static_cast<int>(r.integer("depth", 1));
    if (c.depth < 0) throw ConfigError("config.depth: must be >= 0");
    if (r.has("ks")) {
        detail::ObjectReader k(r.at("ks"), "ks", {"t_steps", "a_dirs", "b_dirs", "radii", "refine_passes"});
        c.ks.t_steps = static_cast<int>(k.integer("t_steps", c.ks.t_steps));
        c.ks.a_dirs = static_cast<int>(k.integer("a_dirs", c.ks.a_dirs));
        c.ks.b_dirs = static_cast<int>(k.integer("b_dirs", c.ks.b_dirs));
        c.ks.radii = static_cast<int>(k.integer("radii", c.ks.radii));
        c.ks.refine_passes = static_cast<int>(k.integer("refine_passes", c.ks.refine_passes));
        if (c.ks.t_steps < 2 || c.ks.a_dirs < 0 || c.ks.b_dirs < 1 || c.ks.radii < 1 || c.ks.refine_passes < 0)
            throw ConfigError("ks: invalid grid sizes");
    }
    c.certificates = r.boolean("certificates", false);

    c.inner_budget = r.integer("inner_budget", 300);
    c.tolerance = r.number("tolerance", 0.05);

    if (e == "thinfilm" || e == "interchange") c.psi = detail::parse_psi(r.at("psi"));
    c.j = r.number("j", 2.0);
    if (!(c.j > 0)) throw ConfigError("config.j: must be > 0");
    c.blend = static_cast<int>(r.integer("blend", 8));
    c.schedule = r.numbers("schedule", c.schedule);
    c.grid = static_cast<int>(r.integer("grid", e == "interchange" ? 64 : 32));
    c.quad = static_cast<int>(r.integer("quad", 4));
    if (c.grid < 1 || c.quad < 1 || c.blend < 0) throw ConfigError("config: grid, quad must be >= 1 and blend >= 0");
    if (e == "thinfilm" && !EpsSchedule{c.schedule}.valid())
        throw ConfigError("config.schedule: must be strictly decreasing in (0, 1/2)");
    const std::string kind = r.string("kind", "gamma");
    if (kind != "gamma" && kind != "lambda") throw ConfigError("config.kind: expected 'gamma' or 'lambda'");
    c.kind = kind == "gamma" ? MultifunctionKind::gamma : MultifunctionKind::lambda;
    c.blends = r.integers("blends", c.blends);

    c.alpha = r.number("alpha", 1.0);
    c.beta = r.number("beta", 1.0);
    c.constant = r.number("constant", 0.0);

    std::vector<int> all(64);
    std::iota(all.begin(), all.end(), 1);
    c.levels = r.integers("levels", all);
    for (std::size_t i = 0; i < c.levels.size(); ++i)
        if (c.levels[i] < 1 || (i > 0 && c.levels[i] <= c.levels[i - 1]))
            throw ConfigError("config.levels: must be increasing positive integers");

    if ((e == "thinfilm" || e == "interchange" || e == "identity" || e == "membrane" || e == "family") &&
        c.density.dim != 3)
        throw ConfigError("config.density: " + e + " needs a 3x3 density");
    c.source = j;
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return parse_config(j);
}

struct ExperimentReport {
    std::string experiment;
    json config;
    std::vector<std::string> columns;
    std::vector<std::vector<json>> rows;
    json summary = json::object();
    json certificates;  ///< envelope with certificates: one tree per sample
    std::size_t property_failures = 0;

    [[nodiscard]] json to_json() const {
        json j;
        j["version"] = kVersion;
        j["experiment"] = experiment;
        j["config"] = config;
        j["columns"] = columns;
        json rs = json::array();
        for (const auto& r : rows) rs.push_back(r);
        j["rows"] = std::move(rs);
        j["summary"] = summary;
        j["property_failures"] = property_failures;
        if (!certificates.is_null()) j["certificates"] = certificates;
        return j;
    }
};

namespace detail {

inline std::string csv_cell(const json& v) {
    if (v.is_number_float()) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
        return buf;
    }
    if (v.is_number()) return v.dump();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    std::string s = v.is_string() ? v.get<std::string>() : v.dump();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
}

}  // namespace detail

/// CSV with a header row; numbers at %.17g, +inf as "inf".
inline std::string to_csv(const ExperimentReport& rep) {
    std::string out;
    for (std::size_t i = 0; i < rep.columns.size(); ++i) out += (i ? "," : "") + rep.columns[i];
    out += "\n";
    for (const auto& r : rep.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + detail::csv_cell(r[i]);
        out += "\n";
    }
    return out;
}

inline std::string to_text(const ExperimentReport& rep) { return rep.to_json().dump(2) + "\n"; }

inline void export_report(const ExperimentReport& rep, const std::string& path, const std::string& format) {
    std::string body;
    if (format == "csv")
        body = to_csv(rep);
    else if (format == "json")
        body = to_text(rep);
    else
        throw ConfigError("unknown format '" + format + "'");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << body;
    if (!out) throw IoError("write failed for '" + path + "'");
}

namespace detail {

template <class F>
void run_samples(std::size_t n, unsigned threads, F&& f) {
    parallel_for(n, threads, [&](std::size_t i) {
        try {
            f(i);
        } catch (const std::exception& e) {
            throw std::runtime_error("sample " + std::to_string(i) + ": " + e.what());
        }
    });
}

inline ZestConfig zest_config(const ExperimentConfig& c, long budget) {
    ZestConfig z;
    z.budget = budget;
    z.seed = c.seed;
    z.threads = 1;
    return z;
}

template <std::size_t N>
ExperimentReport run_envelope(const ExperimentConfig& c, const Density<N>& W, unsigned threads) {
    ExperimentReport rep;
    const auto S = c.samples.generate<N>(c.seed);
    rep.rows.resize(S.size());
    std::vector<std::size_t> bad(S.size());
    std::vector<json> certs(S.size());
    if (c.method == "zest") {
        rep.columns = {"index", "F", "W", "value", "winner", "evaluations", "budget_exhausted"};
        run_samples(S.size(), threads, [&](std::size_t i) {
            auto r = optimize_upper<N>(W, S[i], zest_config(c, c.budget));
            if (r.value > r.baseline || energy_of(W, S[i], r.field) < r.value) bad[i] = 1;
            rep.rows[i] = {i, matrix_to_text(S[i]), to_json_value(r.baseline), to_json_value(r.value), r.winner,
                           r.evaluations, r.budget_exhausted};
            if (c.certificates) certs[i] = field_to_json(r.field);
        });
    } else {
        rep.columns = {"index", "F", "W", "value", "chain", "memo_entries", "replay"};
        KsConfig kc = c.ks;
        kc.C = W.C;
        kc.p = W.p;
        run_samples(S.size(), threads, [&](std::size_t i) {
            auto e = ks_envelope<N>(W, S[i], c.depth, kc);
            std::string chain;
            for (std::size_t k = 0; k < e.chain.size(); ++k) {
                char buf[40];
                std::snprintf(buf, sizeof buf, "%s%.17g", k ? " " : "", e.chain[k].raw());
                chain += buf;
                if (k > 0 && e.chain[k] > e.chain[k - 1]) bad[i] = 1;
            }
            const ExtValue rp = replay<N>(*e.tree, [&](const Ambient<N>& F) { return W(F); });
            if (rp > e.chain.front()) bad[i] = 1;
            rep.rows[i] = {i, matrix_to_text(S[i]), to_json_value(e.chain.front()), to_json_value(e.value), chain,
                           e.memo_entries, to_json_value(rp)};
            if (c.certificates) certs[i] = tree_to_json(*e.tree);
        });
    }
    for (auto b : bad) rep.property_failures += b;
    rep.summary = {{"samples", S.size()}, {"violations", rep.property_failures}};
    if (c.certificates) rep.certificates = certs;
    return rep;
}

inline ExperimentReport run_membrane(const ExperimentConfig& c, unsigned threads) {
    ExperimentReport rep;
    rep.columns = {"index", "xi", "W0", "zeta", "Wmem", "winner", "has_certificate"};
    const auto S = c.samples.generate<2>(c.seed);
    MembraneDensityHandle h(c.density.density3(), {c.zeta_budget, zest_config(c, c.budget)});
    rep.rows.resize(S.size());
    std::vector<std::size_t> bad(S.size());
    run_samples(S.size(), threads, [&](std::size_t i) {
        auto red = h.reduce(S[i]);
        auto z = h.wmem(S[i]);
        if (z.value > red.value) bad[i] = 1;
        char zb[128];
        std::snprintf(zb, sizeof zb, "%.17g %.17g %.17g", red.zeta[0], red.zeta[1], red.zeta[2]);
        rep.rows[i] = {i, matrix_to_text(S[i]), to_json_value(red.value), std::string(zb), to_json_value(z.value), z.winner,
                       red.has_certificate};
    });
    for (auto b : bad) rep.property_failures += b;
    rep.summary = {{"samples", S.size()}, {"violations", rep.property_failures}};
    return rep;
}

inline ExperimentReport run_identity(const ExperimentConfig& c, unsigned threads) {
    ExperimentReport rep;
    rep.columns = {"index", "xi", "route_a", "route_b", "gap", "winner_a", "winner_b"};
    IdentityConfig ic;
    ic.outer = zest_config(c, c.budget);
    ic.inner = zest_config(c, c.inner_budget);
    ic.zeta_budget = c.zeta_budget;
    ic.threads = threads;
    const auto S = c.samples.generate<2>(c.seed);
    auto r = identity_check(c.density.density3(), S, ic);
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
        const auto& row = r.rows[i];
        rep.rows.push_back({i, matrix_to_text(row.xi), to_json_value(row.route_a), to_json_value(row.route_b),
                            to_json_value(row.gap), row.winner_a, row.winner_b});
        if (!(row.gap <= c.tolerance)) ++rep.property_failures;
    }
    rep.summary = {{"samples", S.size()}, {"max_gap", to_json_value(r.max_gap())}, {"tolerance", c.tolerance},
                   {"violations", rep.property_failures}};
    return rep;
}

inline ExperimentReport run_thinfilm(const ExperimentConfig& c, unsigned threads) {
    ExperimentReport rep;
    rep.columns = {"eps", "L", "U", "M", "gap", "target"};
    GammaConfig g;
    g.j = c.j;
    g.blend_n = c.blend;
    g.grid = {c.grid, c.quad};
    g.membrane = {c.zeta_budget, zest_config(c, c.budget)};
    g.threads = threads;
    auto r = gamma_report(c.density.density3(), c.psi, {c.schedule}, g);
    for (const auto& row : r.rows)
        rep.rows.push_back({row.eps, to_json_value(row.L), to_json_value(row.U), to_json_value(row.M),
                            to_json_value(row.gap()), to_json_value(row.target)});
    rep.property_failures = r.sandwich_violations + r.order_violations;
    rep.summary = {{"points_checked", r.points_checked},
                   {"sandwich_violations", r.sandwich_violations},
                   {"order_violations", r.order_violations}};
    return rep;
}

inline ExperimentReport run_interchange(const ExperimentConfig& c) {
    ExperimentReport rep;
    rep.columns = {"n", "lhs", "rhs", "gap"};
    auto G = build_multifunction(c.psi, c.j, c.kind);
    auto fi = density_fibers(c.density.density3(), c.psi, c.zeta_budget);
    auto t = interchange_gap(fi, G, c.grid, c.blends);
    for (const auto& row : t.rows) {
        rep.rows.push_back({row.n, to_json_value(row.lhs), to_json_value(row.rhs), to_json_value(row.gap)});
        if (!(row.gap >= -1e-9)) ++rep.property_failures;
    }
    rep.summary = {{"witness", vec_to_json(t.witness)}, {"j_psi", G.j_psi}, {"j_eff", G.j_eff},
                   {"violations", rep.property_failures}};
    return rep;
}

template <std::size_t N>
ExperimentReport run_growth(const ExperimentConfig& c, const Density<N>& W, unsigned threads) {
    ExperimentReport rep;
    rep.columns = {"index", "F", "value", "bound", "ratio", "pass"};
    const double p = W.p;
    const double K =
        c.constant > 0 ? c.constant : std::max(1.0, std::pow(c.alpha, p)) * c.beta * std::pow(2.0, 3.0 * p + 2.0);
    const auto S = c.samples.generate<N>(c.seed);
    std::vector<std::pair<Ambient<N>, ExtValue>> vals(S.size());
    run_samples(S.size(), threads, [&](std::size_t i) {
        vals[i] = {S[i], optimize_upper<N>(W, S[i], zest_config(c, c.budget)).value};
    });
    auto g = check_growth<N>(vals, K, p);
    for (std::size_t i = 0; i < g.samples.size(); ++i) {
        const auto& s = g.samples[i];
        rep.rows.push_back({i, matrix_to_text(s.F), to_json_value(s.measured), s.bound,
                            to_json_value(s.measured.raw() / s.bound), s.pass});
    }
    rep.property_failures = g.failures;
    rep.summary = {{"constant", K}, {"worst_ratio", to_json_value(g.worst_ratio)}, {"violations", g.failures}};
    return rep;
}

inline ExperimentReport run_family(const ExperimentConfig& c, unsigned threads) {
    ExperimentReport rep;
    rep.columns = {"index", "F", "det", "W", "W_first", "W_last", "monotone", "equals_W"};
    const Density3 W = c.density.density3();
    std::vector<Density3> fam;
    for (int n : c.levels) fam.push_back(monotone_family(W, n));
    const auto S = c.samples.generate<3>(c.seed);
    rep.rows.resize(S.size());
    std::vector<std::size_t> bad(S.size());
    run_samples(S.size(), threads, [&](std::size_t i) {
        const double d = det3(S[i]);
        const ExtValue w = W(S[i]);
        bool mono = true, eq = true;
        ExtValue prev, first, last;
        for (std::size_t k = 0; k < fam.size(); ++k) {
            const ExtValue v = fam[k](S[i]);
            if (k > 0 && v < prev) mono = false;
            if (d > 0 && !(v == w)) eq = false;
            if (k == 0) first = v;
            last = prev = v;
        }
        if (!mono || !eq) bad[i] = 1;
        rep.rows[i] = {i, matrix_to_text(S[i]), d, to_json_value(w), to_json_value(first), to_json_value(last), mono, eq};
    });
    for (auto b : bad) rep.property_failures += b;
    rep.summary = {{"samples", S.size()}, {"levels", c.levels.size()}, {"violations", rep.property_failures}};
    return rep;
}

}  // namespace detail

/// Dispatches one experiment. The report depends only on the config (and
/// seed), never on `threads`.
inline ExperimentReport run(const ExperimentConfig& c, unsigned threads = 1) {
    ExperimentReport rep;
    const std::string& e = c.experiment;
    if (e == "envelope")
        rep = c.density.dim == 3 ? detail::run_envelope<3>(c, c.density.density3(), threads)
                                 : detail::run_envelope<2>(c, c.density.density2(), threads);
    else if (e == "membrane")
        rep = detail::run_membrane(c, threads);
    else if (e == "identity")
        rep = detail::run_identity(c, threads);
    else if (e == "thinfilm")
        rep = detail::run_thinfilm(c, threads);
    else if (e == "interchange")
        rep = detail::run_interchange(c);
    else if (e == "growth")
        rep = c.density.dim == 3 ? detail::run_growth<3>(c, c.density.density3(), threads)
                                 : detail::run_growth<2>(c, c.density.density2(), threads);
    else if (e == "family")
        rep = detail::run_family(c, threads);
    else
        throw ConfigError("unknown experiment '" + e + "'");
    rep.experiment = e;
    rep.config = c.source;
    return rep;
}

}  // namespace relax
