#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "ext_value.hpp"
#include "lamination.hpp"
#include "matspace.hpp"
#include "zestimate.hpp"

namespace relax {

using json = nlohmann::ordered_json;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Finite values as numbers, +inf as the string "inf".
inline json to_json_value(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (std::isnan(x)) return "nan";
    return x;
}
inline json to_json_value(ExtValue v) { return to_json_value(v.raw()); }

inline double number_from_json(const json& j, const std::string& what) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
    }
    throw ConfigError(what + ": expected a number");
}

template <std::size_t R, std::size_t C>
json matrix_to_json(const Matrix<R, C>& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < R; ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < C; ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

template <std::size_t R, std::size_t C>
Matrix<R, C> matrix_from_json(const json& j, const std::string& what) {
    if (!j.is_array() || j.size() != R) throw ConfigError(what + ": expected " + std::to_string(R) + " rows");
    Matrix<R, C> m;
    for (std::size_t i = 0; i < R; ++i) {
        if (!j[i].is_array() || j[i].size() != C)
            throw ConfigError(what + ": expected " + std::to_string(C) + " columns per row");
        for (std::size_t k = 0; k < C; ++k) m(i, k) = number_from_json(j[i][k], what);
    }
    return m;
}

template <std::size_t N>
json vec_to_json(const Vec<N>& v) {
    json a = json::array();
    for (double x : v) a.push_back(x);
    return a;
}

template <std::size_t N>
Vec<N> vec_from_json(const json& j, const std::string& what) {
    if (!j.is_array() || j.size() != N) throw ConfigError(what + ": expected " + std::to_string(N) + " entries");
    Vec<N> v{};
    for (std::size_t i = 0; i < N; ++i) v[i] = number_from_json(j[i], what);
    return v;
}

/// Compact text form "a b c; d e f; ..." with %.17g entries (round-trips).
template <std::size_t R, std::size_t C>
std::string matrix_to_text(const Matrix<R, C>& m) {
    std::string s;
    char buf[32];
    for (std::size_t i = 0; i < R; ++i) {
        if (i) s += "; ";
        for (std::size_t j = 0; j < C; ++j) {
            std::snprintf(buf, sizeof buf, "%s%.17g", j ? " " : "", m(i, j));
            s += buf;
        }
    }
    return s;
}

template <std::size_t N>
json tree_to_json(const LaminateTree<N>& t) {
    json j;
    j["matrix"] = matrix_to_json(t.matrix);
    if (!t.is_leaf()) {
        j["t"] = t.t;
        j["a"] = vec_to_json(t.dyad.a);
        j["b"] = vec_to_json(t.dyad.b);
        j["minus"] = tree_to_json(*t.minus);
        j["plus"] = tree_to_json(*t.plus);
    }
    return j;
}

template <std::size_t N>
TreePtr<N> tree_from_json(const json& j) {
    const auto F = matrix_from_json<3, N>(j.at("matrix"), "tree.matrix");
    if (!j.contains("minus")) return LaminateTree<N>::leaf(F);
    RankOneDyad<N> d{vec_from_json<N>(j.at("a"), "tree.a"), vec_from_json<3>(j.at("b"), "tree.b")};
    return LaminateTree<N>::node(F, j.at("t").get<double>(), d, tree_from_json<N>(j.at("minus")),
                                 tree_from_json<N>(j.at("plus")));
}

template <std::size_t N>
json field_to_json(const PiecewiseAffineField<N>& f) {
    json j;
    j["name"] = f.name;
    j["params"] = f.params;
    json cells = json::array();
    for (const auto& c : f.cells) cells.push_back({{"w", c.w}, {"G", matrix_to_json(c.G)}});
    j["cells"] = std::move(cells);
    return j;
}

template <std::size_t N>
PiecewiseAffineField<N> field_from_json(const json& j) {
    PiecewiseAffineField<N> f;
    f.name = j.at("name").get<std::string>();
    f.params = j.at("params").get<std::string>();
    f.cells.clear();
    for (const auto& c : j.at("cells")) f.cells.push_back({c.at("w").get<double>(), matrix_from_json<3, N>(c.at("G"), "cell.G")});
    return f;
}

}  // namespace relax
