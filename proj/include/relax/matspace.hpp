#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>

namespace relax {

template <std::size_t N>
using Vec = std::array<double, N>;
using Vec2 = Vec<2>;
using Vec3 = Vec<3>;

/// Dense row-major R x C matrix.
template <std::size_t R, std::size_t C>
struct Matrix {
    static constexpr std::size_t rows = R;
    static constexpr std::size_t cols = C;
    std::array<double, R * C> e{};

    constexpr double& operator()(std::size_t i, std::size_t j) { return e[i * C + j]; }
    constexpr double operator()(std::size_t i, std::size_t j) const { return e[i * C + j]; }

    static constexpr Matrix zero() { return Matrix{}; }
    static constexpr Matrix identity() requires(R == C) {
        Matrix m;
        for (std::size_t i = 0; i < R; ++i) m(i, i) = 1.0;
        return m;
    }

    [[nodiscard]] constexpr Vec<R> col(std::size_t j) const {
        Vec<R> v{};
        for (std::size_t i = 0; i < R; ++i) v[i] = (*this)(i, j);
        return v;
    }
    constexpr void set_col(std::size_t j, const Vec<R>& v) {
        for (std::size_t i = 0; i < R; ++i) (*this)(i, j) = v[i];
    }

    friend constexpr bool operator==(const Matrix&, const Matrix&) = default;
};

using Mat33 = Matrix<3, 3>;
using Mat32 = Matrix<3, 2>;
using Mat22 = Matrix<2, 2>;

template <std::size_t N>
using Ambient = Matrix<3, N>;

struct SingularInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---- vector helpers

template <std::size_t N>
constexpr Vec<N> operator+(Vec<N> a, const Vec<N>& b) {
    for (std::size_t i = 0; i < N; ++i) a[i] += b[i];
    return a;
}
template <std::size_t N>
constexpr Vec<N> operator-(Vec<N> a, const Vec<N>& b) {
    for (std::size_t i = 0; i < N; ++i) a[i] -= b[i];
    return a;
}
template <std::size_t N>
constexpr Vec<N> operator-(Vec<N> a) {
    for (auto& x : a) x = -x;
    return a;
}
template <std::size_t N>
constexpr Vec<N> operator*(double s, Vec<N> a) {
    for (auto& x : a) x *= s;
    return a;
}
template <std::size_t N>
constexpr double dot(const Vec<N>& a, const Vec<N>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < N; ++i) s += a[i] * b[i];
    return s;
}
template <std::size_t N>
inline double norm(const Vec<N>& a) { return std::sqrt(dot(a, a)); }

constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

/// Some unit vector orthogonal to a nonzero v.
inline Vec3 any_orthogonal(const Vec3& v) {
    std::size_t k = 0;
    for (std::size_t i = 1; i < 3; ++i)
        if (std::fabs(v[i]) < std::fabs(v[k])) k = i;
    Vec3 e{};
    e[k] = 1.0;
    Vec3 w = cross(v, e);
    return (1.0 / norm(w)) * w;
}

// ---- matrix helpers

template <std::size_t R, std::size_t C>
constexpr Matrix<R, C> operator+(Matrix<R, C> a, const Matrix<R, C>& b) {
    for (std::size_t i = 0; i < R * C; ++i) a.e[i] += b.e[i];
    return a;
}
template <std::size_t R, std::size_t C>
constexpr Matrix<R, C> operator-(Matrix<R, C> a, const Matrix<R, C>& b) {
    for (std::size_t i = 0; i < R * C; ++i) a.e[i] -= b.e[i];
    return a;
}
template <std::size_t R, std::size_t C>
constexpr Matrix<R, C> operator-(Matrix<R, C> a) {
    for (auto& x : a.e) x = -x;
    return a;
}
template <std::size_t R, std::size_t C>
constexpr Matrix<R, C> operator*(double s, Matrix<R, C> a) {
    for (auto& x : a.e) x *= s;
    return a;
}
template <std::size_t R, std::size_t K, std::size_t C>
constexpr Matrix<R, C> operator*(const Matrix<R, K>& a, const Matrix<K, C>& b) {
    Matrix<R, C> m;
    for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = 0; j < C; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < K; ++k) s += a(i, k) * b(k, j);
            m(i, j) = s;
        }
    return m;
}
template <std::size_t R, std::size_t C>
constexpr Vec<R> operator*(const Matrix<R, C>& a, const Vec<C>& x) {
    Vec<R> y{};
    for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = 0; j < C; ++j) y[i] += a(i, j) * x[j];
    return y;
}
template <std::size_t R, std::size_t C>
constexpr Matrix<C, R> transpose(const Matrix<R, C>& a) {
    Matrix<C, R> t;
    for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = 0; j < C; ++j) t(j, i) = a(i, j);
    return t;
}
template <std::size_t R, std::size_t C>
constexpr double frob2(const Matrix<R, C>& a) {
    double s = 0.0;
    for (double x : a.e) s += x * x;
    return s;
}
template <std::size_t R, std::size_t C>
inline double frob(const Matrix<R, C>& a) { return std::sqrt(frob2(a)); }

template <std::size_t R, std::size_t C>
inline bool all_finite(const Matrix<R, C>& a) {
    for (double x : a.e)
        if (!std::isfinite(x)) return false;
    return true;
}

/// Largest absolute 2x2 minor; zero iff rank <= 1.
template <std::size_t R, std::size_t C>
inline double max_minor2(const Matrix<R, C>& a) {
    double m = 0.0;
    for (std::size_t i = 0; i < R; ++i)
        for (std::size_t k = i + 1; k < R; ++k)
            for (std::size_t j = 0; j < C; ++j)
                for (std::size_t l = j + 1; l < C; ++l)
                    m = std::max(m, std::fabs(a(i, j) * a(k, l) - a(i, l) * a(k, j)));
    return m;
}

// ---- operations

inline Vec3 cross_columns(const Mat32& xi) { return cross(xi.col(0), xi.col(1)); }

constexpr double det3(const Mat33& F) {
    return F(0, 0) * (F(1, 1) * F(2, 2) - F(1, 2) * F(2, 1)) - F(0, 1) * (F(1, 0) * F(2, 2) - F(1, 2) * F(2, 0)) +
           F(0, 2) * (F(1, 0) * F(2, 1) - F(1, 1) * F(2, 0));
}

inline Mat33 adjoin_column(const Mat32& xi, const Vec3& zeta) {
    Mat33 F;
    F.set_col(0, xi.col(0));
    F.set_col(1, xi.col(1));
    F.set_col(2, zeta);
    return F;
}

inline Mat32 plane_part(const Mat33& F) {
    Mat32 xi;
    xi.set_col(0, F.col(0));
    xi.set_col(1, F.col(1));
    return xi;
}

/// a (x) b with (a (x) b) x = <a,x> b; a in R^N, b in R^3.
template <std::size_t N>
struct RankOneDyad {
    Vec<N> a{};
    Vec3 b{};
};

template <std::size_t N>
constexpr Ambient<N> rank_one_matrix(const RankOneDyad<N>& d) {
    Ambient<N> m;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < N; ++j) m(i, j) = d.b[i] * d.a[j];
    return m;
}

/// Thin SVD F = U diag(s) V^T with U (3 x N) orthonormal columns, V (N x N)
/// orthogonal, s >= 0 in Jacobi order (no sorting).
template <std::size_t N>
struct Svd {
    Matrix<3, N> U;
    Vec<N> s{};
    Matrix<N, N> V;
};

/// One-sided Jacobi SVD.
template <std::size_t N>
Svd<N> svd(const Matrix<3, N>& F) {
    Matrix<3, N> A = F;
    auto V = Matrix<N, N>::identity();
    const double eps = 1e-15;
    for (int sweep = 0; sweep < 60; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p < N; ++p)
            for (std::size_t q = p + 1; q < N; ++q) {
                double alpha = 0, beta = 0, gamma = 0;
                for (std::size_t i = 0; i < 3; ++i) {
                    alpha += A(i, p) * A(i, p);
                    beta += A(i, q) * A(i, q);
                    gamma += A(i, p) * A(i, q);
                }
                if (gamma == 0.0 || std::fabs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
                rotated = true;
                double zeta = (beta - alpha) / (2.0 * gamma);
                double t = (zeta >= 0 ? 1.0 : -1.0) / (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
                double c = 1.0 / std::sqrt(1.0 + t * t), s = c * t;
                for (std::size_t i = 0; i < 3; ++i) {
                    double ap = A(i, p), aq = A(i, q);
                    A(i, p) = c * ap - s * aq;
                    A(i, q) = s * ap + c * aq;
                }
                for (std::size_t i = 0; i < N; ++i) {
                    double vp = V(i, p), vq = V(i, q);
                    V(i, p) = c * vp - s * vq;
                    V(i, q) = s * vp + c * vq;
                }
            }
        if (!rotated) break;
    }
    Svd<N> out;
    out.V = V;
    double smax = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
        out.s[j] = norm(A.col(j));
        smax = std::max(smax, out.s[j]);
    }
    // Columns with negligible singular value get completed to an orthonormal frame.
    std::array<bool, N> good{};
    for (std::size_t j = 0; j < N; ++j) {
        good[j] = out.s[j] > 8.0 * eps * smax && out.s[j] > 0.0;
        if (good[j]) out.U.set_col(j, (1.0 / out.s[j]) * A.col(j));
    }
    for (std::size_t j = 0; j < N; ++j) {
        if (good[j]) continue;
        Vec3 cand{};
        bool found = false;
        for (std::size_t k = 0; k < 3 && !found; ++k) {
            Vec3 e{};
            e[k] = 1.0;
            for (std::size_t m = 0; m < N; ++m)
                if (good[m]) e = e - dot(e, out.U.col(m)) * out.U.col(m);
            double n = norm(e);
            if (n > 0.5) {
                cand = (1.0 / n) * e;
                found = true;
            }
        }
        out.U.set_col(j, cand);
        good[j] = true;
    }
    return out;
}

template <std::size_t N>
Matrix<3, N> svd_reconstruct(const Svd<N>& d) {
    Matrix<3, N> US = d.U;
    for (std::size_t j = 0; j < N; ++j)
        for (std::size_t i = 0; i < 3; ++i) US(i, j) *= d.s[j];
    return US * transpose(d.V);
}

/// F = P Q^T G Q with P, Q in SO(3), G diagonal.
struct SignedSvd {
    Mat33 P;
    Mat33 Q;
    Vec3 g{};  ///< diagonal of G
    [[nodiscard]] Mat33 G() const {
        Mat33 m;
        for (int i = 0; i < 3; ++i) m(i, i) = g[i];
        return m;
    }
    [[nodiscard]] Mat33 reconstruct() const { return P * transpose(Q) * G() * Q; }
};

inline bool is_invertible(const Mat33& F) {
    double n = frob(F);
    return std::fabs(det3(F)) > 1e-12 * (1.0 + n * n * n);
}

inline SignedSvd signed_svd(const Mat33& F) {
    if (!all_finite(F) || !is_invertible(F)) throw SingularInput("signed_svd: |det F| below tolerance");
    Svd<3> d = svd(F);
    Mat33 U = d.U, V = d.V;
    if (det3(U) < 0) {
        for (int i = 0; i < 3; ++i) {
            U(i, 2) = -U(i, 2);
            V(i, 2) = -V(i, 2);
        }
    }
    double sign = det3(F) > 0 ? 1.0 : -1.0;
    if (sign < 0) V = -V;  // det V was -1; -V is a rotation in 3D
    SignedSvd out;
    out.Q = transpose(V);
    out.P = U * out.Q;
    for (int i = 0; i < 3; ++i) out.g[i] = sign * d.s[i];
    return out;
}

/// F = R diag3 S^T with R, S in SO(3), R diag3 S^T exact up to rounding;
/// diag3 may carry one negative entry when det F < 0. Works for singular F.
struct RotationFrame {
    Mat33 R;
    Mat33 S;
    Vec3 d{};
};

inline RotationFrame rotation_frame(const Mat33& F) {
    Svd<3> sv = svd(F);
    RotationFrame fr{sv.U, sv.V, sv.s};
    auto flip_last = [&](Mat33& M) {
        for (int i = 0; i < 3; ++i) M(i, 2) = -M(i, 2);
        fr.d[2] = -fr.d[2];
    };
    if (det3(fr.R) < 0) flip_last(fr.R);
    if (det3(fr.S) < 0) flip_last(fr.S);
    return fr;
}

/// xi = R [diag(d); 0] S^T with R in SO(3), S in O(2).
struct PlanarFrame {
    Mat33 R;
    Mat22 S;
    Vec2 d{};
};

inline PlanarFrame planar_frame(const Mat32& xi) {
    Svd<2> sv = svd(xi);
    PlanarFrame fr;
    fr.S = sv.V;
    fr.d = sv.s;
    fr.R.set_col(0, sv.U.col(0));
    fr.R.set_col(1, sv.U.col(1));
    fr.R.set_col(2, cross(sv.U.col(0), sv.U.col(1)));
    return fr;
}

}  // namespace relax
