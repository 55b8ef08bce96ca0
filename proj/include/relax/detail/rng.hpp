#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "../matspace.hpp"

namespace relax {

inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based generator keyed by (seed, stream index). Each draw is a pure
/// function of (seed, index, counter), so sample streams are independent of
/// evaluation order and thread count.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t index) : key_(mix64(seed ^ mix64(index + 0x632be59bd9b4e019ULL))) {}

    std::uint64_t next() { return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++ctr_); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        double u1 = 1.0 - uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    template <std::size_t R, std::size_t C>
    Matrix<R, C> matrix(double scale = 1.0) {
        Matrix<R, C> m;
        for (auto& x : m.e) x = scale * normal();
        return m;
    }

    template <std::size_t N>
    Vec<N> unit() {
        Vec<N> v;
        double n = 0;
        do {
            for (auto& x : v) x = normal();
            n = norm(v);
        } while (n < 1e-8);
        return (1.0 / n) * v;
    }

    /// Random rotation from the QR factor of a Gaussian matrix.
    Mat33 rotation() {
        Vec3 a = unit<3>();
        Vec3 b{normal(), normal(), normal()};
        b = b - dot(a, b) * a;
        b = (1.0 / norm(b)) * b;
        Vec3 c = cross(a, b);
        Mat33 R;
        R.set_col(0, a);
        R.set_col(1, b);
        R.set_col(2, c);
        return R;
    }

private:
    std::uint64_t key_;
    std::uint64_t ctr_ = 0;
};

}  // namespace relax
