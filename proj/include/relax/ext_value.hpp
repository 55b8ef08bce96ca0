#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace relax {

/// Nonnegative extended real: a finite value >= 0 or +inf.
class ExtValue {
public:
    constexpr ExtValue() = default;

    explicit ExtValue(double v) : v_(v) {
        if (std::isnan(v) || v < 0.0)
            throw std::domain_error("ExtValue: negative or NaN value");
    }

    static constexpr ExtValue infinity() {
        ExtValue e;
        e.v_ = std::numeric_limits<double>::infinity();
        return e;
    }

    [[nodiscard]] constexpr bool is_finite() const { return v_ != std::numeric_limits<double>::infinity(); }
    [[nodiscard]] constexpr bool is_infinite() const { return !is_finite(); }

    /// Finite value; throws on +inf.
    [[nodiscard]] double value() const {
        if (!is_finite()) throw std::domain_error("ExtValue: value() on +inf");
        return v_;
    }

    /// Underlying double (+inf encoded as IEEE infinity).
    [[nodiscard]] constexpr double raw() const { return v_; }

    friend ExtValue operator+(ExtValue a, ExtValue b) {
        if (a.is_infinite() || b.is_infinite()) return infinity();
        ExtValue r;
        r.v_ = a.v_ + b.v_;
        return r;
    }
    ExtValue& operator+=(ExtValue o) { return *this = *this + o; }

    /// lambda * value for lambda >= 0, with 0 * inf = 0.
    [[nodiscard]] ExtValue scaled(double lambda) const {
        if (std::isnan(lambda) || lambda < 0.0) throw std::domain_error("ExtValue: negative scale");
        if (lambda == 0.0) return ExtValue{};
        if (is_infinite()) return infinity();
        ExtValue r;
        r.v_ = lambda * v_;
        return r;
    }
    friend ExtValue operator*(double lambda, ExtValue a) { return a.scaled(lambda); }
    friend ExtValue operator*(ExtValue a, double lambda) { return a.scaled(lambda); }

    friend constexpr bool operator==(ExtValue a, ExtValue b) { return a.v_ == b.v_; }
    friend constexpr std::partial_ordering operator<=>(ExtValue a, ExtValue b) { return a.v_ <=> b.v_; }

    friend std::ostream& operator<<(std::ostream& os, ExtValue a) {
        if (a.is_infinite()) return os << "+inf";
        return os << a.v_;
    }

private:
    double v_ = 0.0;
};

inline ExtValue min(ExtValue a, ExtValue b) { return b < a ? b : a; }
inline ExtValue max(ExtValue a, ExtValue b) { return a < b ? b : a; }

}  // namespace relax
