#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <ostream>

#include "errors.hpp"

namespace properfol {

using complex = std::complex<double>;

/// Real 3-vector (spatial momenta, boost axes).
using Vec3 = std::array<double, 3>;

/// Real Minkowski 4-vector, component 0 is time, signature (+,-,-,-), c = 1.
///
/// The type does not record whether the components are contravariant or
/// covariant; callers convert explicitly with lower()/raise().
struct FourVector {
    std::array<double, 4> c{0.0, 0.0, 0.0, 0.0};

    constexpr FourVector() = default;
    constexpr FourVector(double t, double x, double y, double z) : c{t, x, y, z} {}

    constexpr double& operator[](std::size_t i) { return c[i]; }
    constexpr double operator[](std::size_t i) const { return c[i]; }

    constexpr double t() const { return c[0]; }
    constexpr Vec3 spatial() const { return {c[1], c[2], c[3]}; }

    FourVector& operator+=(const FourVector& o) {
        for (int i = 0; i < 4; ++i) c[i] += o.c[i];
        return *this;
    }
    FourVector& operator-=(const FourVector& o) {
        for (int i = 0; i < 4; ++i) c[i] -= o.c[i];
        return *this;
    }
    FourVector& operator*=(double s) {
        for (auto& v : c) v *= s;
        return *this;
    }
    friend FourVector operator+(FourVector a, const FourVector& b) { return a += b; }
    friend FourVector operator-(FourVector a, const FourVector& b) { return a -= b; }
    friend FourVector operator*(FourVector a, double s) { return a *= s; }
    friend FourVector operator*(double s, FourVector a) { return a *= s; }
    friend FourVector operator/(FourVector a, double s) { return a *= 1.0 / s; }
    friend FourVector operator-(FourVector a) { return a *= -1.0; }
    friend bool operator==(const FourVector&, const FourVector&) = default;

    bool is_finite() const {
        for (double v : c)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline std::ostream& operator<<(std::ostream& os, const FourVector& v) {
    return os << '(' << v[0] << ", " << v[1] << ", " << v[2] << ", " << v[3] << ')';
}

/// Four complex components, same index convention as FourVector.
struct ComplexFourVector {
    std::array<complex, 4> c{};

    complex& operator[](std::size_t i) { return c[i]; }
    const complex& operator[](std::size_t i) const { return c[i]; }

    ComplexFourVector& operator+=(const ComplexFourVector& o) {
        for (int i = 0; i < 4; ++i) c[i] += o.c[i];
        return *this;
    }
    ComplexFourVector& operator*=(complex s) {
        for (auto& v : c) v *= s;
        return *this;
    }
    friend ComplexFourVector operator+(ComplexFourVector a, const ComplexFourVector& b) { return a += b; }
    friend ComplexFourVector operator*(ComplexFourVector a, complex s) { return a *= s; }
    friend ComplexFourVector operator*(complex s, ComplexFourVector a) { return a *= s; }

    static ComplexFourVector from_real(const FourVector& v) {
        ComplexFourVector out;
        for (int i = 0; i < 4; ++i) out.c[i] = v[i];
        return out;
    }
    FourVector real() const { return {c[0].real(), c[1].real(), c[2].real(), c[3].real()}; }
    FourVector imag() const { return {c[0].imag(), c[1].imag(), c[2].imag(), c[3].imag()}; }
    ComplexFourVector conj() const {
        ComplexFourVector out;
        for (int i = 0; i < 4; ++i) out.c[i] = std::conj(c[i]);
        return out;
    }
    double abs_sum() const {
        double s = 0.0;
        for (const auto& v : c) s += std::abs(v);
        return s;
    }
};

/// Metric diagonal, g = diag(+1, -1, -1, -1).
inline constexpr std::array<double, 4> metric_diag{1.0, -1.0, -1.0, -1.0};

inline double minkowski_dot(const FourVector& u, const FourVector& v) {
    return u[0] * v[0] - u[1] * v[1] - u[2] * v[2] - u[3] * v[3];
}

/// u^mu v_mu style contraction where both arguments carry the same index
/// position; one of them is lowered on the fly.
inline complex minkowski_dot(const ComplexFourVector& u, const FourVector& v) {
    return u[0] * v[0] - u[1] * v[1] - u[2] * v[2] - u[3] * v[3];
}

/// Plain index-wise sum u_mu v^mu for arguments already in opposite positions.
inline double contract(const FourVector& lower_u, const FourVector& upper_v) {
    return lower_u[0] * upper_v[0] + lower_u[1] * upper_v[1] + lower_u[2] * upper_v[2] +
           lower_u[3] * upper_v[3];
}

/// Flips the sign of the spatial components; lowering and raising coincide
/// in flat space with this signature.
inline FourVector lower(const FourVector& v) { return {v[0], -v[1], -v[2], -v[3]}; }
inline FourVector raise(const FourVector& v) { return lower(v); }

inline ComplexFourVector lower(const ComplexFourVector& v) {
    ComplexFourVector out = v;
    for (int i = 1; i < 4; ++i) out.c[i] = -out.c[i];
    return out;
}

inline double euclidean_norm(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

inline double euclidean_norm(const FourVector& v) {
    return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + v[3] * v[3]);
}

/// Positive-frequency energy +sqrt(m^2 + |p|^2).
inline double on_shell_energy(double m, const Vec3& p) {
    if (!(m > 0.0) || !std::isfinite(m)) throw DomainError("on_shell_energy: mass must be positive");
    return std::sqrt(m * m + p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
}

inline FourVector on_shell_momentum(double m, const Vec3& p) {
    return {on_shell_energy(m, p), p[0], p[1], p[2]};
}

/// 4x4 real matrix acting on contravariant components: (L v)^mu = L[mu][nu] v^nu.
using LorentzMatrix = std::array<std::array<double, 4>, 4>;

inline FourVector transform(const LorentzMatrix& L, const FourVector& v) {
    FourVector out;
    for (int i = 0; i < 4; ++i) {
        double s = 0.0;
        for (int j = 0; j < 4; ++j) s += L[i][j] * v[j];
        out[i] = s;
    }
    return out;
}

inline LorentzMatrix compose(const LorentzMatrix& a, const LorentzMatrix& b) {
    LorentzMatrix out{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            double s = 0.0;
            for (int k = 0; k < 4; ++k) s += a[i][k] * b[k][j];
            out[i][j] = s;
        }
    return out;
}

/// Pure boost with the given rapidity along a unit spatial axis.
class Boost {
public:
    Boost(double rapidity, const Vec3& axis) : rapidity_(rapidity), axis_(axis) {
        if (!std::isfinite(rapidity)) throw DomainError("Boost: rapidity must be finite");
        const double n = euclidean_norm(axis);
        if (std::abs(n - 1.0) > 1e-12) throw DomainError("Boost: axis must have unit Euclidean norm");
    }

    double rapidity() const { return rapidity_; }
    const Vec3& axis() const { return axis_; }

    LorentzMatrix matrix() const {
        const double ch = std::cosh(rapidity_), sh = std::sinh(rapidity_);
        LorentzMatrix L{};
        L[0][0] = ch;
        for (int i = 0; i < 3; ++i) {
            L[0][i + 1] = sh * axis_[i];
            L[i + 1][0] = sh * axis_[i];
            for (int j = 0; j < 3; ++j)
                L[i + 1][j + 1] = (i == j ? 1.0 : 0.0) + (ch - 1.0) * axis_[i] * axis_[j];
        }
        return L;
    }

    Boost inverse() const { return Boost(-rapidity_, axis_); }

private:
    double rapidity_;
    Vec3 axis_;
};

inline FourVector apply_boost(const Boost& b, const FourVector& v) { return transform(b.matrix(), v); }

/// Covariant components transform with the inverse transpose; for a pure
/// boost this is the boost with opposite rapidity acting on the lowered vector.
inline FourVector apply_boost_covariant(const Boost& b, const FourVector& v_lower) {
    return lower(apply_boost(b, raise(v_lower)));
}

} // namespace properfol
