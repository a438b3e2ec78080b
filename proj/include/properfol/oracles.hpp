#pragma once

#include <array>
#include <cmath>
#include <span>
#include <type_traits>
#include <vector>

#include "spacetime.hpp"
#include "tensor.hpp"
#include "wavefunction.hpp"

namespace properfol::oracles {

/// 4th-order central difference of a field along coordinate mu.
template <class Field>
auto fd_derivative(const Field& field, int mu, const FourVector& x, double step) {
    if (!(step > 0.0)) throw ContractViolation("fd_derivative: step must be positive");
    auto at = [&](double k) {
        FourVector y = x;
        y[mu] += k * step;
        return field(y);
    };
    return (at(-2.0) - 8.0 * at(-1.0) + 8.0 * at(1.0) - at(2.0)) * (1.0 / (12.0 * step));
}

namespace detail {

/// Mixed partial derivative of every spin component of psi: one coordinate
/// index per slot in `slots` (the other slots are not differentiated).
inline std::vector<complex> mixed_partial(const WaveFunction& psi, std::span<const FourVector> X,
                                          const std::vector<std::pair<std::size_t, int>>& slots, double h) {
    static constexpr std::array<double, 4> offs{-2.0, -1.0, 1.0, 2.0};
    static constexpr std::array<double, 4> wts{1.0, -8.0, 8.0, -1.0};
    const std::size_t r = slots.size();
    std::vector<FourVector> Y(X.begin(), X.end());
    std::vector<complex> acc;
    std::size_t combos = 1;
    for (std::size_t i = 0; i < r; ++i) combos *= 4;
    for (std::size_t c = 0; c < combos; ++c) {
        double w = 1.0;
        std::size_t code = c;
        for (std::size_t i = 0; i < r; ++i) {
            const std::size_t k = code % 4;
            code /= 4;
            Y[slots[i].first] = X[slots[i].first];
            w *= wts[k] / (12.0 * h);
        }
        code = c;
        for (std::size_t i = 0; i < r; ++i) {
            const std::size_t k = code % 4;
            code /= 4;
            Y[slots[i].first][slots[i].second] += offs[k] * h;
        }
        const SpinTensor v = evaluate(psi, Y);
        if (acc.empty()) acc.assign(v.size(), complex{});
        for (std::size_t s = 0; s < v.size(); ++s) acc[s] += w * v[s];
    }
    if (acc.empty()) acc = evaluate(psi, X).data();
    return acc;
}

} // namespace detail

/// n-vector current from point evaluations of psi only:
/// j = (i/2)^n sum_S (-1)^{|S|} (d_S psi)^dagger (d_{S^c} psi), where S is
/// the set of slots whose derivative acts on psi^dagger.
inline MinkowskiTensor fd_n_current(const WaveFunction& psi, std::span<const FourVector> X, double h = 1e-3) {
    const std::size_t n = psi.particle_count();
    MinkowskiTensor out(n);
    std::vector<int> mu(n, 0);
    const complex pref = std::pow(complex{0.0, 0.5}, static_cast<int>(n));
    for (std::size_t flat = 0; flat < out.size(); ++flat) {
        for (std::size_t a = 0; a < n; ++a) mu[a] = static_cast<int>(out.index_of(flat, a));
        complex total{};
        for (std::size_t S = 0; S < (std::size_t{1} << n); ++S) {
            std::vector<std::pair<std::size_t, int>> left, right;
            int parity = 1;
            for (std::size_t a = 0; a < n; ++a) {
                if (S & (std::size_t{1} << a)) {
                    left.push_back({a, mu[a]});
                    parity = -parity;
                } else {
                    right.push_back({a, mu[a]});
                }
            }
            const auto dl = detail::mixed_partial(psi, X, left, h);
            const auto dr = detail::mixed_partial(psi, X, right, h);
            complex s{};
            for (std::size_t k = 0; k < dl.size(); ++k) s += std::conj(dl[k]) * dr[k];
            total += static_cast<double>(parity) * s;
        }
        out[flat] = (pref * total).real();
    }
    return out;
}

/// Finite-difference d^mu of a tensor-valued evaluator in slot a.
/// `current(X)` must return a MinkowskiTensor of rank n; the result has rank n-1.
template <class Current>
MinkowskiTensor fd_divergence(const Current& current, std::size_t a, std::span<const FourVector> X, double h) {
    std::vector<FourVector> Y(X.begin(), X.end());
    const MinkowskiTensor j0 = current(Y);
    const std::size_t n = j0.rank();
    MinkowskiTensor out(n - 1);
    for (int mu = 0; mu < 4; ++mu) {
        auto slice = [&](const FourVector& xa) {
            Y[a] = xa;
            const MinkowskiTensor j = current(Y);
            std::vector<double> v(out.size(), 0.0);
            for (std::size_t flat = 0; flat < j.size(); ++flat) {
                if (static_cast<int>(j.index_of(flat, a)) != mu) continue;
                // drop slot a from the flat index
                std::size_t reduced = 0;
                for (std::size_t b = 0; b < n; ++b)
                    if (b != a) reduced = 4 * reduced + j.index_of(flat, b);
                v[reduced] = j[flat];
            }
            return v;
        };
        const FourVector xa = X[a];
        std::vector<double> d(out.size(), 0.0);
        static constexpr std::array<double, 4> offs{-2.0, -1.0, 1.0, 2.0};
        static constexpr std::array<double, 4> wts{1.0, -8.0, 8.0, -1.0};
        for (int k = 0; k < 4; ++k) {
            FourVector y = xa;
            y[mu] += offs[k] * h;
            const auto v = slice(y);
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += wts[k] * v[i] / (12.0 * h);
        }
        const double sign = mu == 0 ? 1.0 : -1.0; // d^mu = eta^{mu mu} d_mu
        for (std::size_t i = 0; i < d.size(); ++i) out[i] += sign * d[i];
    }
    return out;
}

/// Per-axis sampling of a spatial chart. Periodic axes use the rectangle
/// rule on `count` points, others the trapezoid rule including both ends.
struct GridSpec {
    std::array<double, 3> origin{0.0, 0.0, 0.0};
    std::array<double, 3> extent{1.0, 1.0, 1.0};
    std::array<int, 3> count{8, 8, 8};
    bool periodic = true;

    void validate(double box_length) const {
        for (int i = 0; i < 3; ++i) {
            if (count[i] < 8) throw ContractViolation("GridSpec: at least 8 points per axis");
            if (!(extent[i] > 0.0) || extent[i] > box_length * (1.0 + 1e-12))
                throw ContractViolation("GridSpec: extent must be positive and fit the box");
        }
    }
};

/// Spacelike hyperplane through offset * n with future unit normal n.
struct Hyperplane {
    FourVector normal{1.0, 0.0, 0.0, 0.0};
    double offset = 0.0;
};

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0; ///< |full grid - half grid|
};

namespace detail {

/// Pure boost taking (1,0,0,0) to the unit timelike vector n.
inline LorentzMatrix boost_to(const FourVector& n) {
    const double nn = minkowski_dot(n, n);
    if (!(nn > 0.0) || !(n[0] > 0.0))
        throw DomainError("hyperplane_quadrature: only spacelike hyperplanes (timelike future normal) are supported");
    const FourVector u = n / std::sqrt(nn);
    const Vec3 s{u[1], u[2], u[3]};
    const double sn = euclidean_norm(s);
    if (sn == 0.0) {
        LorentzMatrix id{};
        for (int i = 0; i < 4; ++i) id[i][i] = 1.0;
        return id;
    }
    return Boost(std::asinh(sn), Vec3{s[0] / sn, s[1] / sn, s[2] / sn}).matrix();
}

template <class Fn>
double grid_sum(const GridSpec& g, int stride, const Fn& at) {
    std::array<int, 3> m;
    for (int i = 0; i < 3; ++i) m[i] = g.periodic ? g.count[i] / stride : (g.count[i] - 1) / stride + 1;
    double total = 0.0;
    for (int i = 0; i < m[0]; ++i)
        for (int j = 0; j < m[1]; ++j)
            for (int k = 0; k < m[2]; ++k) {
                const std::array<int, 3> idx{i, j, k};
                double w = 1.0;
                std::array<double, 3> y;
                for (int ax = 0; ax < 3; ++ax) {
                    const double step = g.periodic ? g.extent[ax] / m[ax] : g.extent[ax] / (m[ax] - 1);
                    y[ax] = g.origin[ax] + idx[ax] * step;
                    w *= step;
                    if (!g.periodic && (idx[ax] == 0 || idx[ax] == m[ax] - 1)) w *= 0.5;
                }
                total += w * at(y);
            }
    return total;
}

} // namespace detail

/// Integrates over the hyperplane charted by x(y) = offset n + B_n (0, y),
/// with B_n the pure boost taking the time axis to n; y runs over the grid.
/// A FourVector integrand (covariant J_mu) gives the flux J_mu n^mu d^3y,
/// a scalar integrand the induced-volume integral.
template <class Integrand>
QuadratureResult hyperplane_quadrature(const Integrand& integrand, const Hyperplane& plane, const GridSpec& grid) {
    const LorentzMatrix B = detail::boost_to(plane.normal);
    const FourVector n = transform(B, FourVector{1.0, 0.0, 0.0, 0.0});
    auto at = [&](const std::array<double, 3>& y) {
        const FourVector x = plane.offset * n + transform(B, FourVector{0.0, y[0], y[1], y[2]});
        const auto v = integrand(x);
        if constexpr (std::is_same_v<std::decay_t<decltype(v)>, FourVector>)
            return contract(v, n);
        else
            return static_cast<double>(v);
    };
    QuadratureResult r;
    r.value = detail::grid_sum(grid, 1, at);
    bool halvable = true;
    for (int i = 0; i < 3; ++i)
        halvable = halvable && (grid.periodic ? grid.count[i] % 2 == 0 : (grid.count[i] - 1) % 2 == 0);
    r.error = halvable ? std::abs(r.value - detail::grid_sum(grid, 2, at)) : std::abs(r.value);
    return r;
}

/// Observed convergence order from three solutions at h, h/2, h/4.
inline double richardson_order(double y_h, double y_h2, double y_h4) {
    const double a = std::abs(y_h - y_h2), b = std::abs(y_h2 - y_h4);
    if (b == 0.0) return INFINITY;
    return std::log2(a / b);
}

inline double richardson_order(std::span<const double> y_h, std::span<const double> y_h2,
                               std::span<const double> y_h4) {
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < y_h.size(); ++i) {
        a += (y_h[i] - y_h2[i]) * (y_h[i] - y_h2[i]);
        b += (y_h2[i] - y_h4[i]) * (y_h2[i] - y_h4[i]);
    }
    if (b == 0.0) return INFINITY;
    return 0.5 * std::log2(a / b);
}

} // namespace properfol::oracles
