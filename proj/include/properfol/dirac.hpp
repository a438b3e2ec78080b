#pragma once

#include <array>
#include <cmath>

#include "spacetime.hpp"

namespace properfol {

using Spinor = std::array<complex, 4>;
using SpinMatrix = std::array<std::array<complex, 4>, 4>;

/// Dirac-representation gamma^mu (upper index): gamma^0 = diag(1,1,-1,-1),
/// gamma^i = [[0, sigma_i], [-sigma_i, 0]].
inline SpinMatrix gamma_upper(int mu) {
    const complex I{0.0, 1.0};
    SpinMatrix g{};
    switch (mu) {
    case 0:
        g[0][0] = 1.0;
        g[1][1] = 1.0;
        g[2][2] = -1.0;
        g[3][3] = -1.0;
        break;
    case 1:
        g[0][3] = 1.0;
        g[1][2] = 1.0;
        g[2][1] = -1.0;
        g[3][0] = -1.0;
        break;
    case 2:
        g[0][3] = -I;
        g[1][2] = I;
        g[2][1] = I;
        g[3][0] = -I;
        break;
    case 3:
        g[0][2] = 1.0;
        g[1][3] = -1.0;
        g[2][0] = -1.0;
        g[3][1] = 1.0;
        break;
    default:
        throw ContractViolation("gamma_upper: index out of range");
    }
    return g;
}

inline SpinMatrix gamma_lower(int mu) {
    SpinMatrix g = gamma_upper(mu);
    if (mu != 0)
        for (auto& row : g)
            for (auto& v : row) v = -v;
    return g;
}

inline Spinor multiply(const SpinMatrix& m, const Spinor& u) {
    Spinor out{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) out[i] += m[i][j] * u[j];
    return out;
}

/// Positive-energy Dirac spinor u_s(k) in the Dirac representation with
/// u^dagger u = 1. s = 1 is spin up along z, s = 2 spin down.
inline Spinor dirac_positive_spinor(double m, const Vec3& p, int s) {
    if (s != 1 && s != 2) throw DomainError("dirac_positive_spinor: s must be 1 or 2");
    const double E = on_shell_energy(m, p);
    const double norm = std::sqrt((E + m) / (2.0 * E));
    const complex I{0.0, 1.0};
    const double den = E + m;
    // sigma.p applied to chi_s
    Spinor u{};
    if (s == 1) {
        u[0] = 1.0;
        u[1] = 0.0;
        u[2] = p[2] / den;
        u[3] = (p[0] + I * p[1]) / den;
    } else {
        u[0] = 0.0;
        u[1] = 1.0;
        u[2] = (p[0] - I * p[1]) / den;
        u[3] = -p[2] / den;
    }
    for (auto& v : u) v *= norm;
    return u;
}

} // namespace properfol
