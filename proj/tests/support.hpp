#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <vector>

#include <properfol/wavefunction.hpp>

namespace pftest {

using namespace properfol;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Normalized random state: n particles, `modes` distinct product modes with
/// lattice labels in [-2, 2]^3, Gaussian coefficients.
inline WaveFunction random_state(std::mt19937_64& g, std::size_t n, std::size_t modes, int spin_dim = 1,
                                 double L = kTwoPi) {
    std::normal_distribution<double> gauss;
    std::uniform_int_distribution<int> lat(-2, 2);
    std::uniform_real_distribution<double> mass(0.5, 2.0);
    std::vector<ParticleSpec> parts;
    for (std::size_t a = 0; a < n; ++a) parts.push_back({mass(g), spin_dim});
    std::set<std::vector<LatticeIndex>> used;
    std::vector<ModeSpec> specs;
    while (specs.size() < modes) {
        ModeSpec m;
        for (std::size_t a = 0; a < n; ++a) m.lattice.push_back({lat(g), lat(g), lat(g)});
        if (!used.insert(m.lattice).second) continue;
        if (spin_dim == 4)
            for (std::size_t a = 0; a < n; ++a) {
                const double dk = kTwoPi / L;
                const auto& k = m.lattice[a];
                const Spinor u1 = dirac_positive_spinor(parts[a].mass, {dk * k[0], dk * k[1], dk * k[2]}, 1);
                const Spinor u2 = dirac_positive_spinor(parts[a].mass, {dk * k[0], dk * k[1], dk * k[2]}, 2);
                const complex w1{gauss(g), gauss(g)}, w2{gauss(g), gauss(g)};
                std::vector<complex> chi(4);
                for (int i = 0; i < 4; ++i) chi[static_cast<std::size_t>(i)] = w1 * u1[i] + w2 * u2[i];
                m.spins.push_back(chi);
            }
        m.coefficient = {gauss(g), gauss(g)};
        specs.push_back(m);
    }
    return normalize(WaveFunction(parts, specs, L));
}

inline std::vector<FourVector> random_events(std::mt19937_64& g, std::size_t n, double L = kTwoPi) {
    std::uniform_real_distribution<double> t(-2.0, 2.0), x(0.0, L);
    std::vector<FourVector> X;
    for (std::size_t a = 0; a < n; ++a) X.push_back({t(g), x(g), x(g), x(g)});
    return X;
}

inline FourVector random_vector(std::mt19937_64& g, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    return {u(g), u(g), u(g), u(g)};
}

/// n = 2, m = 4, L = 2 pi entangled two-mode state with flat closed leaves and rho > 0.
inline WaveFunction headline_state() {
    std::vector<ParticleSpec> parts{{4.0, 1}, {4.0, 1}};
    std::vector<ModeSpec> modes{{{{1, 0, 0}, {0, 1, 0}}, {}, {0.988021791350754, 0.0}},
                                {{{-2, 0, 0}, {0, -2, 0}}, {}, {0.6, 0.3}}};
    return normalize(WaveFunction(parts, modes, kTwoPi));
}

/// One light particle, two counter-propagating modes with flat leaves and a
/// density that changes sign.
inline WaveFunction negative_density_state() {
    return normalize(WaveFunction({{0.5, 1}},
                                  {ModeSpec{{{1, 0, 0}}, {}, {std::sqrt(6.0 / 7.0), 0.0}},
                                   ModeSpec{{{-6, 0, 0}}, {}, {std::sqrt(1.0 / 7.0), 0.0}}},
                                  kTwoPi));
}

inline WaveFunction product_state(std::vector<double> masses, std::vector<LatticeIndex> lattice,
                                  double L = kTwoPi) {
    std::vector<ParticleSpec> parts;
    for (double m : masses) parts.push_back({m, 1});
    return normalize(WaveFunction(parts, {ModeSpec{lattice, {}, {1.0, 0.0}}}, L));
}

inline double max_abs_diff(const FourVector& a, const FourVector& b) {
    double d = 0.0;
    for (int i = 0; i < 4; ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

} // namespace pftest
