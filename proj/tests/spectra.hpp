#pragma once

#include <array>
#include <random>
#include <set>

#include <properfol/foliation.hpp>

namespace pftest {

using namespace properfol;

enum class Kind { gradient, transverse, generic };

/// Real spectral field with `count` frequency pairs +-q on the integer lattice (L = 2 pi, T = 2 pi).
inline SpectralVectorField random_spectrum(std::mt19937_64& g, int count, Kind kind, int qmax = 3) {
    std::uniform_int_distribution<int> qi(-qmax, qmax);
    std::normal_distribution<double> gauss;
    SpectralVectorField s;
    for (int mu = 0; mu < 4; ++mu) s.zero_mode[mu] = gauss(g);
    std::set<std::array<int, 4>> used;
    while (static_cast<int>(s.modes.size()) < 2 * count) {
        const std::array<int, 4> k{qi(g), qi(g), qi(g), qi(g)};
        const std::array<int, 4> mk{-k[0], -k[1], -k[2], -k[3]};
        const FourVector q{double(k[0]), double(k[1]), double(k[2]), double(k[3])};
        if (std::abs(minkowski_dot(q, q)) < 1.0 || used.count(k) || used.count(mk)) continue;
        used.insert(k);
        ComplexFourVector c;
        const FourVector ql = lower(q);
        if (kind == Kind::gradient) {
            const complex w{gauss(g), gauss(g)};
            for (int mu = 0; mu < 4; ++mu) c[mu] = ql[mu] * w;
        } else {
            for (int mu = 0; mu < 4; ++mu) c[mu] = {gauss(g), gauss(g)};
            if (kind == Kind::transverse) {
                complex cq{};
                for (int mu = 0; mu < 4; ++mu) cq += c[mu] * q[mu];
                for (int mu = 0; mu < 4; ++mu) c[mu] -= ql[mu] * cq / minkowski_dot(q, q);
            }
        }
        ComplexFourVector cc;
        for (int mu = 0; mu < 4; ++mu) cc[mu] = std::conj(c[mu]);
        s.modes.push_back({q, c});
        s.modes.push_back({-q, cc});
    }
    return s;
}

} // namespace pftest
