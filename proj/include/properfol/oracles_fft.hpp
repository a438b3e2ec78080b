#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include <fftw3.h>

#include "errors.hpp"
#include "spacetime.hpp"

namespace properfol::oracles {

/// Periodic spacetime grid: nt time points over period_t, ns points per
/// spatial axis over box_length. Samples are indexed ((it*ns + ix)*ns + iy)*ns + iz.
struct SpacetimeGrid {
    int nt = 32;
    int ns = 32;
    double period_t = 2.0 * std::numbers::pi;
    double box_length = 2.0 * std::numbers::pi;

    std::size_t size() const {
        return static_cast<std::size_t>(nt) * static_cast<std::size_t>(ns) * static_cast<std::size_t>(ns) *
               static_cast<std::size_t>(ns);
    }

    FourVector point(std::size_t flat) const {
        const std::size_t s = static_cast<std::size_t>(ns);
        const std::size_t iz = flat % s, iy = (flat / s) % s, ix = (flat / (s * s)) % s, it = flat / (s * s * s);
        const double ht = period_t / nt, hs = box_length / ns;
        return {static_cast<double>(it) * ht, static_cast<double>(ix) * hs, static_cast<double>(iy) * hs,
                static_cast<double>(iz) * hs};
    }
};

template <class Field>
std::vector<FourVector> sample_on_grid(const Field& field, const SpacetimeGrid& g) {
    std::vector<FourVector> out(g.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = field(g.point(i));
    return out;
}

/// Gradient part of a sampled covariant field by 4D DFT: every grid
/// frequency q gets f(q) = q_mu (j(q).q) / (q.q); q = 0 passes through.
/// A near-null frequency carrying more than `amplitude_tol` (relative to the
/// largest coefficient) raises SingularModeError; quieter ones are dropped.
inline std::vector<FourVector> fft_gradient_extract(const std::vector<FourVector>& samples, const SpacetimeGrid& g,
                                                    double eps_null_rel = 1e-9, double amplitude_tol = 1e-10) {
    const std::size_t N = g.size();
    if (samples.size() != N) throw ContractViolation("fft_gradient_extract: sample count does not match grid");
    using cplx = std::complex<double>;
    std::array<std::vector<cplx>, 4> spec;
    for (auto& s : spec) s.resize(N);
    {
        std::vector<cplx> buf(N);
        auto* p = reinterpret_cast<fftw_complex*>(buf.data());
        const int dims[4] = {g.nt, g.ns, g.ns, g.ns};
        fftw_plan fwd = fftw_plan_dft(4, dims, p, p, FFTW_FORWARD, FFTW_ESTIMATE);
        for (int mu = 0; mu < 4; ++mu) {
            for (std::size_t i = 0; i < N; ++i) buf[i] = samples[i][mu];
            fftw_execute(fwd);
            spec[mu] = buf;
        }
        fftw_destroy_plan(fwd);
    }
    double peak = 0.0;
    for (const auto& s : spec)
        for (const auto& c : s) peak = std::max(peak, std::abs(c));

    const double two_pi = 2.0 * std::numbers::pi;
    const double dk = two_pi / g.box_length;
    const double eps_null = eps_null_rel * dk * dk;
    auto signed_index = [](std::size_t k, int n) {
        const int ki = static_cast<int>(k);
        return ki <= n / 2 ? ki : ki - n;
    };
    const std::size_t s = static_cast<std::size_t>(g.ns);
    for (std::size_t flat = 1; flat < N; ++flat) {
        const std::size_t iz = flat % s, iy = (flat / s) % s, ix = (flat / (s * s)) % s, it = flat / (s * s * s);
        // e^{-i q.x} = e^{-i q^0 t + i q.x}; the forward DFT bin of that term
        FourVector q{two_pi * signed_index(it, g.nt) / g.period_t, -dk * signed_index(ix, g.ns),
                     -dk * signed_index(iy, g.ns), -dk * signed_index(iz, g.ns)};
        const double qq = minkowski_dot(q, q);
        if (std::abs(qq) < eps_null) {
            double amp = 0.0;
            for (int mu = 0; mu < 4; ++mu) amp = std::max(amp, std::abs(spec[mu][flat]));
            if (amp > amplitude_tol * peak)
                throw SingularModeError("fft_gradient_extract: null grid frequency with non-negligible amplitude",
                                        q[0], q[1], q[2], q[3]);
            for (int mu = 0; mu < 4; ++mu) spec[mu][flat] = 0.0;
            continue;
        }
        cplx jq{};
        for (int mu = 0; mu < 4; ++mu) jq += spec[mu][flat] * q[mu];
        const FourVector ql = lower(q);
        for (int mu = 0; mu < 4; ++mu) spec[mu][flat] = ql[mu] * jq / qq;
    }

    std::vector<FourVector> out(N);
    std::vector<cplx> buf(N);
    auto* p = reinterpret_cast<fftw_complex*>(buf.data());
    const int dims[4] = {g.nt, g.ns, g.ns, g.ns};
    fftw_plan bwd = fftw_plan_dft(4, dims, p, p, FFTW_BACKWARD, FFTW_ESTIMATE);
    for (int mu = 0; mu < 4; ++mu) {
        std::copy(spec[mu].begin(), spec[mu].end(), buf.begin());
        fftw_execute(bwd);
        for (std::size_t i = 0; i < N; ++i) out[i][mu] = buf[i].real() / static_cast<double>(N);
    }
    fftw_destroy_plan(bwd);
    return out;
}

} // namespace properfol::oracles
