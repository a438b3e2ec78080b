#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "dirac.hpp"
#include "tensor.hpp"
#include "wavefunction.hpp"

namespace properfol {

/// Real n-vector current j_{mu_1...mu_n} (covariant components) at one
/// configuration (x_1, ..., x_n).
struct NVectorCurrent {
    MinkowskiTensor value;
    std::vector<FourVector> points;
};

namespace detail {

/// out += scale * (v_1 (x) v_2 (x) ... (x) v_r), complex accumulation.
inline void add_outer(std::vector<complex>& out, std::span<const FourVector> factors, complex scale) {
    const std::size_t r = factors.size();
    if (r == 0) {
        out[0] += scale;
        return;
    }
    std::vector<int> idx(r, 0);
    for (std::size_t flat = 0; flat < out.size(); ++flat) {
        double p = 1.0;
        for (std::size_t s = 0; s < r; ++s) p *= factors[s][idx[s]];
        out[flat] += scale * p;
        for (std::size_t s = r; s-- > 0;) {
            if (++idx[s] < 4) break;
            idx[s] = 0;
        }
    }
}

/// Takes the real part after checking the imaginary residue is round-off.
inline MinkowskiTensor real_part_checked(const std::vector<complex>& acc, std::size_t rank, const char* who) {
    MinkowskiTensor t(rank);
    double scale = 0.0, worst = 0.0;
    for (const auto& v : acc) {
        scale = std::max(scale, std::abs(v.real()));
        worst = std::max(worst, std::abs(v.imag()));
    }
    if (worst > 1e-12 * std::max(1.0, scale))
        throw ContractViolation(std::string(who) + ": imaginary residue " + std::to_string(worst) +
                                " exceeds round-off; mode bookkeeping is inconsistent");
    for (std::size_t i = 0; i < acc.size(); ++i) t[i] = acc[i].real();
    return t;
}

/// Pair amplitude c_l^* c_r prod_a (chi_{l,a}^dagger chi_{r,a}).
inline complex pair_amplitude(const ProductMode& l, const ProductMode& r) {
    complex amp = std::conj(l.coefficient) * r.coefficient;
    for (std::size_t a = 0; a < l.spins.size(); ++a) amp *= spin_overlap(l.spins[a], r.spins[a]);
    return amp;
}

/// e^{i sum_a (k_{l,a} - k_{r,a}).x_a}
inline complex pair_phase(const ProductMode& l, const ProductMode& r, std::span<const FourVector> X) {
    double ph = 0.0;
    for (std::size_t a = 0; a < X.size(); ++a) ph += minkowski_dot(l.momentum[a] - r.momentum[a], X[a]);
    return std::polar(1.0, ph);
}

} // namespace detail

/// j_{mu_1...mu_n} = psi^dagger Gamma_{mu_1} ... Gamma_{mu_n} psi with
/// Gamma_mu = (i/2) <-> d_mu. A mode pair (l from psi^*, r from psi)
/// contributes prod_a (k_{l,a} + k_{r,a})_mu / 2 times its amplitude and phase.
inline NVectorCurrent n_current(const WaveFunction& psi, std::span<const FourVector> X) {
    detail::require_points(psi, X, "n_current");
    const std::size_t n = psi.particle_count();
    std::vector<complex> acc(std::size_t{1} << (2 * n));
    std::vector<FourVector> factors(n);
    for (const auto& l : psi.modes()) {
        for (const auto& r : psi.modes()) {
            const complex amp = detail::pair_amplitude(l, r);
            if (amp == complex{}) continue;
            for (std::size_t a = 0; a < n; ++a) factors[a] = lower(0.5 * (l.momentum[a] + r.momentum[a]));
            detail::add_outer(acc, factors, amp * detail::pair_phase(l, r, X));
        }
    }
    return {detail::real_part_checked(acc, n, "n_current"), {X.begin(), X.end()}};
}

/// d_{mu_a} j^{mu_1..mu_a..mu_n}: rank n-1 tensor over the remaining slots.
/// Each pair contributes i (k_l.k_l - k_r.k_r) / 2 in slot a, which vanishes
/// on shell.
inline MinkowskiTensor conservation_residual(const WaveFunction& psi, std::size_t a, std::span<const FourVector> X) {
    detail::require_points(psi, X, "conservation_residual");
    detail::require_particle(psi, a, "conservation_residual");
    const std::size_t n = psi.particle_count();
    std::vector<complex> acc(std::size_t{1} << (2 * (n - 1)));
    std::vector<FourVector> factors;
    for (const auto& l : psi.modes()) {
        for (const auto& r : psi.modes()) {
            const complex amp = detail::pair_amplitude(l, r);
            if (amp == complex{}) continue;
            const FourVector& kl = l.momentum[a];
            const FourVector& kr = r.momentum[a];
            // d_mu e^{i(k_l-k_r).x} = i (k_l - k_r)_mu, contracted with (k_l + k_r)^mu / 2
            const complex slot = complex{0.0, 1.0} * 0.5 * minkowski_dot(kl - kr, kl + kr);
            if (slot == complex{}) continue;
            factors.clear();
            for (std::size_t b = 0; b < n; ++b)
                if (b != a) factors.push_back(lower(0.5 * (l.momentum[b] + r.momentum[b])));
            detail::add_outer(acc, factors, amp * slot * detail::pair_phase(l, r, X));
        }
    }
    return detail::real_part_checked(acc, n - 1, "conservation_residual");
}

/// One Fourier term of a marginal current: coefficient * vector * e^{-i q.x}.
struct MarginalTerm {
    complex coefficient;
    FourVector vector; ///< covariant (k_a + k'_a) / 2
    FourVector q;      ///< contravariant, k_r - k_l
};

/// j_{mu_a}(x): the n-vector current integrated over box-frame hyperplanes
/// for every other particle. Holds the finite mode sum; evaluation is pure.
class MarginalCurrent {
public:
    MarginalCurrent(std::size_t particle, std::vector<MarginalTerm> terms)
        : particle_(particle), terms_(std::move(terms)) {}

    std::size_t particle() const { return particle_; }
    const std::vector<MarginalTerm>& terms() const { return terms_; }

    /// Covariant components j_mu(x).
    FourVector operator()(const FourVector& x) const {
        ComplexFourVector acc;
        for (const auto& t : terms_) {
            const complex w = t.coefficient * std::polar(1.0, -minkowski_dot(t.q, x));
            for (int mu = 0; mu < 4; ++mu) acc[mu] += w * t.vector[mu];
        }
        return acc.real();
    }

    /// Analytic d^mu j_mu(x).
    double divergence(const FourVector& x) const {
        complex acc{};
        for (const auto& t : terms_) {
            // d_mu e^{-i q.x} = -i q_mu; contract with the raised vector
            acc += t.coefficient * std::polar(1.0, -minkowski_dot(t.q, x)) * complex{0.0, -1.0} *
                   contract(t.vector, t.q);
        }
        return acc.real();
    }

private:
    std::size_t particle_;
    std::vector<MarginalTerm> terms_;
};

/// Marginal current of particle a. Spatial integration over the box forces
/// matched lattice labels in every other slot b; each contributes
/// (k_b + k'_b).u / 2 * L^3 times its spin overlap, with u the box frame.
/// `slice_times` (one per particle, slot a ignored) selects the hyperplanes
/// u.x_b = t_b; the result does not depend on them for on-shell states.
inline MarginalCurrent marginal_current(const WaveFunction& psi, std::size_t a,
                                        std::span<const double> slice_times = {}) {
    detail::require_particle(psi, a, "marginal_current");
    if (!is_normalized(psi)) throw ContractViolation("marginal_current: state must be normalized");
    if (!slice_times.empty() && slice_times.size() != psi.particle_count())
        throw ContractViolation("marginal_current: one slice time per particle");
    const std::size_t n = psi.particle_count();
    const double volume = std::pow(psi.box_length(), 3);
    const FourVector& u = psi.box_frame();
    std::vector<MarginalTerm> terms;
    for (const auto& l : psi.modes()) {
        for (const auto& r : psi.modes()) {
            complex w = std::conj(l.coefficient) * r.coefficient *
                        detail::spin_overlap(l.spins[a], r.spins[a]);
            for (std::size_t b = 0; b < n && w != complex{}; ++b) {
                if (b == a) continue;
                if (l.lattice[b] != r.lattice[b]) {
                    w = {};
                    break;
                }
                const FourVector& kl = l.momentum[b];
                const FourVector& kr = r.momentum[b];
                const double tb = slice_times.empty() ? 0.0 : slice_times[b];
                w *= 0.5 * minkowski_dot(kl + kr, u) * volume * detail::spin_overlap(l.spins[b], r.spins[b]) *
                     std::polar(1.0, minkowski_dot(kl - kr, u) * tb);
            }
            if (w == complex{}) continue;
            terms.push_back({w, lower(0.5 * (l.momentum[a] + r.momentum[a])), r.momentum[a] - l.momentum[a]});
        }
    }
    return MarginalCurrent(a, std::move(terms));
}

/// j'_{mu_1..mu_n} = psibar gamma_{mu_1} (x) ... (x) gamma_{mu_n} psi with
/// psibar = psi^dagger gamma^0 (x) ... (x) gamma^0. Requires Dirac particles.
inline NVectorCurrent dirac_current(const WaveFunction& psi, std::span<const FourVector> X) {
    for (const auto& p : psi.particles())
        if (p.spin_dim != 4) throw UnsupportedSpinError("dirac_current: every particle must have spin_dim 4");
    const SpinTensor field = evaluate(psi, X);
    const std::size_t n = psi.particle_count();
    // gamma^0 gamma_mu is Hermitian, so each component is real.
    std::array<SpinMatrix, 4> ops;
    const SpinMatrix g0 = gamma_upper(0);
    for (int mu = 0; mu < 4; ++mu) {
        const SpinMatrix gm = gamma_lower(mu);
        SpinMatrix prod{};
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                for (int k = 0; k < 4; ++k) prod[i][j] += g0[i][k] * gm[k][j];
        ops[mu] = prod;
    }
    const std::size_t dim = field.size();
    std::vector<complex> acc(std::size_t{1} << (2 * n));
    std::vector<complex> work(dim), next(dim);
    for (std::size_t flat = 0; flat < acc.size(); ++flat) {
        for (std::size_t i = 0; i < dim; ++i) work[i] = field[i];
        for (std::size_t slot = 0; slot < n; ++slot) {
            const int mu = static_cast<int>((flat >> (2 * (n - 1 - slot))) & 3u);
            const std::size_t stride = std::size_t{1} << (2 * (n - 1 - slot));
            std::fill(next.begin(), next.end(), complex{});
            for (std::size_t i = 0; i < dim; ++i) {
                const int li = static_cast<int>((i / stride) % 4);
                const std::size_t base = i - static_cast<std::size_t>(li) * stride;
                for (int lj = 0; lj < 4; ++lj)
                    next[i] += ops[mu][li][lj] * work[base + static_cast<std::size_t>(lj) * stride];
            }
            std::swap(work, next);
        }
        complex s{};
        for (std::size_t i = 0; i < dim; ++i) s += std::conj(field[i]) * work[i];
        acc[flat] = s;
    }
    return {detail::real_part_checked(acc, n, "dirac_current"), {X.begin(), X.end()}};
}

/// Analytic d_{mu_a} j'^{..mu_a..} for the Dirac current; zero when every
/// spin amplitude solves the free Dirac equation for its momentum.
inline MinkowskiTensor dirac_conservation_residual(const WaveFunction& psi, std::size_t a,
                                                   std::span<const FourVector> X) {
    for (const auto& p : psi.particles())
        if (p.spin_dim != 4) throw UnsupportedSpinError("dirac_conservation_residual: Dirac particles only");
    detail::require_points(psi, X, "dirac_conservation_residual");
    detail::require_particle(psi, a, "dirac_conservation_residual");
    const std::size_t n = psi.particle_count();
    const SpinMatrix g0 = gamma_upper(0);
    auto bilinear = [&](const std::vector<complex>& left, const SpinMatrix& m, const std::vector<complex>& right) {
        // left^dagger gamma^0 m right
        complex s{};
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                complex gm{};
                for (int k = 0; k < 4; ++k) gm += g0[i][k] * m[k][j];
                s += std::conj(left[static_cast<std::size_t>(i)]) * gm * right[static_cast<std::size_t>(j)];
            }
        return s;
    };
    std::vector<complex> acc(std::size_t{1} << (2 * (n - 1)));
    for (const auto& l : psi.modes()) {
        for (const auto& r : psi.modes()) {
            complex amp = std::conj(l.coefficient) * r.coefficient * detail::pair_phase(l, r, X);
            // slot a: ubar_l gamma^mu u_r * i (k_l - k_r)_mu
            const FourVector dq = l.momentum[a] - r.momentum[a];
            complex slot{};
            for (int mu = 0; mu < 4; ++mu)
                slot += bilinear(l.spins[a], gamma_upper(mu), r.spins[a]) * lower(dq)[mu];
            amp *= complex{0.0, 1.0} * slot;
            // remaining slots carry free indices
            std::vector<std::array<complex, 4>> comps;
            for (std::size_t b = 0; b < n; ++b) {
                if (b == a) continue;
                std::array<complex, 4> c{};
                for (int mu = 0; mu < 4; ++mu) c[mu] = bilinear(l.spins[b], gamma_lower(mu), r.spins[b]);
                comps.push_back(c);
            }
            std::vector<int> idx(comps.size(), 0);
            for (std::size_t flat = 0; flat < acc.size(); ++flat) {
                complex v = amp;
                for (std::size_t s = 0; s < comps.size(); ++s) v *= comps[s][idx[s]];
                acc[flat] += v;
                for (std::size_t s = comps.size(); s-- > 0;) {
                    if (++idx[s] < 4) break;
                    idx[s] = 0;
                }
            }
        }
    }
    return detail::real_part_checked(acc, n - 1, "dirac_conservation_residual");
}

} // namespace properfol
