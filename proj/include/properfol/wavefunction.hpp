#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dirac.hpp"
#include "errors.hpp"
#include "spacetime.hpp"
#include "tensor.hpp"

namespace properfol {

struct ParticleSpec {
    double mass = 1.0;
    int spin_dim = 1; ///< 1 = scalar, 4 = Dirac-type multi-component
};

/// Integer triple n; the physical momentum is (2 pi / L) n.
using LatticeIndex = std::array<int, 3>;

/// Construction input for one product mode.
struct ModeSpec {
    std::vector<LatticeIndex> lattice;       ///< one per particle
    std::vector<std::vector<complex>> spins; ///< one per particle; empty means {1} for scalars
    complex coefficient{1.0, 0.0};
};

/// Validated product mode c * prod_a chi_a e^{-i k_a.x_a}.
struct ProductMode {
    std::vector<LatticeIndex> lattice;
    std::vector<std::vector<complex>> spins; ///< unit Hermitian norm each
    std::vector<FourVector> momentum;        ///< contravariant k_a
    complex coefficient;
};

namespace testing {
struct Hooks;
}

/// Finite superposition of positive-frequency plane-wave product modes in a
/// periodic box of side L. Immutable after construction.
class WaveFunction {
public:
    WaveFunction(std::vector<ParticleSpec> particles, const std::vector<ModeSpec>& modes, double box_length)
        : particles_(std::move(particles)), box_length_(box_length) {
        if (particles_.empty()) throw ContractViolation("WaveFunction: at least one particle required");
        if (!(box_length_ > 0.0) || !std::isfinite(box_length_))
            throw DomainError("WaveFunction: box length must be positive");
        for (std::size_t a = 0; a < particles_.size(); ++a) {
            const auto& p = particles_[a];
            if (!(p.mass > 0.0) || !std::isfinite(p.mass))
                throw DomainError("WaveFunction: particle " + std::to_string(a) + " mass must be positive");
            if (p.spin_dim != 1 && p.spin_dim != 4)
                throw DomainError("WaveFunction: particle " + std::to_string(a) + " spin_dim must be 1 or 4");
        }
        if (modes.empty()) throw DegenerateStateError("WaveFunction: no modes");
        bool any_nonzero = false;
        for (std::size_t i = 0; i < modes.size(); ++i) {
            modes_.push_back(build_mode(modes[i], i));
            if (std::abs(modes_.back().coefficient) > 0.0) any_nonzero = true;
        }
        if (!any_nonzero) throw DegenerateStateError("WaveFunction: all coefficients vanish");
        check_distinct();
        check_spacelike_differences();
    }

    std::size_t particle_count() const { return particles_.size(); }
    const std::vector<ParticleSpec>& particles() const { return particles_; }
    const std::vector<ProductMode>& modes() const { return modes_; }
    double box_length() const { return box_length_; }
    double lattice_spacing() const { return 2.0 * std::numbers::pi / box_length_; }
    /// Rest-frame 4-velocity of the box; (1,0,0,0) unless boosted by a test hook.
    const FourVector& box_frame() const { return frame_; }
    bool all_scalar() const {
        for (const auto& p : particles_)
            if (p.spin_dim != 1) return false;
        return true;
    }
    std::vector<int> spin_dims() const {
        std::vector<int> d;
        for (const auto& p : particles_) d.push_back(p.spin_dim);
        return d;
    }

    /// True when every particle's modes share a single energy, i.e. all
    /// currents are time independent in the box frame.
    bool is_static(double tol = 1e-12) const {
        for (std::size_t a = 0; a < particles_.size(); ++a) {
            const double e0 = modes_.front().momentum[a][0];
            for (const auto& m : modes_)
                if (std::abs(m.momentum[a][0] - e0) > tol * std::max(1.0, e0)) return false;
        }
        return true;
    }

    /// Same modes with every coefficient multiplied by `factor`.
    WaveFunction scaled(complex factor) const {
        WaveFunction out = *this;
        for (auto& m : out.modes_) m.coefficient *= factor;
        return out;
    }

    /// Sum of two states on the same particles and box; identical modes merge.
    friend WaveFunction superpose(const WaveFunction& a, const WaveFunction& b) {
        a.require_compatible(b, "superpose");
        WaveFunction out = a;
        for (const auto& mb : b.modes_) {
            bool merged = false;
            for (auto& ma : out.modes_)
                if (same_slots(ma, mb)) {
                    ma.coefficient += mb.coefficient;
                    merged = true;
                    break;
                }
            if (!merged) out.modes_.push_back(mb);
        }
        return out;
    }

    void require_compatible(const WaveFunction& o, const char* who) const {
        if (o.particles_.size() != particles_.size() || o.box_length_ != box_length_)
            throw ContractViolation(std::string(who) + ": incompatible states");
        for (std::size_t a = 0; a < particles_.size(); ++a)
            if (o.particles_[a].mass != particles_[a].mass || o.particles_[a].spin_dim != particles_[a].spin_dim)
                throw ContractViolation(std::string(who) + ": incompatible particles");
        if (o.frame_ != frame_) throw ContractViolation(std::string(who) + ": different box frames");
    }

    static bool same_slots(const ProductMode& x, const ProductMode& y) {
        if (x.lattice != y.lattice) return false;
        for (std::size_t a = 0; a < x.spins.size(); ++a)
            for (std::size_t l = 0; l < x.spins[a].size(); ++l)
                if (std::abs(x.spins[a][l] - y.spins[a][l]) > 1e-12) return false;
        return true;
    }

private:
    friend struct testing::Hooks;

    ProductMode build_mode(const ModeSpec& spec, std::size_t index) const {
        const auto where = "mode " + std::to_string(index);
        if (spec.lattice.size() != particles_.size())
            throw ContractViolation(where + ": expected " + std::to_string(particles_.size()) + " lattice triples");
        if (!spec.spins.empty() && spec.spins.size() != particles_.size())
            throw ContractViolation(where + ": expected one spin amplitude per particle");
        if (!std::isfinite(spec.coefficient.real()) || !std::isfinite(spec.coefficient.imag()))
            throw DomainError(where + ": coefficient must be finite");
        ProductMode m;
        m.lattice = spec.lattice;
        m.coefficient = spec.coefficient;
        const double dk = lattice_spacing();
        for (std::size_t a = 0; a < particles_.size(); ++a) {
            const auto& n = spec.lattice[a];
            const Vec3 p{dk * n[0], dk * n[1], dk * n[2]};
            m.momentum.push_back(on_shell_momentum(particles_[a].mass, p));
            std::vector<complex> chi =
                spec.spins.empty() ? std::vector<complex>{} : spec.spins[a];
            if (chi.empty()) {
                if (particles_[a].spin_dim != 1)
                    throw ContractViolation(where + ": particle " + std::to_string(a) + " needs a spin amplitude");
                chi = {complex{1.0, 0.0}};
            }
            if (static_cast<int>(chi.size()) != particles_[a].spin_dim)
                throw ContractViolation(where + ": spin amplitude of particle " + std::to_string(a) +
                                        " must have length " + std::to_string(particles_[a].spin_dim));
            double nrm = 0.0;
            for (const auto& v : chi) {
                if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
                    throw DomainError(where + ": spin amplitude must be finite");
                nrm += std::norm(v);
            }
            nrm = std::sqrt(nrm);
            if (!(nrm > 0.0)) throw DegenerateStateError(where + ": zero spin amplitude");
            for (auto& v : chi) v /= nrm;
            m.coefficient *= nrm;
            m.spins.push_back(std::move(chi));
        }
        return m;
    }

    void check_distinct() const {
        for (std::size_t i = 0; i < modes_.size(); ++i)
            for (std::size_t j = i + 1; j < modes_.size(); ++j)
                if (same_slots(modes_[i], modes_[j]))
                    throw ContractViolation("WaveFunction: modes " + std::to_string(i) + " and " +
                                            std::to_string(j) + " occupy the same slots");
    }

    // Equal-mass on-shell momenta that differ are separated by a spacelike
    // vector; the gradient projector relies on it.
    void check_spacelike_differences() const {
        for (std::size_t a = 0; a < particles_.size(); ++a)
            for (std::size_t i = 0; i < modes_.size(); ++i)
                for (std::size_t j = i + 1; j < modes_.size(); ++j) {
                    if (modes_[i].lattice[a] == modes_[j].lattice[a]) continue;
                    const FourVector q = modes_[i].momentum[a] - modes_[j].momentum[a];
                    if (!(minkowski_dot(q, q) < 0.0))
                        throw DomainError("WaveFunction: non-spacelike momentum difference");
                }
    }

    std::vector<ParticleSpec> particles_;
    std::vector<ProductMode> modes_;
    double box_length_;
    FourVector frame_{1.0, 0.0, 0.0, 0.0};
};

namespace detail {

inline void require_points(const WaveFunction& psi, std::span<const FourVector> X, const char* who) {
    if (X.size() != psi.particle_count())
        throw ContractViolation(std::string(who) + ": expected " + std::to_string(psi.particle_count()) +
                                " spacetime points, got " + std::to_string(X.size()));
    for (const auto& x : X)
        if (!x.is_finite()) throw DomainError(std::string(who) + ": non-finite point");
}

inline void require_particle(const WaveFunction& psi, std::size_t a, const char* who) {
    if (a >= psi.particle_count()) throw ContractViolation(std::string(who) + ": particle index out of range");
}

/// prod_a e^{-i k_a.x_a}
inline complex mode_phase(const ProductMode& m, std::span<const FourVector> X) {
    double phase = 0.0;
    for (std::size_t a = 0; a < X.size(); ++a) phase += minkowski_dot(m.momentum[a], X[a]);
    return std::polar(1.0, -phase);
}

/// Adds `scale` times chi_1 (x) ... (x) chi_n into `out`.
inline void add_spin_product(SpinTensor& out, const ProductMode& m, complex scale) {
    const auto& dims = out.dims();
    const std::size_t n = dims.size();
    std::vector<int> idx(n, 0);
    for (std::size_t flat = 0; flat < out.size(); ++flat) {
        complex v = scale;
        for (std::size_t a = 0; a < n; ++a) v *= m.spins[a][idx[a]];
        out[flat] += v;
        for (std::size_t a = n; a-- > 0;) {
            if (++idx[a] < dims[a]) break;
            idx[a] = 0;
        }
    }
}

/// Hermitian overlap chi'^dagger chi of two spin amplitudes.
inline complex spin_overlap(const std::vector<complex>& left, const std::vector<complex>& right) {
    complex s{};
    for (std::size_t l = 0; l < left.size(); ++l) s += std::conj(left[l]) * right[l];
    return s;
}

} // namespace detail

/// psi(x_1..x_n) as a spin tensor (a single complex number for scalars).
inline SpinTensor evaluate(const WaveFunction& psi, std::span<const FourVector> X) {
    detail::require_points(psi, X, "evaluate");
    SpinTensor out(psi.spin_dims());
    for (const auto& m : psi.modes()) detail::add_spin_product(out, m, m.coefficient * detail::mode_phase(m, X));
    return out;
}

/// (box_a + m_a^2) psi, evaluated term by term: each mode contributes
/// (m_a^2 - k_a.k_a) times itself.
inline SpinTensor kg_residual(const WaveFunction& psi, std::size_t a, std::span<const FourVector> X) {
    detail::require_points(psi, X, "kg_residual");
    detail::require_particle(psi, a, "kg_residual");
    const double m2 = psi.particles()[a].mass * psi.particles()[a].mass;
    SpinTensor out(psi.spin_dims());
    for (const auto& m : psi.modes()) {
        const double factor = m2 - minkowski_dot(m.momentum[a], m.momentum[a]);
        detail::add_spin_product(out, m, factor * m.coefficient * detail::mode_phase(m, X));
    }
    return out;
}

/// n-particle Klein-Gordon scalar product on the hyperplanes u.x_a = t_a of
/// the box frame. Spatial integrals reduce to Kronecker deltas in the lattice
/// labels; every matched particle contributes (k_a + k'_a).u / 2 * L^3 and a
/// Hermitian spin overlap.
inline complex kg_inner_product(const WaveFunction& psi, const WaveFunction& chi, std::span<const double> t) {
    psi.require_compatible(chi, "kg_inner_product");
    if (t.size() != psi.particle_count()) throw ContractViolation("kg_inner_product: one time per particle");
    const double volume = std::pow(psi.box_length(), 3);
    const FourVector& u = psi.box_frame();
    complex total{};
    for (const auto& ml : psi.modes()) {
        for (const auto& mr : chi.modes()) {
            complex term = std::conj(ml.coefficient) * mr.coefficient;
            for (std::size_t a = 0; a < psi.particle_count() && term != complex{}; ++a) {
                if (ml.lattice[a] != mr.lattice[a]) {
                    term = {};
                    break;
                }
                const FourVector& k = mr.momentum[a];
                const FourVector& kp = ml.momentum[a];
                const double weight = 0.5 * minkowski_dot(k + kp, u) * volume;
                const double dphase = minkowski_dot(kp - k, u) * t[a];
                term *= weight * detail::spin_overlap(ml.spins[a], mr.spins[a]) * std::polar(1.0, dphase);
            }
            total += term;
        }
    }
    return total;
}

inline double kg_norm(const WaveFunction& psi) {
    const std::vector<double> t(psi.particle_count(), 0.0);
    return kg_inner_product(psi, psi, t).real();
}

/// Rescales all coefficients so that (psi, psi) = 1.
inline WaveFunction normalize(const WaveFunction& psi) {
    const double n = kg_norm(psi);
    if (!(n > 0.0) || !std::isfinite(n)) throw DegenerateStateError("normalize: Klein-Gordon norm is not positive");
    return psi.scaled(1.0 / std::sqrt(n));
}

inline bool is_normalized(const WaveFunction& psi, double tol = 1e-10) {
    return std::abs(kg_norm(psi) - 1.0) <= tol;
}

namespace testing {

/// Construction paths that break the public invariants on purpose. Only
/// tests and the `check` fixtures use them.
struct Hooks {
    /// Replaces k^0 of one particle in one mode, leaving it off shell.
    static WaveFunction with_energy(const WaveFunction& psi, std::size_t mode, std::size_t particle, double k0) {
        WaveFunction out = psi;
        out.modes_.at(mode).momentum.at(particle)[0] = k0;
        return out;
    }

    /// Boosts every momentum and the box frame. Lattice labels are kept so
    /// Kronecker matching is unchanged; momenta leave the lattice.
    static WaveFunction boosted(const WaveFunction& psi, const Boost& b) {
        WaveFunction out = psi;
        const auto L = b.matrix();
        for (auto& m : out.modes_)
            for (auto& k : m.momentum) k = transform(L, k);
        out.frame_ = transform(L, out.frame_);
        return out;
    }
};

} // namespace testing

} // namespace properfol
