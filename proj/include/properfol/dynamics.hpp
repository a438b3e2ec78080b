#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "currents.hpp"
#include "foliation.hpp"
#include "ode.hpp"
#include "random.hpp"

namespace properfol {

enum class CurrentKind { klein_gordon, dirac };

struct DynamicsOptions {
    FoliationOptions foliation;
    CurrentKind current = CurrentKind::klein_gordon;
    std::optional<double> eps_rho;       ///< absolute; default eps_rho_rel * typical |rho|
    double eps_rho_rel = 1e-8;
    std::size_t rho_scale_samples = 256;
    std::uint64_t rho_scale_seed = 0x7a3c1d;
};

namespace detail {

/// Contracts every slot b != free of a covariant tensor with the
/// contravariant vectors N[b]; `free` beyond the rank gives the full
/// contraction in component 0.
inline FourVector contract_slots(const MinkowskiTensor& T, std::span<const FourVector> N, std::size_t free) {
    FourVector out;
    const std::size_t r = T.rank();
    for (std::size_t flat = 0; flat < T.size(); ++flat) {
        double w = T[flat];
        if (w == 0.0) continue;
        for (std::size_t b = 0; b < r; ++b)
            if (b != free) w *= N[b][T.index_of(flat, b)];
        out[free < r ? T.index_of(flat, free) : 0] += w;
    }
    return out;
}

} // namespace detail

/// Guidance data at one configuration.
struct Guidance {
    std::vector<FourVector> normals; ///< contravariant N^{mu_a}(X_a)
    std::vector<FourVector> V;       ///< covariant V_{mu_a}
    double rho = 0.0;
};

/// Immutable velocity-field bundle built from one normalized state.
class VelocitySystem {
public:
    explicit VelocitySystem(WaveFunction psi, const DynamicsOptions& opt = {}) : psi_(std::move(psi)), opt_(opt) {
        if (!is_normalized(psi_)) throw ContractViolation("VelocitySystem: state must be normalized");
        if (opt_.current == CurrentKind::dirac)
            for (const auto& p : psi_.particles())
                if (p.spin_dim != 4) throw UnsupportedSpinError("VelocitySystem: Dirac current needs spin_dim 4");
        for (std::size_t a = 0; a < psi_.particle_count(); ++a) {
            marginals_.push_back(marginal_current(psi_, a));
            foliations_.push_back(build_foliation(psi_, a, opt_.foliation));
        }
        if (opt_.eps_rho) {
            eps_rho_ = *opt_.eps_rho;
        } else {
            rho_scale_ = estimate_rho_scale();
            eps_rho_ = opt_.eps_rho_rel * rho_scale_;
        }
    }

    const WaveFunction& psi() const { return psi_; }
    std::size_t particle_count() const { return psi_.particle_count(); }
    const FoliationField& foliation(std::size_t a) const { return foliations_.at(a); }
    const std::vector<FoliationField>& foliations() const { return foliations_; }
    const MarginalCurrent& marginal(std::size_t a) const { return marginals_.at(a); }
    double eps_rho() const { return eps_rho_; }
    double rho_scale() const { return rho_scale_; }
    const DynamicsOptions& options() const { return opt_; }

    MinkowskiTensor current(std::span<const FourVector> X) const {
        return opt_.current == CurrentKind::dirac ? dirac_current(psi_, X).value : n_current(psi_, X).value;
    }

    /// Normals, all V_a and rho. Throws NearNullNormalError.
    Guidance guidance(std::span<const FourVector> X) const {
        detail::require_points(psi_, X, "guidance");
        const std::size_t n = particle_count();
        Guidance g;
        for (std::size_t a = 0; a < n; ++a) g.normals.push_back(unit_normal(foliations_[a], X[a]));
        const MinkowskiTensor j = current(X);
        for (std::size_t a = 0; a < n; ++a) g.V.push_back(detail::contract_slots(j, g.normals, a));
        g.rho = detail::contract_slots(j, g.normals, n)[0];
        return g;
    }

    /// Like guidance, but for n = 1 tolerates a near-null normal: V = j stays
    /// defined and rho is NaN.
    Guidance guidance_partial(std::span<const FourVector> X) const {
        detail::require_points(psi_, X, "guidance");
        const std::size_t n = particle_count();
        Guidance g;
        bool missing = false;
        for (std::size_t a = 0; a < n; ++a) {
            try {
                g.normals.push_back(unit_normal(foliations_[a], X[a]));
            } catch (const NearNullNormalError&) {
                if (n > 1) throw;
                missing = true;
                g.normals.push_back(FourVector{});
            }
        }
        const MinkowskiTensor j = current(X);
        for (std::size_t a = 0; a < n; ++a) g.V.push_back(detail::contract_slots(j, g.normals, a));
        g.rho = !missing ? detail::contract_slots(j, g.normals, n)[0] : std::nan("");
        return g;
    }

private:
    double estimate_rho_scale() const {
        const std::size_t n = particle_count();
        const double L = psi_.box_length();
        Rng rng(opt_.rho_scale_seed, 0);
        double sum = 0.0;
        std::size_t used = 0;
        std::vector<FourVector> X(n);
        for (std::size_t i = 0; i < opt_.rho_scale_samples; ++i) {
            for (auto& x : X)
                for (int mu = 0; mu < 4; ++mu) x[mu] = rng.uniform(0.0, L);
            try {
                sum += std::abs(guidance(X).rho);
                ++used;
            } catch (const NearNullNormalError&) {
            }
        }
        return used ? sum / static_cast<double>(used) : 0.0;
    }

    WaveFunction psi_;
    DynamicsOptions opt_;
    std::vector<MarginalCurrent> marginals_;
    std::vector<FoliationField> foliations_;
    double eps_rho_ = 0.0;
    double rho_scale_ = 0.0;
};

/// Covariant V_{mu_a}(X).
inline FourVector velocity_V(const VelocitySystem& sys, std::size_t a, std::span<const FourVector> X) {
    detail::require_particle(sys.psi(), a, "velocity_V");
    detail::require_points(sys.psi(), X, "velocity_V");
    std::vector<FourVector> N(X.size());
    for (std::size_t b = 0; b < X.size(); ++b)
        if (b != a) N[b] = unit_normal(sys.foliation(b), X[b]);
    return detail::contract_slots(sys.current(X), N, a);
}

inline double rho(const VelocitySystem& sys, std::span<const FourVector> X) { return sys.guidance(X).rho; }

/// Contravariant v^{mu_a} = V^{mu_a} / |rho|. Throws NodeError below eps_rho.
inline FourVector velocity_v(const VelocitySystem& sys, std::size_t a, std::span<const FourVector> X) {
    detail::require_particle(sys.psi(), a, "velocity_v");
    const Guidance g = sys.guidance(X);
    if (!(std::abs(g.rho) >= sys.eps_rho())) throw NodeError("velocity_v: |rho| below eps_rho", g.rho);
    return raise(g.V[a]) / std::abs(g.rho);
}

/// Bits shared with foliation_flags.
enum TrajectoryFlag : unsigned {
    kFlagNode = 1u << 2,        ///< halted: |rho| < eps_rho
    kFlagStiff = 1u << 3,       ///< halted: step size underflow
    kFlagNegativeRho = 1u << 4, ///< rho < 0 at this sample
    kFlagMaxSteps = 1u << 5,    ///< halted: step budget exhausted
};

struct TrajectoryState {
    double s = 0.0;
    std::vector<FourVector> X;
    std::vector<double> phi; ///< accumulated from 0 at s = 0
};

struct Trajectory {
    std::vector<TrajectoryState> states;
    std::vector<double> step_sizes; ///< step that produced each state (0 for the first)
    std::vector<double> rho;
    std::vector<unsigned> flags;
    std::vector<std::vector<FourVector>> velocity; ///< dX_a/ds at each state
    unsigned termination = 0;                      ///< kFlagNode, kFlagStiff, kFlagNearNull or kFlagMaxSteps
    std::string diagnostic;

    bool halted() const { return termination != 0; }
    const TrajectoryState& back() const { return states.back(); }
};

enum class Parametrization {
    unit_rho,    ///< dX/ds = V / |rho|
    raw_current, ///< dX/ds = V; continues through rho = 0
};

struct IntegrateOptions {
    double tol_ode = 1e-9;
    bool adaptive = true; ///< false: fixed steps of h0
    Parametrization parametrization = Parametrization::unit_rho;
    bool reverse = false; ///< follow -v instead of v
    std::size_t max_steps = 2'000'000;
};

/// Integrates the 4n guidance equations together with the n leaf
/// parameters dphi_a/ds = v^{mu_a} f_{mu_a}(X_a).
inline Trajectory integrate(const VelocitySystem& sys, std::span<const FourVector> X0, double s_max, double h0,
                            const IntegrateOptions& opt = {}) {
    const std::size_t n = sys.particle_count();
    detail::require_points(sys.psi(), X0, "integrate");
    if (!(h0 > 0.0) || !(s_max >= 0.0)) throw ContractViolation("integrate: need h0 > 0 and s_max >= 0");
    const bool unit = opt.parametrization == Parametrization::unit_rho;
    bool negative = false;
    if (unit) {
        const Guidance g = sys.guidance(X0);
        if (!(std::abs(g.rho) >= sys.eps_rho())) throw NodeError("integrate: initial configuration at a node", g.rho);
        negative = g.rho < 0.0;
    }

    ode::State y(5 * n, 0.0);
    for (std::size_t a = 0; a < n; ++a)
        for (int mu = 0; mu < 4; ++mu) y[4 * a + mu] = X0[a][mu];

    std::vector<FourVector> X(n);
    double last_rho = 0.0;
    unsigned last_flags = 0;
    auto rhs = [&](double, const ode::State& yy, ode::State& dy) {
        for (std::size_t a = 0; a < n; ++a)
            for (int mu = 0; mu < 4; ++mu) X[a][mu] = yy[4 * a + mu];
        const Guidance g = unit ? sys.guidance(X) : sys.guidance_partial(X);
        if (unit && !(std::abs(g.rho) >= sys.eps_rho())) throw NodeError("integrate: |rho| below eps_rho", g.rho);
        // a stage beyond a node: rho is continuous, so it passed through zero
        if (unit && (g.rho < 0.0) != negative) throw NodeError("integrate: rho changed sign inside a step", g.rho);
        const double scale = (unit ? 1.0 / std::abs(g.rho) : 1.0) * (opt.reverse ? -1.0 : 1.0);
        unsigned flags = g.rho < 0.0 ? kFlagNegativeRho : 0u;
        for (std::size_t a = 0; a < n; ++a) {
            const FourVector v = raise(g.V[a]) * scale;
            for (int mu = 0; mu < 4; ++mu) dy[4 * a + mu] = v[mu];
            const FourVector f = sys.foliation(a).f(X[a]);
            dy[4 * n + a] = contract(f, v);
            flags |= foliation_flags(sys.foliation(a), X[a]);
        }
        last_rho = g.rho;
        last_flags = flags;
    };

    Trajectory traj;
    auto observe = [&](double s, const ode::State& yy, const ode::State& dy, double h) {
        TrajectoryState st;
        st.s = s;
        st.X.resize(n);
        st.phi.resize(n);
        std::vector<FourVector> vel(n);
        for (std::size_t a = 0; a < n; ++a) {
            for (int mu = 0; mu < 4; ++mu) {
                st.X[a][mu] = yy[4 * a + mu];
                vel[a][mu] = dy[4 * a + mu];
            }
            st.phi[a] = yy[4 * n + a];
        }
        traj.states.push_back(std::move(st));
        traj.velocity.push_back(std::move(vel));
        traj.step_sizes.push_back(h);
        traj.rho.push_back(last_rho);
        traj.flags.push_back(last_flags);
    };

    ode::Options o;
    o.rtol = opt.tol_ode;
    o.atol = opt.tol_ode;
    o.h0 = h0;
    o.adaptive = opt.adaptive;
    o.max_steps = opt.max_steps;
    try {
        const ode::Status st = ode::dormand_prince(rhs, y, 0.0, s_max, o, observe);
        if (st == ode::Status::step_underflow) {
            traj.termination = kFlagStiff;
            traj.diagnostic = "step size underflow";
        } else if (st == ode::Status::max_steps) {
            traj.termination = kFlagMaxSteps;
            traj.diagnostic = "step budget exhausted";
        }
    } catch (const NodeError& e) {
        traj.termination = kFlagNode;
        traj.diagnostic = e.what();
    } catch (const NearNullNormalError& e) {
        traj.termination = kFlagNearNull;
        traj.diagnostic = e.what();
    }
    if (traj.termination && !traj.flags.empty()) traj.flags.back() |= traj.termination;
    return traj;
}

/// Level-set residual x -> phi(x) - value of one proper foliation.
class LevelSet {
public:
    LevelSet(FoliationField F, double value) : F_(std::move(F)), value_(value) {}
    double operator()(const FourVector& x) const { return F_.phi(x) - value_; }
    FourVector gradient(const FourVector& x) const { return F_.f(x); }
    double value() const { return value_; }
    const FoliationField& foliation() const { return F_; }

private:
    FoliationField F_;
    double value_;
};

inline LevelSet hypersurface_of(const FoliationField& F, double phi_value) { return LevelSet(F, phi_value); }

} // namespace properfol
