#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "currents.hpp"
#include "spacetime.hpp"

namespace properfol {

/// One nonzero 4-frequency of a spectral field: field(x) includes
/// coefficient * e^{-i q.x}.
struct SpectralMode {
    FourVector q;                  ///< contravariant frequency
    ComplexFourVector coefficient; ///< covariant components
};

/// Exact discrete spectrum of a real 4-vector field on the box:
/// field_mu(x) = zero_mode_mu + sum_q coefficient_mu(q) e^{-i q.x}.
struct SpectralVectorField {
    ComplexFourVector zero_mode;
    std::vector<SpectralMode> modes;

    /// Real field value (covariant).
    FourVector operator()(const FourVector& x) const {
        ComplexFourVector acc = zero_mode;
        for (const auto& m : modes) acc += m.coefficient * std::polar(1.0, -minkowski_dot(m.q, x));
        return acc.real();
    }

    bool empty() const { return modes.empty() && zero_mode.abs_sum() == 0.0; }

    /// Sum of component magnitudes; bounds |field_mu(x)| for every mu and x.
    double magnitude_bound() const {
        double s = zero_mode.abs_sum();
        for (const auto& m : modes) s += m.coefficient.abs_sum();
        return s;
    }

    /// Largest violation of the reality condition c(-q) = conj(c(q)).
    double reality_defect() const {
        double worst = 0.0;
        for (int mu = 0; mu < 4; ++mu) worst = std::max(worst, std::abs(zero_mode[mu].imag()));
        for (const auto& m : modes) {
            const SpectralMode* partner = find(-m.q);
            if (!partner) return std::numeric_limits<double>::infinity();
            for (int mu = 0; mu < 4; ++mu)
                worst = std::max(worst, std::abs(partner->coefficient[mu] - std::conj(m.coefficient[mu])));
        }
        return worst;
    }

    const SpectralMode* find(const FourVector& q, double tol = 1e-10) const {
        for (const auto& m : modes)
            if (euclidean_norm(m.q - q) <= tol * std::max(1.0, euclidean_norm(q))) return &m;
        return nullptr;
    }
};

/// Reads the exact spectrum off the finite mode sum of a marginal current.
/// Pairs with equal frequencies merge; q = 0 goes to the zero mode.
inline SpectralVectorField spectrum_of_marginal(const MarginalCurrent& jc, double merge_tol = 1e-10) {
    SpectralVectorField out;
    for (const auto& t : jc.terms()) {
        const ComplexFourVector c = ComplexFourVector::from_real(t.vector) * t.coefficient;
        if (euclidean_norm(t.q) <= merge_tol) {
            out.zero_mode += c;
            continue;
        }
        bool merged = false;
        for (auto& m : out.modes)
            if (euclidean_norm(m.q - t.q) <= merge_tol * std::max(1.0, euclidean_norm(t.q))) {
                m.coefficient += c;
                merged = true;
                break;
            }
        if (!merged) out.modes.push_back({t.q, c});
    }
    // the constant part of a real field is real; drop the round-off residue
    for (int mu = 0; mu < 4; ++mu) out.zero_mode[mu] = out.zero_mode[mu].real();
    return out;
}

/// Gradient (curl-free) part: f(q) = q_mu (j(q).q) / (q.q) on every nonzero
/// mode; the zero mode passes through unchanged.
/// Throws SingularModeError when |q.q| < eps_null.
inline SpectralVectorField extract_gradient_part(const SpectralVectorField& j, double eps_null) {
    SpectralVectorField out;
    out.zero_mode = j.zero_mode;
    out.modes.reserve(j.modes.size());
    for (const auto& m : j.modes) {
        const double qq = minkowski_dot(m.q, m.q);
        if (std::abs(qq) < eps_null)
            throw SingularModeError("extract_gradient_part: near-null spectral mode", m.q[0], m.q[1], m.q[2], m.q[3]);
        complex jq{};
        for (int mu = 0; mu < 4; ++mu) jq += m.coefficient[mu] * m.q[mu];
        const FourVector ql = lower(m.q);
        ComplexFourVector f;
        for (int mu = 0; mu < 4; ++mu) f[mu] = ql[mu] * (jq / qq);
        out.modes.push_back({m.q, f});
    }
    return out;
}

/// Largest |q_nu f_mu(q) - q_mu f_nu(q)| over the stored modes.
inline double spectral_curl_defect(const SpectralVectorField& f) {
    double worst = 0.0;
    for (const auto& m : f.modes) {
        const FourVector ql = lower(m.q);
        for (int mu = 0; mu < 4; ++mu)
            for (int nu = 0; nu < 4; ++nu)
                worst = std::max(worst, std::abs(ql[nu] * m.coefficient[mu] - ql[mu] * m.coefficient[nu]));
    }
    return worst;
}

/// Thresholds for foliation extraction, relative to natural scales.
struct FoliationOptions {
    double eps_null_rel = 1e-9;  ///< |q.q| threshold in units of (2 pi / L)^2
    double eps_norm_rel = 1e-9;  ///< |f.f| threshold in units of magnitude_bound(f)^2
    std::optional<FourVector> reference_point; ///< default: box centre at t = 0
};

/// Proper-foliation data for one particle: the extracted gradient field f,
/// its orientation, and the gauge of the potential phi.
class FoliationField {
public:
    FoliationField(std::size_t particle, SpectralVectorField f, FourVector reference_point, double eps_norm_rel)
        : particle_(particle), f_(std::move(f)), reference_(reference_point) {
        for (const auto& m : f_.modes) {
            const double qq = minkowski_dot(m.q, m.q);
            complex fq{};
            for (int mu = 0; mu < 4; ++mu) fq += m.coefficient[mu] * m.q[mu];
            potential_.push_back(fq / qq);
        }
        const FourVector f_ref = f_(reference_);
        sign_ = f_ref[0] < 0.0 ? -1.0 : 1.0;
        phi_offset_ = 0.0;
        phi_offset_ = potential_phi_raw(reference_);
        const double scale = f_.magnitude_bound();
        eps_norm_ = eps_norm_rel * scale * scale;
    }

    std::size_t particle() const { return particle_; }
    const SpectralVectorField& spectrum() const { return f_; }
    double orientation() const { return sign_; }
    const FourVector& reference_point() const { return reference_; }
    double eps_norm() const { return eps_norm_; }
    bool degenerate() const { return f_.magnitude_bound() == 0.0; }

    /// Covariant f_mu(x) with the orientation sign applied.
    FourVector f(const FourVector& x) const { return sign_ * f_(x); }

    /// d_nu f_mu at x, returned as grad[nu][mu].
    std::array<FourVector, 4> gradient(const FourVector& x) const {
        std::array<ComplexFourVector, 4> acc{};
        for (const auto& m : f_.modes) {
            const complex e = std::polar(1.0, -minkowski_dot(m.q, x));
            const FourVector ql = lower(m.q);
            for (int nu = 0; nu < 4; ++nu) acc[nu] += m.coefficient * (complex{0.0, -1.0} * ql[nu] * e);
        }
        std::array<FourVector, 4> out;
        for (int nu = 0; nu < 4; ++nu) out[nu] = sign_ * acc[nu].real();
        return out;
    }

    double phi(const FourVector& x) const { return sign_ * (potential_phi_raw(x) - phi_offset_); }

    /// Bound on |phi(x) - orientation * (zero_mode . x) + const| over all x.
    double oscillation_bound() const {
        double s = 0.0;
        for (const auto& g : potential_) s += std::abs(g);
        return s;
    }

private:
    double potential_phi_raw(const FourVector& x) const {
        double lin = 0.0;
        for (int mu = 0; mu < 4; ++mu) lin += f_.zero_mode[mu].real() * x[mu];
        complex osc{};
        for (std::size_t i = 0; i < f_.modes.size(); ++i)
            osc += complex{0.0, 1.0} * potential_[i] * std::polar(1.0, -minkowski_dot(f_.modes[i].q, x));
        return lin + osc.real();
    }

    std::size_t particle_;
    SpectralVectorField f_;
    std::vector<complex> potential_; ///< g(q) with f(q) = q_mu g(q)
    FourVector reference_;
    double sign_ = 1.0;
    double phi_offset_ = 0.0;
    double eps_norm_ = 0.0;
};

inline FourVector default_reference_point(const WaveFunction& psi) {
    const double h = 0.5 * psi.box_length();
    return {0.0, h, h, h};
}

/// marginal current -> exact spectrum -> gradient part -> oriented field.
inline FoliationField build_foliation(const WaveFunction& psi, std::size_t a, const FoliationOptions& opt = {}) {
    const MarginalCurrent jc = marginal_current(psi, a);
    const double dk = psi.lattice_spacing();
    SpectralVectorField f = extract_gradient_part(spectrum_of_marginal(jc), opt.eps_null_rel * dk * dk);
    return FoliationField(a, std::move(f), opt.reference_point.value_or(default_reference_point(psi)),
                          opt.eps_norm_rel);
}

inline FourVector evaluate_f(const FoliationField& F, const FourVector& x) { return F.f(x); }

inline double potential_phi(const FoliationField& F, const FourVector& x) { return F.phi(x); }

/// Contravariant unit normal N^mu = f^mu / sqrt|f.f|.
/// Throws NearNullNormalError when |f.f| < eps_norm; the direction f itself
/// stays usable there.
inline FourVector unit_normal(const FoliationField& F, const FourVector& x) {
    const FourVector fl = F.f(x);
    const double ff = minkowski_dot(fl, fl);
    if (F.degenerate() || !(std::abs(ff) >= F.eps_norm()) || ff == 0.0)
        throw NearNullNormalError("unit_normal: f is (nearly) null", ff);
    return raise(fl) / std::sqrt(std::abs(ff));
}

/// Largest |d_nu f_mu - d_mu f_nu| at x.
inline double curl_residual(const FoliationField& F, const FourVector& x) {
    const auto g = F.gradient(x);
    double worst = 0.0;
    for (int mu = 0; mu < 4; ++mu)
        for (int nu = 0; nu < 4; ++nu) worst = std::max(worst, std::abs(g[nu][mu] - g[mu][nu]));
    return worst;
}

/// Per-point diagnostics used by the CLI sampler.
enum FoliationFlag : unsigned {
    kFlagNearNull = 1u << 0,  ///< |f.f| below eps_norm; N undefined
    kFlagSpacelike = 1u << 1, ///< f.f < 0; the leaf is timelike here
};

inline unsigned foliation_flags(const FoliationField& F, const FourVector& x) {
    const FourVector fl = F.f(x);
    const double ff = minkowski_dot(fl, fl);
    unsigned flags = 0;
    if (F.degenerate() || std::abs(ff) < F.eps_norm() || ff == 0.0) flags |= kFlagNearNull;
    if (ff < 0.0) flags |= kFlagSpacelike;
    return flags;
}

} // namespace properfol
