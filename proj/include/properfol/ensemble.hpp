#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/math/tools/toms748_solve.hpp>

#include "dynamics.hpp"
#include "parallel.hpp"
#include "random.hpp"

namespace properfol {

/// p~ = |rho~| on a product of proper hypersurfaces phi_a = const, realized
/// in the chart t = T_a(x) over the spatial box. Keeps a pointer to the
/// system, which must outlive it.
class ProperDensity {
public:
    ProperDensity(const VelocitySystem& sys, std::vector<double> phi_values)
        : sys_(&sys), phi_(std::move(phi_values)) {
        if (phi_.size() != sys.particle_count()) throw ContractViolation("ProperDensity: one level per particle");
        for (std::size_t a = 0; a < phi_.size(); ++a) {
            const FoliationField& F = sys.foliation(a);
            if (F.degenerate()) throw DegenerateStateError("ProperDensity: zero foliation field");
            const auto& spec = F.spectrum();
            const double f0 = F.orientation() * spec.zero_mode[0].real();
            double wobble = 0.0;
            for (const auto& m : spec.modes) wobble += std::abs(m.coefficient[0]);
            // d(phi)/dt = f_0 lies in [f0 - wobble, f0 + wobble]
            if (!(f0 > wobble))
                throw DomainError("proper_density: leaves are not graphs over the box (f_0 may vanish)");
            rate_lo_.push_back(f0 - wobble);
            rate_hi_.push_back(f0 + wobble);
            double tilt = 0.0, scale = spec.magnitude_bound();
            for (int i = 1; i < 4; ++i) tilt = std::max(tilt, std::abs(spec.zero_mode[i].real()));
            closed_.push_back(tilt <= 1e-12 * scale);
        }
    }

    const VelocitySystem& system() const { return *sys_; }
    const std::vector<double>& phi_values() const { return phi_; }
    std::size_t dimension() const { return 3 * phi_.size(); }
    double box_length() const { return sys_->psi().box_length(); }

    /// Every leaf closes on the spatial torus (no zero-mode tilt).
    bool closed_leaves() const {
        return std::all_of(closed_.begin(), closed_.end(), [](bool c) { return c; });
    }

    /// Time at which the leaf of particle a passes over spatial point x.
    double leaf_time(std::size_t a, const Vec3& x) const {
        const FoliationField& F = sys_->foliation(a);
        auto g = [&](double t) { return F.phi({t, x[0], x[1], x[2]}) - phi_[a]; };
        const double d = -g(0.0);
        if (d == 0.0) return 0.0;
        double lo = d > 0 ? d / rate_hi_[a] : d / rate_lo_[a];
        double hi = d > 0 ? d / rate_lo_[a] : d / rate_hi_[a];
        const double pad = 1e-12 * std::max(1.0, std::abs(hi));
        lo -= pad;
        hi += pad;
        double glo = g(lo), ghi = g(hi);
        if (glo == 0.0) return lo;
        if (ghi == 0.0) return hi;
        std::uintmax_t iters = 200;
        const auto r = boost::math::tools::toms748_solve(g, lo, hi, glo, ghi,
                                                         boost::math::tools::eps_tolerance<double>(52), iters);
        return 0.5 * (r.first + r.second);
    }

    /// Chart point y = (x_1, ..., x_n) (3n spatial coordinates) -> events on the leaves.
    std::vector<FourVector> embed(std::span<const double> y) const {
        if (y.size() != dimension()) throw ContractViolation("ProperDensity::embed: wrong chart dimension");
        std::vector<FourVector> X(phi_.size());
        for (std::size_t a = 0; a < phi_.size(); ++a) {
            const Vec3 x{y[3 * a], y[3 * a + 1], y[3 * a + 2]};
            X[a] = {leaf_time(a, x), x[0], x[1], x[2]};
        }
        return X;
    }

    /// rho~ = j contracted with the densitized normals f^mu / f_0 at events on the leaves.
    double signed_density_at(std::span<const FourVector> X) const {
        std::vector<FourVector> Nt(X.size());
        for (std::size_t a = 0; a < X.size(); ++a) {
            const FourVector f = sys_->foliation(a).f(X[a]);
            Nt[a] = raise(f) / f[0];
        }
        return detail::contract_slots(sys_->current(X), Nt, X.size())[0];
    }

    double signed_density(std::span<const double> y) const { return signed_density_at(embed(y)); }
    double operator()(std::span<const double> y) const { return std::abs(signed_density(y)); }

private:
    const VelocitySystem* sys_;
    std::vector<double> phi_;
    std::vector<double> rate_lo_, rate_hi_;
    std::vector<bool> closed_;
};

inline ProperDensity proper_density(const VelocitySystem& sys, std::span<const double> phi_values) {
    return ProperDensity(sys, std::vector<double>(phi_values.begin(), phi_values.end()));
}

/// Leaf values through the events X.
inline std::vector<double> leaf_values(const VelocitySystem& sys, std::span<const FourVector> X) {
    std::vector<double> out;
    for (std::size_t a = 0; a < X.size(); ++a) out.push_back(sys.foliation(a).phi(X[a]));
    return out;
}

struct SamplerOptions {
    std::size_t envelope_probes = 4096;
    double envelope_margin = 1.5;
    double min_acceptance = 1e-4;
    std::size_t threads = 1;
};

/// Chart samples, each of dimension 3n.
using ChartSample = std::vector<std::vector<double>>;

namespace detail {

inline void uniform_chart_point(Rng& rng, double L, std::vector<double>& y) {
    for (auto& c : y) c = rng.uniform(0.0, L);
}

/// Envelope from a probe scan on its own substream.
inline double scan_envelope(const ProperDensity& pd, std::uint64_t seed, std::size_t probes) {
    Rng rng(seed, ~std::uint64_t{0});
    std::vector<double> y(pd.dimension());
    double worst = 0.0;
    for (std::size_t i = 0; i < probes; ++i) {
        uniform_chart_point(rng, pd.box_length(), y);
        worst = std::max(worst, pd(y));
    }
    return worst;
}

} // namespace detail

/// Rejection sampling with a uniform proposal over the chart. Sample i uses
/// its own substream (seed, i), so the result does not depend on threading.
/// A density value above the envelope restarts the draw with a doubled envelope.
inline ChartSample sample_initial(const ProperDensity& pd, std::size_t count, std::uint64_t seed,
                                  const SamplerOptions& opt = {}) {
    if (count < 1) throw ContractViolation("sample_initial: count must be >= 1");
    const double L = pd.box_length();
    const std::size_t dim = pd.dimension();
    const double scanned = detail::scan_envelope(pd, seed, opt.envelope_probes);
    if (!(scanned > 0.0)) throw EnvelopeError("sample_initial: density vanishes on every probe");
    double envelope = opt.envelope_margin * scanned;
    const std::size_t budget = static_cast<std::size_t>(std::ceil(1.0 / opt.min_acceptance)) * 20;

    for (int attempt = 0; attempt < 8; ++attempt) {
        ChartSample out(count, std::vector<double>(dim));
        std::vector<double> peak(count, 0.0);
        std::vector<char> starved(count, 0);
        parallel_for(count, opt.threads, [&](std::size_t i) {
            Rng rng(seed, i);
            for (std::size_t tries = 0; tries < budget; ++tries) {
                detail::uniform_chart_point(rng, L, out[i]);
                const double p = pd(out[i]);
                peak[i] = std::max(peak[i], p);
                if (rng.uniform() * envelope < p) return;
            }
            starved[i] = 1;
        });
        if (std::any_of(starved.begin(), starved.end(), [](char c) { return c != 0; }))
            throw EnvelopeError("sample_initial: acceptance rate below the configured minimum");
        const double worst = *std::max_element(peak.begin(), peak.end());
        if (worst <= envelope) return out;
        envelope = std::max(2.0 * envelope, opt.envelope_margin * worst);
    }
    throw EnvelopeError("sample_initial: envelope did not stabilize");
}

struct ProbabilityEstimate {
    double value = 0.0;
    double error = 0.0; ///< one standard error
};

/// Monte-Carlo integral of p~ over the product of leaves. Needs closed leaves.
inline ProbabilityEstimate total_probability(const ProperDensity& pd, std::size_t mc_count, std::uint64_t seed,
                                             std::size_t threads = 1) {
    if (!pd.closed_leaves())
        throw DomainError("total_probability: a leaf is tilted and does not close on the box");
    if (mc_count < 2) throw ContractViolation("total_probability: need at least two points");
    std::vector<double> values(mc_count);
    const std::size_t dim = pd.dimension();
    parallel_for(mc_count, threads, [&](std::size_t i) {
        Rng rng(seed, i);
        std::vector<double> y(dim);
        detail::uniform_chart_point(rng, pd.box_length(), y);
        values[i] = pd(y);
    });
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(mc_count);
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(mc_count - 1);
    const double volume = std::pow(pd.box_length(), static_cast<double>(dim));
    // the statistical error never drops below the rounding bound of the sum
    const double rounding = static_cast<double>(mc_count) * std::numeric_limits<double>::epsilon() * mean;
    return {volume * mean, volume * std::max(std::sqrt(var / static_cast<double>(mc_count)), rounding)};
}

struct CrossingCount {
    int count = 0;
    bool ambiguous = false;    ///< an endpoint sits on the level
    std::vector<double> where; ///< refined s of each crossing
};

namespace detail {

inline FourVector hermite(const FourVector& x0, const FourVector& v0, const FourVector& x1, const FourVector& v1,
                          double h, double u) {
    const double h00 = (1 + 2 * u) * (1 - u) * (1 - u), h10 = u * (1 - u) * (1 - u);
    const double h01 = u * u * (3 - 2 * u), h11 = u * u * (u - 1);
    return h00 * x0 + (h10 * h) * v0 + h01 * x1 + (h11 * h) * v1;
}

} // namespace detail

/// Sign changes of phi_a(X_a(s)) - phi_value along the trajectory, looking
/// inside each step on a cubic Hermite interpolant and refining by bisection.
/// Samples before `first` are ignored.
inline CrossingCount crossing_count(const Trajectory& traj, const FoliationField& F, double phi_value,
                                    std::size_t first = 0, int subdivisions = 8) {
    CrossingCount out;
    const std::size_t a = F.particle();
    const auto& st = traj.states;
    if (st.size() <= first) return out;
    auto residual = [&](const FourVector& x) { return F.phi(x) - phi_value; };
    const double tol = 1e-10 * std::max(1.0, std::abs(phi_value));
    if (std::abs(residual(st[first].X[a])) <= tol || std::abs(residual(st.back().X[a])) <= tol) out.ambiguous = true;

    for (std::size_t i = first; i + 1 < st.size(); ++i) {
        const double h = st[i + 1].s - st[i].s;
        const auto& x0 = st[i].X[a];
        const auto& x1 = st[i + 1].X[a];
        const auto& v0 = traj.velocity[i][a];
        const auto& v1 = traj.velocity[i + 1][a];
        auto at = [&](double u) { return residual(detail::hermite(x0, v0, x1, v1, h, u)); };
        double u_prev = 0.0, r_prev = residual(x0);
        for (int k = 1; k <= subdivisions; ++k) {
            const double u = static_cast<double>(k) / subdivisions;
            const double r = k == subdivisions ? residual(x1) : at(u);
            if ((r_prev < 0.0) != (r < 0.0)) {
                double lo = u_prev, hi = u, rlo = r_prev;
                for (int it = 0; it < 60; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    const double rm = at(mid);
                    if ((rm < 0.0) == (rlo < 0.0)) {
                        lo = mid;
                        rlo = rm;
                    } else {
                        hi = mid;
                    }
                }
                ++out.count;
                out.where.push_back(st[i].s + 0.5 * (lo + hi) * h);
            }
            u_prev = u;
            r_prev = r;
        }
    }
    return out;
}

/// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw ContractViolation("ks_statistic: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

/// Equal-mass cells from a kd-tree of median splits (coordinate cycles with
/// depth), built on a reference sample.
class EqualMassBins {
public:
    EqualMassBins(const ChartSample& reference, std::size_t cells) {
        if (reference.empty()) throw ContractViolation("EqualMassBins: empty reference");
        dim_ = reference.front().size();
        while ((std::size_t{1} << depth_) < cells) ++depth_;
        splits_.assign((std::size_t{1} << depth_), 0.0);
        std::vector<const std::vector<double>*> pts;
        for (const auto& p : reference) pts.push_back(&p);
        build(pts, 1, 0);
    }

    std::size_t cell_count() const { return std::size_t{1} << depth_; }

    std::size_t cell_of(const std::vector<double>& y) const {
        std::size_t node = 1;
        for (std::size_t d = 0; d < depth_; ++d) node = 2 * node + (y[d % dim_] < splits_[node] ? 0 : 1);
        return node - cell_count();
    }

    std::vector<double> masses(const ChartSample& s) const {
        std::vector<double> m(cell_count(), 0.0);
        for (const auto& y : s) m[cell_of(y)] += 1.0;
        for (auto& v : m) v /= static_cast<double>(s.size());
        return m;
    }

    /// sum over cells |P - Q|.
    double l1(const ChartSample& p, const ChartSample& q) const {
        const auto mp = masses(p), mq = masses(q);
        double d = 0.0;
        for (std::size_t c = 0; c < mp.size(); ++c) d += std::abs(mp[c] - mq[c]);
        return d;
    }

private:
    void build(std::vector<const std::vector<double>*>& pts, std::size_t node, std::size_t d) {
        if (d == depth_) return;
        const std::size_t axis = d % dim_;
        const auto mid = pts.begin() + static_cast<std::ptrdiff_t>(pts.size() / 2);
        std::nth_element(pts.begin(), mid, pts.end(),
                         [axis](const auto* x, const auto* y) { return (*x)[axis] < (*y)[axis]; });
        splits_[node] = pts.empty() ? 0.0 : (**mid)[axis];
        std::vector<const std::vector<double>*> left(pts.begin(), mid), right(mid, pts.end());
        build(left, 2 * node, d + 1);
        build(right, 2 * node + 1, d + 1);
    }

    std::size_t dim_ = 0;
    std::size_t depth_ = 0;
    std::vector<double> splits_;
};

struct DistanceSummary {
    std::vector<double> ks; ///< one per chart coordinate
    double ks_max = 0.0;
    double binned_l1 = 0.0;
};

inline DistanceSummary distances(const ChartSample& p, const ChartSample& reference, const EqualMassBins& bins) {
    DistanceSummary d;
    const std::size_t dim = reference.front().size();
    for (std::size_t c = 0; c < dim; ++c) {
        std::vector<double> a, b;
        for (const auto& y : p) a.push_back(y[c]);
        for (const auto& y : reference) b.push_back(y[c]);
        d.ks.push_back(ks_statistic(std::move(a), std::move(b)));
        d.ks_max = std::max(d.ks_max, d.ks.back());
    }
    d.binned_l1 = bins.l1(p, reference);
    return d;
}

struct TransportOptions {
    double h0 = 1e-2;
    IntegrateOptions integrate;
    std::size_t bins = 64;
    std::uint64_t seed = 1;
    std::size_t mc_count = 20000;
    double l1_floor = 0.03;
    double node_fraction_limit = 0.01;
    double leaf_spread_tol = 1e-6; ///< relative spread of transported leaf values
    SamplerOptions sampler;
};

struct EnsembleReport {
    std::size_t sample_count = 0;
    std::size_t transported = 0;
    std::size_t node_halts = 0;
    std::size_t other_halts = 0;
    double s_target = 0.0;
    std::vector<double> phi_initial;
    std::vector<double> phi_target; ///< mean transported leaf value per particle
    std::vector<double> phi_spread; ///< max - min of transported leaf values per particle
    DistanceSummary transported_distance;
    DistanceSummary baseline_distance;
    double l1_tolerance = 0.0;
    double ks_tolerance = 0.0;
    bool equivariant = false;
    std::optional<ProbabilityEstimate> total_probability;
    std::vector<std::map<int, std::size_t>> crossing_histogram; ///< per particle, mid-level leaf
    bool degraded = false;
    std::vector<std::string> warnings;
};

/// Moves every chart sample along its trajectory to s_target and compares the
/// cloud with independent draws from p~ on the transported leaves. The control
/// distance between two such draws sets the tolerance.
inline EnsembleReport transport_and_compare(const VelocitySystem& sys, const ProperDensity& pd0,
                                            const ChartSample& samples, double s_target,
                                            const TransportOptions& opt = {}) {
    if (samples.empty()) throw ContractViolation("transport_and_compare: empty ensemble");
    const std::size_t n = sys.particle_count();
    const double L = pd0.box_length();
    const std::size_t threads = opt.sampler.threads;
    EnsembleReport rep;
    rep.sample_count = samples.size();
    rep.s_target = s_target;
    rep.phi_initial = pd0.phi_values();

    std::vector<std::vector<double>> end_chart(samples.size());
    std::vector<std::vector<double>> end_phi(samples.size());
    std::vector<std::vector<int>> crossings(samples.size());
    std::vector<unsigned> halt(samples.size(), 0);
    parallel_for(samples.size(), threads, [&](std::size_t i) {
        const auto X0 = pd0.embed(samples[i]);
        Trajectory tr;
        try {
            tr = integrate(sys, X0, s_target, opt.h0, opt.integrate);
        } catch (const NodeError&) {
            halt[i] = kFlagNode;
            return;
        } catch (const NearNullNormalError&) {
            halt[i] = kFlagNearNull;
            return;
        }
        if (tr.halted()) {
            halt[i] = tr.termination;
            return;
        }
        const auto& last = tr.back();
        end_chart[i].resize(3 * n);
        end_phi[i].resize(n);
        crossings[i].resize(n);
        for (std::size_t a = 0; a < n; ++a) {
            for (int k = 0; k < 3; ++k) {
                double c = std::fmod(last.X[a][k + 1], L);
                if (c < 0.0) c += L;
                end_chart[i][3 * a + k] = c >= L ? 0.0 : c;
            }
            end_phi[i][a] = pd0.phi_values()[a] + last.phi[a];
            const double mid = pd0.phi_values()[a] + 0.5 * last.phi[a];
            crossings[i][a] = s_target > 0.0 ? crossing_count(tr, sys.foliation(a), mid).count : 0;
        }
    });

    ChartSample moved;
    rep.phi_target.assign(n, 0.0);
    std::vector<double> lo(n, INFINITY), hi(n, -INFINITY);
    rep.crossing_histogram.resize(n);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (halt[i]) {
            (halt[i] & kFlagNode ? rep.node_halts : rep.other_halts) += 1;
            continue;
        }
        moved.push_back(end_chart[i]);
        for (std::size_t a = 0; a < n; ++a) {
            rep.phi_target[a] += end_phi[i][a];
            lo[a] = std::min(lo[a], end_phi[i][a]);
            hi[a] = std::max(hi[a], end_phi[i][a]);
            if (s_target > 0.0) ++rep.crossing_histogram[a][crossings[i][a]];
        }
    }
    rep.transported = moved.size();
    if (moved.empty()) throw NodeError("transport_and_compare: every trajectory halted", 0.0);
    for (std::size_t a = 0; a < n; ++a) {
        rep.phi_target[a] /= static_cast<double>(moved.size());
        rep.phi_spread.push_back(hi[a] - lo[a]);
        const double scale = std::max(1.0, std::abs(rep.phi_target[a]));
        if (rep.phi_spread[a] > opt.leaf_spread_tol * scale)
            rep.warnings.push_back("transported leaf values of particle " + std::to_string(a) +
                                   " are not synchronous (spread " + std::to_string(rep.phi_spread[a]) + ")");
    }
    const double node_fraction = static_cast<double>(rep.node_halts) / static_cast<double>(samples.size());
    if (node_fraction > opt.node_fraction_limit) {
        rep.degraded = true;
        rep.warnings.push_back("more than " + std::to_string(opt.node_fraction_limit * 100) +
                               "% of trajectories halted at nodes");
    }
    if (!sys.psi().is_static() && !pd0.closed_leaves())
        rep.warnings.push_back("tilted leaves of a non-static state: chart wrapping is approximate");

    const ProperDensity target(sys, rep.phi_target);
    const std::size_t m = moved.size();
    const ChartSample reference = sample_initial(target, m, opt.seed ^ 0x9e3779b97f4a7c15ULL, opt.sampler);
    const ChartSample control = sample_initial(target, m, opt.seed ^ 0xc2b2ae3d27d4eb4fULL, opt.sampler);
    const EqualMassBins bins(reference, opt.bins);
    rep.transported_distance = distances(moved, reference, bins);
    rep.baseline_distance = distances(control, reference, bins);
    rep.l1_tolerance = std::max(2.0 * rep.baseline_distance.binned_l1, opt.l1_floor);
    rep.ks_tolerance = std::max(2.0 * rep.baseline_distance.ks_max, 1.63 * std::sqrt(2.0 / static_cast<double>(m)));
    rep.equivariant = rep.transported_distance.binned_l1 <= rep.l1_tolerance &&
                      rep.transported_distance.ks_max <= rep.ks_tolerance;
    if (target.closed_leaves())
        rep.total_probability = total_probability(target, opt.mc_count, opt.seed ^ 0x165667b19e3779f9ULL, threads);
    return rep;
}

} // namespace properfol
