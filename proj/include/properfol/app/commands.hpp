#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "../currents.hpp"
#include "../dynamics.hpp"
#include "../ensemble.hpp"
#include "../foliation.hpp"
#include "../oracles.hpp"
#include "../random.hpp"
#include "../scenario.hpp"

namespace properfol::app {

enum ExitCode : int { kOk = 0, kPhysicsFailure = 1, kConfigError = 2, kIoError = 3 };

/// 17 significant digits; non-finite values print as nan / inf.
inline std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string json_num(double v) { return std::isfinite(v) ? num(v) : "null"; }

inline std::string csv_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + "\"";
}

/// Opens an output file in binary mode; failure raises std::ios_base::failure.
inline std::ofstream open_output(const std::filesystem::path& dir, const std::string& name) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::ios_base::failure("cannot create output directory '" + dir.string() + "'");
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw std::ios_base::failure("cannot open '" + (dir / name).string() + "' for writing");
    return out;
}

inline void finish(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw std::ios_base::failure("write to '" + path.string() + "' failed");
}

/// Random event in the box with t in [0, L).
inline FourVector random_event(Rng& rng, double L) {
    return {rng.uniform(0.0, L), rng.uniform(0.0, L), rng.uniform(0.0, L), rng.uniform(0.0, L)};
}

// ---------------------------------------------------------------- check

struct CheckResult {
    std::string name;
    double residual = 0.0;
    double threshold = 0.0;
    bool pass = false;
    std::string detail;
};

namespace detail {

inline double mode_scale(const WaveFunction& psi) {
    double s = 0.0;
    for (const auto& m : psi.modes()) s += std::abs(m.coefficient);
    return s;
}

inline double momentum_scale(const WaveFunction& psi) {
    double k = 0.0;
    for (const auto& m : psi.modes())
        for (const auto& v : m.momentum) k = std::max(k, euclidean_norm(v));
    return k;
}

/// Bound on |j| componentwise: sum |c_l c_r| prod_a |k_l + k_r|/2.
inline double current_scale(const WaveFunction& psi) {
    double s = 0.0;
    for (const auto& l : psi.modes())
        for (const auto& r : psi.modes()) {
            double w = std::abs(l.coefficient) * std::abs(r.coefficient);
            for (std::size_t a = 0; a < psi.particle_count(); ++a) w *= 0.5 * euclidean_norm(l.momentum[a] + r.momentum[a]);
            s += w;
        }
    return s;
}

inline std::vector<FourVector> random_configuration(Rng& rng, const WaveFunction& psi) {
    std::vector<FourVector> X;
    for (std::size_t a = 0; a < psi.particle_count(); ++a) X.push_back(random_event(rng, psi.box_length()));
    return X;
}

inline CheckResult run_check(const std::string& name, double threshold, const std::function<double()>& measure) {
    CheckResult r{name, NAN, threshold, false, ""};
    try {
        r.residual = measure();
        r.pass = r.residual <= threshold;
    } catch (const std::exception& e) {
        r.detail = e.what();
    }
    return r;
}

} // namespace detail

/// Runs the invariant suite on the configured state.
inline std::vector<CheckResult> run_checks(const ScenarioConfig& cfg) {
    const WaveFunction psi = cfg.wavefunction();
    const std::size_t n = psi.particle_count();
    const std::size_t points = cfg.check.points;
    const double L = psi.box_length();
    const double kscale = std::max(1.0, detail::momentum_scale(psi));
    std::vector<CheckResult> out;
    auto configs = [&](std::uint64_t stream) {
        Rng rng(cfg.seed, stream);
        std::vector<std::vector<FourVector>> cs;
        for (std::size_t i = 0; i < points; ++i) cs.push_back(detail::random_configuration(rng, psi));
        return cs;
    };

    out.push_back(detail::run_check("klein_gordon_equation", 1e-10, [&] {
        double worst = 0.0;
        double m2 = 0.0;
        for (const auto& p : psi.particles()) m2 = std::max(m2, p.mass * p.mass);
        for (const auto& X : configs(1))
            for (std::size_t a = 0; a < n; ++a) worst = std::max(worst, kg_residual(psi, a, X).norm());
        return worst / (m2 * detail::mode_scale(psi));
    }));
    out.push_back(detail::run_check("normalization", 1e-10, [&] { return std::abs(kg_norm(psi) - 1.0); }));
    out.push_back(detail::run_check("slice_independence", 1e-10, [&] {
        Rng rng(cfg.seed, 2);
        const double base = kg_norm(psi);
        double worst = 0.0;
        for (std::size_t i = 0; i < 10; ++i) {
            std::vector<double> t(n);
            for (auto& v : t) v = rng.uniform(-L, L);
            worst = std::max(worst, std::abs(kg_inner_product(psi, psi, t).real() - base));
        }
        return worst;
    }));
    out.push_back(detail::run_check("current_conservation", 1e-10, [&] {
        double worst = 0.0;
        for (const auto& X : configs(3))
            for (std::size_t a = 0; a < n; ++a) worst = std::max(worst, conservation_residual(psi, a, X).max_abs());
        return worst / (detail::current_scale(psi) * kscale);
    }));
    out.push_back(detail::run_check("current_conservation_fd", 1e-4, [&] {
        double worst = 0.0;
        auto cur = [&](std::span<const FourVector> Y) { return n_current(psi, Y).value; };
        const auto cs = configs(4);
        for (std::size_t i = 0; i < std::min<std::size_t>(points, 10); ++i)
            for (std::size_t a = 0; a < n; ++a)
                worst = std::max(worst, oracles::fd_divergence(cur, a, cs[i], 1e-3).max_abs());
        return worst / (detail::current_scale(psi) * kscale);
    }));
    out.push_back(detail::run_check("marginal_conservation", 1e-10, [&] {
        double worst = 0.0;
        Rng rng(cfg.seed, 5);
        for (std::size_t a = 0; a < n; ++a) {
            const MarginalCurrent jc = marginal_current(psi, a);
            double scale = 0.0;
            for (const auto& t : jc.terms()) scale += std::abs(t.coefficient) * euclidean_norm(t.vector);
            for (std::size_t i = 0; i < points; ++i)
                worst = std::max(worst, std::abs(jc.divergence(random_event(rng, L))) / (scale * kscale));
        }
        return worst;
    }));

    const DynamicsOptions dopt = cfg.dynamics_options();
    out.push_back(detail::run_check("projector_idempotent", 1e-12, [&] {
        double worst = 0.0;
        const double dk = psi.lattice_spacing();
        for (std::size_t a = 0; a < n; ++a) {
            const auto spec = spectrum_of_marginal(marginal_current(psi, a));
            const double eps = dopt.foliation.eps_null_rel * dk * dk;
            const auto once = extract_gradient_part(spec, eps);
            const auto twice = extract_gradient_part(once, eps);
            const double scale = std::max(spec.magnitude_bound(), 1e-300);
            auto diff = [](const ComplexFourVector& u, const ComplexFourVector& v) {
                double s = 0.0;
                for (int mu = 0; mu < 4; ++mu) s += std::abs(u[mu] - v[mu]);
                return s;
            };
            double d = diff(twice.zero_mode, once.zero_mode);
            for (std::size_t i = 0; i < once.modes.size(); ++i)
                d += diff(twice.modes[i].coefficient, once.modes[i].coefficient);
            worst = std::max(worst, d / scale);
        }
        return worst;
    }));
    out.push_back(detail::run_check("curl_free", 1e-12, [&] {
        double worst = 0.0;
        Rng rng(cfg.seed, 6);
        for (std::size_t a = 0; a < n; ++a) {
            const FoliationField F = build_foliation(psi, a, dopt.foliation);
            const double scale = std::max(F.spectrum().magnitude_bound() * kscale, 1e-300);
            for (std::size_t i = 0; i < points; ++i)
                worst = std::max(worst, curl_residual(F, random_event(rng, L)) / scale);
        }
        return worst;
    }));
    out.push_back(detail::run_check("potential_gradient_fd", 1e-4, [&] {
        double worst = 0.0;
        Rng rng(cfg.seed, 7);
        for (std::size_t a = 0; a < n; ++a) {
            const FoliationField F = build_foliation(psi, a, dopt.foliation);
            const double scale = std::max(F.spectrum().magnitude_bound(), 1e-300);
            auto phi = [&](const FourVector& x) { return F.phi(x); };
            for (std::size_t i = 0; i < points; ++i) {
                const FourVector x = random_event(rng, L);
                const FourVector f = F.f(x);
                for (int mu = 0; mu < 4; ++mu)
                    worst = std::max(worst, std::abs(oracles::fd_derivative(phi, mu, x, 1e-3) - f[mu]) / scale);
            }
        }
        return worst;
    }));

    // guidance invariants share one system
    std::optional<VelocitySystem> sys;
    std::string sys_error;
    try {
        sys.emplace(psi, dopt);
    } catch (const std::exception& e) {
        sys_error = e.what();
    }
    auto need_sys = [&]() -> const VelocitySystem& {
        if (!sys) throw Error(sys_error);
        return *sys;
    };
    out.push_back(detail::run_check("nonlocal_consistency", 1e-10, [&] {
        const VelocitySystem& s = need_sys();
        double worst = 0.0;
        const double scale = std::max(s.rho_scale(), 1e-300);
        for (const auto& X : configs(8)) {
            Guidance g;
            try {
                g = s.guidance(X);
            } catch (const NearNullNormalError&) {
                continue;
            }
            for (std::size_t a = 0; a < n; ++a)
                worst = std::max(worst, std::abs(contract(g.V[a], g.normals[a]) - g.rho) / scale);
        }
        return worst;
    }));
    out.push_back(detail::run_check("normal_speed", 1e-10, [&] {
        const VelocitySystem& s = need_sys();
        double worst = 0.0;
        for (const auto& X : configs(9)) {
            Guidance g;
            try {
                g = s.guidance(X);
            } catch (const NearNullNormalError&) {
                continue;
            }
            if (std::abs(g.rho) < s.eps_rho()) continue;
            const double sign = g.rho > 0 ? 1.0 : -1.0;
            for (std::size_t a = 0; a < n; ++a) {
                const FourVector v = raise(g.V[a]) / std::abs(g.rho);
                worst = std::max(worst, std::abs(contract(lower(g.normals[a]), v) - sign));
            }
        }
        return worst;
    }));

    bool dirac = true;
    for (const auto& p : psi.particles()) dirac = dirac && p.spin_dim == 4;
    if (dirac) {
        out.push_back(detail::run_check("dirac_conservation", 1e-10, [&] {
            double worst = 0.0;
            for (const auto& X : configs(10))
                for (std::size_t a = 0; a < n; ++a)
                    worst = std::max(worst, dirac_conservation_residual(psi, a, X).max_abs());
            return worst / (detail::mode_scale(psi) * detail::mode_scale(psi) * std::pow(kscale, static_cast<double>(n)));
        }));
        out.push_back(detail::run_check("dirac_density_positive", 0.0, [&] {
            // residual: number of points with j'_{0...0} <= 0
            double bad = 0.0;
            for (const auto& X : configs(11))
                if (!(dirac_current(psi, X).value[0] > 0.0)) bad += 1.0;
            return bad;
        }));
    }
    return out;
}

inline int cmd_check(const ScenarioConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log) {
    const auto results = run_checks(cfg);
    const auto path = out_dir / "check.csv";
    auto out = open_output(out_dir, "check.csv");
    out << "invariant,residual,threshold,result,detail\n";
    bool all = true;
    for (const auto& r : results) {
        all = all && r.pass;
        out << r.name << ',' << num(r.residual) << ',' << num(r.threshold) << ',' << (r.pass ? "pass" : "fail") << ','
            << csv_quote(r.detail) << '\n';
        log << (r.pass ? "PASS " : "FAIL ") << r.name << "  residual " << num(r.residual) << "  threshold "
            << num(r.threshold);
        if (!r.detail.empty()) log << "  (" << r.detail << ")";
        log << '\n';
    }
    finish(out, path);
    return all ? kOk : kPhysicsFailure;
}

// ---------------------------------------------------------------- foliation

inline int cmd_foliation(const ScenarioConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log) {
    if (!cfg.foliation) throw ConfigError(cfg.source + ": foliation: missing 'foliation' block");
    const WaveFunction psi = cfg.wavefunction();
    const DynamicsOptions dopt = cfg.dynamics_options();
    const auto& g = cfg.foliation->grid;
    std::size_t flagged = 0;
    for (std::size_t a = 0; a < psi.particle_count(); ++a) {
        const FoliationField F = build_foliation(psi, a, dopt.foliation);
        const std::string name = "foliation_particle" + std::to_string(a) + ".csv";
        auto out = open_output(out_dir, name);
        out << "t,x,y,z,f0,f1,f2,f3,phi,N0,N1,N2,N3,flags\n";
        for (int it = 0; it < g[0].count; ++it)
            for (int ix = 0; ix < g[1].count; ++ix)
                for (int iy = 0; iy < g[2].count; ++iy)
                    for (int iz = 0; iz < g[3].count; ++iz) {
                        const FourVector x{g[0].at(it), g[1].at(ix), g[2].at(iy), g[3].at(iz)};
                        const FourVector f = F.f(x);
                        const unsigned flags = foliation_flags(F, x);
                        FourVector N{NAN, NAN, NAN, NAN};
                        if (!(flags & kFlagNearNull)) N = unit_normal(F, x);
                        if (flags) ++flagged;
                        out << num(x[0]) << ',' << num(x[1]) << ',' << num(x[2]) << ',' << num(x[3]);
                        for (int mu = 0; mu < 4; ++mu) out << ',' << num(f[mu]);
                        out << ',' << num(F.phi(x));
                        for (int mu = 0; mu < 4; ++mu) out << ',' << num(N[mu]);
                        out << ',' << flags << '\n';
                    }
        finish(out, out_dir / name);
    }
    log << "foliation: wrote " << psi.particle_count() << " file(s); " << flagged << " flagged point(s)\n";
    return kOk;
}

// ---------------------------------------------------------------- evolve

inline int cmd_evolve(const ScenarioConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log) {
    if (!cfg.evolve) throw ConfigError(cfg.source + ": evolve: missing 'evolve' block");
    const WaveFunction psi = cfg.wavefunction();
    const VelocitySystem sys(psi, cfg.dynamics_options());
    const auto& eb = *cfg.evolve;
    IntegrateOptions io;
    io.tol_ode = cfg.tolerances.tol_ode;
    io.adaptive = eb.adaptive;
    io.parametrization = eb.parametrization;

    std::vector<Trajectory> trajs(eb.initial.size());
    std::vector<std::string> errors(eb.initial.size());
    parallel_for(eb.initial.size(), cfg.threads, [&](std::size_t i) {
        try {
            trajs[i] = integrate(sys, eb.initial[i], eb.s_max, eb.h0, io);
        } catch (const NodeError& e) {
            errors[i] = e.what();
        } catch (const NearNullNormalError& e) {
            errors[i] = e.what();
        }
    });

    const std::string name = "trajectories.ndjson";
    auto out = open_output(out_dir, name);
    std::size_t halted = 0;
    for (std::size_t i = 0; i < trajs.size(); ++i) {
        const auto& tr = trajs[i];
        for (std::size_t k = 0; k < tr.states.size(); ++k) {
            const auto& st = tr.states[k];
            out << "{\"traj_id\":" << i << ",\"s\":" << json_num(st.s) << ",\"X\":[";
            for (std::size_t a = 0; a < st.X.size(); ++a)
                for (int mu = 0; mu < 4; ++mu) out << (a || mu ? "," : "") << json_num(st.X[a][mu]);
            out << "],\"phi\":[";
            for (std::size_t a = 0; a < st.phi.size(); ++a) out << (a ? "," : "") << json_num(st.phi[a]);
            out << "],\"rho\":" << json_num(tr.rho[k]) << ",\"flags\":" << tr.flags[k] << "}\n";
        }
        if (!errors[i].empty()) {
            ++halted;
            log << "warning: trajectory " << i << " not started: " << errors[i] << '\n';
        } else if (tr.halted()) {
            ++halted;
            log << "warning: trajectory " << i << " halted at s = " << num(tr.back().s) << ": " << tr.diagnostic
                << '\n';
        }
    }
    finish(out, out_dir / name);
    log << "evolve: " << trajs.size() << " trajectories, " << halted << " halted\n";
    return kOk;
}

// ---------------------------------------------------------------- ensemble

inline int cmd_ensemble(const ScenarioConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log) {
    if (!cfg.ensemble) throw ConfigError(cfg.source + ": ensemble: missing 'ensemble' block");
    const WaveFunction psi = cfg.wavefunction();
    const VelocitySystem sys(psi, cfg.dynamics_options());
    const auto& eb = *cfg.ensemble;
    const std::vector<double> levels = eb.phi_levels.value_or(std::vector<double>(psi.particle_count(), 0.0));
    const ProperDensity pd0(sys, levels);

    TransportOptions to;
    to.h0 = eb.h0;
    to.integrate.tol_ode = cfg.tolerances.tol_ode;
    to.bins = eb.bins;
    to.seed = cfg.seed;
    to.mc_count = eb.mc_count;
    to.sampler.threads = cfg.threads;
    const ChartSample samples = sample_initial(pd0, eb.samples, cfg.seed, to.sampler);
    const EnsembleReport rep = transport_and_compare(sys, pd0, samples, eb.s_target, to);

    const std::size_t n = psi.particle_count();
    {
        const std::string name = "ensemble_summary.csv";
        auto out = open_output(out_dir, name);
        out << "metric,value,error\n";
        auto row = [&](const std::string& m, double v, double e) { out << m << ',' << num(v) << ',' << num(e) << '\n'; };
        row("samples", static_cast<double>(rep.sample_count), 0.0);
        row("transported", static_cast<double>(rep.transported), 0.0);
        row("node_halts", static_cast<double>(rep.node_halts), 0.0);
        row("other_halts", static_cast<double>(rep.other_halts), 0.0);
        row("s_target", rep.s_target, 0.0);
        for (std::size_t a = 0; a < n; ++a) {
            row("phi_initial_" + std::to_string(a), rep.phi_initial[a], 0.0);
            row("phi_target_" + std::to_string(a), rep.phi_target[a], rep.phi_spread[a]);
        }
        for (std::size_t c = 0; c < rep.transported_distance.ks.size(); ++c)
            row("ks_coordinate_" + std::to_string(c), rep.transported_distance.ks[c], rep.baseline_distance.ks[c]);
        row("ks_max", rep.transported_distance.ks_max, rep.baseline_distance.ks_max);
        row("ks_tolerance", rep.ks_tolerance, 0.0);
        row("binned_l1", rep.transported_distance.binned_l1, rep.baseline_distance.binned_l1);
        row("binned_l1_tolerance", rep.l1_tolerance, 0.0);
        row("equivariant", rep.equivariant ? 1.0 : 0.0, 0.0);
        if (rep.total_probability)
            row("total_probability", rep.total_probability->value, rep.total_probability->error);
        else
            row("total_probability", NAN, NAN);
        for (std::size_t a = 0; a < n; ++a)
            for (const auto& [k, c] : rep.crossing_histogram[a])
                row("crossings_particle" + std::to_string(a) + "_k" + std::to_string(k), static_cast<double>(c), 0.0);
        row("degraded", rep.degraded ? 1.0 : 0.0, 0.0);
        finish(out, out_dir / name);
    }
    {
        const std::string name = "ensemble_report.txt";
        auto out = open_output(out_dir, name);
        out << "ensemble report\n";
        out << "  samples            " << rep.sample_count << " (transported " << rep.transported << ", node halts "
            << rep.node_halts << ", other halts " << rep.other_halts << ")\n";
        out << "  s_target           " << num(rep.s_target) << '\n';
        for (std::size_t a = 0; a < n; ++a)
            out << "  leaf " << a << "             phi " << num(rep.phi_initial[a]) << " -> " << num(rep.phi_target[a])
                << " (spread " << num(rep.phi_spread[a]) << ")\n";
        out << "  KS max             " << num(rep.transported_distance.ks_max) << " (control "
            << num(rep.baseline_distance.ks_max) << ", tolerance " << num(rep.ks_tolerance) << ")\n";
        out << "  binned L1          " << num(rep.transported_distance.binned_l1) << " (control "
            << num(rep.baseline_distance.binned_l1) << ", tolerance " << num(rep.l1_tolerance) << ")\n";
        out << "  equivariance       " << (rep.equivariant ? "consistent" : "VIOLATED") << '\n';
        if (rep.total_probability)
            out << "  total probability  " << num(rep.total_probability->value) << " +- "
                << num(rep.total_probability->error) << '\n';
        else
            out << "  total probability  undefined (a leaf is tilted and does not close on the box)\n";
        for (std::size_t a = 0; a < n; ++a) {
            out << "  crossings " << a << "        ";
            for (const auto& [k, c] : rep.crossing_histogram[a]) out << ' ' << k << ':' << c;
            out << '\n';
        }
        for (const auto& w : rep.warnings) out << "  warning: " << w << '\n';
        if (rep.degraded) out << "  DEGRADED\n";
        finish(out, out_dir / name);
    }
    for (const auto& w : rep.warnings) log << "warning: " << w << '\n';
    log << "ensemble: binned L1 " << num(rep.transported_distance.binned_l1) << " (tolerance " << num(rep.l1_tolerance)
        << "), " << (rep.equivariant ? "equivariant" : "NOT equivariant") << '\n';
    return rep.equivariant ? kOk : kPhysicsFailure;
}

} // namespace properfol::app
