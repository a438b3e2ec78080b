#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "dirac.hpp"
#include "dynamics.hpp"
#include "wavefunction.hpp"

namespace properfol {

/// Malformed or invalid scenario file; the message carries file:line:column.
class ConfigError : public Error {
public:
    using Error::Error;
};

struct Tolerances {
    double tol_ode = 1e-9;
    std::optional<double> eps_rho;
    double eps_rho_rel = 1e-8;
    double eps_null_rel = 1e-9;
    double eps_norm_rel = 1e-9;
};

struct GridAxis {
    double lo = 0.0;
    double hi = 0.0;
    int count = 1;

    double at(int i) const { return count == 1 ? lo : lo + (hi - lo) * i / (count - 1); }
};

struct FoliationBlock {
    std::array<GridAxis, 4> grid; ///< t, x, y, z
};

struct EvolveBlock {
    double s_max = 1.0;
    double h0 = 1e-2;
    bool adaptive = true;
    Parametrization parametrization = Parametrization::unit_rho;
    std::vector<std::vector<FourVector>> initial; ///< one configuration per trajectory
};

struct EnsembleBlock {
    std::size_t samples = 10000;
    double s_target = 1.0;
    std::optional<std::vector<double>> phi_levels; ///< default: leaves through the reference point
    std::size_t mc_count = 20000;
    std::size_t bins = 64;
    double h0 = 5e-2;
};

struct CheckBlock {
    std::size_t points = 50;
};

/// Test fixture: one mode of one particle is put off shell after loading.
struct OffShellHook {
    std::size_t mode = 0;
    std::size_t particle = 0;
    double energy = 0.0;
};

struct ScenarioConfig {
    std::string source;
    double box_length = 0.0;
    std::vector<ParticleSpec> particles;
    std::vector<ModeSpec> modes;
    bool normalize = true;
    CurrentKind current = CurrentKind::klein_gordon;
    Tolerances tolerances;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    std::optional<FourVector> reference_point;
    CheckBlock check;
    std::optional<FoliationBlock> foliation;
    std::optional<EvolveBlock> evolve;
    std::optional<EnsembleBlock> ensemble;
    std::optional<OffShellHook> off_shell;

    /// The configured state: normalized if requested, then test hooks applied.
    WaveFunction wavefunction() const {
        WaveFunction psi(particles, modes, box_length);
        if (normalize) psi = properfol::normalize(psi);
        if (off_shell) psi = testing::Hooks::with_energy(psi, off_shell->mode, off_shell->particle, off_shell->energy);
        return psi;
    }

    DynamicsOptions dynamics_options() const {
        DynamicsOptions o;
        o.foliation.eps_null_rel = tolerances.eps_null_rel;
        o.foliation.eps_norm_rel = tolerances.eps_norm_rel;
        o.foliation.reference_point = reference_point;
        o.current = current;
        o.eps_rho = tolerances.eps_rho;
        o.eps_rho_rel = tolerances.eps_rho_rel;
        return o;
    }
};

namespace detail {

class YamlReader {
public:
    explicit YamlReader(std::string source) : source_(std::move(source)) {}

    [[noreturn]] void fail(const YAML::Node& node, const std::string& field, const std::string& msg) const {
        const YAML::Mark m = node.Mark();
        std::ostringstream os;
        os << source_;
        if (m.line >= 0) os << ':' << (m.line + 1) << ':' << (m.column + 1);
        os << ": " << field << ": " << msg;
        throw ConfigError(os.str());
    }

    void only_keys(const YAML::Node& map, const std::string& field, std::initializer_list<const char*> keys) const {
        if (!map.IsMap()) fail(map, field, "expected a mapping");
        std::set<std::string> allowed(keys.begin(), keys.end());
        for (const auto& kv : map) {
            const auto key = kv.first.as<std::string>();
            if (!allowed.count(key)) fail(kv.first, field.empty() ? key : field + "." + key, "unknown key");
        }
    }

    YAML::Node required(const YAML::Node& map, const char* key, const std::string& field) const {
        const YAML::Node n = map[key];
        if (!n) fail(map, join(field, key), "missing required key");
        return n;
    }

    template <class T>
    T scalar(const YAML::Node& n, const std::string& field) const {
        if (!n.IsScalar()) fail(n, field, "expected a scalar");
        try {
            return n.as<T>();
        } catch (const YAML::Exception&) {
            fail(n, field, "cannot parse '" + n.Scalar() + "'");
        }
    }

    double real(const YAML::Node& n, const std::string& field) const {
        const double v = scalar<double>(n, field);
        if (!std::isfinite(v)) fail(n, field, "must be finite");
        return v;
    }

    double positive(const YAML::Node& n, const std::string& field) const {
        const double v = real(n, field);
        if (!(v > 0.0)) fail(n, field, "must be positive");
        return v;
    }

    std::size_t count(const YAML::Node& n, const std::string& field, std::size_t min = 1) const {
        const long long v = scalar<long long>(n, field);
        if (v < static_cast<long long>(min)) fail(n, field, "must be an integer >= " + std::to_string(min));
        return static_cast<std::size_t>(v);
    }

    std::vector<double> reals(const YAML::Node& n, const std::string& field, std::size_t expect = 0) const {
        if (!n.IsSequence()) fail(n, field, "expected a list");
        if (expect && n.size() != expect) fail(n, field, "expected " + std::to_string(expect) + " entries");
        std::vector<double> out;
        for (std::size_t i = 0; i < n.size(); ++i) out.push_back(real(n[i], field + "[" + std::to_string(i) + "]"));
        return out;
    }

    complex cplx(const YAML::Node& n, const std::string& field) const {
        const auto v = reals(n, field, 2);
        return {v[0], v[1]};
    }

    FourVector event(const YAML::Node& n, const std::string& field) const {
        const auto v = reals(n, field, 4);
        return {v[0], v[1], v[2], v[3]};
    }

    static std::string join(const std::string& a, const std::string& b) { return a.empty() ? b : a + "." + b; }
    static std::string index(const std::string& a, std::size_t i) { return a + "[" + std::to_string(i) + "]"; }

private:
    std::string source_;
};

} // namespace detail

/// Parses scenario YAML text. Every invariant of the resulting WaveFunction
/// is checked here, with the position of the offending field.
inline ScenarioConfig parse_scenario(const std::string& text, const std::string& source = "<scenario>") {
    detail::YamlReader r(source);
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        std::ostringstream os;
        os << source << ':' << (e.mark.line + 1) << ':' << (e.mark.column + 1) << ": " << e.msg;
        throw ConfigError(os.str());
    }
    if (!root || root.IsNull()) throw ConfigError(source + ": empty scenario");
    r.only_keys(root, "", {"box_length", "particles", "modes", "normalize", "current", "tolerances", "seed",
                           "threads", "reference_point", "check", "foliation", "evolve", "ensemble", "test_hooks"});
    ScenarioConfig c;
    c.source = source;
    c.box_length = r.positive(r.required(root, "box_length", ""), "box_length");

    const YAML::Node ps = r.required(root, "particles", "");
    if (!ps.IsSequence() || ps.size() == 0) r.fail(ps, "particles", "expected a non-empty list");
    for (std::size_t a = 0; a < ps.size(); ++a) {
        const std::string f = r.index("particles", a);
        r.only_keys(ps[a], f, {"mass", "spin_dim"});
        ParticleSpec p;
        p.mass = r.positive(r.required(ps[a], "mass", f), f + ".mass");
        if (ps[a]["spin_dim"]) {
            const auto d = r.count(ps[a]["spin_dim"], f + ".spin_dim");
            if (d != 1 && d != 4) r.fail(ps[a]["spin_dim"], f + ".spin_dim", "must be 1 or 4");
            p.spin_dim = static_cast<int>(d);
        }
        c.particles.push_back(p);
    }
    const std::size_t n = c.particles.size();

    const YAML::Node ms = r.required(root, "modes", "");
    if (!ms.IsSequence() || ms.size() == 0) r.fail(ms, "modes", "expected a non-empty list");
    for (std::size_t i = 0; i < ms.size(); ++i) {
        const std::string f = r.index("modes", i);
        const YAML::Node m = ms[i];
        r.only_keys(m, f, {"coefficient", "momenta", "spins", "dirac"});
        ModeSpec spec;
        spec.coefficient = r.cplx(r.required(m, "coefficient", f), f + ".coefficient");
        const YAML::Node mom = r.required(m, "momenta", f);
        if (!mom.IsSequence() || mom.size() != n)
            r.fail(mom, f + ".momenta", "expected one lattice triple per particle (" + std::to_string(n) + ")");
        for (std::size_t a = 0; a < n; ++a) {
            const std::string fa = r.index(f + ".momenta", a);
            if (!mom[a].IsSequence() || mom[a].size() != 3) r.fail(mom[a], fa, "expected an integer triple");
            LatticeIndex li;
            for (int k = 0; k < 3; ++k) li[k] = r.scalar<int>(mom[a][k], r.index(fa, k));
            spec.lattice.push_back(li);
        }
        if (m["spins"] && m["dirac"]) r.fail(m, f, "give either spins or dirac, not both");
        if (const YAML::Node sp = m["spins"]) {
            if (!sp.IsSequence() || sp.size() != n) r.fail(sp, f + ".spins", "expected one amplitude list per particle");
            for (std::size_t a = 0; a < n; ++a) {
                const std::string fa = r.index(f + ".spins", a);
                if (!sp[a].IsSequence()) r.fail(sp[a], fa, "expected a list of [re, im] pairs");
                if (sp[a].size() != static_cast<std::size_t>(c.particles[a].spin_dim))
                    r.fail(sp[a], fa, "expected " + std::to_string(c.particles[a].spin_dim) + " components");
                std::vector<complex> chi;
                for (std::size_t k = 0; k < sp[a].size(); ++k) chi.push_back(r.cplx(sp[a][k], r.index(fa, k)));
                spec.spins.push_back(std::move(chi));
            }
        } else if (const YAML::Node dn = m["dirac"]) {
            if (!dn.IsSequence() || dn.size() != n) r.fail(dn, f + ".dirac", "expected one spin label per particle");
            const double dk = 2.0 * std::numbers::pi / c.box_length;
            for (std::size_t a = 0; a < n; ++a) {
                const std::string fa = r.index(f + ".dirac", a);
                if (c.particles[a].spin_dim != 4) r.fail(dn[a], fa, "particle is not a Dirac particle (spin_dim 4)");
                const int s = r.scalar<int>(dn[a], fa);
                if (s != 1 && s != 2) r.fail(dn[a], fa, "spin label must be 1 or 2");
                const auto& li = spec.lattice[a];
                const Spinor u = dirac_positive_spinor(c.particles[a].mass, {dk * li[0], dk * li[1], dk * li[2]}, s);
                spec.spins.emplace_back(u.begin(), u.end());
            }
        }
        try {
            (void)WaveFunction(c.particles, {spec}, c.box_length);
        } catch (const DegenerateStateError&) {
            // a zero coefficient alone is fine inside a superposition
        } catch (const Error& e) {
            r.fail(m, f, e.what());
        }
        c.modes.push_back(std::move(spec));
    }
    try {
        const WaveFunction psi(c.particles, c.modes, c.box_length);
    } catch (const Error& e) {
        r.fail(ms, "modes", e.what());
    }

    if (const YAML::Node v = root["normalize"]) c.normalize = r.scalar<bool>(v, "normalize");
    if (const YAML::Node v = root["current"]) {
        const auto s = r.scalar<std::string>(v, "current");
        if (s == "klein_gordon")
            c.current = CurrentKind::klein_gordon;
        else if (s == "dirac")
            c.current = CurrentKind::dirac;
        else
            r.fail(v, "current", "expected klein_gordon or dirac");
        if (c.current == CurrentKind::dirac)
            for (const auto& p : c.particles)
                if (p.spin_dim != 4) r.fail(v, "current", "the Dirac current needs spin_dim 4 for every particle");
    }
    if (const YAML::Node t = root["tolerances"]) {
        r.only_keys(t, "tolerances", {"tol_ode", "eps_rho", "eps_rho_rel", "eps_null_rel", "eps_norm_rel"});
        if (t["tol_ode"]) c.tolerances.tol_ode = r.positive(t["tol_ode"], "tolerances.tol_ode");
        if (t["eps_rho"]) c.tolerances.eps_rho = r.positive(t["eps_rho"], "tolerances.eps_rho");
        if (t["eps_rho_rel"]) c.tolerances.eps_rho_rel = r.positive(t["eps_rho_rel"], "tolerances.eps_rho_rel");
        if (t["eps_null_rel"]) c.tolerances.eps_null_rel = r.positive(t["eps_null_rel"], "tolerances.eps_null_rel");
        if (t["eps_norm_rel"]) c.tolerances.eps_norm_rel = r.positive(t["eps_norm_rel"], "tolerances.eps_norm_rel");
    }
    if (const YAML::Node v = root["seed"]) c.seed = r.scalar<std::uint64_t>(v, "seed");
    if (const YAML::Node v = root["threads"]) c.threads = r.count(v, "threads");
    if (const YAML::Node v = root["reference_point"]) c.reference_point = r.event(v, "reference_point");

    if (const YAML::Node b = root["check"]) {
        r.only_keys(b, "check", {"points"});
        if (b["points"]) c.check.points = r.count(b["points"], "check.points");
    }
    if (const YAML::Node b = root["foliation"]) {
        r.only_keys(b, "foliation", {"grid"});
        const YAML::Node g = r.required(b, "grid", "foliation");
        r.only_keys(g, "foliation.grid", {"t", "x", "y", "z"});
        FoliationBlock fb;
        const char* names[4] = {"t", "x", "y", "z"};
        for (int mu = 0; mu < 4; ++mu) {
            const std::string f = std::string("foliation.grid.") + names[mu];
            const YAML::Node ax = r.required(g, names[mu], "foliation.grid");
            if (!ax.IsSequence() || ax.size() != 3) r.fail(ax, f, "expected [lo, hi, count]");
            fb.grid[mu] = {r.real(ax[0], f + "[0]"), r.real(ax[1], f + "[1]"),
                           static_cast<int>(r.count(ax[2], f + "[2]"))};
        }
        c.foliation = fb;
    }
    if (const YAML::Node b = root["evolve"]) {
        r.only_keys(b, "evolve", {"s_max", "h0", "adaptive", "parametrization", "initial"});
        EvolveBlock eb;
        if (b["s_max"]) eb.s_max = r.positive(b["s_max"], "evolve.s_max");
        if (b["h0"]) eb.h0 = r.positive(b["h0"], "evolve.h0");
        if (b["adaptive"]) eb.adaptive = r.scalar<bool>(b["adaptive"], "evolve.adaptive");
        if (const YAML::Node p = b["parametrization"]) {
            const auto s = r.scalar<std::string>(p, "evolve.parametrization");
            if (s == "unit_rho")
                eb.parametrization = Parametrization::unit_rho;
            else if (s == "raw_current")
                eb.parametrization = Parametrization::raw_current;
            else
                r.fail(p, "evolve.parametrization", "expected unit_rho or raw_current");
        }
        const YAML::Node init = r.required(b, "initial", "evolve");
        if (!init.IsSequence() || init.size() == 0) r.fail(init, "evolve.initial", "expected a non-empty list");
        for (std::size_t i = 0; i < init.size(); ++i) {
            const std::string f = r.index("evolve.initial", i);
            if (!init[i].IsSequence() || init[i].size() != n)
                r.fail(init[i], f, "expected one event [t, x, y, z] per particle");
            std::vector<FourVector> X;
            for (std::size_t a = 0; a < n; ++a) X.push_back(r.event(init[i][a], r.index(f, a)));
            eb.initial.push_back(std::move(X));
        }
        c.evolve = eb;
    }
    if (const YAML::Node b = root["ensemble"]) {
        r.only_keys(b, "ensemble", {"samples", "s_target", "phi_levels", "mc_count", "bins", "h0"});
        EnsembleBlock eb;
        if (b["samples"]) eb.samples = r.count(b["samples"], "ensemble.samples", 2);
        if (b["s_target"]) {
            eb.s_target = r.real(b["s_target"], "ensemble.s_target");
            if (eb.s_target < 0.0) r.fail(b["s_target"], "ensemble.s_target", "must be >= 0");
        }
        if (b["phi_levels"]) eb.phi_levels = r.reals(b["phi_levels"], "ensemble.phi_levels", n);
        if (b["mc_count"]) eb.mc_count = r.count(b["mc_count"], "ensemble.mc_count", 2);
        if (b["bins"]) eb.bins = r.count(b["bins"], "ensemble.bins", 2);
        if (b["h0"]) eb.h0 = r.positive(b["h0"], "ensemble.h0");
        c.ensemble = eb;
    }
    if (const YAML::Node b = root["test_hooks"]) {
        r.only_keys(b, "test_hooks", {"off_shell"});
        if (const YAML::Node o = b["off_shell"]) {
            r.only_keys(o, "test_hooks.off_shell", {"mode", "particle", "energy"});
            OffShellHook h;
            h.mode = r.count(r.required(o, "mode", "test_hooks.off_shell"), "test_hooks.off_shell.mode", 0);
            h.particle =
                r.count(r.required(o, "particle", "test_hooks.off_shell"), "test_hooks.off_shell.particle", 0);
            h.energy = r.positive(r.required(o, "energy", "test_hooks.off_shell"), "test_hooks.off_shell.energy");
            if (h.mode >= c.modes.size()) r.fail(o["mode"], "test_hooks.off_shell.mode", "no such mode");
            if (h.particle >= n) r.fail(o["particle"], "test_hooks.off_shell.particle", "no such particle");
            c.off_shell = h;
        }
    }
    return c;
}

/// Reads and parses a scenario file. I/O failures raise std::ios_base::failure.
inline ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::ios_base::failure("cannot open config '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str(), path);
}

} // namespace properfol
