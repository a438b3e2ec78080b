#include <gtest/gtest.h>

#include <properfol/oracles.hpp>
#include <properfol/wavefunction.hpp>

#include "support.hpp"

using namespace properfol;
using pftest::kTwoPi;

namespace {

WaveFunction single(double m, LatticeIndex k, complex c, double L = kTwoPi) {
    return WaveFunction({{m, 1}}, {ModeSpec{{k}, {}, c}}, L);
}

} // namespace

TEST(Evaluate, RestPlaneWave) {
    const auto psi = single(1.0, {0, 0, 0}, 1.0);
    for (double t : {0.0, 0.4, -2.5}) {
        const std::vector<FourVector> X{{t, 0, 0, 0}};
        const complex v = evaluate(psi, X).scalar();
        EXPECT_NEAR(std::abs(v - std::polar(1.0, -t)), 0.0, 1e-14);
    }
}

TEST(Evaluate, ProductFactorizes) {
    const auto psi = WaveFunction({{1.0, 1}, {2.0, 1}}, {ModeSpec{{{1, 0, 0}, {0, -1, 2}}, {}, 1.0}}, kTwoPi);
    const auto p1 = single(1.0, {1, 0, 0}, 1.0), p2 = single(2.0, {0, -1, 2}, 1.0);
    std::mt19937_64 g(3);
    for (int i = 0; i < 20; ++i) {
        const auto X = pftest::random_events(g, 2);
        const complex both = evaluate(psi, X).scalar();
        const complex a = evaluate(p1, std::span(X).first(1)).scalar();
        const complex b = evaluate(p2, std::span(X).subspan(1)).scalar();
        EXPECT_NEAR(std::abs(both - a * b), 0.0, 1e-13);
    }
}

TEST(Evaluate, Linear) {
    std::mt19937_64 g(4);
    const auto a = pftest::random_state(g, 2, 3);
    const WaveFunction b(a.particles(), {ModeSpec{{{1, 1, 0}, {0, 0, -1}}, {}, {0.3, -0.2}}}, kTwoPi);
    const auto sum = superpose(a, b);
    for (int i = 0; i < 20; ++i) {
        const auto X = pftest::random_events(g, 2);
        EXPECT_NEAR(std::abs(evaluate(sum, X).scalar() - evaluate(a, X).scalar() - evaluate(b, X).scalar()), 0.0,
                    1e-13);
    }
}

TEST(Evaluate, WrongPointCountIsContractViolation) {
    const auto psi = single(1.0, {0, 0, 0}, 1.0);
    const std::vector<FourVector> X(2);
    EXPECT_THROW(evaluate(psi, X), ContractViolation);
}

TEST(Evaluate, ModesAreOnShell) {
    std::mt19937_64 g(5);
    for (int i = 0; i < 10; ++i) {
        const auto psi = pftest::random_state(g, 3, 4);
        for (const auto& m : psi.modes())
            for (std::size_t a = 0; a < 3; ++a) {
                const double mass = psi.particles()[a].mass;
                EXPECT_NEAR(minkowski_dot(m.momentum[a], m.momentum[a]), mass * mass, 1e-12);
                EXPECT_GT(m.momentum[a][0], 0.0);
            }
    }
}

TEST(KgResidual, VanishesOnShell) {
    std::mt19937_64 g(6);
    const auto psi = pftest::random_state(g, 3, 4);
    for (int i = 0; i < 10; ++i) {
        const auto X = pftest::random_events(g, 3);
        for (std::size_t a = 0; a < 3; ++a)
            EXPECT_LE(kg_residual(psi, a, X).norm(), 1e-10 * std::max(1.0, evaluate(psi, X).norm()));
    }
}

TEST(KgResidual, OffShellClosedForm) {
    const auto psi = single(1.0, {1, 0, 0}, 1.0);
    const auto off = properfol::testing::Hooks::with_energy(psi, 0, 0, 1.8);
    const std::vector<FourVector> X{{0.3, 0.2, -0.4, 1.0}};
    const FourVector k{1.8, 1.0, 0.0, 0.0};
    const complex expect = (1.0 - minkowski_dot(k, k)) * std::polar(1.0, -minkowski_dot(k, X[0]));
    EXPECT_NEAR(std::abs(kg_residual(off, 0, X).scalar() - expect), 0.0, 1e-13);
}

TEST(KgResidual, FiniteDifferenceOracleAgrees) {
    std::mt19937_64 g(7);
    const auto psi = pftest::random_state(g, 3, 3);
    const auto off = properfol::testing::Hooks::with_energy(psi, 1, 2, 2.9);
    for (int i = 0; i < 5; ++i) {
        auto X = pftest::random_events(g, 3);
        for (std::size_t a = 0; a < 3; ++a) {
            complex box{};
            for (int mu = 0; mu < 4; ++mu) {
                auto d1 = [&](const FourVector& y) {
                    auto Y = X;
                    Y[a] = y;
                    return oracles::fd_derivative(
                        [&](const FourVector& z) {
                            auto Z = Y;
                            Z[a] = z;
                            return evaluate(off, Z).scalar();
                        },
                        mu, y, 1e-3);
                };
                const complex d2 = oracles::fd_derivative(d1, mu, X[a], 1e-3);
                box += (mu == 0 ? 1.0 : -1.0) * d2;
            }
            const double m = off.particles()[a].mass;
            const complex fd = box + m * m * evaluate(off, X).scalar();
            EXPECT_NEAR(std::abs(fd - kg_residual(off, a, X).scalar()), 0.0, 1e-4);
        }
    }
}

TEST(KgInnerProduct, SingleModeClosedFormAndQuadrature) {
    const auto psi = single(1.0, {1, 2, 0}, {0.6, 0.8});
    const double L = kTwoPi, k0 = psi.modes()[0].momentum[0][0];
    const std::vector<double> t{0.0};
    EXPECT_NEAR(kg_inner_product(psi, psi, t).real(), k0 * L * L * L, 1e-10);
    oracles::GridSpec grid;
    grid.extent = {L, L, L};
    grid.count = {16, 16, 16};
    const auto q = oracles::hyperplane_quadrature(
        [&](const FourVector& x) {
            const std::vector<FourVector> X{x};
            return FourVector{oracles::fd_n_current(psi, X).data()[0], 0, 0, 0};
        },
        {}, grid);
    EXPECT_NEAR(q.value / (k0 * L * L * L), 1.0, 1e-6);
}

TEST(KgInnerProduct, OrthogonalModes) {
    const auto a = single(1.0, {1, 0, 0}, 1.0), b = single(1.0, {0, 1, 0}, 1.0);
    const std::vector<double> t{0.7};
    EXPECT_NEAR(std::abs(kg_inner_product(a, b, t)), 0.0, 1e-12);
}

TEST(KgInnerProduct, IndependentOfSliceTimesAndHermitian) {
    std::mt19937_64 g(8);
    const auto psi = pftest::random_state(g, 3, 4);
    const WaveFunction chi2(psi.particles(), {ModeSpec{{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {}, 1.0}}, kTwoPi);
    std::uniform_real_distribution<double> u(-5, 5);
    const std::vector<double> t0{0, 0, 0};
    const double n0 = kg_inner_product(psi, psi, t0).real();
    for (int i = 0; i < 5; ++i) {
        const std::vector<double> t{u(g), u(g), u(g)};
        EXPECT_NEAR(kg_inner_product(psi, psi, t).real(), n0, 1e-10);
        EXPECT_NEAR(std::abs(kg_inner_product(psi, chi2, t) - std::conj(kg_inner_product(chi2, psi, t))), 0.0,
                    1e-12);
    }
}

TEST(KgInnerProduct, IncompatibleStatesRejected) {
    const auto a = single(1.0, {1, 0, 0}, 1.0), b = single(2.0, {1, 0, 0}, 1.0);
    const std::vector<double> t{0.0};
    EXPECT_THROW(kg_inner_product(a, b, t), ContractViolation);
}

TEST(Normalize, SingleModeAndIdempotent) {
    const auto psi = single(1.0, {0, 1, 1}, {2.0, 0.0});
    const double k0 = psi.modes()[0].momentum[0][0], L = kTwoPi;
    const auto n = normalize(psi);
    EXPECT_NEAR(std::abs(n.modes()[0].coefficient), 1.0 / std::sqrt(k0 * L * L * L), 1e-14);
    EXPECT_NEAR(kg_norm(n), 1.0, 1e-12);
    const auto nn = normalize(n);
    EXPECT_NEAR(std::abs(nn.modes()[0].coefficient - n.modes()[0].coefficient), 0.0, 1e-12);
}

TEST(Normalize, TwoModesWithNormFourAreHalved) {
    const double L = 1.0;
    const double k1 = on_shell_energy(1.0, {kTwoPi, 0, 0}), k2 = on_shell_energy(1.0, {0, 0, 0});
    // |c1|^2 k1 + |c2|^2 k2 = 4 with |c1| = |c2|
    const double c = std::sqrt(4.0 / (k1 + k2));
    const WaveFunction psi({{1.0, 1}}, {ModeSpec{{{1, 0, 0}}, {}, c}, ModeSpec{{{0, 0, 0}}, {}, c}}, L);
    EXPECT_NEAR(kg_norm(psi), 4.0, 1e-12);
    const auto n = normalize(psi);
    for (const auto& m : n.modes()) EXPECT_NEAR(m.coefficient.real(), 0.5 * c, 1e-14);
}

TEST(Normalize, SpatialIntegralMatchesClosedFormForSuperposition) {
    std::mt19937_64 g(9);
    const auto psi = pftest::random_state(g, 1, 3);
    oracles::GridSpec grid;
    grid.extent = {kTwoPi, kTwoPi, kTwoPi};
    grid.count = {16, 16, 16};
    const auto q = oracles::hyperplane_quadrature(
        [&](const FourVector& x) {
            const std::vector<FourVector> X{x};
            return FourVector{oracles::fd_n_current(psi, X).data()[0], 0, 0, 0};
        },
        {}, grid);
    EXPECT_NEAR(q.value, 1.0, 1e-6);
}

TEST(Construction, Validation) {
    EXPECT_THROW(WaveFunction({{0.0, 1}}, {ModeSpec{{{0, 0, 0}}, {}, 1.0}}, 1.0), DomainError);
    EXPECT_THROW(WaveFunction({{1.0, 2}}, {ModeSpec{{{0, 0, 0}}, {}, 1.0}}, 1.0), DomainError);
    EXPECT_THROW(WaveFunction({{1.0, 1}}, {ModeSpec{{{0, 0, 0}}, {}, 0.0}}, 1.0), DegenerateStateError);
    EXPECT_THROW(WaveFunction({{1.0, 1}}, {}, 1.0), DegenerateStateError);
    EXPECT_THROW(WaveFunction({{1.0, 1}}, {ModeSpec{{{0, 0, 0}}, {}, 1.0}, ModeSpec{{{0, 0, 0}}, {}, 2.0}}, 1.0),
                 ContractViolation);
    EXPECT_THROW(WaveFunction({{1.0, 4}}, {ModeSpec{{{0, 0, 0}}, {}, 1.0}}, 1.0), ContractViolation);
    EXPECT_THROW(WaveFunction({{1.0, 1}}, {ModeSpec{{{0, 0, 0}}, {}, 1.0}}, -1.0), DomainError);
    EXPECT_THROW(normalize(properfol::testing::Hooks::with_energy(single(1.0, {0, 0, 0}, 1.0), 0, 0, -1.0)),
                 DegenerateStateError);
}

TEST(Construction, DifferencesOfEqualMassMomentaAreSpacelike) {
    std::mt19937_64 g(10);
    for (int i = 0; i < 20; ++i) {
        const auto psi = pftest::random_state(g, 2, 4);
        for (std::size_t a = 0; a < 2; ++a)
            for (const auto& x : psi.modes())
                for (const auto& y : psi.modes()) {
                    if (x.lattice[a] == y.lattice[a]) continue;
                    const FourVector q = x.momentum[a] - y.momentum[a];
                    EXPECT_LT(minkowski_dot(q, q), 0.0);
                }
    }
}

TEST(DiracSpinor, RestFrameAndNormalization) {
    const Spinor u = dirac_positive_spinor(1.0, {0, 0, 0}, 1);
    EXPECT_NEAR(std::abs(u[0]), 1.0, 1e-15);
    for (int i = 1; i < 4; ++i) EXPECT_EQ(std::abs(u[i]), 0.0);
    std::mt19937_64 g(11);
    std::uniform_real_distribution<double> m(0.2, 3.0), p(-4.0, 4.0);
    for (int i = 0; i < 50; ++i) {
        const double mass = m(g);
        const Vec3 mom{p(g), p(g), p(g)};
        const Spinor v = dirac_positive_spinor(mass, mom, 1 + i % 2);
        double nrm = 0.0;
        for (const auto& c : v) nrm += std::norm(c);
        EXPECT_NEAR(nrm, 1.0, 1e-12);
        // (gamma^mu k_mu - m) u = 0
        const FourVector kl = lower(on_shell_momentum(mass, mom));
        Spinor res{};
        for (int mu = 0; mu < 4; ++mu) {
            const Spinor gu = multiply(gamma_upper(mu), v);
            for (int r = 0; r < 4; ++r) res[r] += kl[mu] * gu[r];
        }
        for (int r = 0; r < 4; ++r) EXPECT_NEAR(std::abs(res[r] - mass * v[r]), 0.0, 1e-10);
    }
    EXPECT_THROW(dirac_positive_spinor(1.0, {0, 0, 0}, 3), DomainError);
}
