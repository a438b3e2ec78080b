#include <gtest/gtest.h>

#include <properfol/currents.hpp>
#include <properfol/oracles.hpp>

#include "support.hpp"

using namespace properfol;
using pftest::kTwoPi;

namespace {

double rel_diff(const MinkowskiTensor& a, const MinkowskiTensor& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d / std::max(1e-300, b.max_abs());
}

WaveFunction two_mode_single(double m = 1.0) {
    return normalize(
        WaveFunction({{m, 1}}, {ModeSpec{{{1, 0, 0}}, {}, 1.0}, ModeSpec{{{0, -1, 2}}, {}, {0.4, 0.7}}}, kTwoPi));
}

} // namespace

TEST(NCurrent, SingleModeIsCoefficientTimesMomentum) {
    const auto psi = WaveFunction({{1.5, 1}}, {ModeSpec{{{1, 2, -1}}, {}, {0.3, 0.4}}}, kTwoPi);
    const FourVector k = lower(psi.modes()[0].momentum[0]);
    std::mt19937_64 g(20);
    for (int i = 0; i < 10; ++i) {
        const auto X = pftest::random_events(g, 1);
        const auto j = n_current(psi, X).value;
        for (int mu = 0; mu < 4; ++mu) EXPECT_NEAR(j[static_cast<std::size_t>(mu)], 0.25 * k[mu], 1e-13);
    }
}

TEST(NCurrent, ProductOfModesFactorizes) {
    const auto psi = WaveFunction({{1.0, 1}, {2.0, 1}}, {ModeSpec{{{1, 0, 0}, {0, 1, 1}}, {}, 2.0}}, kTwoPi);
    const FourVector k1 = lower(psi.modes()[0].momentum[0]), k2 = lower(psi.modes()[0].momentum[1]);
    const std::vector<FourVector> X{{0.1, 0.2, 0.3, 0.4}, {1.0, 2.0, 3.0, 4.0}};
    const auto j = n_current(psi, X).value;
    for (int mu = 0; mu < 4; ++mu)
        for (int nu = 0; nu < 4; ++nu)
            EXPECT_NEAR(j.at(std::array{mu, nu}), 4.0 * k1[mu] * k2[nu], 1e-12);
}

TEST(NCurrent, TwoModeMatchesFiniteDifferenceOracle) {
    const auto psi = two_mode_single();
    std::mt19937_64 g(21);
    for (int i = 0; i < 20; ++i) {
        const auto X = pftest::random_events(g, 1);
        const auto a = n_current(psi, X).value;
        const auto b = oracles::fd_n_current(psi, X);
        for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-6 * std::max(1.0, a.max_abs()));
    }
}

TEST(NCurrent, RandomStatesMatchOracle) {
    std::mt19937_64 g(22);
    for (std::size_t n = 1; n <= 3; ++n) {
        const auto psi = pftest::random_state(g, n, 3);
        const auto X = pftest::random_events(g, n);
        EXPECT_LE(rel_diff(oracles::fd_n_current(psi, X), n_current(psi, X).value), 1e-6);
    }
}

TEST(Conservation, AnalyticResidualVanishesOnShell) {
    std::mt19937_64 g(23);
    for (int s = 0; s < 10; ++s) {
        const std::size_t n = 1 + static_cast<std::size_t>(s % 3);
        const auto psi = pftest::random_state(g, n, 4);
        const auto X = pftest::random_events(g, n);
        const double scale = std::max(1.0, n_current(psi, X).value.max_abs());
        for (std::size_t a = 0; a < n; ++a) EXPECT_LE(conservation_residual(psi, a, X).max_abs(), 1e-10 * scale);
    }
}

TEST(Conservation, OffShellResidualClosedForm) {
    const auto psi = two_mode_single();
    const auto off = properfol::testing::Hooks::with_energy(psi, 1, 0, 3.0);
    const std::vector<FourVector> X{{0.4, 1.0, -0.5, 2.0}};
    const auto r = conservation_residual(off, 0, X);
    // only the cross pairs survive: 2 Re[ i (k_l.k_l - k_r.k_r)/2 c_l^* c_r e^{i(k_l-k_r).x} ]
    const auto& m = off.modes();
    const FourVector k0 = m[0].momentum[0], k1 = m[1].momentum[0];
    const complex cross = std::conj(m[0].coefficient) * m[1].coefficient *
                          std::polar(1.0, minkowski_dot(k0 - k1, X[0])) * complex{0.0, 0.5} *
                          (minkowski_dot(k0, k0) - minkowski_dot(k1, k1));
    EXPECT_NEAR(r[0], 2.0 * cross.real(), 1e-12);
    EXPECT_GT(std::abs(r[0]), 1e-6);
}

TEST(Conservation, FiniteDifferenceDivergenceAgrees) {
    std::mt19937_64 g(24);
    const auto psi = pftest::random_state(g, 2, 3);
    const auto off = properfol::testing::Hooks::with_energy(psi, 0, 1, psi.modes()[0].momentum[1][0] + 0.5);
    for (int i = 0; i < 3; ++i) {
        const auto X = pftest::random_events(g, 2);
        for (std::size_t a = 0; a < 2; ++a) {
            const auto fd = oracles::fd_divergence(
                [&](std::span<const FourVector> Y) { return n_current(off, Y).value; }, a, X, 1e-3);
            const auto an = conservation_residual(off, a, X);
            for (std::size_t k = 0; k < fd.size(); ++k) EXPECT_NEAR(fd[k], an[k], 1e-4);
        }
    }
}

TEST(MarginalCurrent, ProductStateIsConstantAlongMomentum) {
    const auto psi = normalize(WaveFunction({{1.0, 1}, {2.0, 1}}, {ModeSpec{{{1, 0, 0}, {0, 1, 1}}, {}, 1.0}}, kTwoPi));
    const auto jc = marginal_current(psi, 0);
    const FourVector k = lower(psi.modes()[0].momentum[0]);
    std::mt19937_64 g(25);
    const FourVector j0 = jc({0, 0, 0, 0});
    for (int i = 0; i < 10; ++i) {
        const FourVector j = jc(pftest::random_events(g, 1)[0]);
        EXPECT_LE(pftest::max_abs_diff(j, j0), 1e-14);
        for (int mu = 0; mu < 4; ++mu) EXPECT_NEAR(j[mu] * k[0], j[0] * k[mu], 1e-12);
    }
    EXPECT_GT(j0[0], 0.0);
}

TEST(MarginalCurrent, EntangledClosedFormNoCrossTerm) {
    const auto psi = pftest::headline_state();
    const auto& m = psi.modes();
    const double L3 = std::pow(kTwoPi, 3);
    const FourVector expect = std::norm(m[0].coefficient) * m[0].momentum[1][0] * L3 * lower(m[0].momentum[0]) +
                              std::norm(m[1].coefficient) * m[1].momentum[1][0] * L3 * lower(m[1].momentum[0]);
    const auto jc = marginal_current(psi, 0);
    std::mt19937_64 g(26);
    for (int i = 0; i < 10; ++i)
        EXPECT_LE(pftest::max_abs_diff(jc(pftest::random_events(g, 1)[0]), expect), 1e-12);
}

TEST(MarginalCurrent, MatchesQuadratureOfNCurrent) {
    std::mt19937_64 g(27);
    const auto psi = pftest::random_state(g, 2, 3);
    const auto jc = marginal_current(psi, 1);
    oracles::GridSpec grid;
    grid.extent = {kTwoPi, kTwoPi, kTwoPi};
    grid.count = {16, 16, 16};
    const FourVector x1{0.3, 1.0, 2.0, 0.5};
    FourVector quad;
    for (int mu = 0; mu < 4; ++mu) {
        const auto r = oracles::hyperplane_quadrature(
            [&](const FourVector& x0) {
                const std::vector<FourVector> X{x0, x1};
                const auto j = n_current(psi, X).value;
                return FourVector{j.at(std::array{0, mu}), j.at(std::array{1, mu}), j.at(std::array{2, mu}),
                                  j.at(std::array{3, mu})};
            },
            {}, grid);
        quad[static_cast<std::size_t>(mu)] = r.value;
    }
    const FourVector exact = jc(x1);
    EXPECT_LE(pftest::max_abs_diff(quad, exact), 1e-6 * euclidean_norm(exact));
}

TEST(MarginalCurrent, SliceTimeIndependentAndDivergenceFree) {
    std::mt19937_64 g(28);
    const auto psi = pftest::random_state(g, 3, 4);
    std::uniform_real_distribution<double> u(-3, 3);
    for (std::size_t a = 0; a < 3; ++a) {
        const auto base = marginal_current(psi, a);
        const std::vector<double> t{u(g), u(g), u(g)};
        const auto moved = marginal_current(psi, a, t);
        for (int i = 0; i < 5; ++i) {
            const FourVector x = pftest::random_events(g, 1)[0];
            EXPECT_LE(pftest::max_abs_diff(base(x), moved(x)), 1e-10);
            EXPECT_LE(std::abs(base.divergence(x)), 1e-10);
        }
    }
}

TEST(MarginalCurrent, RequiresNormalizedState) {
    const WaveFunction psi({{1.0, 1}}, {ModeSpec{{{0, 0, 0}}, {}, 3.0}}, kTwoPi);
    EXPECT_THROW(marginal_current(psi, 0), ContractViolation);
}

TEST(Covariance, NCurrentTransformsAsTensor) {
    std::mt19937_64 g(29);
    const auto psi = pftest::random_state(g, 2, 3);
    const Boost b(0.5, {0.0, 0.6, 0.8});
    const auto boosted = properfol::testing::Hooks::boosted(psi, b);
    const auto Lm = b.inverse().matrix();
    for (int i = 0; i < 10; ++i) {
        const auto X = pftest::random_events(g, 2);
        std::vector<FourVector> BX;
        for (const auto& x : X) BX.push_back(apply_boost(b, x));
        const auto j = n_current(psi, X).value;
        const auto jb = n_current(boosted, BX).value;
        // covariant indices: j'_{mu nu} = (L^-1)^a_mu (L^-1)^b_nu j_{ab}
        for (int mu = 0; mu < 4; ++mu)
            for (int nu = 0; nu < 4; ++nu) {
                double s = 0.0;
                for (int a = 0; a < 4; ++a)
                    for (int c = 0; c < 4; ++c) s += Lm[a][mu] * Lm[c][nu] * j.at(std::array{a, c});
                EXPECT_NEAR(jb.at(std::array{mu, nu}), s, 1e-8);
            }
    }
}

TEST(DiracCurrent, RestSpinor) {
    const WaveFunction psi({{1.0, 4}}, {ModeSpec{{{0, 0, 0}}, {{1.0, 0.0, 0.0, 0.0}}, {0.5, 0.0}}}, kTwoPi);
    const std::vector<FourVector> X{{0.3, 1, 2, 3}};
    const auto j = dirac_current(psi, X).value;
    EXPECT_NEAR(j[0], 0.25, 1e-14);
    for (std::size_t mu = 1; mu < 4; ++mu) EXPECT_NEAR(j[mu], 0.0, 1e-14);
}

TEST(DiracCurrent, PositiveTimeComponentAndTimelike) {
    std::mt19937_64 g(30);
    for (int s = 0; s < 5; ++s) {
        const auto psi = pftest::random_state(g, 1 + static_cast<std::size_t>(s % 2), 3, 4);
        const std::size_t n = psi.particle_count();
        for (int i = 0; i < 200; ++i) {
            const auto X = pftest::random_events(g, n);
            const auto j = dirac_current(psi, X).value;
            EXPECT_GT(j[0], 0.0);
            if (n == 1) {
                const FourVector v{j[0], j[1], j[2], j[3]};
                EXPECT_GE(minkowski_dot(v, v), -1e-14 * j[0] * j[0]);
            }
        }
    }
}

TEST(DiracCurrent, ConservedAndDifferentFromScalarCurrent) {
    std::mt19937_64 g(31);
    const auto psi = pftest::random_state(g, 2, 3, 4);
    const auto X = pftest::random_events(g, 2);
    for (std::size_t a = 0; a < 2; ++a) {
        EXPECT_LE(dirac_conservation_residual(psi, a, X).max_abs(), 1e-10);
        EXPECT_LE(conservation_residual(psi, a, X).max_abs(), 1e-10);
        const auto fd = oracles::fd_divergence(
            [&](std::span<const FourVector> Y) { return dirac_current(psi, Y).value; }, a, X, 1e-3);
        EXPECT_LE(fd.max_abs(), 1e-4);
    }
    EXPECT_GT(rel_diff(dirac_current(psi, X).value, n_current(psi, X).value), 1e-3);
}

TEST(DiracCurrent, ScalarParticleRejected) {
    const WaveFunction psi({{1.0, 1}}, {ModeSpec{{{0, 0, 0}}, {}, 1.0}}, kTwoPi);
    const std::vector<FourVector> X{{0, 0, 0, 0}};
    EXPECT_THROW(dirac_current(psi, X), UnsupportedSpinError);
}
