#include <gtest/gtest.h>

#include <properfol/spacetime.hpp>

#include "support.hpp"

using namespace properfol;

TEST(MinkowskiDot, SignatureAndNullVectors) {
    EXPECT_EQ(minkowski_dot(FourVector{1, 0, 0, 0}, FourVector{1, 0, 0, 0}), 1.0);
    EXPECT_EQ(minkowski_dot(FourVector{1, 1, 0, 0}, FourVector{1, 1, 0, 0}), 0.0);
    const FourVector k = on_shell_momentum(1.0, {3, 0, 0});
    EXPECT_NEAR(k[0], std::sqrt(10.0), 1e-15);
    EXPECT_NEAR(minkowski_dot(k, k), 1.0, 1e-12);
}

TEST(MinkowskiDot, SymmetricAndBilinear) {
    std::mt19937_64 g(1);
    for (int i = 0; i < 50; ++i) {
        const auto u = pftest::random_vector(g), v = pftest::random_vector(g), w = pftest::random_vector(g);
        EXPECT_DOUBLE_EQ(minkowski_dot(u, v), minkowski_dot(v, u));
        EXPECT_NEAR(minkowski_dot(2.0 * u + w, v), 2.0 * minkowski_dot(u, v) + minkowski_dot(w, v), 1e-14);
    }
}

TEST(LowerRaise, FlipsSpatialSigns) {
    const FourVector v{1, 2, 3, 4};
    EXPECT_EQ(lower(v), (FourVector{1, -2, -3, -4}));
    EXPECT_EQ(raise(lower(v)), v);
    EXPECT_DOUBLE_EQ(contract(lower(v), v), minkowski_dot(v, v));
}

TEST(Boost, ZeroRapidityIsIdentity) {
    const Boost b(0.0, {0, 0, 1});
    const FourVector v{0.3, -1.2, 2.0, 0.7};
    EXPECT_EQ(apply_boost(b, v), v);
}

TEST(Boost, RestVectorAlongZ) {
    const double eta = 0.8;
    const FourVector r = apply_boost(Boost(eta, {0, 0, 1}), {1, 0, 0, 0});
    EXPECT_NEAR(r[0], std::cosh(eta), 1e-15);
    EXPECT_NEAR(r[1], 0.0, 1e-15);
    EXPECT_NEAR(r[2], 0.0, 1e-15);
    EXPECT_NEAR(r[3], std::sinh(eta), 1e-15);
}

TEST(Boost, PreservesMinkowskiProduct) {
    std::mt19937_64 g(2);
    std::uniform_real_distribution<double> eta(-2.0, 2.0);
    for (int i = 0; i < 100; ++i) {
        Vec3 axis{eta(g), eta(g), eta(g)};
        const double n = euclidean_norm(axis);
        for (auto& c : axis) c /= n;
        const Boost b(eta(g), axis);
        const auto u = pftest::random_vector(g), v = pftest::random_vector(g);
        EXPECT_NEAR(minkowski_dot(apply_boost(b, u), apply_boost(b, v)), minkowski_dot(u, v), 1e-12);
    }
}

TEST(Boost, MatrixPreservesMetric) {
    const auto L = Boost(1.1, {0.6, 0.0, 0.8}).matrix();
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            double s = 0.0;
            for (int k = 0; k < 4; ++k) s += L[k][i] * metric_diag[static_cast<std::size_t>(k)] * L[k][j];
            EXPECT_NEAR(s, i == j ? metric_diag[static_cast<std::size_t>(i)] : 0.0, 1e-12);
        }
}

TEST(Boost, CollinearRapiditiesAdd) {
    const Vec3 axis{0.0, 0.6, 0.8};
    const auto ab = compose(Boost(0.4, axis).matrix(), Boost(-1.3, axis).matrix());
    const auto c = Boost(-0.9, axis).matrix();
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) EXPECT_NEAR(ab[i][j], c[i][j], 1e-12);
}

TEST(Boost, CovariantComponentsKeepContractions) {
    const Boost b(0.7, {1, 0, 0});
    const FourVector f{2.0, 0.3, -0.1, 0.5}, v{1.4, 0.2, 0.9, -0.3};
    EXPECT_NEAR(contract(apply_boost_covariant(b, f), apply_boost(b, v)), contract(f, v), 1e-12);
}

TEST(Boost, RejectsNonUnitAxis) {
    EXPECT_THROW(Boost(0.1, {1, 1, 0}), DomainError);
    EXPECT_THROW(Boost(INFINITY, {1, 0, 0}), DomainError);
}

TEST(OnShellEnergy, Values) {
    EXPECT_EQ(on_shell_energy(1.0, {0, 0, 0}), 1.0);
    EXPECT_NEAR(on_shell_energy(1.0, {3, 4, 0}), std::sqrt(26.0), 1e-15);
    EXPECT_GT(on_shell_energy(1e-3, {0, 0, 0}), 0.0);
}

TEST(OnShellEnergy, RejectsNonPositiveMass) {
    EXPECT_THROW(on_shell_energy(0.0, {1, 0, 0}), DomainError);
    EXPECT_THROW(on_shell_energy(-1.0, {1, 0, 0}), DomainError);
}
