#include "decaylab/constructions.hpp"

#include <gtest/gtest.h>

using namespace decaylab;

namespace {

const double two_pi = 2.0 * std::numbers::pi;

cplx expi(double t) { return {std::cos(t), std::sin(t)}; }

// Transform of the uniform probability on [a, b].
cplx interval_transform(double a, double b, double xi)
{
    if (xi == 0.0) return 1.0;
    return (expi(-two_pi * xi * b) - expi(-two_pi * xi * a)) / (cplx(0, -two_pi * xi) * (b - a));
}

// Gauss-Legendre on [a, b] split into `panels`, 5 nodes each.
template <class F>
cplx gauss(F&& f, double a, double b, int panels)
{
    static const double x[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831, 0.9061798459386640};
    static const double w[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665, 0.2369268850561891};
    cplx s{0, 0};
    const double h = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        const double c = a + (p + 0.5) * h;
        for (int k = 0; k < 5; ++k) s += w[k] * f(c + 0.5 * h * x[k]);
    }
    return s * (0.5 * h);
}

GridMeasure cantor(std::uint64_t seed, int depth = 5) { return make_random_frostman({2, {2}, depth, seed}).measure; }

}  // namespace

TEST(FourierAt, NormalizationBoundAndSymmetry)
{
    auto mu = cantor(3);
    EXPECT_EQ(fourier_at(mu, 0.0), cplx(mu.total_mass, 0.0));
    for (double xi : {0.5, 3.0, 77.7, 1234.5}) {
        const cplx f = fourier_at(mu, xi), g = fourier_at(mu, -xi);
        EXPECT_LE(std::abs(f), mu.total_mass + 1e-15);
        EXPECT_EQ(g, std::conj(f));
    }
}

TEST(FourierAt, UniformZeroAndPointMass)
{
    // Nominal delta = 2^-7, grid 2^-10.
    EXPECT_LE(std::abs(fourier_at(uniform(0, 1, 10), 1.0)), 2e-3);
    auto p = point_mass(0.375, 12);
    for (double xi : {1.0, 10.0, 333.3}) EXPECT_NEAR(std::abs(fourier_at(p, xi)), 1.0, 1e-14);
}

TEST(ProductFourier, IdentitiesAndDoubleSum)
{
    auto mu = cantor(5);
    // Atoms sit at cell centres, so the point mass is at 1 - 2^-13.
    const double x0 = 1.0 - dyadic(13);
    auto one = point_mass(x0, 12);
    ASSERT_EQ(atoms(one).front().x, x0);
    for (double xi : {2.0, 50.0, 900.0}) EXPECT_LT(std::abs(product_fourier(mu, one, xi) - fourier_at(mu, xi * x0)), 1e-13);

    auto nu = cantor(6);
    EXPECT_NEAR(std::abs(product_fourier(mu, nu, 0.0)), mu.total_mass * nu.total_mass, 1e-14);

    auto u = uniform(1, 2, 6);
    const auto a = atoms(u);
    cplx direct{0, 0};
    for (auto& p : a)
        for (auto& q : a) direct += p.mass * q.mass * expi(-two_pi * 64.0 * p.x * q.x);
    EXPECT_LT(std::abs(product_fourier(u, u, 64.0) - direct), 1e-10);
}

TEST(ProductFourier, AgreesWithRoutedProduct)
{
    // Nominal delta = 2^-7 at oversampling 8.
    auto mu = cantor(8), nu = cantor(9);
    auto mu8 = refine(mu, 13), nu8 = refine(nu, 13);
    auto prod = convolve(mu8, nu8, ConvOp::mul);
    for (double xi : {16.0, 100.0, 255.0}) EXPECT_LT(std::abs(product_fourier(mu8, nu8, xi) - fourier_at(prod, xi)), 3e-2) << xi;
}

TEST(ProductFourierCells, SingleFactorIsCellDensityTransform)
{
    auto u = uniform(1, 2, 8);
    for (double xi : {3.3, 40.0, 999.0}) EXPECT_LT(std::abs(product_fourier_cells({u}, xi) - interval_transform(1, 2, xi)), 1e-12) << xi;
}

TEST(ProductFourierCells, PairMatchesQuadrature)
{
    // (u x u)^(xi) = int_1^2 (uniform[y, 2y])^(xi) dy for u uniform on [1,2].
    auto u = uniform(1, 2, 10);
    for (double xi : {40.0, 300.0}) {
        const cplx exact = gauss([&](double y) { return interval_transform(y, 2 * y, xi); }, 1.0, 2.0, 4000);
        EXPECT_LT(std::abs(product_fourier_cells({u, u}, xi) - exact), 2e-6) << xi;
    }
}

TEST(L2AtScale, UniformPointAndCounterexample)
{
    // 1 - E|X - Y| for X, Y independent with the normalized bump law, by
    // direct quadrature of the bump density.
    auto bump_oracle = [](double delta) {
        const int n = 4000;
        std::vector<double> x(2 * n + 1), p(2 * n + 1);
        double tot = 0;
        for (int i = 0; i <= 2 * n; ++i) {
            x[i] = -1.0 + double(i) / n;
            const double u = std::clamp(2 * std::abs(x[i]) - 1, 0.0, 1.0);
            p[i] = 1 - (3 * u * u - 2 * u * u * u);
            tot += p[i];
        }
        double e = 0;
        for (int i = 0; i <= 2 * n; ++i)
            for (int j = 0; j <= 2 * n; j += 1) e += p[i] * p[j] * std::abs(x[i] - x[j]);
        return 1 - delta * e / (tot * tot);
    };
    auto u = uniform(0, 1, 10);
    EXPECT_NEAR(std::pow(l2_at_scale(u, dyadic(2)), 2), bump_oracle(dyadic(2)), 2e-3);
    EXPECT_NEAR(std::pow(l2_at_scale(u, dyadic(3)), 2), bump_oracle(dyadic(3)), 2e-3);
    for (int e : {3, 4, 7}) {
        const double v = std::pow(l2_at_scale(u, dyadic(e)), 2);
        EXPECT_GE(v, 0.9);
        EXPECT_LE(v, 1.3);
    }
    const double d = dyadic(6);
    const double v = std::pow(l2_at_scale(point_mass(0.5, 12), d), 2);
    EXPECT_GE(v, 1 / (2 * d));
    EXPECT_LE(v, 2 / d);

    auto L = make_L2_counterexample(0.4, dyadic(20));
    const double r = std::pow(l2_at_scale(L.measure, dyadic(20)), 2) / std::pow(dyadic(20), 0.4 - 1.0);
    EXPECT_GE(r, 0.25);
    EXPECT_LE(r, 4.0);
}

TEST(L2AtScale, PlancherelAgainstTransform)
{
    auto tent = from_density([](double x) { return 1 - std::abs(2 * x - 1); }, 0, 1, 7);
    auto g = regularize(tent, dyadic(4));
    const double lhs = l2sq_density(g);
    const double X = 16.0 / g.scale(), dx = 0.25;
    double rhs = 0.0;
    for (double xi = -X; xi <= X; xi += dx) rhs += std::norm(product_fourier_cells({g}, xi)) * dx;
    EXPECT_NEAR(rhs / lhs, 1.0, 0.02);
}

TEST(DecayProfile, PointUniformAndTranslation)
{
    auto p = decay_profile(point_mass(1.0 - dyadic(13), 12), 16, 256, 24);
    EXPECT_NEAR(p.tau_hat, 0.0, 1e-9);

    auto u = decay_profile(uniform(1, 2, 12), 16, 256, 64);
    EXPECT_GE(u.tau_hat, 0.8);
    EXPECT_LE(u.tau_hat, 1.2);

    auto mu = cantor(12, 6);
    auto a = decay_profile(mu, 8, 500, 30), b = decay_profile(shifted(mu, 0.75), 8, 500, 30);
    EXPECT_NEAR(a.tau_hat, b.tau_hat, 1e-9);
}

TEST(DecayProfile, FitIsExactOnPowerLaws)
{
    auto xi = log_band(10, 1000, 17);
    std::vector<double> mag;
    for (double x : xi) mag.push_back(3.0 * std::pow(x, -0.7));
    auto f = fit_decay(xi, mag);
    EXPECT_NEAR(f.tau_hat, 0.7, 1e-12);
    EXPECT_NEAR(f.fit_residual, 0.0, 1e-12);

    auto z = fit_decay(xi, std::vector<double>(xi.size(), 0.0));
    EXPECT_TRUE(z.degenerate);
    EXPECT_EQ(z.floor_hits, xi.size());
    EXPECT_TRUE(std::isinf(z.tau_hat));
    EXPECT_THROW(log_band(0.5, 10, 5), contract_error);
    EXPECT_THROW(log_band(1, 10, 2), contract_error);
}

TEST(BandExponent, Definition)
{
    EXPECT_NEAR(band_exponent(std::pow(dyadic(10), 0.3), dyadic(10)), 0.3, 1e-12);
    EXPECT_TRUE(std::isinf(band_exponent(0.0, dyadic(10))));
}

TEST(L2Bound, PointMassesAndUniforms)
{
    const double d = dyadic(6);
    auto one = point_mass(1.0 - dyadic(13), 12);
    auto r = l2_bound(one, one, d, 1 / d);
    EXPECT_NEAR(r.A, 4 / d, 1e-9);
    EXPECT_NEAR(r.bound, 4 / d / std::sqrt(1 / d) + d, 1e-9);
    EXPECT_NEAR(r.actual, 1.0, 1e-12);

    auto u = uniform(1, 2, 11);
    auto q = l2_bound(u, u, dyadic(8), 256);
    EXPECT_LE(q.A, 1.05);
    EXPECT_GE(q.bound, q.actual);
    EXPECT_THROW(l2_bound(u, u, dyadic(8), 0.5), contract_error);
}

TEST(L2Bound, RatioOnCantorPairs)
{
    const double d = dyadic(10);
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto mu = shifted(cantor(100 + seed), 1.0), nu = shifted(cantor(200 + seed), 1.0);
        worst = std::max(worst, l2_bound(mu, nu, d, 1 / d).ratio);
    }
    EXPECT_LE(worst, 8.0);
}

TEST(OrderCheck, EqualityCasesAndRandomPairs)
{
    auto pm = point_mass(0.3, 10);
    auto nu = shifted(cantor(2), 1.0);
    auto e = order_check(pm, nu, 17.0);
    EXPECT_NEAR(e.rhs, 1.0, 1e-12);
    EXPECT_LE(e.lhs, e.rhs);

    auto u = uniform(0, 1, 6);
    auto s = order_check(u, point_mass(0.7, 9), 33.0);
    EXPECT_NEAR(s.lhs, s.rhs, 1e-15);

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto c = order_check(cantor(seed), shifted(cantor(seed + 50), 1.0), 100.0);
        EXPECT_TRUE(c.holds());
        EXPECT_GE(c.rhs, 0.0);
    }
}
