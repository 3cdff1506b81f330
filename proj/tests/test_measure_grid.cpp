#include "decaylab/measure_grid.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace decaylab;

namespace {

// Composite Simpson on the raw bump, split at the breakpoints; independent
// of kernel_cdf.
double simpson(double a, double b)
{
    const int n = 2000;
    const double h = (b - a) / n;
    double s = kernel_shape(a) + kernel_shape(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * kernel_shape(a + i * h);
    return s * h / 3.0;
}

double bump_integral(double a, double b)
{
    double s = 0.0, lo = a;
    for (double c : {-0.5, 0.5, b}) {
        const double hi = std::min(c, b);
        if (hi > lo) s += simpson(lo, hi), lo = hi;
    }
    return s;
}

GridMeasure random_measure(std::mt19937_64& rng, int level, std::int64_t first, std::size_t n)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> m(n);
    for (auto& v : m) v = u(rng) < 0.3 ? 0.0 : u(rng);
    m[0] += 0.1;
    return from_cells(level, first, m, true);
}

}  // namespace

TEST(Construct, UniformUnitInterval)
{
    auto mu = uniform(1.0, 2.0, 10);
    EXPECT_EQ(mu.size(), 1024u);
    EXPECT_EQ(mu.first, 1024);
    EXPECT_NEAR(mu.total_mass, 1.0, 1e-14);
    for (double m : mu.masses) EXPECT_DOUBLE_EQ(m, 1.0 / 1024);
}

TEST(Construct, UniformOffGrid)
{
    auto mu = uniform(0.3, 0.7, 4);
    EXPECT_NEAR(mu.total_mass, 1.0, 1e-14);
    // [0.3, 0.7) at h = 1/16: partial first cell [0.25, 0.3125) carries 0.0125/0.4.
    EXPECT_NEAR(mu.masses.front(), 0.0125 / 0.4, 1e-14);
    EXPECT_NEAR(mu.masses.back(), (0.7 - 0.6875) / 0.4, 1e-14);
}

TEST(Construct, RejectsNegativeMass)
{
    try {
        from_cells(4, 0, {0.1, -0.2});
        FAIL();
    } catch (const contract_error& e) {
        EXPECT_NE(std::string(e.what()).find("cell 1"), std::string::npos);
    }
}

TEST(Construct, DensityNegativeSampleNamesCoordinate)
{
    try {
        from_density([](double x) { return x - 0.5; }, 0.0, 1.0, 3);
        FAIL();
    } catch (const contract_error& e) {
        EXPECT_NE(std::string(e.what()).find("x=0.0625"), std::string::npos);
    }
}

TEST(Construct, AtomOutsideWindow)
{
    EXPECT_THROW(from_atoms({{1.5, 1.0}}, 0.0, 1.0, 4), contract_error);
    auto mu = from_atoms({{0.5, 1.0}, {0.25, 3.0}}, 0.0, 1.0, 2);
    EXPECT_DOUBLE_EQ(mu.masses[1], 0.75);
    EXPECT_DOUBLE_EQ(mu.masses[2], 0.25);
}

TEST(Construct, PointMass)
{
    auto p = point_mass(1.0, 10);
    EXPECT_EQ(p.size(), 1u);
    EXPECT_EQ(p.first, 1024);
    EXPECT_DOUBLE_EQ(p.total_mass, 1.0);
}

TEST(Grid, RefineCoarsenRoundTrip)
{
    std::mt19937_64 rng(3);
    auto mu = random_measure(rng, 6, -17, 40);
    auto back = coarsen(refine(mu, 9), 6);
    ASSERT_EQ(back.first, mu.first);
    ASSERT_EQ(back.size(), mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) EXPECT_NEAR(back.masses[i], mu.masses[i], 1e-16);
}

TEST(Grid, CoarsenNegativeIndices)
{
    auto mu = from_cells(3, -3, {1, 1, 1, 1});
    auto c = coarsen(mu, 1);
    EXPECT_EQ(c.first, -1);
    ASSERT_EQ(c.size(), 2u);
    EXPECT_DOUBLE_EQ(c.masses[0], 3.0);
    EXPECT_DOUBLE_EQ(c.masses[1], 1.0);
}

TEST(Kernel, CdfMatchesQuadrature)
{
    for (double x : {-1.0, -0.9, -0.75, -0.5, -0.2, 0.0, 0.3, 0.6, 0.95, 1.0})
        EXPECT_NEAR(kernel_cdf(x), bump_integral(-1.0, x) / 1.5, 1e-12) << x;
    EXPECT_NEAR(bump_integral(-1.0, 1.0), kernel_integral(), 1e-12);
}

TEST(Kernel, WeightsConserveMassAndAreSymmetric)
{
    for (std::int64_t n : {1, 2, 8, 64}) {
        auto w = kernel_weights(n);
        double s = 0.0;
        for (double v : w) s += v;
        EXPECT_NEAR(s, 1.0, 1e-15);
        for (std::size_t k = 0; k < w.size(); ++k) EXPECT_NEAR(w[k], w[w.size() - 1 - k], 1e-16);
    }
    auto w = kernel_weights(4);
    for (int k = -4; k <= 4; ++k) EXPECT_NEAR(w[static_cast<std::size_t>(k + 4)], bump_integral((k - 0.5) / 4, (k + 0.5) / 4) / 1.5, 1e-12);
}

TEST(Regularize, PreservesMassAndMatchesDirectSum)
{
    std::mt19937_64 rng(11);
    auto mu = random_measure(rng, 8, 200, 50);
    auto r = regularize(mu, dyadic(5));
    EXPECT_NEAR(r.total_mass, 1.0, 1e-13);
    EXPECT_EQ(r.first, 200 - 8);
    auto w = kernel_weights(8);
    for (std::size_t j = 0; j < r.size(); ++j) {
        double d = 0.0;
        for (std::size_t i = 0; i < mu.size(); ++i) {
            const auto off = static_cast<std::int64_t>(j) - 8 - static_cast<std::int64_t>(i);
            if (off >= -8 && off <= 8) d += mu.masses[i] * w[static_cast<std::size_t>(off + 8)];
        }
        EXPECT_NEAR(r.masses[j], d, 1e-15);
    }
}

TEST(Regularize, Contracts)
{
    auto mu = uniform(0.0, 1.0, 6);
    EXPECT_THROW(regularize(mu, dyadic(7)), contract_error);
    EXPECT_THROW(regularize(mu, 3 * dyadic(6)), contract_error);
}

TEST(Pushforward, IdentityAndAffine)
{
    std::mt19937_64 rng(5);
    auto mu = random_measure(rng, 7, 130, 60);
    auto id = pushforward_affine(mu, 1.0, 0.0);
    EXPECT_LT(l1_distance(id, mu), 1e-14);

    auto y = pushforward_affine(mu, -2.0, 0.5);
    EXPECT_NEAR(y.total_mass, 1.0, 1e-13);
    EXPECT_GE(y.lo(), -2.0 * mu.hi() + 0.5 - 1e-12);
    EXPECT_LE(y.hi(), -2.0 * mu.lo() + 0.5 + 1e-12);
    // First moment maps affinely (uniform cells have exact means).
    auto mean = [](const GridMeasure& m) {
        double s = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) s += m.masses[i] * m.center(i);
        return s;
    };
    EXPECT_NEAR(mean(y), -2.0 * mean(mu) + 0.5, 1e-12);
    EXPECT_THROW(pushforward_affine(mu, 0.0, 1.0), contract_error);
}

TEST(Restrict, RetainedFraction)
{
    auto mu = uniform(0.0, 1.0, 6);
    auto A = make_set1(2, {0, 3});
    auto r = restrict_normalize(mu, A);
    EXPECT_NEAR(r.retained, 0.5, 1e-14);
    EXPECT_NEAR(r.measure.total_mass, 1.0, 1e-14);
    EXPECT_EQ(r.measure.masses[20], 0.0);
    EXPECT_THROW(restrict_normalize(mu, make_set1(2, {7})), contract_error);
    EXPECT_THROW(restrict_normalize(uniform(0, 1, 2), make_set1(4, {1})), contract_error);
}

TEST(BallMass, BruteForce)
{
    std::mt19937_64 rng(9);
    auto mu = random_measure(rng, 8, 0, 100);
    for (int e : {8, 7, 5, 3}) {
        const double r = dyadic(e);
        const auto w = static_cast<std::int64_t>(r / mu.scale());
        double best = 0.0;
        for (std::int64_t a = mu.first; a <= mu.end(); ++a) {
            double s = 0.0;
            for (std::int64_t c = a - w; c < a + w; ++c)
                if (c >= mu.first && c < mu.end()) s += mu.masses[static_cast<std::size_t>(c - mu.first)];
            best = std::max(best, s);
        }
        EXPECT_NEAR(sup_ball_mass(mu, r), best, 1e-14) << r;
    }
    EXPECT_NEAR(sup_ball_mass(uniform(0, 1, 8), 0.25), 0.5, 1e-14);
}

TEST(Serialize, RoundTrip)
{
    std::mt19937_64 rng(1);
    auto mu = random_measure(rng, 9, -300, 77);
    std::stringstream ss;
    write_measure(ss, mu);
    auto back = read_measure(ss);
    EXPECT_EQ(back.level, mu.level);
    EXPECT_EQ(back.first, mu.first);
    EXPECT_EQ(back.masses, mu.masses);
}

TEST(Serialize, RejectsOffGridOrigin)
{
    std::stringstream ss("level 3\norigin 0.1\ncount 1\n1\n");
    EXPECT_THROW(read_measure(ss), contract_error);
}
