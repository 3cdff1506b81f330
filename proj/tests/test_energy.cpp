#include "decaylab/constructions.hpp"
#include "decaylab/energy.hpp"

#include <gtest/gtest.h>

using namespace decaylab;

namespace {

// Direct O(n^2) double sum over the cells of mu_delta.
double riesz_oracle(const GridMeasure& mu, double s, double delta)
{
    const GridMeasure g = regularize(mu, delta);
    const double h = g.scale();
    double e = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g.masses[i] == 0) continue;
        for (std::size_t j = 0; j < g.size(); ++j) {
            if (g.masses[j] == 0) continue;
            const double k = i == j ? 2 * std::pow(h, -s) / ((1 - s) * (2 - s)) : std::pow(std::abs(double(i) - double(j)) * h, -s);
            e += g.masses[i] * g.masses[j] * k;
        }
    }
    return e;
}

GridMeasure half_uniform_half_atom(int level, double atom)
{
    GridMeasure mu = uniform(0, 1, level);
    for (auto& m : mu.masses) m *= 0.5;
    mu.masses[static_cast<std::size_t>(std::floor(atom / mu.scale()) - static_cast<double>(mu.first))] += 0.5;
    mu.recompute_total();
    return mu;
}

// Middle-thirds Cantor measure: 2^depth cylinders of mass 2^-depth, binned.
GridMeasure middle_thirds(int depth, int level)
{
    std::vector<Atom> pts{{0.0, 1.0}};
    double len = 1.0;
    for (int d = 0; d < depth; ++d) {
        len /= 3;
        std::vector<Atom> next;
        for (auto& p : pts) next.push_back({p.x, p.mass / 2}), next.push_back({p.x + 2 * len, p.mass / 2});
        pts = std::move(next);
    }
    for (auto& p : pts) p.x += len / 2;
    return from_atoms(pts, 0, 1, level);
}

}  // namespace

TEST(EnergySpatial, MatchesDoubleSum)
{
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        auto mu = make_random_frostman({2, {2}, 4, seed}).measure;
        for (double s : {0.2, 0.5, 0.9}) {
            const double a = energy_spatial(mu, s, dyadic(6)), b = riesz_oracle(mu, s, dyadic(6));
            EXPECT_NEAR(a, b, 1e-10 * b);
        }
    }
}

TEST(EnergySpatial, Examples)
{
    auto u = uniform(0, 1, 12);
    EXPECT_NEAR(energy_spatial(u, 1e-6, u.scale()), 1.0, 1e-3);
    EXPECT_NEAR(energy_spatial(u, 0.5, u.scale()) / (8.0 / 3.0), 1.0, 0.02);

    const double d = dyadic(6);
    const double p = energy_spatial(point_mass(0.5, 12), 0.5, d) / std::pow(d, -0.5);
    EXPECT_GE(p, 0.25);
    EXPECT_LE(p, 4.0);

    EXPECT_THROW(energy_spatial(u, 1.0, d), contract_error);
    EXPECT_THROW(energy_spatial(u, 0.5, dyadic(13)), contract_error);
}

TEST(EnergySpatial, MonotoneInDelta)
{
    std::vector<GridMeasure> family{uniform(0, 1, 11), point_mass(0.3, 11), make_random_frostman({2, {2}, 5, 3}).measure,
                                    make_comb(dyadic(4), 0.125, 11).measure, half_uniform_half_atom(11, 0.7)};
    for (auto& mu : family)
        for (double s : {0.3, 0.6})
            for (int k = 1; k < mu.level; ++k) EXPECT_LE(energy_spatial(mu, s, dyadic(k)), 1.1 * energy_spatial(mu, s, dyadic(k + 1))) << k;
}

TEST(EnergyFourier, CalibrationAndHeldOut)
{
    const double d = dyadic(8);
    auto ref = uniform(0, 1, 10);
    EXPECT_NEAR(energy_fourier(ref, 0.5, d) / energy_spatial(ref, 0.5, d), 1.0, 1e-12);

    std::vector<GridMeasure> held{uniform(0, 0.5, 10), uniform(0.25, 0.5, 10), make_comb(dyadic(4), 0.125, 10).measure};
    for (auto& mu : held)
        for (double s : {0.3, 0.5, 0.7}) {
            auto r = energy_report(mu, s, d);
            EXPECT_NEAR(r.fourier / r.spatial, 1.0, 0.05) << "s=" << s;
            EXPECT_GT(r.calibration, 0.0);
        }
}

TEST(EnergyFourier, ScalingAndMonotonicity)
{
    auto mu = make_random_frostman({2, {2}, 5, 8}).measure;
    auto half = pushforward_affine(mu, 0.5, 0.0);
    for (double s : {0.3, 0.5}) {
        const double d = dyadic(9);
        EXPECT_NEAR(energy_fourier(half, s, d) / energy_fourier(mu, s, 2 * d), std::pow(2.0, s), 0.05 * std::pow(2.0, s));
        // Coarser scale, smaller energy.
        for (int k = 3; k < 9; ++k) EXPECT_LE(energy_fourier(mu, s, dyadic(k)), 1.1 * energy_fourier(mu, s, dyadic(k + 1)));
    }
}

TEST(EnergyBridges, L2AndFrostman)
{
    std::vector<GridMeasure> family{uniform(0, 1, 11), make_random_frostman({2, {2}, 5, 1}).measure, make_comb(dyadic(5), 0.125, 11).measure,
                                    half_uniform_half_atom(11, 0.2)};
    for (auto& mu : family)
        for (double s : {0.3, 0.5, 0.8})
            for (int k : {4, 7, 10}) {
                const double d = dyadic(k);
                const double l2 = std::pow(l2_at_scale(mu, d), 2);
                EXPECT_LE(l2, 4.0 * std::pow(d, s - 1) * energy_spatial(mu, s, d)) << "s=" << s << " k=" << k;
            }

    // Frostman constant C on [delta, delta^eps] bounds the energy at s - 0.01.
    const double eps = 0.25, d = dyadic(10);
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        auto c = make_random_frostman({2, {2}, 5, seed}).measure;
        const double s = 0.5;
        const double C = frostman_constant(c, s, d, std::pow(d, eps)).constant;
        EXPECT_LE(energy_spatial(c, s - 0.01, d), 10 * C * std::pow(d, -eps));
    }
}

TEST(FrostmanConstant, Examples)
{
    auto u = uniform(0, 1, 12);
    EXPECT_NEAR(frostman_constant(u, 1.0, dyadic(8), 0.25).constant, 2.0, 0.2);

    auto p = frostman_constant(point_mass(0.4, 12), 0.5, dyadic(8), 0.5);
    EXPECT_NEAR(p.constant, 16.0, 1e-12);
    EXPECT_EQ(p.r_at_max, dyadic(8));

    auto c = middle_thirds(7, 12);
    EXPECT_LE(frostman_constant(c, std::log(2.0) / std::log(3.0), dyadic(12), 1.0).constant, 8.0);
    EXPECT_THROW(frostman_constant(u, 0.5, dyadic(13), 1.0), contract_error);
}

TEST(ExceptionalSet, Examples)
{
    const double d = dyadic(10);
    auto u = exceptional_set(uniform(0, 1, 10), 0.5, d, 0.1);
    EXPECT_TRUE(u.set.empty());
    EXPECT_EQ(u.mass, 0.0);

    auto mix = half_uniform_half_atom(10, 0.6);
    auto e = exceptional_set(mix, 0.5, d, 0.1);
    const std::int64_t atom_cell = static_cast<std::int64_t>(std::floor(0.6 / mix.scale()));
    EXPECT_TRUE(e.set.contains({atom_cell}));
    EXPECT_TRUE(e.complement_ok);
    EXPECT_LE(e.complement_constant, std::pow(d, -0.2) * (1 + 1e-12));

    // Frostman constant sqrt 2 at s = 1/2, below the threshold delta^{-2 eps} = 2.
    auto flat = uniform(0, 1, 10);
    ASSERT_LE(frostman_constant(flat, 0.5, d, 1.0).constant, std::sqrt(2.0) + 1e-12);
    EXPECT_EQ(exceptional_set(flat, 0.5, d, 0.05).mass, 0.0);
}

TEST(ExceptionalSet, MassBoundWhenPreconditionHolds)
{
    int checked = 0;
    for (std::uint64_t seed = 0; seed < 12; ++seed)
        for (double eps : {0.1, 0.3}) {
            auto mu = make_random_frostman({2, {2, 4, 2, 4, 2}, 5, seed}).measure;
            auto e = exceptional_set(mu, 0.4, dyadic(10), eps);
            if (!e.precondition) continue;
            ++checked;
            EXPECT_TRUE(e.mass_ok) << e.mass << " > " << e.bound;
            EXPECT_TRUE(e.complement_ok);
        }
    EXPECT_GT(checked, 0);
}

TEST(Extraction, UniformTwoLevelAndCheck)
{
    const double rho = dyadic(6), tau = 0.15;
    auto u = extract_nonconcentrated(uniform(0, 1, 10), 0.5, rho, tau);
    ASSERT_TRUE(u.ok) << u.failure;
    EXPECT_GE(u.A1.size(), 32u);
    EXPECT_GE(u.retained, 0.4);

    // Heights 1 and 2^10 on two halves of [0,1].
    auto two = from_density([](double x) { return x < 0.5 ? 1.0 : 1024.0; }, 0, 1, 10);
    auto t = extract_nonconcentrated(two, 0.3, rho, 0.2);
    ASSERT_TRUE(t.ok) << t.failure;
    const bool low = t.A1.cells.back()[0] < 32, high = t.A1.cells.front()[0] >= 32;
    EXPECT_TRUE(low || high);
    EXPECT_EQ(t.A1.size(), 32u);

    int extracted = 0;
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        auto mu = make_random_frostman({2, {2, 3, 4, 3, 2}, 5, seed}).measure;
        const double s = 0.4, r = dyadic(8);
        const double need = energy_spatial(mu, s, r);
        const double tt = std::max(0.05, std::log2(need) / (2 * 8.0) + 0.02);
        auto x = extract_nonconcentrated(mu, s, r, tt);
        if (!x.ok) continue;
        ++extracted;
        EXPECT_TRUE(set_check(x.A1, s, std::pow(r, -6 * tt), SetKind::frostman).pass);
        EXPECT_GE(x.retained, std::pow(r, 2 * tt));
    }
    EXPECT_GT(extracted, 4);
    EXPECT_THROW(extract_nonconcentrated(point_mass(0.5, 10), 0.9, rho, 0.01), contract_error);
}
