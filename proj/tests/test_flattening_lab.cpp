#include "decaylab/flattening_lab.hpp"

#include <gtest/gtest.h>

using namespace decaylab;

namespace {

double bump(double x)
{
    const double a = std::abs(x);
    if (a <= 0.5) return 1.0;
    if (a >= 1.0) return 0.0;
    const double u = 2 * (1 - a);
    return u * u * (3 - 2 * u);
}

// Histogram of density classes of mu * P_r by direct summation. Kernel cell
// weights come from Simpson quadrature of the bump, atoms sit at cell centres.
std::map<int, std::size_t> level_set_oracle(const GridMeasure& mu, double r)
{
    const double h = mu.scale();
    const auto n = static_cast<std::int64_t>(std::llround(r / h));
    std::vector<double> w(static_cast<std::size_t>(2 * n + 1));
    const int panels = 64;
    for (std::int64_t k = -n; k <= n; ++k) {
        const double a = (k - 0.5) * h, step = h / panels;
        double s = 0;
        for (int p = 0; p < panels; ++p) {
            const double x0 = a + p * step;
            s += step / 6 * (bump(x0 / r) + 4 * bump((x0 + step / 2) / r) + bump((x0 + step) / r));
        }
        w[static_cast<std::size_t>(k + n)] = s / (1.5 * r);
    }
    std::map<std::int64_t, double> sup;
    for (std::int64_t c = mu.first - n; c < mu.end() + n; ++c) {
        double m = 0;
        for (std::int64_t k = -n; k <= n; ++k) {
            const std::int64_t src = c - k;
            if (src >= mu.first && src < mu.end()) m += mu.masses[static_cast<std::size_t>(src - mu.first)] * w[static_cast<std::size_t>(k + n)];
        }
        if (m <= 1e-14) continue;
        const std::int64_t I = floor_div(c, n);
        sup[I] = std::max(sup[I], m / h);
    }
    std::map<int, std::size_t> hist;
    for (auto& [I, a] : sup) ++hist[static_cast<int>(std::ceil(std::log2(a) - 1e-9))];
    return hist;
}

GridMeasure two_plateau() { return from_density([](double x) { return x < 0.5 ? 1.0 : 1024.0; }, 0, 1, 10); }

}  // namespace

TEST(LevelSets, DyadicClass)
{
    EXPECT_EQ(dyadic_class(1.0), 0);
    EXPECT_EQ(dyadic_class(1.5), 1);
    EXPECT_EQ(dyadic_class(2.0), 1);
    EXPECT_EQ(dyadic_class(0.3), -1);
    EXPECT_EQ(dyadic_class(1024.0), 10);
    EXPECT_EQ(dyadic_class(1.0 + 1e-15), 0);
    EXPECT_EQ(dyadic_class(1.0 + 1e-6), 1);
}

TEST(LevelSets, HistogramMatchesDirectSummation)
{
    std::vector<GridMeasure> family{two_plateau(), uniform(0, 1, 10), make_random_frostman({2, {2}, 5, 4}).measure,
                                    shifted(make_comb(dyadic(3), 0.125, 10).measure, 0.25)};
    for (auto& mu : family)
        for (int e : {4, 6, 8}) EXPECT_EQ(run_level_sets(mu, dyadic(e)).histogram, level_set_oracle(mu, dyadic(e))) << e;
}

TEST(LevelSets, UniformInteriorIsOneClass)
{
    // The smoothed density is 1 on [r, 1 - r]. The intervals just outside
    // [0,1] carry the tails, at most 1/2.
    auto rep = run_level_sets(uniform(0, 1, 10), dyadic(6));
    const auto cls = interval_classes(regularize(uniform(0, 1, 10), dyadic(6)), dyadic(6));
    for (auto& c : cls) {
        if (c.index >= 0 && c.index < 64) {
            EXPECT_EQ(c.j, 0) << c.index;
        } else {
            EXPECT_LT(c.j, 0) << c.index;
        }
    }
    EXPECT_EQ(rep.histogram.at(0), 64u);
    EXPECT_NEAR(rep.class_mass.at(0), 1.0, 0.01);
}

TEST(LevelSets, TwoPlateauGap)
{
    for (int e : {4, 6, 8}) {
        const double r = dyadic(e);
        const std::int64_t half = std::int64_t{1} << (e - 1);
        auto rep = run_level_sets(two_plateau(), r);
        // Heights 1 and 1024 normalized by 512.5. The two largest classes by
        // interval count are the plateaus.
        std::vector<std::pair<std::size_t, int>> by_count;
        for (auto& [j, n] : rep.histogram) by_count.push_back({n, j});
        std::sort(by_count.rbegin(), by_count.rend());
        const int hi = std::max(by_count[0].second, by_count[1].second), lo = std::min(by_count[0].second, by_count[1].second);
        EXPECT_EQ(hi, 1);
        EXPECT_EQ(lo, -9);
        EXPECT_EQ(hi - lo, 10);

        // Every interval at distance >= r from 0, 1/2 and 1 sits in a plateau class.
        for (auto& c : interval_classes(regularize(two_plateau(), r), r)) {
            const bool edge = c.index <= 0 || c.index == half - 1 || c.index == half || c.index >= 2 * half - 1;
            if (edge) continue;
            EXPECT_EQ(c.j, c.index < half ? lo : hi) << c.index;
        }
        EXPECT_LE(rep.class_count, 6u);
    }
}

TEST(LevelSets, SandwichAndClassCount)
{
    std::vector<GridMeasure> family{two_plateau(), uniform(0, 1, 12), point_mass(0.3, 12)};
    for (std::uint64_t seed = 0; seed < 4; ++seed) family.push_back(make_random_frostman({2, {2}, 6, seed}).measure);
    for (auto& mu : family)
        for (int e = 2; e <= 12 && dyadic(e) >= mu.scale(); e += 2) {
            if (dyadic(e) * 4 > 1) continue;
            auto rep = run_level_sets(mu, dyadic(e));
            EXPECT_LE(rep.C_upper, 1.0 + 1e-9);
            EXPECT_LE(rep.C_lower, 8.0);
            EXPECT_LE(static_cast<double>(rep.class_count), 2 * rep.log_scale) << e;
            for (auto& v : rep.verdicts) {
                if (v.exact) { EXPECT_EQ(v.status, "pass") << v.name; }
            }
        }
}

TEST(Flattening, UniformMeetsTargetAtSecondPower)
{
    auto u = uniform(-1, 1, 10);
    auto tr = run_flattening(u, u, 0.5, 0.5, dyadic(10), 2, 0.1);
    ASSERT_FALSE(tr.truncated);
    ASSERT_EQ(tr.k_values.size(), 3u);
    EXPECT_LE(tr.target_ratio[1], 1.0);
    EXPECT_LE(tr.monotone_worst, 1e-9);
    EXPECT_EQ(tr.J[0].size(), tr.r_values.size());
    EXPECT_EQ(tr.r_values.front(), dyadic(10));
    EXPECT_EQ(tr.r_values.back(), 1.0);
    EXPECT_EQ(tr.level_sets.size(), tr.k_values.size());
}

TEST(Flattening, CantorEnergiesAndMonotonicity)
{
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        auto mu = make_random_frostman({2, {2}, 6, 2 * seed + 1}).measure, nu = make_random_frostman({2, {2}, 6, 2 * seed + 2}).measure;
        auto tr = run_flattening(mu, nu, 0.5, 0.5, dyadic(12), 4, 0.1);
        EXPECT_LE(tr.monotone_worst, 1e-9);
        for (std::size_t k = 1; k < tr.energies.size(); ++k) EXPECT_LE(tr.energies[k], tr.energies[k - 1] * (1 + 1e-12));
        EXPECT_LE(tr.energies.back(), tr.energies.front());
        EXPECT_EQ(tr.verdicts.front().status, "pass");
    }
}

TEST(Flattening, Rejections)
{
    auto u = uniform(0, 1, 8);
    EXPECT_THROW(run_flattening(u, u, 0.6, 0.6, dyadic(8), 2, 0.1), contract_error);
    EXPECT_THROW(run_flattening(u, u, 0.5, 0.5, dyadic(8), 9, 0.1), contract_error);
}

TEST(Induction, UniformTripleChain)
{
    auto v = uniform(1, 2, 6);
    auto rep = run_induction_chain({v, v, v}, {1, 1, 1}, dyadic(10), 1);
    EXPECT_EQ(rep.samples.size(), 64u);
    EXPECT_TRUE(rep.chain_holds);
    for (auto& s : rep.samples) EXPECT_LE(s.lhs, s.rhs + 1e-6);
    EXPECT_LE(rep.worst_rescale, 1e-9);
    EXPECT_GE(rep.tau_full, rep.tau_pair / 4 - 0.05);
    for (auto& v : rep.verdicts) {
        if (v.exact) { EXPECT_EQ(v.status, "pass") << v.name; }
    }
}

TEST(Induction, PointMassesGiveEquality)
{
    auto p = point_mass(1.5, 10);
    auto rep = run_induction_chain({p, p, p}, {0.5, 0.5, 0.5}, dyadic(10), 1, 16);
    for (auto& s : rep.samples) {
        EXPECT_NEAR(s.F, 1.0, 1e-12);
        EXPECT_NEAR(s.lhs, s.rhs, 1e-12);
        EXPECT_NEAR(s.R1, 1.0, 1e-12);
    }
    EXPECT_THROW(run_induction_chain({p, p}, {0.6, 0.6}, dyadic(10), 1), contract_error);
    EXPECT_THROW(run_induction_chain({p, p, p}, {0.3, 0.3, 0.3}, dyadic(10), 1), contract_error);
}

TEST(IteratedProducts, ParametersAndUniformRun)
{
    EXPECT_EQ(iteration_depth(0.5, 2.0), 4);
    EXPECT_EQ(iterated_tau(4), std::ldexp(1.0, -9));
    EXPECT_EQ(iteration_depth(0.3, 0.9), 3);

    auto w = uniform(1, 2, 8);
    try {
        run_iterated_products({w, w, w, w}, 0.5, dyadic(8), 2.0);
        FAIL() << "n < 2 ell accepted";
    } catch (const contract_error& e) {
        EXPECT_NE(std::string(e.what()).find("2*ell = 8"), std::string::npos) << e.what();
    }
    EXPECT_THROW(run_iterated_products({uniform(0, 1, 8), w}, 0.5, dyadic(8), 0.5), contract_error);

    auto rep = run_iterated_products({w, w, w, w}, 0.5, dyadic(8), 1.0, 16);
    EXPECT_EQ(rep.ell, 2);
    EXPECT_GE(rep.tau_measured, rep.tau_theory);
    ASSERT_EQ(rep.stages.size(), 2u);
    for (auto& st : rep.stages) {
        EXPECT_GE(st.gain_exponent, 0.5);
        if (st.gain_exponent > 0.5) {
            EXPECT_NEAR(st.C_meas, 0.5 / (st.gain_exponent - 0.5), 1e-12);
        }
    }
}

TEST(Keystep, UniformIsVacuousAndCombTriggers)
{
    auto u = uniform(1, 2, 10);
    auto vac = run_keystep_scan(u, u, 0.5, 0.5, dyadic(10));
    EXPECT_EQ(vac.antecedent_count, 0u);
    EXPECT_TRUE(vac.never_false);
    EXPECT_FALSE(vac.rows.empty());

    // Teeth of width 2^-8; the antecedent holds at that scale.
    auto comb = shifted(make_comb(dyadic(4), 1.0 / 16, 10).measure, 1.0 + dyadic(8));
    auto rep = run_keystep_scan(comb, u, 0.5, 0.5, dyadic(10), 4, 0.01, 0.3);
    bool found = false;
    for (auto& row : rep.rows) {
        if (row.rho == dyadic(8)) {
            found = true;
            EXPECT_TRUE(row.antecedent);
        }
        EXPECT_EQ(row.implication, !row.antecedent || row.consequent);
        EXPECT_GT(row.A_size, 0u);
    }
    EXPECT_TRUE(found);
    EXPECT_GT(rep.antecedent_count, 0u);
    EXPECT_THROW(run_keystep_scan(uniform(0, 1, 10), u, 0.5, 0.5, dyadic(10)), contract_error);
}

TEST(BaseCase, PointMassesAndUniforms)
{
    auto p = point_mass(1.5, 20);
    auto bp = run_base_case(p, p, 0.5, 0.5, dyadic(10));
    EXPECT_FALSE(bp.precondition_ok);
    EXPECT_NEAR(bp.max_magnitude, 1.0, 1e-4);
    EXPECT_EQ(bp.xi.size(), 129u);
    EXPECT_EQ(bp.xi.front(), 1024.0);
    EXPECT_EQ(bp.xi.back(), 2048.0);

    auto u = uniform(1, 2, 10);
    auto bu = run_base_case(u, u, 1, 1, dyadic(10), BaseCaseOptions{33, 64, 0, 12, 16});
    EXPECT_TRUE(bu.precondition_ok);
    EXPECT_LE(bu.C_meas, 16.0);
    EXPECT_NEAR(bu.C_meas, bu.max_magnitude / std::sqrt(dyadic(10)), 1e-12);
}

TEST(BaseCase, SmallBallsShowNoDecay)
{
    // Uniform on [0, delta^{1-s}] and [0, delta^{1-t}]: no decay below
    // delta^{-1+max(s,t)} / 4.
    const double d = dyadic(12);
    for (auto [s, t] : {std::pair{0.25, 0.5}, std::pair{0.5, 0.5}, std::pair{0.75, 0.25}}) {
        const int a = static_cast<int>(12 * (1 - s)), b = static_cast<int>(12 * (1 - t));
        auto mu = uniform(0, dyadic(a), a + 6), nu = uniform(0, dyadic(b), b + 6);
        const double top = std::pow(d, -1 + std::max(s, t)) / 4;
        for (double xi : log_band(1, top, 9)) EXPECT_GE(std::abs(product_fourier_cells({mu, nu}, xi)), 0.5) << xi;
    }
}
