#pragma once

#include "decaylab/dyadic_sets.hpp"
#include "decaylab/spectral.hpp"

#include <array>

namespace decaylab {

// Self-energy of a uniform density of unit mass on one cell of width h.
inline double same_cell_riesz(double s, double h) { return 2.0 * std::pow(h, -s) / ((1.0 - s) * (2.0 - s)); }

// sum_{i != j} m_i m_j |c_i - c_j|^-s + sum_i m_i^2 same_cell_riesz(s, h)
// over the cells of mu_delta, evaluated as one convolution.
inline double riesz_sum(const GridMeasure& mu, double s)
{
    const GridMeasure g = trim(mu);
    const std::size_t n = g.size();
    const double h = g.scale();
    std::vector<double> k(2 * n - 1);
    for (std::size_t i = 0; i < k.size(); ++i) {
        const auto d = static_cast<double>(static_cast<std::int64_t>(i) - static_cast<std::int64_t>(n - 1));
        k[i] = d == 0.0 ? same_cell_riesz(s, h) : std::pow(std::abs(d) * h, -s);
    }
    const auto c = linear_convolve(g.masses, k);
    double e = 0.0;
    for (std::size_t i = 0; i < n; ++i) e += g.masses[i] * c[i + n - 1];
    return e;
}

inline double energy_spatial(const GridMeasure& mu, double s, double delta)
{
    require(s > 0.0 && s < 1.0, cat("energy_spatial: s=", s, " outside (0,1)"));
    return riesz_sum(regularize(mu, delta), s);
}

namespace detail {

inline double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }

// Gauss-Legendre nodes and weights on [-1, 1], 8 points.
inline const std::array<std::pair<double, double>, 8>& gauss8()
{
    static const std::array<std::pair<double, double>, 8> g{{
        {-0.9602898564975363, 0.1012285362903763},
        {-0.7966664774136267, 0.2223810344533745},
        {-0.5255324099163290, 0.3137066458778873},
        {-0.1834346424956498, 0.3626837833783620},
        {0.1834346424956498, 0.3626837833783620},
        {0.5255324099163290, 0.3137066458778873},
        {0.7966664774136267, 0.2223810344533745},
        {0.9602898564975363, 0.1012285362903763},
    }};
    return g;
}

}  // namespace detail

// int |mu_delta^(xi)|^2 |xi|^{s-1} d xi with mu_delta a piecewise-constant
// density. |xi| < 1 uses the substitution xi = u^{1/s}; |xi| in [1, 8/delta]
// is summed dyadic block by dyadic block with the trapezoid rule on an FFT
// frequency grid of spacing <= 1/8.
inline double energy_fourier_raw(const GridMeasure& mu, double s, double delta)
{
    require(s > 0.0 && s < 1.0, cat("energy_fourier: s=", s, " outside (0,1)"));
    const GridMeasure g = trim(regularize(mu, delta));
    const double h = g.scale();
    const auto pts = atoms(g);
    auto pc_norm = [&](double xi, double atomic_norm) {
        const double f = detail::sinc(std::numbers::pi * xi * h);
        return atomic_norm * f * f;
    };

    double low = 0.0;
    const int panels = 16;
    for (int p = 0; p < panels; ++p) {
        const double a = static_cast<double>(p) / panels, b = static_cast<double>(p + 1) / panels;
        for (auto [x, w] : detail::gauss8()) {
            const double u = 0.5 * (a + b) + 0.5 * (b - a) * x;
            const double xi = std::pow(u, 1.0 / s);
            low += 0.5 * (b - a) * w * pc_norm(xi, std::norm(fourier_at(pts, xi)));
        }
    }
    low /= s;

    const std::size_t M = next_pow2(std::max<std::size_t>(8 * g.size(), static_cast<std::size_t>(std::ceil(8.0 / h))));
    const double dxi = 1.0 / (static_cast<double>(M) * h);
    const auto P = dft_power(g.masses, M);
    const double top = 8.0 / delta;
    double high = 0.0;
    for (double lo = 1.0; lo < top; lo *= 2.0) {
        const double hi = std::min(2.0 * lo, top);
        const auto k0 = static_cast<std::size_t>(std::llround(lo / dxi));
        const auto k1 = static_cast<std::size_t>(std::llround(hi / dxi));
        double block = 0.0;
        for (std::size_t k = k0; k <= k1; ++k) {
            const double xi = static_cast<double>(k) * dxi;
            const double w = (k == k0 || k == k1) ? 0.5 : 1.0;
            block += w * pc_norm(xi, P[k % M]) * std::pow(xi, s - 1.0);
        }
        high += block * dxi;
    }
    return 2.0 * (low + high);
}

struct EnergyReport {
    double s = 0, delta = 0;
    double spatial = 0;
    double fourier = 0;
    double calibration = 0;  // c_s
};

// c_s fixed so that the uniform [0,1] reference at the same level and delta
// has equal spatial and Fourier energies.
inline double calibrate_cs(double s, int level, double delta)
{
    const GridMeasure ref = uniform(0.0, 1.0, level);
    return energy_spatial(ref, s, delta) / energy_fourier_raw(ref, s, delta);
}

inline EnergyReport energy_report(const GridMeasure& mu, double s, double delta)
{
    EnergyReport r;
    r.s = s;
    r.delta = delta;
    r.spatial = energy_spatial(mu, s, delta);
    r.calibration = calibrate_cs(s, mu.level, delta);
    r.fourier = r.calibration * energy_fourier_raw(mu, s, delta);
    return r;
}

inline double energy_fourier(const GridMeasure& mu, double s, double delta)
{
    return calibrate_cs(s, mu.level, delta) * energy_fourier_raw(mu, s, delta);
}

// ---- Frostman constants ----------------------------------------------------

struct FrostmanReport {
    double s = 0;
    double r_min = 0, r_max = 0;
    double constant = 0;
    double r_at_max = 0;
};

// max over dyadic r in [r_min, r_max] of sup_ball_mass(mu, r) / r^s.
inline FrostmanReport frostman_constant(const GridMeasure& mu, double s, double r_min, double r_max)
{
    require(r_min >= mu.scale(), cat("frostman_constant: r_min=", r_min, " below grid scale ", mu.scale()));
    require(r_max >= r_min, cat("frostman_constant: empty range [", r_min, ", ", r_max, "]"));
    FrostmanReport f{s, r_min, r_max, 0.0, r_min};
    for (double r = r_min; r <= r_max * (1 + 1e-12); r *= 2.0) {
        const double v = sup_ball_mass(mu, r) / std::pow(r, s);
        if (v > f.constant) f.constant = v, f.r_at_max = r;
    }
    return f;
}

// ---- exceptional sets ------------------------------------------------------

struct ExceptionalSet {
    GridSet1 set;  // cells of mu's grid lying in E
    double mass = 0;          // mu(E)
    double bound = 0;         // log2(1/delta) delta^eps
    double energy = 0;        // I_s^delta(mu)
    bool precondition = false;  // energy <= delta^-eps
    bool mass_ok = false;
    double complement_constant = 0;  // Frostman constant of mu off E on [delta, 1]
    bool complement_ok = false;      // complement_constant <= delta^{-2 eps}
};

// E = union over u = 0..floor(log2 1/delta) of
// {x : 2^{su} mu_delta(B(x, 2^-u)) > delta^{-2 eps}}, tested at the cells of
// mu. The ball around a cell spans floor(r/h) cells on each side of it.
inline ExceptionalSet exceptional_set(const GridMeasure& mu, double s, double delta, double eps)
{
    require(eps > 0, cat("exceptional_set: eps=", eps, " must be positive"));
    ExceptionalSet out;
    out.energy = energy_spatial(mu, s, delta);
    out.precondition = out.energy <= std::pow(delta, -eps);

    const GridMeasure g = regularize(mu, delta);
    const double h = mu.scale();
    std::vector<long double> pre(g.size() + 1, 0.0L);
    for (std::size_t i = 0; i < g.size(); ++i) pre[i + 1] = pre[i] + g.masses[i];
    auto ball = [&](std::int64_t cell, std::int64_t w) {
        const std::int64_t a = std::clamp<std::int64_t>(cell - w - g.first, 0, static_cast<std::int64_t>(g.size()));
        const std::int64_t b = std::clamp<std::int64_t>(cell + w + 1 - g.first, 0, static_cast<std::int64_t>(g.size()));
        return static_cast<double>(pre[static_cast<std::size_t>(b)] - pre[static_cast<std::size_t>(a)]);
    };
    const double thr = std::pow(delta, -2.0 * eps);
    const int U = static_cast<int>(std::floor(std::log2(1.0 / delta) + 1e-9));
    out.set.level = mu.level;
    out.set.window = {mu.lo(), mu.hi()};
    GridMeasure rest = mu;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const std::int64_t cell = mu.first + static_cast<std::int64_t>(i);
        bool in = false;
        for (int u = 0; u <= U && !in; ++u) {
            const double r = dyadic(u);
            const auto w = static_cast<std::int64_t>(std::floor(r / h));
            in = std::pow(2.0, s * u) * ball(cell, w) > thr;
        }
        if (in) {
            out.set.cells.push_back({cell});
            out.mass += mu.masses[i];
            rest.masses[i] = 0.0;
        }
    }
    rest.recompute_total();
    out.bound = std::log2(1.0 / delta) * std::pow(delta, eps);
    out.mass_ok = out.mass <= out.bound;
    out.complement_constant = frostman_constant(rest, s, delta, 1.0).constant;
    out.complement_ok = out.complement_constant <= thr * (1 + 1e-12);
    return out;
}

struct DensityLevel {
    int k = 0;
    std::size_t cells = 0;
    double mass = 0;
};

struct Extraction {
    bool ok = false;
    GridSet1 A1;  // rho-cells
    double retained = 0;
    int level = -1;  // chosen density class k
    std::vector<DensityLevel> histogram;
    SetCheck<1> check;
    ExceptionalSet exceptional;
    std::string failure;
};

// Removes the exceptional set (eps = 2 tau), groups the rho-cells by dyadic
// mass class relative to the heaviest cell, and returns the class with the
// largest retained mass that also reaches rho^{2 tau} and passes the
// (rho, s, rho^{-6 tau}) check. Ties: larger mass, then smaller k.
inline Extraction extract_nonconcentrated(const GridMeasure& nu, double s, double rho, double tau)
{
    auto e = exact_log2(rho);
    require(e.has_value() && *e < 0, cat("extract_nonconcentrated: rho=", rho, " is not a dyadic scale < 1"));
    const int krho = -*e;
    require(krho <= nu.level, cat("extract_nonconcentrated: rho=", rho, " is finer than the grid"));
    require(tau > 0, cat("extract_nonconcentrated: tau=", tau, " must be positive"));
    const double energy = energy_spatial(nu, s, rho);
    require(energy < std::pow(rho, -2.0 * tau),
            cat("extract_nonconcentrated: energy ", energy, " violates I_s^rho < rho^{-2 tau} = ", std::pow(rho, -2.0 * tau)));

    Extraction out;
    out.exceptional = exceptional_set(nu, s, rho, 2.0 * tau);
    GridMeasure rest = nu;
    for (std::size_t i = 0; i < rest.size(); ++i)
        if (out.exceptional.set.contains({rest.first + static_cast<std::int64_t>(i)})) rest.masses[i] = 0.0;
    rest.recompute_total();
    const GridMeasure cells = coarsen(rest, krho);
    const double mmax = *std::max_element(cells.masses.begin(), cells.masses.end());
    if (!(mmax > 0)) {
        out.failure = "no mass outside the exceptional set";
        return out;
    }
    std::vector<std::vector<std::int64_t>> members(static_cast<std::size_t>(krho + 1));
    out.histogram.resize(static_cast<std::size_t>(krho + 1));
    for (int k = 0; k <= krho; ++k) out.histogram[static_cast<std::size_t>(k)].k = k;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const double v = cells.masses[i];
        if (!(v > 0)) continue;
        const int k = static_cast<int>(std::floor(std::log2(mmax / v)));
        if (k > krho) continue;
        auto& h = out.histogram[static_cast<std::size_t>(k)];
        ++h.cells;
        h.mass += v;
        members[static_cast<std::size_t>(k)].push_back(cells.first + static_cast<std::int64_t>(i));
    }
    std::vector<int> order(static_cast<std::size_t>(krho + 1));
    for (int k = 0; k <= krho; ++k) order[static_cast<std::size_t>(k)] = k;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return out.histogram[static_cast<std::size_t>(a)].mass > out.histogram[static_cast<std::size_t>(b)].mass;
    });
    const double need = std::pow(rho, 2.0 * tau), K = std::pow(rho, -6.0 * tau);
    for (int k : order) {
        const auto& h = out.histogram[static_cast<std::size_t>(k)];
        if (h.cells == 0 || h.mass < need) continue;
        GridSet1 A = make_set1(krho, members[static_cast<std::size_t>(k)]);
        A.window = {nu.lo(), nu.hi()};
        auto chk = set_check(A, s, K, SetKind::frostman);
        if (!chk.pass) continue;
        out.ok = true;
        out.A1 = std::move(A);
        out.retained = h.mass;
        out.level = k;
        out.check = chk;
        return out;
    }
    std::ostringstream os;
    os << "no density level reaches retained mass " << need << " with a passing set check; levels:";
    for (auto& h : out.histogram)
        if (h.cells) os << " k=" << h.k << " cells=" << h.cells << " mass=" << h.mass;
    out.failure = os.str();
    return out;
}

}  // namespace decaylab
