#pragma once

#include "decaylab/conv_engine.hpp"

namespace decaylab {

// sum_i m_i e^{-2 pi i xi c_i}. Negative xi is the conjugate of |xi| so the
// symmetry holds bit for bit.
inline cplx fourier_at(const std::vector<Atom>& pts, double xi)
{
    const double a = std::abs(xi);
    double re = 0.0, im = 0.0;
    for (const auto& p : pts) {
        const cplx z = unit_phase(a * p.x);
        re += p.mass * z.real();
        im += p.mass * z.imag();
    }
    return xi < 0 ? cplx{re, -im} : cplx{re, im};
}

inline cplx fourier_at(const GridMeasure& mu, double xi) { return fourier_at(atoms(mu), xi); }

// Transform at xi0 + k dxi for k in [0, count), by phasor recurrence with an
// exact resync every 64 steps.
inline std::vector<cplx> fourier_scan(const std::vector<Atom>& pts, double xi0, double dxi, std::size_t count)
{
    std::vector<double> re(count, 0.0), im(count, 0.0);
    for (const auto& p : pts) {
        const cplx step = unit_phase(dxi * p.x);
        cplx z;
        for (std::size_t k = 0; k < count; ++k) {
            if (k % 64 == 0) z = unit_phase((xi0 + static_cast<double>(k) * dxi) * p.x);
            re[k] += p.mass * z.real();
            im[k] += p.mass * z.imag();
            z *= step;
        }
    }
    std::vector<cplx> out(count);
    for (std::size_t k = 0; k < count; ++k) out[k] = {re[k], im[k]};
    return out;
}

// (mu x nu)^(xi) = sum_j q_j mu^(xi d_j), summed atom by atom.
inline cplx product_fourier(const GridMeasure& mu, const GridMeasure& nu, double xi)
{
    const auto a = atoms(mu);
    cplx s{0.0, 0.0};
    for (const auto& q : atoms(nu)) s += q.mass * fourier_at(a, xi * q.x);
    return s;
}

namespace detail {

inline double sinc_pi(double x) { return x == 0.0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x); }

}  // namespace detail

// Transform of mu_1 x ... x mu_n with every cell a uniform density, summed
// over all tuples of occupied cells. The product of n cells is linearized
// about the centres, giving one sinc factor per coordinate; the dropped
// terms are of order |xi| h^2.
inline cplx product_fourier_cells(const std::vector<GridMeasure>& ms, double xi)
{
    require(!ms.empty(), "product_fourier_cells: no measures");
    std::vector<std::vector<Atom>> pts;
    std::vector<double> h;
    double tuples = 1.0;
    for (auto& m : ms) {
        pts.push_back(atoms(m));
        h.push_back(m.scale());
        tuples *= static_cast<double>(pts.back().size());
    }
    require(tuples <= 0x1p28, cat("product_fourier_cells: ", tuples, " tuples is too many"));
    const std::size_t n = ms.size();
    if (tuples == 0.0) return {0.0, 0.0};
    const std::size_t outer = pts[0].size();
    std::vector<cplx> part(outer);
    for_chunks(outer, [&](std::size_t i0) {
        std::vector<std::size_t> idx(n, 0);
        idx[0] = i0;
        double re = 0.0, im = 0.0;
        std::vector<double> x(n);
        while (true) {
            double w = 1.0, X = 1.0;
            for (std::size_t k = 0; k < n; ++k) {
                x[k] = pts[k][idx[k]].x;
                w *= pts[k][idx[k]].mass;
                X *= x[k];
            }
            for (std::size_t k = 0; k < n; ++k) {
                double others = 1.0;
                for (std::size_t l = 0; l < n; ++l)
                    if (l != k) others *= x[l];
                w *= detail::sinc_pi(xi * h[k] * others);
            }
            const cplx z = unit_phase(xi * X);
            re += w * z.real();
            im += w * z.imag();
            std::size_t k = 1;
            for (; k < n; ++k) {
                if (++idx[k] < pts[k].size()) break;
                idx[k] = 0;
            }
            if (k == n) break;
        }
        part[i0] = {re, im};
    });
    cplx s{0.0, 0.0};
    for (auto& v : part) s += v;
    return s;
}

inline double l2sq_density(const GridMeasure& mu)
{
    const double h = mu.scale();
    double s = 0.0;
    for (double m : mu.masses) s += m * m;
    return s / h;
}

inline double l2_at_scale(const GridMeasure& mu, double delta) { return std::sqrt(l2sq_density(regularize(mu, delta))); }

// ---- decay profiles --------------------------------------------------------

struct DecayProfile {
    double xi_min = 1.0, xi_max = 1.0;
    std::vector<double> xi;
    std::vector<double> magnitude;
    double tau_hat = 0.0;
    double fit_residual = 0.0;
    std::size_t floor_hits = 0;
    bool degenerate = false;  // fewer than 3 usable samples; tau_hat = +inf
};

inline constexpr double magnitude_floor() { return 1e-12; }

inline std::vector<double> log_band(double lo, double hi, std::size_t n)
{
    require(n >= 3, cat("decay_profile: need at least 3 samples, got ", n));
    require(lo >= 1.0 && hi > lo, cat("decay_profile: bad band [", lo, ", ", hi, "]"));
    std::vector<double> xi(n);
    const double l0 = std::log(lo), l1 = std::log(hi);
    for (std::size_t k = 0; k < n; ++k) xi[k] = std::exp(l0 + (l1 - l0) * static_cast<double>(k) / static_cast<double>(n - 1));
    xi.front() = lo;
    xi.back() = hi;
    return xi;
}

// Least squares of log|F| against log xi; tau_hat is minus the slope.
inline DecayProfile fit_decay(std::vector<double> xi, std::vector<double> mag)
{
    DecayProfile p;
    p.xi_min = xi.front();
    p.xi_max = xi.back();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < xi.size(); ++k) {
        if (!(mag[k] >= magnitude_floor())) {
            ++p.floor_hits;
            continue;
        }
        const double x = std::log(xi[k]), y = std::log(mag[k]);
        sx += x, sy += y, sxx += x * x, sxy += x * y;
        ++n;
    }
    p.xi = std::move(xi);
    p.magnitude = std::move(mag);
    if (n < 3) {
        p.degenerate = true;
        p.tau_hat = std::numeric_limits<double>::infinity();
        return p;
    }
    const double dn = static_cast<double>(n);
    const double den = dn * sxx - sx * sx;
    const double slope = den != 0.0 ? (dn * sxy - sx * sy) / den : 0.0;
    const double icpt = (sy - slope * sx) / dn;
    double rss = 0.0;
    for (std::size_t k = 0; k < p.xi.size(); ++k) {
        if (!(p.magnitude[k] >= magnitude_floor())) continue;
        const double r = std::log(p.magnitude[k]) - (icpt + slope * std::log(p.xi[k]));
        rss += r * r;
    }
    p.tau_hat = -slope;
    p.fit_residual = std::sqrt(rss / dn);
    return p;
}

inline DecayProfile decay_profile(const GridMeasure& mu, double lo, double hi, std::size_t n)
{
    auto xi = log_band(lo, hi, n);
    const auto a = atoms(mu);
    std::vector<double> mag(n);
    for_chunks(n, [&](std::size_t k) { mag[k] = std::abs(fourier_at(a, xi[k])); });
    return fit_decay(std::move(xi), std::move(mag));
}

// Exponent tau with max_{band} |F| = delta^tau; the measured form of the
// decay statements over delta^-1 <= |xi| <= 2 delta^-1.
inline double band_exponent(double max_magnitude, double delta)
{
    if (!(max_magnitude > 0)) return std::numeric_limits<double>::infinity();
    return std::log(max_magnitude) / std::log(delta);
}

// ---- L2 bound for multiplicative convolutions ------------------------------

// 2 * int_0^{2/delta} |F|^2 by the trapezoid rule at spacing 1/4.
inline double l2_mass_in_band(const GridMeasure& mu, double delta)
{
    const double top = 2.0 / delta, d = 0.25;
    const auto n = static_cast<std::size_t>(std::llround(top / d)) + 1;
    auto f = fourier_scan(atoms(mu), 0.0, d, n);
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double w = (k == 0 || k + 1 == n) ? 0.5 : 1.0;
        s += w * std::norm(f[k]);
    }
    return 2.0 * s * d;
}

struct L2Bound {
    double A = 0, B = 0;
    double bound = 0;
    double actual = 0;
    double ratio = 0;  // actual / bound
};

inline L2Bound l2_bound(const GridMeasure& mu, const GridMeasure& nu, double delta, double xi)
{
    require(std::abs(xi) >= 1.0 && std::abs(xi) <= 1.0 / delta,
            cat("l2_bound: need 1 <= |xi| <= 1/delta, got xi=", xi, " delta=", delta));
    L2Bound r;
    r.A = l2_mass_in_band(mu, delta);
    r.B = l2_mass_in_band(nu, delta);
    r.bound = std::sqrt(r.A * r.B / std::abs(xi)) + delta;
    r.actual = std::abs(product_fourier(mu, nu, xi));
    r.ratio = r.actual / r.bound;
    return r;
}

// ---- order exchange --------------------------------------------------------

struct OrderCheck {
    double lhs = 0;  // |int mu^(xi y) dnu(y)|^2
    double rhs = 0;  // int |mu^(xi y)|^2 dnu(y)
    bool holds() const { return lhs <= rhs + 1e-12; }
};

inline OrderCheck order_check(const GridMeasure& mu, const GridMeasure& nu, double xi)
{
    const auto a = atoms(mu);
    cplx s{0.0, 0.0};
    double r = 0.0;
    for (const auto& q : atoms(nu)) {
        const cplx f = fourier_at(a, xi * q.x);
        s += q.mass * f;
        r += q.mass * std::norm(f);
    }
    return {std::norm(s), r};
}

}  // namespace decaylab
