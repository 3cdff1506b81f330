#pragma once

#include "decaylab/common.hpp"
#include "decaylab/grid_set.hpp"

#include <istream>
#include <ostream>
#include <utility>

namespace decaylab {

// Mass vector on the dyadic grid of scale h = 2^-level. Cell i (0-based)
// covers [(first+i) h, (first+i+1) h); origin = first * h.
struct GridMeasure {
    int level = 1;
    std::int64_t first = 0;
    std::vector<double> masses;
    double total_mass = 0.0;

    double scale() const { return dyadic(level); }
    double origin() const { return static_cast<double>(first) * scale(); }
    std::size_t size() const { return masses.size(); }
    std::int64_t end() const { return first + static_cast<std::int64_t>(masses.size()); }
    double center(std::size_t i) const { return (static_cast<double>(first + static_cast<std::int64_t>(i)) + 0.5) * scale(); }
    double lo() const { return origin(); }
    double hi() const { return static_cast<double>(end()) * scale(); }

    void recompute_total()
    {
        double t = 0.0;
        for (double m : masses) t += m;
        total_mass = t;
    }
};

struct Atom {
    double x;
    double mass;
};

inline std::vector<Atom> atoms(const GridMeasure& mu)
{
    std::vector<Atom> out;
    for (std::size_t i = 0; i < mu.size(); ++i)
        if (mu.masses[i] != 0.0) out.push_back({mu.center(i), mu.masses[i]});
    return out;
}

inline std::size_t occupied(const GridMeasure& mu)
{
    return static_cast<std::size_t>(std::count_if(mu.masses.begin(), mu.masses.end(), [](double m) { return m != 0.0; }));
}

// ---- construction ----------------------------------------------------------

inline GridMeasure from_cells(int level, std::int64_t first, std::vector<double> masses, bool normalize = false)
{
    require(level >= 1, cat("construct: level must be >= 1, got ", level));
    require(static_cast<std::int64_t>(masses.size()) <= max_cells(), cat("construct: ", masses.size(), " cells exceeds limit"));
    for (std::size_t i = 0; i < masses.size(); ++i)
        require(std::isfinite(masses[i]) && masses[i] >= 0.0,
                cat("construct: cell ", first + static_cast<std::int64_t>(i), " has invalid mass ", masses[i]));
    GridMeasure mu;
    mu.level = level;
    mu.first = first;
    mu.masses = std::move(masses);
    mu.recompute_total();
    if (normalize) {
        require(mu.total_mass > 0.0, "construct: cannot normalize a zero measure");
        const double inv = 1.0 / mu.total_mass;
        for (double& m : mu.masses) m *= inv;
        mu.recompute_total();
    }
    return mu;
}

namespace detail {

inline std::pair<std::int64_t, std::int64_t> window_cells(double lo, double hi, int level)
{
    require(std::isfinite(lo) && std::isfinite(hi) && lo < hi, cat("construct: bad window [", lo, ", ", hi, ")"));
    const double inv_h = std::ldexp(1.0, level);
    const auto a = static_cast<std::int64_t>(std::floor(lo * inv_h));
    const auto b = static_cast<std::int64_t>(std::ceil(hi * inv_h));
    require(b - a <= max_cells(), cat("construct: window needs ", b - a, " cells"));
    return {a, std::max(b, a + 1)};
}

}  // namespace detail

// Midpoint rule: cell mass = f(center) * h.
inline GridMeasure from_density(const std::function<double(double)>& f, double lo, double hi, int level, bool normalize = true)
{
    require(level >= 1, cat("construct: level must be >= 1, got ", level));
    auto [a, b] = detail::window_cells(lo, hi, level);
    const double h = dyadic(level);
    std::vector<double> m(static_cast<std::size_t>(b - a));
    for (std::size_t i = 0; i < m.size(); ++i) {
        const double x = (static_cast<double>(a + static_cast<std::int64_t>(i)) + 0.5) * h;
        const double v = f(x);
        require(std::isfinite(v) && v >= 0.0, cat("construct: density sample ", v, " at x=", x, " is negative or not finite"));
        m[i] = v * h;
    }
    return from_cells(level, a, std::move(m), normalize);
}

// Atoms bin to the half-open cell containing them (a boundary point belongs to
// the cell on its right).
inline GridMeasure from_atoms(const std::vector<Atom>& pts, double lo, double hi, int level, bool normalize = true)
{
    require(level >= 1, cat("construct: level must be >= 1, got ", level));
    auto [a, b] = detail::window_cells(lo, hi, level);
    const double inv_h = std::ldexp(1.0, level);
    std::vector<double> m(static_cast<std::size_t>(b - a), 0.0);
    for (const auto& p : pts) {
        require(p.x >= lo && p.x < hi, cat("construct: atom at x=", p.x, " lies outside window [", lo, ", ", hi, ")"));
        require(std::isfinite(p.mass) && p.mass >= 0.0, cat("construct: atom at x=", p.x, " has invalid mass ", p.mass));
        const auto k = static_cast<std::int64_t>(std::floor(p.x * inv_h));
        m[static_cast<std::size_t>(k - a)] += p.mass;
    }
    return from_cells(level, a, std::move(m), normalize);
}

inline GridMeasure point_mass(double x, int level)
{
    const double h = dyadic(level);
    const double lo = std::floor(x / h) * h;
    return from_atoms({{x, 1.0}}, lo, lo + h, level, false);
}

namespace detail {

// Adds `mass` spread uniformly over [lo, hi) to a mass vector whose cell 0 is
// global cell `first` at scale h. Cells are assumed to cover [lo, hi).
inline void spread_uniform(std::vector<double>& m, std::int64_t first, double h, double lo, double hi, double mass)
{
    if (!(hi > lo)) {
        const auto k = static_cast<std::int64_t>(std::floor(lo / h));
        m[static_cast<std::size_t>(k - first)] += mass;
        return;
    }
    const auto k0 = static_cast<std::int64_t>(std::floor(lo / h));
    auto k1 = static_cast<std::int64_t>(std::floor(hi / h));
    if (static_cast<double>(k1) * h >= hi) --k1;
    const double dens = mass / (hi - lo);
    if (k0 == k1) {
        m[static_cast<std::size_t>(k0 - first)] += mass;
        return;
    }
    double placed = 0.0;
    for (std::int64_t k = k0; k <= k1; ++k) {
        const double a = std::max(lo, static_cast<double>(k) * h);
        const double b = std::min(hi, static_cast<double>(k + 1) * h);
        double w = (k == k1) ? mass - placed : dens * (b - a);
        if (w < 0.0) w = 0.0;
        m[static_cast<std::size_t>(k - first)] += w;
        placed += w;
    }
}

}  // namespace detail

// Uniform probability measure on [lo, hi), cells weighted by exact overlap.
inline GridMeasure uniform(double lo, double hi, int level)
{
    auto [a, b] = detail::window_cells(lo, hi, level);
    std::vector<double> m(static_cast<std::size_t>(b - a), 0.0);
    detail::spread_uniform(m, a, dyadic(level), lo, hi, 1.0);
    return from_cells(level, a, std::move(m), false);
}

// ---- grid maintenance ------------------------------------------------------

inline GridMeasure trim(const GridMeasure& mu)
{
    std::size_t a = 0, b = mu.size();
    while (a < b && mu.masses[a] == 0.0) ++a;
    while (b > a && mu.masses[b - 1] == 0.0) --b;
    if (a == b) return from_cells(mu.level, mu.first, {0.0});
    GridMeasure out;
    out.level = mu.level;
    out.first = mu.first + static_cast<std::int64_t>(a);
    out.masses.assign(mu.masses.begin() + static_cast<std::ptrdiff_t>(a), mu.masses.begin() + static_cast<std::ptrdiff_t>(b));
    out.total_mass = mu.total_mass;
    return out;
}

// Splits every cell into 2^(level - mu.level) equal children.
inline GridMeasure refine(const GridMeasure& mu, int level)
{
    require(level >= mu.level, cat("refine: target level ", level, " is coarser than ", mu.level));
    if (level == mu.level) return mu;
    const std::int64_t f = std::int64_t{1} << (level - mu.level);
    require(static_cast<std::int64_t>(mu.size()) * f <= max_cells(),
            cat("refine: ", mu.size(), " cells at factor ", f, " exceeds limit"));
    std::vector<double> m(mu.size() * static_cast<std::size_t>(f));
    const double inv = 1.0 / static_cast<double>(f);
    for (std::size_t i = 0; i < mu.size(); ++i)
        for (std::int64_t c = 0; c < f; ++c) m[i * static_cast<std::size_t>(f) + static_cast<std::size_t>(c)] = mu.masses[i] * inv;
    return from_cells(level, mu.first * f, std::move(m));
}

inline GridMeasure coarsen(const GridMeasure& mu, int level)
{
    require(level <= mu.level && level >= 1, cat("coarsen: bad target level ", level));
    if (level == mu.level) return mu;
    const std::int64_t f = std::int64_t{1} << (mu.level - level);
    const std::int64_t a = floor_div(mu.first, f);
    const std::int64_t b = floor_div(mu.end() - 1, f) + 1;
    std::vector<double> m(static_cast<std::size_t>(b - a), 0.0);
    for (std::size_t i = 0; i < mu.size(); ++i)
        m[static_cast<std::size_t>(floor_div(mu.first + static_cast<std::int64_t>(i), f) - a)] += mu.masses[i];
    return from_cells(level, a, std::move(m));
}

// Copy of mu whose window covers global cells [a, b) at the same level.
inline GridMeasure widen(const GridMeasure& mu, std::int64_t a, std::int64_t b)
{
    a = std::min(a, mu.first);
    b = std::max(b, mu.end());
    std::vector<double> m(static_cast<std::size_t>(b - a), 0.0);
    std::copy(mu.masses.begin(), mu.masses.end(), m.begin() + (mu.first - a));
    GridMeasure out = mu;
    out.first = a;
    out.masses = std::move(m);
    return out;
}

inline double l1_distance(const GridMeasure& mu, const GridMeasure& nu)
{
    const int lv = std::max(mu.level, nu.level);
    GridMeasure a = refine(mu, lv), b = refine(nu, lv);
    const std::int64_t lo = std::min(a.first, b.first), hi = std::max(a.end(), b.end());
    a = widen(a, lo, hi);
    b = widen(b, lo, hi);
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a.masses[i] - b.masses[i]);
    return d;
}

// ---- kernel ----------------------------------------------------------------

// Bump P: 1 on [-1/2, 1/2], 3u^2 - 2u^3 with u = 2(1-|x|) on 1/2 <= |x| <= 1,
// 0 outside. Integral 3/2.
inline double kernel_shape(double x)
{
    const double a = std::abs(x);
    if (a <= 0.5) return 1.0;
    if (a >= 1.0) return 0.0;
    const double u = 2.0 * (1.0 - a);
    return u * u * (3.0 - 2.0 * u);
}

inline constexpr double kernel_integral() { return 1.5; }

// Distribution function of the normalized kernel P / 1.5.
inline double kernel_cdf(double x)
{
    if (x <= -1.0) return 0.0;
    if (x >= 1.0) return 1.0;
    if (x > 0.0) return 1.0 - kernel_cdf(-x);
    if (x <= -0.5) {
        const double u = 2.0 * (1.0 + x);
        return (u * u * u - 0.5 * u * u * u * u) / 3.0;
    }
    return 1.0 / 6.0 + (x + 0.5) / kernel_integral();
}

// Mass of P_delta over the cells at offsets -n..n when delta = n h:
// w_k = integral of P_delta over [(k - 1/2) h, (k + 1/2) h].
inline std::vector<double> kernel_weights(std::int64_t n)
{
    std::vector<double> w(static_cast<std::size_t>(2 * n + 1));
    const double dn = static_cast<double>(n);
    for (std::int64_t k = -n; k <= n; ++k) {
        const double k0 = (static_cast<double>(k) - 0.5) / dn;
        const double k1 = (static_cast<double>(k) + 0.5) / dn;
        w[static_cast<std::size_t>(k + n)] = kernel_cdf(k1) - kernel_cdf(k0);
    }
    return w;
}

inline std::int64_t kernel_halfwidth(const GridMeasure& mu, double delta)
{
    const double h = mu.scale();
    require(delta >= h, cat("regularize: delta=", delta, " is below the grid scale ", h));
    const double ratio = delta / h;
    require(exact_log2(ratio).has_value(), cat("regularize: delta=", delta, " is not a dyadic multiple of the grid scale ", h));
    return static_cast<std::int64_t>(ratio);
}

// mu * P_delta on the grid of mu. Support grows by delta on each side.
inline GridMeasure regularize(const GridMeasure& mu, double delta)
{
    const std::int64_t n = kernel_halfwidth(mu, delta);
    require(static_cast<std::int64_t>(mu.size()) + 2 * n <= max_cells(), cat("regularize: grid would exceed limit at delta=", delta));
    auto w = kernel_weights(n);
    auto c = linear_convolve(mu.masses, w);
    for (double& v : c)
        if (v < 0.0) v = 0.0;
    GridMeasure out;
    out.level = mu.level;
    out.first = mu.first - n;
    out.masses = std::move(c);
    out.recompute_total();
    return out;
}

// ---- maps and restrictions -------------------------------------------------

// Image under x -> a x + b. Each source cell is treated as a uniform density
// and its image interval is spread over the target cells by overlap.
inline GridMeasure pushforward_affine(const GridMeasure& mu, double a, double b, std::optional<int> out_level = std::nullopt)
{
    require(a != 0.0 && std::isfinite(a), cat("pushforward_affine: degenerate slope a=", a));
    require(std::isfinite(b), cat("pushforward_affine: bad offset b=", b));
    const int lv = out_level.value_or(mu.level);
    require(lv >= 1, cat("pushforward_affine: bad level ", lv));
    const double h = mu.scale(), ho = dyadic(lv);

    double ylo = std::numeric_limits<double>::infinity(), yhi = -ylo;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        if (mu.masses[i] == 0.0) continue;
        const double x0 = static_cast<double>(mu.first + static_cast<std::int64_t>(i)) * h;
        const double y0 = a * x0 + b, y1 = a * (x0 + h) + b;
        ylo = std::min({ylo, y0, y1});
        yhi = std::max({yhi, y0, y1});
    }
    if (!std::isfinite(ylo)) return from_cells(lv, static_cast<std::int64_t>(std::floor(b / ho)), {0.0});
    const auto k0 = static_cast<std::int64_t>(std::floor(ylo / ho));
    const auto k1 = static_cast<std::int64_t>(std::floor(yhi / ho)) + 1;
    require(k1 - k0 <= max_cells(), cat("pushforward_affine: image needs ", k1 - k0, " cells"));
    std::vector<double> m(static_cast<std::size_t>(k1 - k0), 0.0);
    for (std::size_t i = 0; i < mu.size(); ++i) {
        if (mu.masses[i] == 0.0) continue;
        const double x0 = static_cast<double>(mu.first + static_cast<std::int64_t>(i)) * h;
        const double y0 = a * x0 + b, y1 = a * (x0 + h) + b;
        detail::spread_uniform(m, k0, ho, std::min(y0, y1), std::max(y0, y1), mu.masses[i]);
    }
    GridMeasure out;
    out.level = lv;
    out.first = k0;
    out.masses = std::move(m);
    out.recompute_total();
    return trim(out);
}

struct Restriction {
    GridMeasure measure;
    double retained = 0.0;
};

// Zeroes mass outside A and renormalizes.
inline Restriction restrict_normalize(const GridMeasure& mu, const GridSet1& A)
{
    require(A.level <= mu.level, cat("restrict_normalize: set level ", A.level, " is finer than measure level ", mu.level));
    const int shift = mu.level - A.level;
    GridMeasure out = mu;
    double kept = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::int64_t g = mu.first + static_cast<std::int64_t>(i);
        const std::int64_t p = floor_div(g, std::int64_t{1} << shift);
        if (!A.contains({p})) out.masses[i] = 0.0;
        else kept += out.masses[i];
    }
    require(kept > 0.0, "restrict_normalize: the set carries no mass");
    const double retained = mu.total_mass > 0.0 ? kept / mu.total_mass : 0.0;
    for (double& m : out.masses) m /= kept;
    out.recompute_total();
    return {out, retained};
}

// Sliding sums of `w` consecutive masses.
inline std::vector<double> window_sums(const std::vector<double>& m, std::size_t w)
{
    if (m.empty()) return {};
    w = std::max<std::size_t>(1, w);
    if (w >= m.size()) {
        double t = 0.0;
        for (double v : m) t += v;
        return {t};
    }
    std::vector<long double> pre(m.size() + 1, 0.0L);
    for (std::size_t i = 0; i < m.size(); ++i) pre[i + 1] = pre[i] + m[i];
    std::vector<double> out(m.size() - w + 1);
    for (std::size_t i = 0; i + w <= m.size(); ++i) out[i] = static_cast<double>(pre[i + w] - pre[i]);
    return out;
}

// max_a mu(B(a, r)) over grid points a; the ball covers floor(r/h) cells on
// each side of a.
inline double sup_ball_mass(const GridMeasure& mu, double r)
{
    const double h = mu.scale();
    require(r >= h, cat("sup_ball_mass: r=", r, " is below the grid scale ", h));
    const auto w = static_cast<std::size_t>(std::floor(r / h));
    auto s = window_sums(mu.masses, 2 * w);
    return *std::max_element(s.begin(), s.end());
}

// ---- serialization ---------------------------------------------------------

inline void write_measure(std::ostream& os, const GridMeasure& mu)
{
    os.precision(17);
    os << "level " << mu.level << "\norigin " << mu.origin() << "\ncount " << mu.size() << '\n';
    for (double m : mu.masses) os << m << '\n';
}

inline GridMeasure read_measure(std::istream& is)
{
    std::string key;
    int level = 0;
    double origin = 0.0;
    std::size_t count = 0;
    if (!(is >> key >> level) || key != "level") throw contract_error("read_measure: bad level header");
    if (!(is >> key >> origin) || key != "origin") throw contract_error("read_measure: bad origin header");
    if (!(is >> key >> count) || key != "count") throw contract_error("read_measure: bad count header");
    const double f = origin * std::ldexp(1.0, level);
    require(f == std::floor(f), cat("read_measure: origin ", origin, " is not a multiple of the grid scale"));
    std::vector<double> m(count);
    for (auto& v : m)
        if (!(is >> v)) throw contract_error("read_measure: truncated mass list");
    return from_cells(level, static_cast<std::int64_t>(f), std::move(m));
}

}  // namespace decaylab
