#pragma once

#include "decaylab/energy.hpp"
#include "decaylab/rng.hpp"

namespace decaylab {

struct SetAndMeasure {
    GridSet1 set;
    GridMeasure measure;
};

// Equal mass on every cell of A.
inline GridMeasure uniform_on(const GridSet1& A)
{
    require(!A.empty(), "uniform_on: empty set");
    const std::int64_t a = A.cells.front()[0], b = A.cells.back()[0] + 1;
    std::vector<double> m(static_cast<std::size_t>(b - a), 0.0);
    const double w = 1.0 / static_cast<double>(A.size());
    for (auto& c : A.cells) m[static_cast<std::size_t>(c[0] - a)] = w;
    return from_cells(A.level, a, std::move(m));
}

inline GridSet1 support_set(const GridMeasure& mu)
{
    std::vector<std::int64_t> idx;
    for (std::size_t i = 0; i < mu.size(); ++i)
        if (mu.masses[i] > 0.0) idx.push_back(mu.first + static_cast<std::int64_t>(i));
    GridSet1 s = make_set1(mu.level, idx);
    s.window = {mu.lo(), mu.hi()};
    return s;
}

// ---- lattice sets ----------------------------------------------------------

// n_k = 2^(2^k) for k = 1, 2, ... while 1/n_k >= 2^-level.
inline std::vector<std::int64_t> default_schedule(int level)
{
    std::vector<std::int64_t> n;
    for (int k = 1; k < 6 && (1 << k) <= level; ++k) n.push_back(std::int64_t{1} << (1 << k));
    return n;
}

// {x in [0,1] : dist(x, n_k^-s Z) <= 1/n_k for all k}, as the level-`level`
// cells lying inside it, with the uniform measure.
inline SetAndMeasure make_H_s(double s, const std::vector<std::int64_t>& schedule, int level)
{
    require(s > 0.0 && s <= 1.0, cat("make_H_s: s=", s, " outside (0,1]"));
    require(level >= 1 && level <= 24, cat("make_H_s: level ", level, " outside [1,24]"));
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        require(schedule[k] >= 1, cat("make_H_s: n_", k + 1, "=", schedule[k], " must be positive"));
        require(k == 0 || schedule[k] > schedule[k - 1], cat("make_H_s: schedule must increase strictly at k=", k + 1));
        require(1.0 / static_cast<double>(schedule[k]) >= dyadic(level),
                cat("make_H_s: 1/n_", k + 1, " is below the grid scale 2^-", level));
    }
    const std::int64_t N = std::int64_t{1} << level;
    const double h = dyadic(level);
    std::vector<std::int64_t> keep(static_cast<std::size_t>(N));
    for (std::int64_t i = 0; i < N; ++i) keep[static_cast<std::size_t>(i)] = i;
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        const double n = static_cast<double>(schedule[k]);
        const double L = std::pow(n, -s), tol = 1.0 / n + 1e-12 * h;
        std::vector<std::int64_t> next;
        for (auto i : keep) {
            const double a = static_cast<double>(i) * h, b = a + h;
            const double p = std::round((a + 0.5 * h) / L) * L;
            if (std::abs(a - p) <= tol && std::abs(b - p) <= tol) next.push_back(i);
        }
        require(!next.empty(), cat("make_H_s: set is empty at grid resolution after k=", k + 1, " (n=", schedule[k], ")"));
        keep = std::move(next);
    }
    SetAndMeasure out;
    out.set = make_set1(level, keep);
    out.measure = uniform_on(out.set);
    return out;
}

struct ContainmentReport {
    std::vector<double> worst;  // per k: max dist(product, n_k^-sum Z) * n_k
    std::vector<double> bound;  // per k: the allowed value in the same units
    bool pass = true;
};

// Products a_1 ... a_N of cell endpoints of the sets against the lattice
// n_k^-(s_1 + ... + s_N) Z. Allowed distance is (1 + 2/n)^N - (1 + 1/n)^N,
// whose leading term is N/n.
inline ContainmentReport product_containment(const std::vector<GridSet1>& sets, const std::vector<double>& s,
                                             const std::vector<std::int64_t>& schedule)
{
    require(!sets.empty() && sets.size() == s.size(), "product_containment: need one exponent per set");
    std::vector<std::vector<double>> pts(sets.size());
    std::size_t tuples = 1;
    for (std::size_t i = 0; i < sets.size(); ++i) {
        for (auto& c : sets[i].cells) {
            pts[i].push_back(static_cast<double>(c[0]) * sets[i].scale());
            pts[i].push_back(static_cast<double>(c[0] + 1) * sets[i].scale());
        }
        std::sort(pts[i].begin(), pts[i].end());
        pts[i].erase(std::unique(pts[i].begin(), pts[i].end()), pts[i].end());
        tuples *= pts[i].size();
    }
    require(tuples <= (std::size_t{1} << 26), cat("product_containment: ", tuples, " tuples is too many"));
    double stot = 0.0;
    for (double v : s) stot += v;
    ContainmentReport r;
    for (auto nk : schedule) {
        const double n = static_cast<double>(nk), L = std::pow(n, -stot);
        const double N = static_cast<double>(sets.size());
        const double bound = (std::pow(1.0 + 2.0 / n, N) - std::pow(1.0 + 1.0 / n, N)) * n;
        double worst = 0.0;
        std::vector<std::size_t> idx(sets.size(), 0);
        for (std::size_t t = 0; t < tuples; ++t) {
            double p = 1.0;
            for (std::size_t i = 0; i < sets.size(); ++i) p *= pts[i][idx[i]];
            worst = std::max(worst, std::abs(p - std::round(p / L) * L) * n);
            for (std::size_t i = 0; i < sets.size(); ++i) {
                if (++idx[i] < pts[i].size()) break;
                idx[i] = 0;
            }
        }
        r.worst.push_back(worst);
        r.bound.push_back(bound);
        r.pass = r.pass && worst <= bound * (1 + 1e-9);
    }
    return r;
}

// ---- combs -----------------------------------------------------------------

struct Comb {
    GridSet1 set;
    GridMeasure measure;
    double min_cos = 0;       // min of cos(2 pi x / r) over the teeth
    double transform_at = 0;  // |rho^(1/r)|
};

// r^-1 teeth of length c r centred at r Z in [0, 1), uniform probability on
// their union. The grid has at least 8 cells per tooth.
inline Comb make_comb(double r, double c, std::optional<int> level = std::nullopt)
{
    auto e = exact_log2(r);
    require(e.has_value() && *e <= -2, cat("make_comb: r=", r, " must be dyadic and <= 1/4"));
    require(c > 0.0 && c <= 0.125, cat("make_comb: c=", c, " outside (0, 1/8]"));
    const int lv = level.value_or(static_cast<int>(std::ceil(std::log2(1.0 / (c * r)))) + 3);
    require(dyadic(lv) <= c * r, cat("make_comb: level ", lv, " cannot resolve teeth of length ", c * r));
    const auto teeth = static_cast<std::int64_t>(std::llround(1.0 / r));
    const double h = dyadic(lv);
    const auto a = static_cast<std::int64_t>(std::floor(-0.5 * c * r / h));
    const auto b = static_cast<std::int64_t>(std::ceil((1.0 - r + 0.5 * c * r) / h)) + 1;
    std::vector<double> m(static_cast<std::size_t>(b - a), 0.0);
    for (std::int64_t t = 0; t < teeth; ++t) {
        const double x = static_cast<double>(t) * r;
        detail::spread_uniform(m, a, h, x - 0.5 * c * r, x + 0.5 * c * r, 1.0 / static_cast<double>(teeth));
    }
    Comb out;
    out.measure = trim(from_cells(lv, a, std::move(m)));
    out.set = support_set(out.measure);
    out.min_cos = 1.0;
    for (auto& cell : out.set.cells)
        for (double x : {static_cast<double>(cell[0]) * h, static_cast<double>(cell[0] + 1) * h})
            out.min_cos = std::min(out.min_cos, std::cos(2.0 * std::numbers::pi * x / r));
    out.transform_at = std::abs(fourier_at(out.measure, 1.0 / r));
    require(out.min_cos >= 0.5, cat("make_comb: cosine floor fails, min cos(2 pi x / r) = ", out.min_cos));
    require(out.transform_at >= 0.5, cat("make_comb: |rho^(1/r)| = ", out.transform_at, " < 1/2"));
    return out;
}

struct L2Counterexample {
    GridMeasure measure;
    Comb comb;
    double r = 0;            // tooth spacing of the comb, dyadic rounding of delta^s
    double phase_budget = 0;  // 2 pi (delta^{2-3s} + 3 delta^{1-2s})
};

// Image of the comb (spacing ~delta^s, c = 1/16) under x -> 1 + (delta/r) x,
// so the teeth sit delta apart inside [1, 1 + delta^{1-s}].
inline L2Counterexample make_L2_counterexample(double s, double delta, double c = 1.0 / 16)
{
    require(s > 0.0 && s < 0.5, cat("make_L2_counterexample: s=", s, " outside (0, 1/2)"));
    auto e = exact_log2(delta);
    require(e.has_value() && *e < 0, cat("make_L2_counterexample: delta=", delta, " is not a dyadic scale < 1"));
    const int m = -*e;
    const double b1 = std::pow(delta, 2.0 - 3.0 * s), b2 = std::pow(delta, 1.0 - 2.0 * s);
    const double budget = 2.0 * std::numbers::pi * (b1 + 3.0 * b2);
    require(b1 <= (1.0 + 1e-9) / 16 && b2 <= (1.0 + 1e-9) / 16,
            cat("make_L2_counterexample: phase budget too large (delta^{2-3s}=", b1, ", delta^{1-2s}=", b2, ", total ", budget, ")"));
    const int k = static_cast<int>(std::lround(s * m));
    require(k >= 2, cat("make_L2_counterexample: delta=", delta, " too coarse for s=", s));
    L2Counterexample out;
    out.r = dyadic(k);
    out.comb = make_comb(out.r, c);
    out.phase_budget = budget;
    const double a = delta / out.r;
    const int lv = out.comb.measure.level + (m - k);
    out.measure = pushforward_affine(out.comb.measure, a, 1.0, lv);
    return out;
}

// Normalized uniform measure on [0, c delta^{1-s}].
inline GridMeasure make_interval_example(double s, double delta, double c)
{
    require(s >= 0.0 && s < 2.0 / 3.0, cat("make_interval_example: s=", s, " outside [0, 2/3)"));
    require(c > 0.0 && c <= 0.5, cat("make_interval_example: c=", c, " outside (0, 1/2]"));
    require(delta > 0.0 && delta < 1.0, cat("make_interval_example: bad delta=", delta));
    const double L = c * std::pow(delta, 1.0 - s);
    const int lv = static_cast<int>(std::ceil(std::log2(1.0 / L))) + 8;
    return uniform(0.0, L, lv);
}

// ---- random Cantor sets ----------------------------------------------------

struct CantorSpec {
    int D = 1;
    std::vector<int> keep{1};  // one entry, or one per level
    int depth = 1;
    std::uint64_t seed = 0;

    int keep_at(int j) const { return keep.size() == 1 ? keep.front() : keep[static_cast<std::size_t>(j)]; }

    double dimension() const
    {
        double t = 0.0;
        for (int j = 0; j < depth; ++j) t += std::log2(static_cast<double>(keep_at(j)));
        return t / (D * depth);
    }
};

inline void validate(const CantorSpec& c)
{
    require(c.D >= 1 && c.D <= 8, cat("cantor: block D=", c.D, " outside [1,8]"));
    require(c.depth >= 1 && c.D * c.depth <= 24, cat("cantor: depth ", c.depth, " gives level above 24"));
    require(c.keep.size() == 1 || static_cast<int>(c.keep.size()) == c.depth,
            cat("cantor: keep schedule has ", c.keep.size(), " entries for depth ", c.depth));
    for (int k : c.keep) require(k >= 1 && k <= (1 << c.D), cat("cantor: keep=", k, " outside [1, 2^D]"));
}

struct RandomCantor {
    GridSet1 set;
    GridMeasure measure;
    double s = 0;
    double frostman = 0;
};

// Each kept node keeps `keep` of its 2^D children, chosen by a partial
// Fisher-Yates shuffle; mass splits equally. Fails if the Frostman constant
// at s = log2(keep)/D exceeds 4.
inline RandomCantor make_random_frostman(const CantorSpec& spec)
{
    validate(spec);
    Rng rng(spec.seed);
    const int B = 1 << spec.D;
    std::vector<std::int64_t> nodes{0};
    std::vector<int> perm(static_cast<std::size_t>(B));
    for (int j = 0; j < spec.depth; ++j) {
        const int k = spec.keep_at(j);
        std::vector<std::int64_t> next;
        next.reserve(nodes.size() * static_cast<std::size_t>(k));
        for (auto p : nodes) {
            for (int i = 0; i < B; ++i) perm[static_cast<std::size_t>(i)] = i;
            for (int i = 0; i < k; ++i) {
                const auto pick = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(B - i)));
                std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(pick)]);
                next.push_back(p * B + perm[static_cast<std::size_t>(i)]);
            }
        }
        nodes = std::move(next);
    }
    RandomCantor out;
    out.set = make_set1(spec.D * spec.depth, nodes);
    out.measure = uniform_on(out.set);
    out.s = spec.dimension();
    out.frostman = frostman_constant(out.measure, out.s, out.measure.scale(), 1.0).constant;
    require(out.frostman <= 4.0, cat("cantor: Frostman constant ", out.frostman, " exceeds 4 at s=", out.s));
    return out;
}

// mu moved by a dyadic offset, cell for cell.
inline GridMeasure shifted(const GridMeasure& mu, double b)
{
    const double f = b * std::ldexp(1.0, mu.level);
    require(f == std::floor(f), cat("shifted: offset ", b, " is not on the grid"));
    GridMeasure out = mu;
    out.first += static_cast<std::int64_t>(f);
    return out;
}

}  // namespace decaylab
