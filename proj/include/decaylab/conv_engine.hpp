#pragma once

#include "decaylab/measure_grid.hpp"

namespace decaylab {

enum class ConvOp { add, sub, mul };

inline const char* to_string(ConvOp op)
{
    switch (op) {
    case ConvOp::add: return "add";
    case ConvOp::sub: return "sub";
    case ConvOp::mul: return "mul";
    }
    return "?";
}

// Image under x -> -x. Cell i maps to cell -i-1.
inline GridMeasure reflect(const GridMeasure& mu)
{
    GridMeasure out = mu;
    out.first = -mu.end();
    std::reverse(out.masses.begin(), out.masses.end());
    return out;
}

namespace detail {

// Cells are uniform densities, so the sum of cells i and j is a tent on
// [(i+j) h, (i+j+2) h] with half its mass in each of cells i+j and i+j+1.
inline GridMeasure add_same_level(const GridMeasure& mu, const GridMeasure& nu)
{
    require(static_cast<std::int64_t>(mu.size() + nu.size()) <= max_cells(),
            cat("convolve: sum grid of ", mu.size() + nu.size(), " cells exceeds limit"));
    auto c = linear_convolve(mu.masses, nu.masses);
    std::vector<double> m(c.size() + 1, 0.0);
    for (std::size_t k = 0; k < c.size(); ++k) {
        const double v = c[k] < 0.0 ? 0.0 : c[k];
        m[k] += 0.5 * v;
        m[k + 1] += 0.5 * v;
    }
    GridMeasure out;
    out.level = mu.level;
    out.first = mu.first + nu.first;
    out.masses = std::move(m);
    out.recompute_total();
    return out;
}

// Product routing. The product of the two cell centres goes to the cell
// containing it; an exact tie on a boundary is split between both neighbours so
// that x -> -x symmetry survives.
inline GridMeasure mul_route(const GridMeasure& mu, const GridMeasure& nu, int out_level)
{
    const auto a = atoms(mu), b = atoms(nu);
    const double inv_ho = std::ldexp(1.0, out_level);
    if (a.empty() || b.empty()) return from_cells(out_level, 0, {0.0});

    double plo = std::numeric_limits<double>::infinity(), phi = -plo;
    auto ext = [](const std::vector<Atom>& v) {
        double lo = v.front().x, hi = v.front().x;
        for (auto& p : v) lo = std::min(lo, p.x), hi = std::max(hi, p.x);
        return std::pair{lo, hi};
    };
    auto [alo, ahi] = ext(a);
    auto [blo, bhi] = ext(b);
    for (double x : {alo, ahi})
        for (double y : {blo, bhi}) plo = std::min(plo, x * y), phi = std::max(phi, x * y);
    const auto k0 = static_cast<std::int64_t>(std::floor(plo * inv_ho)) - 1;
    const auto k1 = static_cast<std::int64_t>(std::floor(phi * inv_ho)) + 2;
    require(k1 - k0 <= max_cells(), cat("convolve(mul): product grid needs ", k1 - k0, " cells at level ", out_level));
    const auto n = static_cast<std::size_t>(k1 - k0);

    // Fixed partition of the outer loop; partial grids are summed in chunk
    // order, so the result is independent of how many threads run.
    std::size_t chunks = std::clamp<std::size_t>((std::size_t{1} << 24) / std::max<std::size_t>(n, 1), 1, 16);
    chunks = std::min(chunks, a.size());
    std::vector<std::vector<double>> part(chunks);
    for_chunks(chunks, [&](std::size_t c) {
        auto& m = part[c];
        m.assign(n, 0.0);
        const std::size_t i0 = a.size() * c / chunks, i1 = a.size() * (c + 1) / chunks;
        for (std::size_t i = i0; i < i1; ++i) {
            const double x = a[i].x, px = a[i].mass;
            for (const auto& q : b) {
                const double u = (x * q.x) * inv_ho;
                const double fl = std::floor(u);
                const auto k = static_cast<std::size_t>(static_cast<std::int64_t>(fl) - k0);
                const double w = px * q.mass;
                if (u == fl) {
                    m[k - 1] += 0.5 * w;
                    m[k] += 0.5 * w;
                } else {
                    m[k] += w;
                }
            }
        }
    });
    std::vector<double> m = std::move(part[0]);
    for (std::size_t c = 1; c < chunks; ++c)
        for (std::size_t k = 0; k < n; ++k) m[k] += part[c][k];
    GridMeasure out;
    out.level = out_level;
    out.first = k0;
    out.masses = std::move(m);
    out.recompute_total();
    return trim(out);
}

}  // namespace detail

// mu (op) nu. Mismatched levels are refined to the finer one. For mul the
// output level defaults to the finer input level.
inline GridMeasure convolve(const GridMeasure& mu, const GridMeasure& nu, ConvOp op, std::optional<int> out_level = std::nullopt)
{
    const int lv = std::max(mu.level, nu.level);
    switch (op) {
    case ConvOp::add: return trim(detail::add_same_level(refine(mu, lv), refine(nu, lv)));
    case ConvOp::sub: return trim(detail::add_same_level(refine(mu, lv), reflect(refine(nu, lv))));
    case ConvOp::mul: return detail::mul_route(mu, nu, out_level.value_or(lv));
    }
    throw contract_error("convolve: unknown op");
}

// k-fold power. For add with k a power of two this is repeated doubling.
inline GridMeasure power(const GridMeasure& mu, int k, ConvOp op, std::optional<int> out_level = std::nullopt)
{
    require(k >= 1, cat("power: k must be >= 1, got ", k));
    if (op == ConvOp::add && (k & (k - 1)) == 0) {
        GridMeasure p = mu;
        for (int j = 1; j < k; j <<= 1) p = convolve(p, p, ConvOp::add);
        return p;
    }
    GridMeasure p = mu;
    for (int j = 1; j < k; ++j) p = convolve(p, mu, op, out_level);
    return p;
}

// (mu - mu) * (nu - nu).
inline GridMeasure pi_measure(const GridMeasure& mu, const GridMeasure& nu, std::optional<int> out_level = std::nullopt)
{
    return convolve(convolve(mu, mu, ConvOp::sub), convolve(nu, nu, ConvOp::sub), ConvOp::mul, out_level);
}

// max |mu(cell i) - mu(cell -i-1)|, i.e. the asymmetry about 0.
inline double asymmetry(const GridMeasure& mu)
{
    double worst = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const std::int64_t g = mu.first + static_cast<std::int64_t>(i);
        const std::int64_t mirror = -g - 1;
        const double other = (mirror >= mu.first && mirror < mu.end()) ? mu.masses[static_cast<std::size_t>(mirror - mu.first)] : 0.0;
        worst = std::max(worst, std::abs(mu.masses[i] - other));
    }
    return worst;
}

}  // namespace decaylab
