#pragma once

#include "decaylab/grid_set.hpp"

#include <map>

namespace decaylab {

namespace detail {

template <int Dim>
typename GridSet<Dim>::Cell parent_of(const typename GridSet<Dim>::Cell& c, int shift)
{
    typename GridSet<Dim>::Cell p;
    for (int d = 0; d < Dim; ++d) p[d] = c[d] >> shift;
    return p;
}

inline int dyadic_exponent(double r, const char* who)
{
    auto e = exact_log2(r);
    require(e.has_value() && *e <= 0, cat(who, ": r=", r, " is not a dyadic scale <= 1"));
    return -*e;
}

// Counts per dyadic parent at `shift` levels up, in sorted parent order.
template <int Dim>
std::vector<std::pair<typename GridSet<Dim>::Cell, std::size_t>> parent_counts(const GridSet<Dim>& X, int shift)
{
    std::vector<typename GridSet<Dim>::Cell> ps;
    ps.reserve(X.size());
    for (auto& c : X.cells) ps.push_back(parent_of<Dim>(c, shift));
    std::sort(ps.begin(), ps.end());
    std::vector<std::pair<typename GridSet<Dim>::Cell, std::size_t>> out;
    for (auto& p : ps) {
        if (out.empty() || out.back().first != p) out.push_back({p, 1});
        else ++out.back().second;
    }
    return out;
}

}  // namespace detail

// Number of dyadic r-cells meeting X.
template <int Dim>
std::size_t covering_number(const GridSet<Dim>& X, double r)
{
    const int j = detail::dyadic_exponent(r, "covering_number");
    require(j <= X.level, cat("covering_number: r=", r, " is finer than the set level ", X.level));
    return detail::parent_counts(X, X.level - j).size();
}

enum class SetKind { frostman, katz_tao };

template <int Dim>
struct SetCheck {
    bool pass = true;
    double worst_ratio = 0.0;  // max count / allowed over all (x, r)
    std::array<double, Dim> witness_x{};
    double witness_r = 0.0;
    std::size_t witness_count = 0;
};

// Non-concentration at every dyadic r in [delta, 1]: the count of X-cells in
// each dyadic r-cell is compared with K r^s |X| (frostman) or K (r/delta)^s
// (katz_tao). The witness is the worst (x, r); ties keep the smallest r.
template <int Dim>
SetCheck<Dim> set_check(const GridSet<Dim>& X, double s, double K, SetKind kind)
{
    require(!X.empty(), "set_check: empty set");
    SetCheck<Dim> out;
    const double n = static_cast<double>(X.size());
    for (int j = X.level; j >= 0; --j) {
        const double r = dyadic(j);
        const double allowed = kind == SetKind::frostman ? K * std::pow(r, s) * n : K * std::pow(r / X.scale(), s);
        for (auto& [p, cnt] : detail::parent_counts(X, X.level - j)) {
            const double ratio = static_cast<double>(cnt) / allowed;
            if (ratio > out.worst_ratio) {
                out.worst_ratio = ratio;
                for (int d = 0; d < Dim; ++d) out.witness_x[d] = (static_cast<double>(p[d]) + 0.5) * r;
                out.witness_r = r;
                out.witness_count = cnt;
            }
        }
    }
    out.pass = out.worst_ratio <= 1.0 + 1e-12;
    return out;
}

// ---- uniform subsets and branching -----------------------------------------

// Level index j (1..m) at which X fails to be {2^-Dj}-uniform, if any.
template <int Dim>
std::optional<int> uniformity_violation(const GridSet<Dim>& X, int D, int m)
{
    require(X.level == D * m, cat("uniformity: set level ", X.level, " != D*m = ", D * m));
    for (int j = 1; j <= m; ++j) {
        GridSet<Dim> nodes;
        nodes.level = D * j;
        for (auto& c : X.cells) nodes.cells.push_back(detail::parent_of<Dim>(c, D * (m - j)));
        nodes.normalize();
        auto pc = detail::parent_counts(nodes, D);
        for (auto& e : pc)
            if (e.second != pc.front().second) return j;
    }
    return std::nullopt;
}

// Bottom-up pigeonholing. At each block level the kept child count R is the
// value maximizing R * #{parents with >= R children}; every such parent keeps
// its first R children, the rest are dropped. Ties go to the larger R.
template <int Dim>
GridSet<Dim> uniformize(const GridSet<Dim>& X, int D, int m)
{
    require(D >= 1 && m >= 1, cat("uniformize: bad D=", D, " m=", m));
    require(X.level == D * m, cat("uniformize: set level ", X.level, " != D*m = ", D * m));
    using Cell = typename GridSet<Dim>::Cell;
    std::vector<Cell> S = X.cells;
    for (int j = m; j >= 1 && !S.empty(); --j) {
        const int node_shift = D * (m - j);
        std::map<Cell, std::vector<Cell>> kids;
        for (auto& c : S) {
            Cell node = detail::parent_of<Dim>(c, node_shift);
            auto& v = kids[detail::parent_of<Dim>(node, D)];
            if (v.empty() || v.back() != node) v.push_back(node);
        }
        for (auto& [p, v] : kids) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
        }
        std::size_t maxc = 0;
        for (auto& [p, v] : kids) maxc = std::max(maxc, v.size());
        std::vector<std::size_t> at_least(maxc + 2, 0);
        for (auto& [p, v] : kids) ++at_least[v.size()];
        for (std::size_t c = maxc; c-- > 1;) at_least[c] += at_least[c + 1];
        std::size_t best = 1, best_val = 0;
        for (std::size_t c = 1; c <= maxc; ++c) {
            if (c * at_least[c] >= best_val) best = c, best_val = c * at_least[c];
        }
        std::vector<Cell> keep_nodes;
        for (auto& [p, v] : kids)
            if (v.size() >= best) keep_nodes.insert(keep_nodes.end(), v.begin(), v.begin() + static_cast<std::ptrdiff_t>(best));
        std::sort(keep_nodes.begin(), keep_nodes.end());
        std::vector<Cell> next;
        for (auto& c : S)
            if (std::binary_search(keep_nodes.begin(), keep_nodes.end(), detail::parent_of<Dim>(c, node_shift))) next.push_back(c);
        S = std::move(next);
    }
    GridSet<Dim> out = X;
    out.cells = std::move(S);
    return out;
}

struct BranchingFunction {
    int D = 1, m = 1, dim = 1;
    std::vector<double> values;  // f(j/m), j = 0..m

    double operator()(double u) const
    {
        u = std::clamp(u, 0.0, 1.0) * m;
        const auto j = std::min<std::size_t>(static_cast<std::size_t>(std::floor(u)), static_cast<std::size_t>(m - 1));
        const double t = u - static_cast<double>(j);
        return values[j] + t * (values[j + 1] - values[j]);
    }
};

// log|X|_{2^-Dj} / (D m log 2) at block nodes, without the uniformity check.
template <int Dim>
BranchingFunction branching_profile(const GridSet<Dim>& X, int D, int m)
{
    require(X.level == D * m, cat("branching: set level ", X.level, " != D*m = ", D * m));
    require(!X.empty(), "branching: empty set");
    BranchingFunction f{D, m, Dim, {}};
    for (int j = 0; j <= m; ++j)
        f.values.push_back(std::log2(static_cast<double>(covering_number(X, dyadic(D * j)))) / (D * m));
    return f;
}

template <int Dim>
BranchingFunction branching_function(const GridSet<Dim>& X, int D, int m)
{
    if (auto v = uniformity_violation(X, D, m)) throw contract_error(cat("branching_function: set is not uniform at block level ", *v));
    return branching_profile(X, D, m);
}

struct SuperlinearPiece {
    double a = 0, b = 0, s = 0;
};

struct SuperlinearDecomposition {
    std::vector<SuperlinearPiece> pieces;
    double total = 0;   // sum s_j (b_j - a_j)
    double target = 0;  // f(1) - eps
    bool meets_target = false;
    int min_blocks = 1;
};

namespace detail {

// Largest s with f(u) - f(a) >= s (u - a) at every node of (a, b].
inline double superlinear_slope(const BranchingFunction& f, int a, int b)
{
    double s = std::numeric_limits<double>::infinity();
    for (int u = a + 1; u <= b; ++u)
        s = std::min(s, (f.values[static_cast<std::size_t>(u)] - f.values[static_cast<std::size_t>(a)]) * f.m / (u - a));
    return std::max(0.0, s);
}

}  // namespace detail

// Node-aligned decomposition of [0,1] into pieces of at least ceil(eps/4 m)
// blocks with nondecreasing superlinear slopes, maximizing sum s_j |I_j|.
inline SuperlinearDecomposition superlinear_decompose(const BranchingFunction& f, double eps)
{
    require(eps > 0 && eps < 1, cat("superlinear_decompose: eps=", eps, " outside (0,1)"));
    const int m = f.m;
    SuperlinearDecomposition out;
    out.min_blocks = std::max(1, static_cast<int>(std::ceil(eps / 4.0 * m)));
    out.target = f.values.back() - eps;
    const int L = std::min(out.min_blocks, m);

    std::vector<std::vector<double>> slope(static_cast<std::size_t>(m + 1), std::vector<double>(static_cast<std::size_t>(m + 1), 0.0));
    for (int a = 0; a < m; ++a)
        for (int b = a + 1; b <= m; ++b) slope[a][b] = detail::superlinear_slope(f, a, b);

    const double ninf = -std::numeric_limits<double>::infinity();
    // best[a][b]: optimum over decompositions of [0, b] whose last piece is [a, b].
    std::vector<std::vector<double>> best(static_cast<std::size_t>(m + 1), std::vector<double>(static_cast<std::size_t>(m + 1), ninf));
    std::vector<std::vector<int>> prev(static_cast<std::size_t>(m + 1), std::vector<int>(static_cast<std::size_t>(m + 1), -1));
    for (int b = L; b <= m; ++b) {
        for (int a = 0; a + L <= b; ++a) {
            const double gain = slope[a][b] * (b - a) / m;
            if (a == 0) {
                best[a][b] = gain;
                continue;
            }
            for (int p = 0; p + L <= a; ++p) {
                if (best[p][a] == ninf || slope[p][a] > slope[a][b] + 1e-12) continue;
                if (best[p][a] + gain > best[a][b] + 1e-15) best[a][b] = best[p][a] + gain, prev[a][b] = p;
            }
        }
    }
    int a = 0;
    for (int c = 0; c + L <= m; ++c)
        if (best[c][m] > best[a][m] + 1e-15) a = c;
    int b = m;
    while (true) {
        out.pieces.push_back({static_cast<double>(a) / m, static_cast<double>(b) / m, slope[a][b]});
        out.total += slope[a][b] * (b - a) / m;
        if (a == 0) break;
        const int p = prev[a][b];
        b = a;
        a = p;
    }
    std::reverse(out.pieces.begin(), out.pieces.end());
    out.meets_target = out.total >= out.target - 1e-12;
    return out;
}

// ---- projections -----------------------------------------------------------

// pi_y(x1, x2) = x1 - y x2 applied to cell centres, binned at out_level.
inline GridSet1 project(const GridSet2& X, double y, int out_level)
{
    require(std::abs(y) <= 4.0, cat("project: |y| must be <= 4, got y=", y));
    const double h = X.scale(), inv = std::ldexp(1.0, out_level);
    GridSet1 out;
    out.level = out_level;
    out.window = {X.window[0] - 4.0 * X.window[1], X.window[1] + 4.0 * X.window[1]};
    out.cells.reserve(X.size());
    for (auto& c : X.cells) {
        const double x1 = (static_cast<double>(c[0]) + 0.5) * h, x2 = (static_cast<double>(c[1]) + 0.5) * h;
        out.cells.push_back({static_cast<std::int64_t>(std::floor((x1 - y * x2) * inv))});
    }
    out.normalize();
    return out;
}

struct ProjectionScan {
    std::vector<double> y;
    std::vector<std::size_t> covering;
    std::size_t min = 0, max = 0;
    double argmax_y = 0;
    double threshold = 0;  // delta^{-s-ct}
    double fraction_meeting = 0;
    bool pass = false;
};

// |pi_y(A1 x A2)|_delta for each y-cell centre of Y, delta the level of A1.
inline ProjectionScan projection_scan(const GridSet1& A1, const GridSet1& A2, const GridSet1& Y, double s, double t, double c)
{
    require(!A1.empty() && !A2.empty() && !Y.empty(), "projection_scan: empty input");
    require(A1.level == A2.level, cat("projection_scan: A1, A2 levels differ (", A1.level, ", ", A2.level, ")"));
    const GridSet2 P = product_set(A1, A2);
    ProjectionScan out;
    const std::size_t n = Y.size();
    out.y.resize(n);
    out.covering.resize(n);
    for_chunks(n, [&](std::size_t k) {
        out.y[k] = Y.center(Y.cells[k][0]);
        out.covering[k] = project(P, out.y[k], A1.level).size();
    });
    out.threshold = std::pow(A1.scale(), -s - c * t);
    out.min = *std::min_element(out.covering.begin(), out.covering.end());
    auto it = std::max_element(out.covering.begin(), out.covering.end());
    out.max = *it;
    out.argmax_y = out.y[static_cast<std::size_t>(it - out.covering.begin())];
    std::size_t hits = 0;
    for (auto v : out.covering) hits += static_cast<double>(v) >= out.threshold;
    out.fraction_meeting = static_cast<double>(hits) / static_cast<double>(n);
    out.pass = static_cast<double>(out.max) >= out.threshold;
    return out;
}

// ---- additive energy -------------------------------------------------------

// Difference histogram h(d) = #{(a, b) : a - b = d}, indexed from min(A) - max(B).
inline std::vector<std::uint64_t> difference_histogram(const GridSet1& A, const GridSet1& B)
{
    require(A.level == B.level, cat("additive_energy: levels differ (", A.level, ", ", B.level, ")"));
    if (A.empty() || B.empty()) return {};
    const std::int64_t lo = A.cells.front()[0] - B.cells.back()[0];
    const std::int64_t hi = A.cells.back()[0] - B.cells.front()[0];
    std::vector<std::uint64_t> h(static_cast<std::size_t>(hi - lo + 1), 0);
    for (auto& a : A.cells)
        for (auto& b : B.cells) ++h[static_cast<std::size_t>(a[0] - b[0] - lo)];
    return h;
}

inline std::uint64_t additive_energy(const GridSet1& A, const GridSet1& B)
{
    std::uint64_t e = 0;
    for (auto v : difference_histogram(A, B)) e += v * v;
    return e;
}

inline std::size_t difference_count(const GridSet1& A, const GridSet1& B)
{
    std::size_t n = 0;
    for (auto v : difference_histogram(A, B)) n += v != 0;
    return n;
}

}  // namespace decaylab
