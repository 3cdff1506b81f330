#pragma once

#include "decaylab/common.hpp"

#include <array>
#include <istream>
#include <ostream>

namespace decaylab {

// Finite union of dyadic cells of side 2^-level in R^Dim, stored as sorted
// unique integer cell indices. Cell i covers [i 2^-level, (i+1) 2^-level).
template <int Dim>
struct GridSet {
    static_assert(Dim == 1 || Dim == 2);
    using Cell = std::array<std::int64_t, Dim>;

    int level = 0;
    std::vector<Cell> cells;
    std::array<double, 2> window{0.0, 1.0};

    double scale() const { return dyadic(level); }
    std::size_t size() const { return cells.size(); }
    bool empty() const { return cells.empty(); }

    double center(std::int64_t i) const { return (static_cast<double>(i) + 0.5) * scale(); }

    void normalize()
    {
        std::sort(cells.begin(), cells.end());
        cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    }

    bool contains(const Cell& c) const { return std::binary_search(cells.begin(), cells.end(), c); }

    friend bool operator==(const GridSet&, const GridSet&) = default;
};

using GridSet1 = GridSet<1>;
using GridSet2 = GridSet<2>;

template <int Dim>
GridSet<Dim> make_set(int level, std::vector<typename GridSet<Dim>::Cell> cells)
{
    GridSet<Dim> s;
    s.level = level;
    s.cells = std::move(cells);
    s.normalize();
    return s;
}

inline GridSet1 make_set1(int level, const std::vector<std::int64_t>& idx)
{
    std::vector<GridSet1::Cell> c;
    c.reserve(idx.size());
    for (auto i : idx) c.push_back({i});
    return make_set<1>(level, std::move(c));
}

inline GridSet2 product_set(const GridSet1& a, const GridSet1& b)
{
    require(a.level == b.level, cat("product_set: levels differ (", a.level, " vs ", b.level, ")"));
    GridSet2 out;
    out.level = a.level;
    out.cells.reserve(a.size() * b.size());
    for (auto& x : a.cells)
        for (auto& y : b.cells) out.cells.push_back({x[0], y[0]});
    return out;
}

// Text form: "dim", "level", "window", "count" header lines then one cell per line.
template <int Dim>
void write_set(std::ostream& os, const GridSet<Dim>& s)
{
    os.precision(17);
    os << "dim " << Dim << "\nlevel " << s.level << "\nwindow " << s.window[0] << ' ' << s.window[1]
       << "\ncount " << s.size() << '\n';
    for (auto& c : s.cells) {
        os << c[0];
        if constexpr (Dim == 2) os << ' ' << c[1];
        os << '\n';
    }
}

template <int Dim>
GridSet<Dim> read_set(std::istream& is)
{
    std::string key;
    int dim = 0;
    std::size_t count = 0;
    GridSet<Dim> s;
    if (!(is >> key >> dim) || key != "dim" || dim != Dim) throw contract_error("read_set: bad dim header");
    if (!(is >> key >> s.level) || key != "level") throw contract_error("read_set: bad level header");
    if (!(is >> key >> s.window[0] >> s.window[1]) || key != "window")
        throw contract_error("read_set: bad window header");
    if (!(is >> key >> count) || key != "count") throw contract_error("read_set: bad count header");
    s.cells.resize(count);
    for (auto& c : s.cells)
        for (int d = 0; d < Dim; ++d)
            if (!(is >> c[d])) throw contract_error("read_set: truncated cell list");
    s.normalize();
    if (s.cells.size() != count) throw contract_error("read_set: duplicate cells");
    return s;
}

}  // namespace decaylab
