#pragma once

#include <fftw3.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace decaylab {

using cplx = std::complex<double>;

// Precondition or domain violation. The message names the offending value.
class contract_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A grid grew past max_cells().
class grid_exhausted : public std::length_error {
public:
    using std::length_error::length_error;
};

template <class... Args>
std::string cat(const Args&... args)
{
    std::ostringstream os;
    os.precision(17);
    (os << ... << args);
    return os.str();
}

inline void require(bool ok, const std::string& what)
{
    if (!ok) throw contract_error(what);
}

inline constexpr std::int64_t max_cells() { return std::int64_t{1} << 25; }

inline double dyadic(int m) { return std::ldexp(1.0, -m); }

// Returns k when x == 2^k exactly.
inline std::optional<int> exact_log2(double x)
{
    if (!(x > 0) || !std::isfinite(x)) return std::nullopt;
    int e = 0;
    double f = std::frexp(x, &e);
    if (f != 0.5) return std::nullopt;
    return e - 1;
}

inline std::int64_t floor_div(std::int64_t a, std::int64_t b)
{
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

inline std::size_t next_pow2(std::size_t n)
{
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// ---- threads --------------------------------------------------------------

inline std::atomic<int>& thread_cap()
{
    static std::atomic<int> cap{0};
    return cap;
}

inline void set_max_threads(int n) { thread_cap() = std::max(0, n); }

inline int worker_count()
{
    int cap = thread_cap();
    int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    return cap > 0 ? std::min(cap, hw) : hw;
}

// Runs fn(chunk) for chunk in [0, chunks). Chunks are a fixed partition chosen
// by the caller, so results never depend on the worker count.
inline void for_chunks(std::size_t chunks, const std::function<void(std::size_t)>& fn)
{
    std::size_t workers = std::min<std::size_t>(chunks, static_cast<std::size_t>(worker_count()));
    if (workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) fn(c);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t c = next++; c < chunks; c = next++) {
                try {
                    fn(c);
                } catch (...) {
                    std::lock_guard lk(err_mu);
                    if (!err) err = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

// ---- FFT convolution ------------------------------------------------------

namespace detail {

inline std::mutex& fftw_planner_mutex()
{
    static std::mutex mu;
    return mu;
}

struct fftw_buffer {
    double* re = nullptr;
    fftw_complex* co = nullptr;
    explicit fftw_buffer(std::size_t n)
        : re(fftw_alloc_real(n)), co(fftw_alloc_complex(n / 2 + 1))
    {
        if (!re || !co) throw std::bad_alloc();
    }
    ~fftw_buffer()
    {
        fftw_free(re);
        fftw_free(co);
    }
    fftw_buffer(const fftw_buffer&) = delete;
    fftw_buffer& operator=(const fftw_buffer&) = delete;
};

inline void forward(std::size_t n, fftw_buffer& b)
{
    fftw_plan p;
    {
        std::lock_guard lk(fftw_planner_mutex());
        p = fftw_plan_dft_r2c_1d(static_cast<int>(n), b.re, b.co, FFTW_ESTIMATE);
    }
    fftw_execute(p);
    std::lock_guard lk(fftw_planner_mutex());
    fftw_destroy_plan(p);
}

inline void backward(std::size_t n, fftw_buffer& b)
{
    fftw_plan p;
    {
        std::lock_guard lk(fftw_planner_mutex());
        p = fftw_plan_dft_c2r_1d(static_cast<int>(n), b.co, b.re, FFTW_ESTIMATE);
    }
    fftw_execute(p);
    std::lock_guard lk(fftw_planner_mutex());
    fftw_destroy_plan(p);
}

}  // namespace detail

inline std::vector<double> direct_convolve(const std::vector<double>& a, const std::vector<double>& b)
{
    if (a.empty() || b.empty()) return {};
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == 0.0) continue;
        const double ai = a[i];
        double* o = out.data() + i;
        for (std::size_t j = 0; j < b.size(); ++j) o[j] += ai * b[j];
    }
    return out;
}

// Linear convolution; switches to an FFT once the direct product gets large.
// The FFT length is the next power of two >= 2 (len a + len b).
inline std::vector<double> linear_convolve(const std::vector<double>& a, const std::vector<double>& b)
{
    if (a.empty() || b.empty()) return {};
    const std::size_t out_n = a.size() + b.size() - 1;
    if (std::min(a.size(), b.size()) <= 48 ||
        static_cast<double>(a.size()) * static_cast<double>(b.size()) <= 65536.0)
        return direct_convolve(a, b);

    const std::size_t n = next_pow2(2 * (a.size() + b.size()));
    detail::fftw_buffer fa(n), fb(n);
    std::fill(fa.re, fa.re + n, 0.0);
    std::fill(fb.re, fb.re + n, 0.0);
    std::copy(a.begin(), a.end(), fa.re);
    std::copy(b.begin(), b.end(), fb.re);
    detail::forward(n, fa);
    detail::forward(n, fb);
    for (std::size_t k = 0; k < n / 2 + 1; ++k) {
        const double xr = fa.co[k][0], xi = fa.co[k][1];
        const double yr = fb.co[k][0], yi = fb.co[k][1];
        fa.co[k][0] = xr * yr - xi * yi;
        fa.co[k][1] = xr * yi + xi * yr;
    }
    detail::backward(n, fa);
    std::vector<double> out(out_n);
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < out_n; ++i) out[i] = fa.re[i] * inv;
    return out;
}

// |DFT_k(a)|^2 for k in [0, n), a zero-padded to n (n a power of two).
inline std::vector<double> dft_power(const std::vector<double>& a, std::size_t n)
{
    detail::fftw_buffer f(n);
    std::fill(f.re, f.re + n, 0.0);
    std::copy(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(std::min(n, a.size())), f.re);
    detail::forward(n, f);
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n / 2 + 1; ++k) {
        out[k] = f.co[k][0] * f.co[k][0] + f.co[k][1] * f.co[k][1];
        if (k > 0 && k < n - k) out[n - k] = out[k];
    }
    return out;
}

// e^{-2 pi i t} with the phase reduced to [-1/2, 1/2] turns first.
inline cplx unit_phase(double turns)
{
    const double t = turns - std::nearbyint(turns);
    const double a = -2.0 * std::numbers::pi * t;
    return {std::cos(a), std::sin(a)};
}

}  // namespace decaylab
