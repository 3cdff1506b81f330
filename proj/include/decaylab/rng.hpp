#pragma once

#include <cstdint>
#include <random>

namespace decaylab {

// Seeded mt19937_64 with named substreams. Bounded draws use rejection so the
// sequence does not depend on the standard library's distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream)
    {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
        gen_.seed(seq);
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    Rng split(std::uint64_t tag) const { return Rng(seed_, stream_ * 0x9E3779B97F4A7C15ULL + tag + 1); }

    std::uint64_t next() { return gen_(); }

    // Uniform on [0, n).
    std::uint64_t below(std::uint64_t n)
    {
        if (n <= 1) return 0;
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x;
        do x = gen_();
        while (x >= limit);
        return x % n;
    }

    // Uniform on [0, 1) with 53 random bits.
    double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t seed_, stream_;
    std::mt19937_64 gen_;
};

}  // namespace decaylab
