#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace qcdcomm {

// SplitMix64 step; used to whiten seeds and derive child streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Single-owner random stream. Every sampling operation in the library takes
/// one of these explicitly; identical seeds give bit-identical runs because
/// uniform/normal draws are generated from raw mt19937_64 output rather than
/// the implementation-defined std distributions.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(whiten(seed)) {}

    /// Child stream keyed by up to three indices (codeword, change point,
    /// replicate, ...). Results are independent of scheduling order because
    /// each task derives its own stream from the master seed.
    static Rng derive(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                      std::uint64_t c = 0) {
        std::uint64_t s = master;
        std::uint64_t h = splitmix64(s);
        s ^= a + 0x9e3779b97f4a7c15ULL;
        h ^= splitmix64(s);
        s ^= b + 0xbf58476d1ce4e5b9ULL;
        h ^= splitmix64(s);
        s ^= c + 0x94d049bb133111ebULL;
        h ^= splitmix64(s);
        return Rng(h);
    }

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    /// Uniform index in [0, n). Rejection sampling keeps it exactly uniform.
    std::size_t uniform_index(std::size_t n) {
        const std::uint64_t bound = n;
        const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % bound;
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return static_cast<std::size_t>(x % bound);
    }

    /// Standard normal via Box-Muller; the spare deviate is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        has_spare_ = true;
        return u * m;
    }

  private:
    static std::uint64_t whiten(std::uint64_t seed) {
        std::uint64_t s = seed;
        return splitmix64(s);
    }

    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace qcdcomm
