#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace biodiff {

// Deterministic, platform-independent RNG. All randomness in the project
// flows from one user seed expanded into named sub-streams, so identical
// seeds give byte-identical outputs regardless of thread count.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {
        // splitmix64 warm-up so nearby seeds decorrelate
        next_u64();
        next_u64();
    }

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    uint64_t uniform_int(uint64_t n) { return next_u64() % n; }

    // standard normal via Box-Muller (no libc distribution dependence)
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

inline uint64_t hash_stream_name(std::string_view name) {
    uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Derive the seed of a named sub-stream ("data", "init", "train", "sample", ...)
// optionally indexed (chain number, epoch, ...).
inline uint64_t derive_seed(uint64_t base, std::string_view stream, uint64_t index = 0) {
    uint64_t h = hash_stream_name(stream);
    uint64_t z = base ^ (h + 0x9e3779b97f4a7c15ULL + (index * 0xd1342543de82ef95ULL));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline Rng stream_rng(uint64_t base, std::string_view stream, uint64_t index = 0) {
    return Rng(derive_seed(base, stream, index));
}

}  // namespace biodiff
