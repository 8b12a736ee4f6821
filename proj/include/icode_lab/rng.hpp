#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace icode_lab {

// Counter-based deterministic RNG. Every consumer derives its own stream from
// (seed, purpose, index...) so parallel schedules cannot change the numbers.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2)));
}

namespace stream {
// Purpose tags for derived streams.
inline constexpr std::uint64_t weights = 0x11;
inline constexpr std::uint64_t initial_state = 0x22;
inline constexpr std::uint64_t signal = 0x33;
inline constexpr std::uint64_t state_noise = 0x44;
inline constexpr std::uint64_t input_noise = 0x55;
inline constexpr std::uint64_t system_params = 0x66;
inline constexpr std::uint64_t scan = 0x77;
}  // namespace stream

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(splitmix64(seed ^ 0x5851f42d4c957f2dull)) {}
    Rng(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index = 0)
        : Rng(hash_combine(hash_combine(seed, purpose), index)) {}

    std::uint64_t next_u64() {
        state_ = splitmix64(state_);
        return state_;
    }

    // Uniform in [0, 1).
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    // Box-Muller; consumes exactly two draws per pair so streams stay aligned.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_unit();
        double u2 = next_unit();
        while (u1 <= 0.0) u1 = next_unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
    }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Halton low-discrepancy sequence with a seeded Cranley-Patterson rotation,
// used for contraction scans over state/input boxes.
class HaltonSampler {
public:
    HaltonSampler(std::size_t dims, std::uint64_t seed) {
        static constexpr int primes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41,
                                         43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97};
        Rng rot(seed, stream::scan);
        bases_.resize(dims);
        shift_.resize(dims);
        for (std::size_t d = 0; d < dims; ++d) {
            bases_[d] = primes[d % (sizeof(primes) / sizeof(primes[0]))];
            shift_[d] = rot.next_unit();
        }
    }

    // Point i (0-based), component d, in [0, 1).
    double point(std::size_t i, std::size_t d) const {
        double f = 1.0, r = 0.0;
        // skip the first element (0) of the raw sequence
        std::uint64_t n = i + 1;
        const int b = bases_[d];
        while (n > 0) {
            f /= b;
            r += f * static_cast<double>(n % b);
            n /= b;
        }
        r += shift_[d];
        return r - std::floor(r);
    }

    std::size_t dims() const { return bases_.size(); }

private:
    std::vector<int> bases_;
    std::vector<double> shift_;
};

}  // namespace icode_lab
