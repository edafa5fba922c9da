#ifndef QBM_FORGE_RNG_HPP
#define QBM_FORGE_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace qbm_forge {

// All stochastic code draws through this wrapper so that results are
// reproducible bit-for-bit across platforms.  std::mt19937_64 has a fully
// specified output sequence; the distributions in <random> do not, so the
// uniform/normal transforms are spelled out here instead.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Independent stream for a substream index (gauge set, chain, ...).
    // Stream 0 is the master stream itself, so code that draws exactly one
    // stream behaves identically to code that asks for stream 0.
    static Rng stream(std::uint64_t seed, std::uint64_t index) {
        if (index == 0) return Rng(seed);
        return Rng(splitmix(seed ^ (0x9e3779b97f4a7c15ULL * index)));
    }

    std::uint64_t raw() { return engine_(); }

    // Uniform on [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; one spare draw kept between calls.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Rejection sampling to avoid modulo bias.
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return x % n;
    }

    int sign() { return (engine_() & 1ULL) ? 1 : -1; }

private:
    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace qbm_forge

#endif
