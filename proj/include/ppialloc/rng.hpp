#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace ppialloc {

[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stream seed for one (policy, budget, replication) cell. Each coordinate is
// folded in through splitmix64 so neighbouring cells get unrelated streams.
[[nodiscard]] constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t policy,
                                                  std::uint64_t budget, std::uint64_t rep) noexcept
{
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ (policy + 0x100000001b3ULL));
    h = splitmix64(h ^ (budget + 0x2545f4914f6cdd1dULL));
    h = splitmix64(h ^ (rep + 0x9e3779b97f4a7c15ULL));
    return h;
}

// Portable random stream. The distributions are written out by hand because
// the std:: ones are implementation defined and would break golden tests
// across standard libraries.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) : eng_(seed) {}

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return eng_(); }

    // [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Integer in [0, n); multiply-shift, bias below 2^-64 * n.
    std::size_t below(std::size_t n)
    {
        __extension__ using u128 = unsigned __int128;
        const u128 m = static_cast<u128>(eng_()) * n;
        return static_cast<std::size_t>(m >> 64);
    }

    // Box-Muller, both variates used.
    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Same stream as numpy's legacy RandomState(seed).uniform(lo, hi, n):
// 32-bit MT19937 and the 53-bit (a >> 5, b >> 6) double construction.
[[nodiscard]] inline std::vector<double> legacy_uniform(std::uint32_t seed, double lo, double hi,
                                                        std::size_t n)
{
    std::mt19937 g(seed);
    std::vector<double> out(n);
    for (auto& x : out) {
        const double a = static_cast<double>(g() >> 5);
        const double b = static_cast<double>(g() >> 6);
        x = lo + (hi - lo) * ((a * 67108864.0 + b) / 9007199254740992.0);
    }
    return out;
}

} // namespace ppialloc
