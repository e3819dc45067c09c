#ifndef SYNTHEON_RNG_HPP
#define SYNTHEON_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace syntheon
{

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z)
{
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b)
{
    return mix64(a ^ (mix64(b) + 0x632BE59BD9B4E019ull + (a << 6) + (a >> 2)));
}

constexpr std::uint64_t hash_tag(std::string_view tag)
{
    std::uint64_t h = 0xCBF29CE484222325ull; // FNV-1a
    for (char c : tag)
        h = (h ^ static_cast<unsigned char>(c)) * 0x100000001B3ull;
    return h;
}

/// Seed of sample `index` under `global_seed`.
constexpr std::uint64_t sample_seed(std::uint64_t global_seed, std::uint64_t index)
{
    return hash_combine(hash_combine(global_seed, hash_tag("sample")), index);
}

/// Counter-based generator: the n-th draw is a pure function of (key, n), so a
/// stream keyed by (sample seed, stage tag) is reproducible under any schedule.
class CounterRng
{
public:
    explicit constexpr CounterRng(std::uint64_t key) : m_key(key) {}
    constexpr CounterRng(std::uint64_t seed, std::string_view stage) : m_key(hash_combine(seed, hash_tag(stage))) {}

    constexpr std::uint64_t next_u64() { return hash_combine(m_key, m_counter++); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi)
    {
        __extension__ using u128 = unsigned __int128;
        const auto span = static_cast<u128>(hi - lo + 1);
        return lo + static_cast<std::int64_t>((static_cast<u128>(next_u64()) * span) >> 64);
    }

    bool bernoulli(double p = 0.5) { return uniform() < p; }

    /// Box-Muller; consumes two draws per call.
    double normal(double mean, double stddev)
    {
        const double u1 = 1.0 - uniform(); // (0, 1]
        const double u2 = uniform();
        return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t m_key;
    std::uint64_t m_counter = 0;
};

} // namespace syntheon

#endif // SYNTHEON_RNG_HPP
