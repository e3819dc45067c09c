#ifndef SYNTHEON_NOISE_HPP
#define SYNTHEON_NOISE_HPP

#include "syntheon/geometry.hpp"
#include "syntheon/rng.hpp"

#include <array>
#include <limits>
#include <vector>
#include <string_view>

namespace syntheon
{

namespace detail
{

constexpr std::uint64_t lattice_hash(std::uint64_t seed, std::int64_t ix, std::int64_t iy)
{
    return hash_combine(hash_combine(seed, static_cast<std::uint64_t>(ix)), static_cast<std::uint64_t>(iy));
}

constexpr double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

inline double gradient_dot(std::uint64_t h, double dx, double dy)
{
    switch (h & 7u) {
    case 0: return dx + dy;
    case 1: return -dx + dy;
    case 2: return dx - dy;
    case 3: return -dx - dy;
    case 4: return dx;
    case 5: return -dx;
    case 6: return dy;
    default: return -dy;
    }
}

inline double gradient_lerp(const std::uint64_t (&h)[4], double dx, double dy)
{
    const double n00 = gradient_dot(h[0], dx, dy);
    const double n10 = gradient_dot(h[1], dx - 1.0, dy);
    const double n01 = gradient_dot(h[2], dx, dy - 1.0);
    const double n11 = gradient_dot(h[3], dx - 1.0, dy - 1.0);
    const double u = fade(dx), v = fade(dy);
    const double a = n00 + u * (n10 - n00);
    const double b = n01 + u * (n11 - n01);
    return a + v * (b - a);
}

inline void corner_hashes(std::uint64_t seed, std::int64_t ix, std::int64_t iy, std::uint64_t (&h)[4])
{
    h[0] = lattice_hash(seed, ix, iy);
    h[1] = lattice_hash(seed, ix + 1, iy);
    h[2] = lattice_hash(seed, ix, iy + 1);
    h[3] = lattice_hash(seed, ix + 1, iy + 1);
}

/// Single octave of 2D gradient noise on the unit lattice; zero at lattice points.
inline double gradient_noise(std::uint64_t seed, double x, double y)
{
    const double fx = std::floor(x), fy = std::floor(y);
    std::uint64_t h[4];
    corner_hashes(seed, static_cast<std::int64_t>(fx), static_cast<std::int64_t>(fy), h);
    return gradient_lerp(h, x - fx, y - fy);
}

} // namespace detail

/// Fractal Perlin noise in [-1, 1]: `octaves` gradient-noise layers, each at twice the
/// frequency and `persistence` times the amplitude of the previous, normalized by the
/// total amplitude.
inline double perlin(std::uint64_t seed, double frequency, double x, double y, int octaves = 4,
                     double persistence = 0.5)
{
    double sum = 0.0, total = 0.0, amplitude = 1.0, f = frequency;
    for (int o = 0; o < std::max(1, octaves); ++o) {
        sum += amplitude * detail::gradient_noise(hash_combine(seed, static_cast<std::uint64_t>(o)), x * f, y * f);
        total += amplitude;
        amplitude *= persistence;
        f *= 2.0;
    }
    return sum / total;
}

/// Feature point of lattice cell (cx, cy), in noise-space coordinates.
inline Vec2 cellular_feature(std::uint64_t seed, std::int64_t cx, std::int64_t cy)
{
    const std::uint64_t h = detail::lattice_hash(seed ^ 0xC311u, cx, cy);
    const double jx = static_cast<double>(h >> 40) * 0x1.0p-24;
    const double jy = static_cast<double>((h >> 16) & 0xFFFFFFu) * 0x1.0p-24;
    return {static_cast<double>(cx) + jx, static_cast<double>(cy) + jy};
}

/// Worley F1: distance, in noise-space units, from (x, y) * frequency to the nearest
/// feature point. Feature jitter spans the whole cell, so a 5x5 neighbourhood is searched.
inline double cellular(std::uint64_t seed, double frequency, double x, double y)
{
    const double px = x * frequency, py = y * frequency;
    const auto cx = static_cast<std::int64_t>(std::floor(px));
    const auto cy = static_cast<std::int64_t>(std::floor(py));
    double best = std::numeric_limits<double>::infinity();
    for (std::int64_t j = cy - 2; j <= cy + 2; ++j)
        for (std::int64_t i = cx - 2; i <= cx + 2; ++i) {
            const Vec2 f = cellular_feature(seed, i, j);
            const double dx = f.x - px, dy = f.y - py;
            best = std::min(best, dx * dx + dy * dy);
        }
    return std::sqrt(best);
}

/// Per-pixel uniform value in [0, 1).
inline double white(std::uint64_t seed, std::int64_t x, std::int64_t y)
{
    return static_cast<double>(detail::lattice_hash(seed ^ 0x3417Eu, x, y) >> 11) * 0x1.0p-53;
}

enum class NoiseKind { perlin, cellular, white };

inline std::string_view to_string(NoiseKind k)
{
    switch (k) {
    case NoiseKind::perlin: return "perlin";
    case NoiseKind::cellular: return "cellular";
    case NoiseKind::white: return "white";
    }
    return "perlin";
}

inline NoiseKind parse_noise_kind(std::string_view s)
{
    if (s == "perlin") return NoiseKind::perlin;
    if (s == "cellular") return NoiseKind::cellular;
    if (s == "white") return NoiseKind::white;
    throw Error("parse", "unknown noise kind '" + std::string(s) + "'");
}

/// One procedural scalar field, as recorded in a noise vector.
struct NoiseField
{
    NoiseKind kind = NoiseKind::perlin;
    double frequency = 0.05;
    std::uint64_t seed = 0;
    int octaves = 4;
    double persistence = 0.5;

    /// Field value mapped to [0, 1] at pixel/texel coordinates (x, y).
    double sample01(double x, double y) const
    {
        switch (kind) {
        case NoiseKind::perlin: return 0.5 * (perlin(seed, frequency, x, y, octaves, persistence) + 1.0);
        case NoiseKind::cellular: return std::min(1.0, cellular(seed, frequency, x, y));
        case NoiseKind::white:
            return white(seed, static_cast<std::int64_t>(std::floor(x)), static_cast<std::int64_t>(std::floor(y)));
        }
        return 0.0;
    }

    bool operator==(const NoiseField&) const = default;
};

/// Evaluates one field at many nearby points, reusing lattice hashes between queries
/// that fall in the same cell. Returns exactly NoiseField::sample01.
class NoiseSampler
{
public:
    explicit NoiseSampler(const NoiseField& field) : m_field(field)
    {
        if (field.kind == NoiseKind::perlin)
            m_octaves.resize(static_cast<std::size_t>(std::max(1, field.octaves)));
    }

    double operator()(double x, double y)
    {
        switch (m_field.kind) {
        case NoiseKind::perlin: return 0.5 * (perlin(x, y) + 1.0);
        case NoiseKind::cellular: return std::min(1.0, cellular(x, y));
        case NoiseKind::white: return m_field.sample01(x, y);
        }
        return 0.0;
    }

private:
    struct Cell
    {
        std::int64_t ix = std::numeric_limits<std::int64_t>::min(), iy = 0;
        std::uint64_t hash[4] = {};
    };

    double perlin(double x, double y)
    {
        double sum = 0.0, total = 0.0, amplitude = 1.0, f = m_field.frequency;
        for (std::size_t o = 0; o < m_octaves.size(); ++o) {
            const double px = x * f, py = y * f;
            const double fx = std::floor(px), fy = std::floor(py);
            const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy);
            Cell& c = m_octaves[o];
            if (c.ix != ix || c.iy != iy) {
                detail::corner_hashes(hash_combine(m_field.seed, static_cast<std::uint64_t>(o)), ix, iy, c.hash);
                c.ix = ix;
                c.iy = iy;
            }
            sum += amplitude * detail::gradient_lerp(c.hash, px - fx, py - fy);
            total += amplitude;
            amplitude *= m_field.persistence;
            f *= 2.0;
        }
        return sum / total;
    }

    double cellular(double x, double y)
    {
        const double px = x * m_field.frequency, py = y * m_field.frequency;
        const auto cx = static_cast<std::int64_t>(std::floor(px));
        const auto cy = static_cast<std::int64_t>(std::floor(py));
        if (!m_has_features || cx != m_cx || cy != m_cy) {
            for (int j = 0; j < 5; ++j)
                for (int i = 0; i < 5; ++i)
                    m_features[j * 5 + i] = cellular_feature(m_field.seed, cx - 2 + i, cy - 2 + j);
            m_cx = cx;
            m_cy = cy;
            m_has_features = true;
        }
        double best = std::numeric_limits<double>::infinity();
        for (const Vec2& f : m_features) {
            const double dx = f.x - px, dy = f.y - py;
            best = std::min(best, dx * dx + dy * dy);
        }
        return std::sqrt(best);
    }

    NoiseField m_field;
    std::vector<Cell> m_octaves;
    std::array<Vec2, 25> m_features{};
    std::int64_t m_cx = 0, m_cy = 0;
    bool m_has_features = false;
};

} // namespace syntheon

#endif // SYNTHEON_NOISE_HPP
