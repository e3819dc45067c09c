#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace syntheon;
using namespace testing_support;

namespace
{

double ks_uniform(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    double d = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
        d = std::max({d, (i + 1) / n - v[i], v[i] - i / n});
    return d;
}

} // namespace

TEST(CounterRng, DeterministicAndKeyed)
{
    CounterRng a(42, "stage"), b(42, "stage"), c(42, "other"), d(43, "stage");
    for (int i = 0; i < 100; ++i) {
        const auto va = a.next_u64();
        EXPECT_EQ(va, b.next_u64());
        EXPECT_NE(va, c.next_u64());
        EXPECT_NE(va, d.next_u64());
    }
}

TEST(CounterRng, SampleSeedsAreDistinct)
{
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t g : {0ull, 1ull})
        for (std::uint64_t i = 0; i < 5000; ++i)
            seeds.push_back(sample_seed(g, i));
    std::sort(seeds.begin(), seeds.end());
    EXPECT_EQ(std::adjacent_find(seeds.begin(), seeds.end()), seeds.end());
}

TEST(CounterRng, UniformIsUniform)
{
    CounterRng rng(7, "u");
    std::vector<double> v(100000);
    for (double& x : v) {
        x = rng.uniform();
        ASSERT_GE(x, 0.0);
        ASSERT_LT(x, 1.0);
    }
    EXPECT_LT(ks_uniform(v), 0.01);
}

TEST(CounterRng, UniformIntChiSquare)
{
    CounterRng rng(9, "i");
    std::array<int, 8> hist{};
    const int n = 80000;
    for (int i = 0; i < n; ++i) {
        const auto k = rng.uniform_int(3, 10);
        ASSERT_GE(k, 3);
        ASSERT_LE(k, 10);
        ++hist[static_cast<std::size_t>(k - 3)];
    }
    double chi2 = 0.0;
    for (int h : hist)
        chi2 += (h - n / 8.0) * (h - n / 8.0) / (n / 8.0);
    EXPECT_LT(chi2, 24.32); // 7 dof, p = 0.001
}

TEST(CounterRng, NormalMoments)
{
    CounterRng rng(3, "n");
    double sum = 0.0, sq = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal(2.0, 0.5);
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    EXPECT_NEAR(mean, 2.0, 0.01);
    EXPECT_NEAR(std::sqrt(sq / n - mean * mean), 0.5, 0.01);
}

TEST(Perlin, ZeroOnIntegerLattice)
{
    for (std::uint64_t seed : {0ull, 5ull, 991ull})
        for (int x = -20; x <= 20; x += 3)
            for (int y = -20; y <= 20; y += 7)
                EXPECT_EQ(perlin(seed, 1.0, x, y), 0.0);
}

TEST(Perlin, DeterministicBoundedAndCentred)
{
    CounterRng rng(1, "perlin");
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const std::uint64_t seed = rng.next_u64();
        const double f = rng.uniform(0.0001, 0.1);
        const double x = rng.uniform(0, 512), y = rng.uniform(0, 512);
        const double v = perlin(seed, f, x, y);
        ASSERT_EQ(v, perlin(seed, f, x, y));
        ASSERT_GE(v, -1.0);
        ASSERT_LE(v, 1.0);
        sum += v;
    }
    EXPECT_NEAR(sum / n, 0.0, 0.02);
}

TEST(Cellular, ZeroAtFeaturePoint)
{
    for (std::int64_t cx = -3; cx <= 3; ++cx) {
        const Vec2 f = cellular_feature(77, cx, 2 * cx);
        EXPECT_EQ(cellular(77, 1.0, f.x, f.y), 0.0);
    }
}

TEST(Cellular, LipschitzInInputSpace)
{
    CounterRng rng(4, "lip");
    for (int i = 0; i < 20000; ++i) {
        const double freq = rng.uniform(0.0001, 0.1);
        const double x = rng.uniform(-300, 300), y = rng.uniform(-300, 300);
        const double dx = rng.uniform(-0.5, 0.5), dy = rng.uniform(-0.5, 0.5);
        const double a = cellular(11, freq, x, y), b = cellular(11, freq, x + dx, y + dy);
        ASSERT_GE(a, 0.0);
        ASSERT_LE(std::abs(a - b), freq * std::hypot(dx, dy) + 1e-12);
    }
}

TEST(Cellular, FiveByFiveSearchFindsTrueNearest)
{
    // Brute force over a 9x9 neighbourhood.
    CounterRng rng(6, "nn");
    for (int i = 0; i < 5000; ++i) {
        const double px = rng.uniform(-50, 50), py = rng.uniform(-50, 50);
        const auto cx = static_cast<std::int64_t>(std::floor(px)), cy = static_cast<std::int64_t>(std::floor(py));
        double best = 1e300;
        for (std::int64_t j = cy - 4; j <= cy + 4; ++j)
            for (std::int64_t k = cx - 4; k <= cx + 4; ++k) {
                const Vec2 f = cellular_feature(5, k, j);
                const double dx = f.x - px, dy = f.y - py;
                best = std::min(best, dx * dx + dy * dy);
            }
        ASSERT_EQ(cellular(5, 1.0, px, py), std::sqrt(best));
    }
}

TEST(White, UniformKolmogorovSmirnov)
{
    std::vector<double> v;
    v.reserve(100000);
    for (int y = 0; y < 250; ++y)
        for (int x = 0; x < 400; ++x) {
            const double w = white(123, x, y);
            ASSERT_GE(w, 0.0);
            ASSERT_LT(w, 1.0);
            v.push_back(w);
        }
    EXPECT_LT(ks_uniform(v), 0.01);
}

TEST(NoiseSampler, BitIdenticalToReference)
{
    CounterRng rng(12, "sampler");
    for (int trial = 0; trial < 60; ++trial) {
        NoiseField f;
        f.kind = static_cast<NoiseKind>(trial % 3);
        f.frequency = rng.uniform(0.0001, 0.5);
        f.seed = rng.next_u64();
        NoiseSampler s(f);
        for (int y = 0; y < 24; ++y)
            for (int x = 0; x < 24; ++x)
                ASSERT_EQ(s(x, y), f.sample01(x, y));
        for (int i = 0; i < 300; ++i) {
            const double u = rng.uniform(0, 64), v = rng.uniform(0, 64);
            ASSERT_EQ(s(u, v), f.sample01(u, v));
        }
    }
}

TEST(NoiseField, Sample01InUnitRange)
{
    CounterRng rng(2, "range");
    for (int i = 0; i < 30000; ++i) {
        NoiseField f;
        f.kind = static_cast<NoiseKind>(i % 3);
        f.frequency = rng.uniform(0.0001, 0.1);
        f.seed = rng.next_u64();
        const double v = f.sample01(rng.uniform(0, 64), rng.uniform(0, 64));
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
    }
    EXPECT_EQ(parse_noise_kind("cellular"), NoiseKind::cellular);
    EXPECT_THROW(parse_noise_kind("simplex"), Error);
}
