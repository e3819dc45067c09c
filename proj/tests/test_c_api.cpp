#include "syntheon/c_api.h"

#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace syntheon;
using namespace testing_support;

namespace
{

/// Clean dataset rendered once for the whole suite.
const std::filesystem::path& clean_dir()
{
    static TempDir dir("capi");
    static const bool rendered = [] {
        write_cube_obj(dir / "meshes/cube.obj", 30);
        RenderSettings rs;
        rs.meshes_dir = dir / "meshes";
        rs.out_dir = dir / "out";
        rs.view.subdivisions = 0;
        rs.view.radius = 350;
        run_render(rs);
        return true;
    }();
    (void)rendered;
    static const std::filesystem::path out = dir / "out";
    return out;
}

struct StreamHandle
{
    syntheon_stream* s = nullptr;
    ~StreamHandle() { syntheon_stream_close(s); }
};

} // namespace

TEST(CApi, Versions)
{
    EXPECT_EQ(syntheon_abi_version(), SYNTHEON_ABI_VERSION);
    EXPECT_STREQ(syntheon_version(), engine_version);
}

TEST(CApi, StreamMatchesEngine)
{
    StreamHandle h;
    ASSERT_EQ(syntheon_stream_open(clean_dir().c_str(), 123, nullptr, 2, &h.s), SYNTHEON_OK) << syntheon_last_error();
    int32_t w = 0, ht = 0;
    uint64_t n = 0;
    ASSERT_EQ(syntheon_stream_shape(h.s, &w, &ht, &n), SYNTHEON_OK);
    EXPECT_EQ(w, 64);
    EXPECT_EQ(ht, 64);
    EXPECT_EQ(n, 12u);

    const CleanDataset clean = load_clean_dataset(clean_dir());
    const AugmentedStream engine(std::make_shared<const std::vector<ModalityStack>>(clean.stacks), 123);

    std::vector<float> rgb(3 * 64 * 64), light(64 * 64), normal(3 * 64 * 64), depth(64 * 64);
    std::vector<uint8_t> sem(64 * 64);
    for (uint64_t i = 0; i < 30; ++i) {
        syntheon_sample out{};
        out.rgb = rgb.data();
        out.lightness = light.data();
        out.normal = normal.data();
        out.depth = depth.data();
        out.semantic = sem.data();
        ASSERT_EQ(syntheon_stream_next(h.s, &out), SYNTHEON_OK);
        const AugmentedSample ref = engine.sample_at(i);
        ASSERT_TRUE(std::equal(rgb.begin(), rgb.end(), ref.rgb.data().begin()));
        ASSERT_TRUE(std::equal(light.begin(), light.end(), ref.lightness.data().begin()));
        const ModalityStack& src = clean.stacks[i % 12];
        ASSERT_TRUE(std::equal(depth.begin(), depth.end(), src.depth.data().begin()));
        ASSERT_TRUE(std::equal(normal.begin(), normal.end(), src.normal.data().begin()));
        ASSERT_TRUE(std::equal(sem.begin(), sem.end(), src.semantic.data().begin()));
        EXPECT_EQ(out.seed, ref.provenance.seed);
        EXPECT_EQ(out.source_index, i % 12);
        EXPECT_EQ(out.class_id, 1);
        EXPECT_EQ(out.pose_quaternion[0], src.pose.rotation.w);
        EXPECT_EQ(out.pose_radius, src.pose.radius);
    }

    syntheon_sample only_rgb{};
    only_rgb.rgb = rgb.data();
    ASSERT_EQ(syntheon_stream_sample(h.s, 1000, &only_rgb), SYNTHEON_OK);
    EXPECT_TRUE(std::equal(rgb.begin(), rgb.end(), engine.sample_at(1000).rgb.data().begin()));
}

TEST(CApi, NoiseRecord)
{
    StreamHandle h;
    ASSERT_EQ(syntheon_stream_open(clean_dir().c_str(), 5, nullptr, 1, &h.s), SYNTHEON_OK);
    size_t needed = 0;
    char tiny[4];
    EXPECT_EQ(syntheon_stream_noise_record(h.s, 7, tiny, sizeof tiny, &needed), SYNTHEON_ERR_RANGE);
    ASSERT_GT(needed, sizeof tiny);
    std::string buf(needed, '\0');
    ASSERT_EQ(syntheon_stream_noise_record(h.s, 7, buf.data(), buf.size(), &needed), SYNTHEON_OK);
    buf.resize(needed - 1);
    const CleanDataset clean = load_clean_dataset(clean_dir());
    const AugmentedStream engine(std::make_shared<const std::vector<ModalityStack>>(clean.stacks), 5);
    EXPECT_EQ(buf, to_record(engine.noise_at(7)));
}

TEST(CApi, StreamErrors)
{
    syntheon_stream* s = nullptr;
    EXPECT_EQ(syntheon_stream_open("/nonexistent/dir", 1, nullptr, 1, &s), SYNTHEON_ERR_IO);
    EXPECT_EQ(s, nullptr);
    EXPECT_NE(std::string(syntheon_last_error()), "");
    EXPECT_EQ(syntheon_stream_open(nullptr, 1, nullptr, 1, &s), SYNTHEON_ERR_ARGUMENT);
    EXPECT_EQ(syntheon_stream_open(clean_dir().c_str(), 1, nullptr, 1, nullptr), SYNTHEON_ERR_ARGUMENT);

    TempDir empty("capi_bg");
    EXPECT_EQ(syntheon_stream_open(clean_dir().c_str(), 1, empty.path().c_str(), 1, &s), SYNTHEON_ERR_CONFIG);
    syntheon_stream_close(nullptr);
}

TEST(CApi, Kernels)
{
    const double b[2] = {0, 0}, p[2] = {1, 0}, n[2] = {0, 1};
    double out = -1;
    ASSERT_EQ(syntheon_triplet_loss(b, p, n, 2, 1.0, &out), SYNTHEON_OK);
    EXPECT_NEAR(out, 0.5, 1e-12);
    EXPECT_EQ(syntheon_triplet_loss(b, b, n, 2, 0.0, &out), SYNTHEON_ERR_RANGE);
    EXPECT_EQ(syntheon_triplet_loss(nullptr, b, n, 2, 1.0, &out), SYNTHEON_ERR_ARGUMENT);

    const double qi[4] = {1, 0, 0, 0};
    const double qz[4] = {std::cos(std::numbers::pi / 4), 0, 0, std::sin(std::numbers::pi / 4)};
    ASSERT_EQ(syntheon_icpe_margin(1, 1, qi, qz, 3.2, &out), SYNTHEON_OK);
    EXPECT_NEAR(out, std::numbers::pi / 2, 1e-12);
    ASSERT_EQ(syntheon_icpe_margin(1, 2, qi, qz, 3.2, &out), SYNTHEON_OK);
    EXPECT_EQ(out, 3.2);
    EXPECT_EQ(syntheon_icpe_margin(1, 1, qi, qz, 3.0, &out), SYNTHEON_ERR_RANGE);

    const float pred[4] = {0.5f, 0.5f, 0.5f, 0.5f}, target[4] = {0, 1, 1, 0};
    ASSERT_EQ(syntheon_generative_loss(pred, target, 4, SYNTHEON_LOSS_BCE, &out), SYNTHEON_OK);
    EXPECT_NEAR(out, std::log(2.0), 1e-12);
    EXPECT_EQ(syntheon_generative_loss(target, target, 4, SYNTHEON_LOSS_BCE, &out), SYNTHEON_ERR_RANGE);
    EXPECT_EQ(syntheon_generative_loss(pred, target, 4, 9, &out), SYNTHEON_ERR_ARGUMENT);
}

TEST(CApi, SelfAttentionMatchesEngine)
{
    CounterRng rng(3, "capi");
    const int c = 8, hh = 2, ww = 3, cbar = 1, npos = hh * ww;
    FeatureMap x(c, hh, ww);
    for (double& v : x.values)
        v = rng.normal(0, 1);
    AttentionWeights w{Matrix(cbar, c), Matrix(cbar, c), Matrix(c, c), 0.7};
    for (Matrix* m : {&w.query, &w.key, &w.value})
        for (double& v : m->values)
            v = rng.normal(0, 0.5);
    const AttentionResult ref = self_attention(x, w);

    std::vector<double> out(x.values.size()), att(static_cast<std::size_t>(npos) * npos);
    ASSERT_EQ(syntheon_self_attention(x.values.data(), c, hh, ww, w.query.values.data(), w.key.values.data(), cbar,
                                      w.value.values.data(), w.gamma, out.data(), att.data()),
              SYNTHEON_OK);
    EXPECT_EQ(out, ref.output.values);
    EXPECT_EQ(att, ref.attention.values);
    EXPECT_EQ(syntheon_self_attention(x.values.data(), c, hh, ww, w.query.values.data(), w.key.values.data(), cbar,
                                      w.value.values.data(), w.gamma, out.data(), nullptr),
              SYNTHEON_OK);
    EXPECT_EQ(syntheon_self_attention(x.values.data(), 0, hh, ww, w.query.values.data(), w.key.values.data(), cbar,
                                      w.value.values.data(), w.gamma, out.data(), nullptr),
              SYNTHEON_ERR_ARGUMENT);
}
