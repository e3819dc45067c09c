// Acceptance suite: one PASS/FAIL line per primary criterion. Exit code 1 if any fails.

#include "syntheon/syntheon.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <unistd.h>

using namespace syntheon;

namespace
{

constexpr double shade_tol = 1e-6;
constexpr double polygon_sum_tol = 1e-9;
constexpr double polygon_regular_tol = 1e-6;
constexpr double triplet_tol = 1e-9;
constexpr double attention_tol = 1e-6;
constexpr double normal_unit_tol = 1e-3;
constexpr double depth_shift_tol = 0.1; // mm
constexpr double determinism_budget_s = 60.0;
constexpr double throughput_floor = 500.0; // samples per second
constexpr unsigned throughput_workers = 4;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome
{
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(const char* name, const std::function<Outcome()>& check)
{
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
}

std::string fmt(const char* f, auto... args)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

class ScratchDir
{
public:
    ScratchDir()
    {
        m_path = std::filesystem::temp_directory_path() / ("syntheon_acceptance_" + std::to_string(::getpid()));
        std::filesystem::remove_all(m_path);
        std::filesystem::create_directories(m_path);
    }
    ~ScratchDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(m_path, ec);
    }
    const std::filesystem::path& path() const { return m_path; }

private:
    std::filesystem::path m_path;
};

Mesh box_mesh(Vec3 h, int cls = 1)
{
    std::vector<Vec3> v;
    for (int i = 0; i < 8; ++i)
        v.push_back({(i & 1) ? h.x : -h.x, (i & 2) ? h.y : -h.y, (i & 4) ? h.z : -h.z});
    const std::vector<Face> f = {{0, 2, 3}, {0, 3, 1}, {4, 5, 7}, {4, 7, 6}, {0, 1, 5}, {0, 5, 4},
                                 {2, 6, 7}, {2, 7, 3}, {0, 4, 6}, {0, 6, 2}, {1, 3, 7}, {1, 7, 5}};
    return Mesh::create(v, f, cls);
}

/// Icosphere with per-vertex radial noise: a non-convex, irregular closed mesh.
Mesh lumpy_mesh(std::uint64_t seed)
{
    auto ico = icosphere(2);
    CounterRng rng(seed, "lumpy");
    for (Vec3& p : ico.vertices)
        p = p * (40.0 * rng.uniform(0.6, 1.4));
    return Mesh::create(std::move(ico.vertices), std::move(ico.faces), 1);
}

std::map<std::string, std::string> tree_digest(const std::filesystem::path& dir)
{
    std::map<std::string, std::string> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
        if (e.is_regular_file())
            out[std::filesystem::relative(e.path(), dir).string()] = file_digest(e.path());
    return out;
}

// ---------------------------------------------------------------------------

Outcome icosphere_counts()
{
    const auto t0 = Clock::now();
    const std::size_t verts = icosphere_vertices(3).size();
    const std::size_t tless = build_pose_set(tless_config()).size();
    const double dt = seconds_since(t0);
    return {verts == 642 && tless == 642 && dt < 1.0,
            fmt("s=3 vertices=%zu (642), T-LESS poses=%zu (642), %.3f s (<1 s)", verts, tless, dt)};
}

Outcome linemod_counts()
{
    const std::size_t r = build_pose_set(linemod_config(Symmetry::regular)).size();
    const std::size_t p = build_pose_set(linemod_config(Symmetry::plane_symmetric)).size();
    const std::size_t a = build_pose_set(linemod_config(Symmetry::axis_symmetric)).size();
    return {r == 2359 && p == 1239 && a == 119,
            fmt("regular=%zu (2359), plane=%zu (1239), axis=%zu (119)", r, p, a)};
}

Outcome inplane_factorization()
{
    std::string detail;
    bool ok = true;
    for (Symmetry s : {Symmetry::regular, Symmetry::plane_symmetric, Symmetry::axis_symmetric}) {
        ViewSphereConfig with = linemod_config(s);
        ViewSphereConfig without = with;
        without.inplane.reset();
        const std::size_t n = build_pose_set(with).size(), v = build_pose_set(without).size();
        ok = ok && n == 7 * v;
        detail += fmt("%s %zu=%zux7 ", std::string(to_string(s)).c_str(), n, v);
    }
    return {ok, detail};
}

Outcome normal_and_depth_validity()
{
    std::vector<Mesh> meshes;
    meshes.push_back(box_mesh({30, 20, 12}));
    {
        auto ico = icosphere(3);
        for (Vec3& p : ico.vertices)
            p = p * 45.0;
        meshes.push_back(Mesh::create(std::move(ico.vertices), std::move(ico.faces), 1));
    }
    meshes.push_back(lumpy_mesh(1));
    meshes.push_back(lumpy_mesh(2));

    ViewSphereConfig v;
    v.subdivisions = 2;
    v.radius = 400;
    v.inplane = InplaneSpec{-45, 45, 45};
    const auto poses = build_pose_set(v);
    std::size_t fg = 0, bad = 0, views = 0;
    double worst = 0.0;
    for (const Mesh& m : meshes)
        for (bool smooth : {false, true}) {
            RasterOptions opt;
            opt.smooth_normals = smooth;
            const auto cam = CameraIntrinsics::fitting(m.bounding_radius(), v.radius);
            for (const Pose& p : poses) {
                const auto s = render_view(m, p, cam, opt);
                ++views;
                for (int y = 0; y < s.height(); ++y)
                    for (int x = 0; x < s.width(); ++x) {
                        if (!s.is_foreground(x, y))
                            continue;
                        ++fg;
                        const float* n = s.normal.pixel(x, y);
                        const double dev = std::abs(std::sqrt(double(n[0]) * n[0] + double(n[1]) * n[1] +
                                                              double(n[2]) * n[2]) - 1.0);
                        worst = std::max(worst, dev);
                        bad += dev > normal_unit_tol;
                    }
            }
        }

    // Translating the object along the optical axis by t shifts every fronto-parallel
    // surface point by exactly t; faces of a box seen head-on from the six axes.
    const Mesh box = box_mesh({30, 30, 30});
    const auto cam = CameraIntrinsics::fitting(box.bounding_radius(), 300);
    double worst_shift = 0.0;
    std::size_t shift_px = 0;
    bool monotone = true;
    const Vec3 axes[] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    for (const Vec3& dir : axes)
        for (double t : {5.0, 50.0, 200.0}) {
            const Pose p = look_at_pose(dir, 300, 0, 0);
            const Vec3 forward = p.rotation.rotate({0, 0, 1});
            Rasterizer near(cam, p), far(cam, p);
            near.draw(box);
            far.draw(box, t * forward);
            const auto a = std::move(near).finish(), b = std::move(far).finish();
            for (int y = 0; y < a.height(); ++y)
                for (int x = 0; x < a.width(); ++x)
                    if (a.is_foreground(x, y) && b.is_foreground(x, y)) {
                        ++shift_px;
                        const double d = b.depth.at(x, y) - a.depth.at(x, y);
                        worst_shift = std::max(worst_shift, std::abs(d - t));
                        monotone = monotone && d > 0.0;
                    }
        }
    return {fg > 0 && bad == 0 && shift_px > 0 && monotone && worst_shift <= depth_shift_tol,
            fmt("%zu views, %zu fg px, %zu off-unit (max dev %.2e, tol %.0e); depth shift %zu px, max err %.2e mm "
                "(tol %.1f)",
                views, fg, bad, worst, normal_unit_tol, shift_px, worst_shift, depth_shift_tol)};
}

Outcome shading_cases()
{
    const int size = 64;
    ModalityStack st;
    st.normal = Image(size, size, 3, 0.0f);
    st.depth = Image(size, size, 1, 500.0f);
    st.semantic = ImageBuffer<std::uint8_t>(size, size, 1, 1);
    st.camera = {80, 80, 32, 32, size, size};
    for (int i = 0; i < size * size; ++i)
        st.normal.data()[static_cast<std::size_t>(i) * 3 + 2] = 1.0f;

    double err = 0.0;
    LightingParams p1;
    p1.light_dir = {0, 0, 1};
    p1.diffuse = {1, 1, 1};
    for (float v : shade(st, p1).data())
        err = std::max(err, std::abs(v - 1.0));
    LightingParams p2;
    p2.light_dir = {1, 0, 0};
    p2.ambient = {0.2, 0.2, 0.2};
    p2.diffuse = {1, 1, 1};
    for (float v : shade(st, p2).data())
        err = std::max(err, std::abs(v - 0.2));
    LightingParams p3;
    p3.light_dir = {0, 0, 1};
    p3.specular = {0.5, 0.5, 0.5};
    p3.shininess = 1.0;
    const Image m3 = shade(st, p3);
    for (int c = 0; c < 3; ++c)
        err = std::max(err, std::abs(m3.at(size / 2, size / 2, c) - 1.0));

    // Range over random draws on a rendered view, with the light also flipped.
    const Mesh m = lumpy_mesh(3);
    const auto view = render_view(m, look_at_pose({0.2, 0.5, 0.8}, 400, 0, 0),
                                  CameraIntrinsics::fitting(m.bounding_radius(), 400));
    std::size_t out_of_range = 0;
    for (int i = 0; i < 1000; ++i) {
        LightingParams p = sample_noise_vector(sample_seed(2024, i)).lighting;
        if (i % 2)
            p.light_dir = -p.light_dir;
        for (float v : shade(view, p).data())
            out_of_range += !(v >= 0.0f && v <= 1.0f);
    }
    return {err <= shade_tol && out_of_range == 0,
            fmt("3 cases max err %.2e (tol %.0e); 1000 draws, %zu values outside [0,1]", err, shade_tol,
                out_of_range)};
}

Outcome polygon_cases()
{
    double worst_sum = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const Polygon p = random_polygon(sample_noise_vector(sample_seed(7, i)).occlusion);
        double s = 0.0;
        for (double d : p.steps)
            s += d;
        worst_sum = std::max(worst_sum, std::abs(s - 2.0 * std::numbers::pi));
    }
    OcclusionParams o;
    o.center_x = 31.5;
    o.center_y = 17.0;
    o.mean_radius = 14.0;
    o.vertex_count = 6;
    const Polygon hex = random_polygon(o);
    double worst_hex = 0.0;
    for (std::size_t i = 0; i < 6; ++i) {
        const Vec2 a = hex.points[i], b = hex.points[(i + 1) % 6];
        worst_hex = std::max(worst_hex, std::abs(std::hypot(a.x - o.center_x, a.y - o.center_y) - o.mean_radius));
        worst_hex = std::max(worst_hex, std::abs(std::hypot(a.x - b.x, a.y - b.y) - o.mean_radius));
    }
    return {hex.points.size() == 6 && worst_sum <= polygon_sum_tol && worst_hex <= polygon_regular_tol,
            fmt("10^4 draws max |sum-2pi| %.2e (tol %.0e); hexagon max err %.2e (tol %.0e)", worst_sum,
                polygon_sum_tol, worst_hex, polygon_regular_tol)};
}

Outcome triplet_cases()
{
    double err = 0.0;
    const Embedding b{0.3, -1.2, 0.7}, p{1.0, 0.5, -0.4};
    err = std::max(err, std::abs(triplet_loss(b, p, b, 0.8) - 1.0));
    err = std::max(err, std::abs(triplet_loss(Embedding{0, 0}, Embedding{0, 0}, Embedding{1, 1}, 1.0) - 0.0));
    err = std::max(err, std::abs(triplet_loss(Embedding{0, 0}, Embedding{1, 0}, Embedding{0, 1}, 1.0) - 0.5));

    CounterRng rng(11, "triplet-sweep");
    std::size_t violations = 0;
    for (int i = 0; i < 1000; ++i) {
        Embedding e_b(8), e_p(8), e_n(8);
        for (int k = 0; k < 8; ++k) {
            e_b[k] = rng.normal(0, 1);
            e_p[k] = rng.normal(0, 1);
            e_n[k] = rng.normal(0, 1);
        }
        const double m = rng.uniform(0.01, 4.0);
        const double l = triplet_loss(e_b, e_p, e_n, m);
        violations += !(l >= 0.0 && l <= 1.0);
        const double s = rng.uniform(1.0, 2.5);
        Embedding n_far = e_b, p_far = e_b;
        for (int k = 0; k < 8; ++k) {
            n_far[k] += s * (e_n[k] - e_b[k]);
            p_far[k] += s * (e_p[k] - e_b[k]);
        }
        violations += triplet_loss(e_b, e_p, n_far, m) > l + 1e-12;
        violations += triplet_loss(e_b, p_far, e_n, m) < l - 1e-12;
    }
    return {err <= triplet_tol && violations == 0,
            fmt("examples max err %.2e (tol %.0e); 1000 random triples, %zu range/monotonicity violations", err,
                triplet_tol, violations)};
}

Outcome attention_cases()
{
    CounterRng rng(12, "attention");
    auto random_matrix = [&](int r, int c) {
        Matrix m(r, c);
        for (double& v : m.values)
            v = rng.normal(0, 0.8);
        return m;
    };
    bool identity = true;
    double norm_err = 0.0, perm_err = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        FeatureMap x(4, 2, 2);
        for (double& v : x.values)
            v = rng.normal(0, 1);
        AttentionWeights w{random_matrix(1, 4), random_matrix(1, 4), random_matrix(4, 4), 0.0};
        identity = identity && self_attention(x, w).output.values == x.values;
        w.gamma = rng.normal(0, 1);
        const auto r = self_attention(x, w);
        for (int j = 0; j < 4; ++j) {
            double s = 0.0;
            for (int i = 0; i < 4; ++i)
                s += r.attention(j, i);
            norm_err = std::max(norm_err, std::abs(s - 1.0));
        }
        std::array<int, 4> perm{0, 1, 2, 3};
        for (int i = 3; i > 0; --i)
            std::swap(perm[i], perm[static_cast<std::size_t>(rng.uniform_int(0, i))]);
        FeatureMap px = x;
        for (int c = 0; c < 4; ++c)
            for (int i = 0; i < 4; ++i)
                px.at(c, perm[i]) = x.at(c, i);
        const auto rp = self_attention(px, w);
        for (int c = 0; c < 4; ++c)
            for (int i = 0; i < 4; ++i)
                perm_err = std::max(perm_err, std::abs(rp.output.at(c, perm[i]) - r.output.at(c, i)));
    }
    return {identity && norm_err <= attention_tol && perm_err <= attention_tol,
            fmt("gamma=0 bit-exact: %s; normalization max err %.2e; permutation max err %.2e (tol %.0e)",
                identity ? "yes" : "no", norm_err, perm_err, attention_tol)};
}

Outcome determinism(const std::filesystem::path& scratch)
{
    const auto t0 = Clock::now();
    const auto meshes = scratch / "meshes";
    std::filesystem::create_directories(meshes);
    {
        const Mesh m = lumpy_mesh(5);
        std::string obj;
        for (const Vec3& p : m.vertices())
            obj += fmt("v %.9g %.9g %.9g\n", p.x, p.y, p.z);
        for (const Face& f : m.faces())
            obj += fmt("f %u %u %u\n", f[0] + 1, f[1] + 1, f[2] + 1);
        std::ofstream(meshes / "object.obj") << obj;
    }
    ViewSphereConfig view;
    view.subdivisions = 1; // 42 poses over the full sphere
    view.radius = 400;

    std::vector<std::map<std::string, std::string>> digests;
    std::size_t poses = 0, samples = 0;
    for (unsigned workers : {1u, 1u, 8u}) {
        const auto out = scratch / ("run" + std::to_string(digests.size()));
        RenderSettings rs;
        rs.meshes_dir = meshes;
        rs.out_dir = out;
        rs.view = view;
        rs.workers = workers;
        poses = run_render(rs).samples.size();
        AugmentSettings as;
        as.in_dir = out;
        as.out_dir = out / "aug";
        as.count = 200;
        as.seed = 99;
        as.workers = workers;
        samples = run_augment(as).samples.size();
        digests.push_back(tree_digest(out));
    }
    const double dt = seconds_since(t0);
    const bool repeat = digests[0] == digests[1];
    const bool workers = digests[0] == digests[2];
    return {poses == 42 && samples == 200 && repeat && workers && dt < determinism_budget_s,
            fmt("%zu poses, %zu samples, %zu files; repeat identical: %s; workers 1 vs 8 identical: %s; %.1f s "
                "(<%.0f s)",
                poses, samples, digests[0].size(), repeat ? "yes" : "no", workers ? "yes" : "no", dt,
                determinism_budget_s)};
}

Outcome throughput()
{
    const Mesh m = lumpy_mesh(6);
    ViewSphereConfig view;
    view.subdivisions = 1;
    view.radius = 400;
    RenderJob job{&m, build_pose_set(view), CameraIntrinsics::fitting(m.bounding_radius(), 400)};
    auto clean = std::make_shared<const std::vector<ModalityStack>>(render_dataset(std::span(&job, 1), 4));
    AugmentedStream stream(clean, 3, throughput_workers);
    for (int i = 0; i < 64; ++i)
        (void)stream.next(); // warm-up
    const int n = 3000;
    double checksum = 0.0;
    const auto t0 = Clock::now();
    for (int i = 0; i < n; ++i)
        checksum += stream.next().rgb.data()[0];
    const double rate = n / seconds_since(t0);
    return {rate >= throughput_floor,
            fmt("%.0f samples/s (64x64, procedural, %u workers, %u hardware threads; floor %.0f) checksum %.3f",
                rate, throughput_workers, std::thread::hardware_concurrency(), throughput_floor, checksum)};
}

} // namespace

int main()
{
    ScratchDir scratch;
    report("icosphere-counts", icosphere_counts);
    report("linemod-pose-counts", linemod_counts);
    report("inplane-factorization", inplane_factorization);
    report("normal-map-validity", normal_and_depth_validity);
    report("shading-cases", shading_cases);
    report("polygon-generation", polygon_cases);
    report("triplet-loss", triplet_cases);
    report("self-attention", attention_cases);
    report("determinism", [&] { return determinism(scratch.path()); });
    report("throughput", throughput);
    std::printf("%d failed\n", failures);
    return failures == 0 ? 0 : 1;
}
