#ifndef SYNTHEON_AUGMENT_HPP
#define SYNTHEON_AUGMENT_HPP

#include "syntheon/mesh_io.hpp"
#include "syntheon/noise.hpp"
#include "syntheon/png_io.hpp"
#include "syntheon/raster.hpp"
#include "syntheon/rng.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>
#include <sstream>

namespace syntheon
{

// ===========================================================================
// Noise vector z
// ===========================================================================

enum class TextureMode { hsl_merge, uv_texture };
enum class Axis { x, y, z };
enum class BackgroundSource { procedural, image_patch };
enum class BlurKind { none, gaussian, uniform, median };

using Rgb = std::array<double, 3>;

struct LightingParams
{
    Vec3 light_dir{0, 0, 1}; ///< unit, normal-map frame, pointing toward the light
    Rgb ambient{};
    Rgb diffuse{};
    Rgb specular{};
    double shininess = 1.0;
    /// Classic Blinn-Phong (normalized half vector) instead of the unnormalized V + L.
    bool normalize_halfway = false;
    bool operator==(const LightingParams&) const = default;
};

struct TextureParams
{
    TextureMode mode = TextureMode::hsl_merge;
    NoiseField hue;
    NoiseField saturation;
    double hue_offset = 0.0;
    Axis dropped_axis = Axis::z;
    bool operator==(const TextureParams&) const = default;
};

struct BackgroundParams
{
    BackgroundSource source = BackgroundSource::procedural;
    NoiseField hue;
    NoiseField saturation;
    NoiseField lightness;
    double hue_offset = 0.0;
    std::uint64_t patch_index = 0; ///< taken modulo the corpus size
    double crop_x = 0.0;           ///< crop origin, fraction of the free range
    double crop_y = 0.0;
    double crop_size = 1.0; ///< crop side, fraction of the shorter image side
    bool flip = false;
    bool operator==(const BackgroundParams&) const = default;
};

struct OcclusionParams
{
    bool enabled = false;
    double center_x = 0.0, center_y = 0.0; ///< px
    double mean_radius = 10.0;             ///< r_ave, px
    int vertex_count = 3;
    double irregularity = 0.0; ///< epsilon, radians
    double spikeyness = 0.0;   ///< sigma, fraction of mean_radius
    std::uint64_t shape_seed = 0;
    std::uint64_t fill_seed = 0;
    bool operator==(const OcclusionParams&) const = default;
};

struct BlurParams
{
    BlurKind kind = BlurKind::none;
    double intensity = 0.0; ///< in [0, 1], see blur_kernel_size()
    bool operator==(const BlurParams&) const = default;
};

/// Every random choice of one augmented sample. Equal vectors give bit-identical samples.
struct NoiseVector
{
    static constexpr int layout_version = 1;

    LightingParams lighting;
    TextureParams texture;
    BackgroundParams background;
    OcclusionParams occlusion;
    BlurParams blur;
    bool operator==(const NoiseVector&) const = default;
};

/// Supports of the sampling distributions that depend on the output or the corpus.
struct SamplingSupport
{
    int width = 64;
    int height = 64;
    bool patches_available = false;
    double occlusion_probability = 0.5;
};

inline Vec3 sample_upper_hemisphere(CounterRng& rng)
{
    const double z = rng.uniform();
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return normalized(Vec3{r * std::cos(phi), r * std::sin(phi), z});
}

inline NoiseField sample_noise_field(CounterRng& rng)
{
    NoiseField f;
    f.kind = static_cast<NoiseKind>(rng.uniform_int(0, 2));
    f.frequency = rng.uniform(0.0001, 0.1);
    f.seed = rng.next_u64();
    return f;
}

/// Draws z deterministically from `seed`.
inline NoiseVector sample_noise_vector(std::uint64_t seed, const SamplingSupport& support = {})
{
    NoiseVector z;
    {
        CounterRng rng(seed, "lighting");
        auto& l = z.lighting;
        l.light_dir = sample_upper_hemisphere(rng);
        for (double& v : l.ambient) v = rng.uniform(0.05, 0.3);
        for (double& v : l.diffuse) v = rng.uniform(0.1, 0.8);
        for (double& v : l.specular) v = rng.uniform(0.0, 0.1);
        l.shininess = rng.uniform(0.9, 1.1);
    }
    {
        CounterRng rng(seed, "texture");
        auto& t = z.texture;
        t.mode = rng.bernoulli() ? TextureMode::uv_texture : TextureMode::hsl_merge;
        t.hue = sample_noise_field(rng);
        t.saturation = sample_noise_field(rng);
        t.hue_offset = rng.uniform();
        t.dropped_axis = static_cast<Axis>(rng.uniform_int(0, 2));
    }
    {
        CounterRng rng(seed, "background");
        auto& b = z.background;
        b.source = support.patches_available && rng.bernoulli() ? BackgroundSource::image_patch
                                                                 : BackgroundSource::procedural;
        b.hue = sample_noise_field(rng);
        b.saturation = sample_noise_field(rng);
        b.lightness = sample_noise_field(rng);
        b.hue_offset = rng.uniform();
        b.patch_index = rng.next_u64();
        b.crop_x = rng.uniform();
        b.crop_y = rng.uniform();
        b.crop_size = rng.uniform(0.25, 1.0);
        b.flip = rng.bernoulli();
    }
    {
        CounterRng rng(seed, "occlusion");
        auto& o = z.occlusion;
        const double lx = support.width, ly = support.height;
        const double l = std::min(lx, ly);
        o.enabled = rng.bernoulli(support.occlusion_probability);
        o.center_x = rng.bernoulli() ? rng.uniform(0.0, lx / 4.0) : rng.uniform(lx / 4.0, l);
        o.center_y = rng.bernoulli() ? rng.uniform(0.0, ly / 4.0) : rng.uniform(ly / 4.0, l);
        o.mean_radius = rng.uniform(10.0, std::max(10.0, l / 4.0));
        o.vertex_count = static_cast<int>(rng.uniform_int(3, 10));
        o.irregularity = rng.uniform(0.0, 0.5) * 2.0 * std::numbers::pi / o.vertex_count;
        o.spikeyness = rng.uniform(0.0, 0.5);
        o.shape_seed = rng.next_u64();
        o.fill_seed = rng.next_u64();
    }
    {
        CounterRng rng(seed, "blur");
        z.blur.kind = static_cast<BlurKind>(rng.uniform_int(0, 3));
        z.blur.intensity = rng.uniform();
    }
    return z;
}

// ---------------------------------------------------------------------------
// Canonical text record: space-separated key=value pairs in fixed order.

namespace detail
{

inline std::string fmt_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class RecordWriter
{
public:
    void put(std::string_view key, const std::string& value)
    {
        if (!m_out.empty())
            m_out += ' ';
        m_out.append(key).append("=").append(value);
    }
    void put(std::string_view key, double v) { put(key, fmt_double(v)); }
    void put(std::string_view key, std::uint64_t v) { put(key, std::to_string(v)); }
    void put(std::string_view key, int v) { put(key, std::to_string(v)); }
    void put(std::string_view key, bool v) { put(key, std::string(v ? "1" : "0")); }
    void put(std::string_view key, const Rgb& v)
    {
        put(key, fmt_double(v[0]) + "," + fmt_double(v[1]) + "," + fmt_double(v[2]));
    }
    void put(std::string_view key, const Vec3& v) { put(key, Rgb{v.x, v.y, v.z}); }
    void put(std::string_view key, const NoiseField& f)
    {
        put(key, std::string(to_string(f.kind)) + "," + fmt_double(f.frequency) + "," + std::to_string(f.seed) + "," +
                     std::to_string(f.octaves) + "," + fmt_double(f.persistence));
    }
    std::string str() && { return std::move(m_out); }

private:
    std::string m_out;
};

inline std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep))
        out.push_back(cur);
    return out;
}

class RecordReader
{
public:
    explicit RecordReader(const std::string& text)
    {
        std::istringstream in(text);
        std::string tok;
        while (in >> tok) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos)
                throw Error("parse", "noise record: token without '=': " + tok);
            m_values[tok.substr(0, eq)] = tok.substr(eq + 1);
        }
    }

    const std::string& raw(const std::string& key) const
    {
        const auto it = m_values.find(key);
        if (it == m_values.end())
            throw Error("parse", "noise record: missing key '" + key + "'");
        return it->second;
    }
    double real(const std::string& key) const { return to_double(raw(key)); }
    std::uint64_t u64(const std::string& key) const { return to_u64(raw(key)); }
    int integer(const std::string& key) const { return to_int(raw(key)); }
    bool flag(const std::string& key) const { return raw(key) == "1"; }
    Rgb rgb(const std::string& key) const
    {
        const auto parts = split(raw(key), ',');
        if (parts.size() != 3)
            throw Error("parse", "noise record: '" + key + "' needs 3 components");
        return {to_double(parts[0]), to_double(parts[1]), to_double(parts[2])};
    }
    Vec3 vec3(const std::string& key) const
    {
        const Rgb v = rgb(key);
        return {v[0], v[1], v[2]};
    }
    NoiseField field(const std::string& key) const
    {
        const auto parts = split(raw(key), ',');
        if (parts.size() != 5)
            throw Error("parse", "noise record: '" + key + "' needs 5 components");
        return {parse_noise_kind(parts[0]), to_double(parts[1]), to_u64(parts[2]),
                to_int(parts[3]), to_double(parts[4])};
    }

private:
    static double to_double(const std::string& s)
    {
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        if (end == s.c_str() || *end != '\0')
            throw Error("parse", "noise record: bad number '" + s + "'");
        return v;
    }
    static int to_int(const std::string& s)
    {
        int v = 0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
            throw Error("parse", "noise record: bad integer '" + s + "'");
        return v;
    }
    static std::uint64_t to_u64(const std::string& s)
    {
        std::uint64_t v = 0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
            throw Error("parse", "noise record: bad integer '" + s + "'");
        return v;
    }

    std::map<std::string, std::string> m_values;
};

} // namespace detail

/// Serializes z to its canonical one-line record; doubles round-trip exactly.
inline std::string to_record(const NoiseVector& z)
{
    detail::RecordWriter w;
    w.put("zv", NoiseVector::layout_version);
    w.put("light.L", z.lighting.light_dir);
    w.put("light.a", z.lighting.ambient);
    w.put("light.d", z.lighting.diffuse);
    w.put("light.s", z.lighting.specular);
    w.put("light.sp", z.lighting.shininess);
    w.put("light.nh", z.lighting.normalize_halfway);
    w.put("tex.mode", static_cast<int>(z.texture.mode));
    w.put("tex.hue", z.texture.hue);
    w.put("tex.sat", z.texture.saturation);
    w.put("tex.hoff", z.texture.hue_offset);
    w.put("tex.drop", static_cast<int>(z.texture.dropped_axis));
    w.put("bg.src", static_cast<int>(z.background.source));
    w.put("bg.hue", z.background.hue);
    w.put("bg.sat", z.background.saturation);
    w.put("bg.lit", z.background.lightness);
    w.put("bg.hoff", z.background.hue_offset);
    w.put("bg.patch", z.background.patch_index);
    w.put("bg.cx", z.background.crop_x);
    w.put("bg.cy", z.background.crop_y);
    w.put("bg.cs", z.background.crop_size);
    w.put("bg.flip", z.background.flip);
    w.put("occ.on", z.occlusion.enabled);
    w.put("occ.cx", z.occlusion.center_x);
    w.put("occ.cy", z.occlusion.center_y);
    w.put("occ.r", z.occlusion.mean_radius);
    w.put("occ.n", z.occlusion.vertex_count);
    w.put("occ.eps", z.occlusion.irregularity);
    w.put("occ.sigma", z.occlusion.spikeyness);
    w.put("occ.shape", z.occlusion.shape_seed);
    w.put("occ.fill", z.occlusion.fill_seed);
    w.put("blur.kind", static_cast<int>(z.blur.kind));
    w.put("blur.u", z.blur.intensity);
    return std::move(w).str();
}

inline NoiseVector noise_vector_from_record(const std::string& record)
{
    const detail::RecordReader r(record);
    if (r.integer("zv") != NoiseVector::layout_version)
        throw Error("version", "noise record layout " + r.raw("zv") + " != " +
                                   std::to_string(NoiseVector::layout_version));
    auto enum_in = [&](const std::string& key, int hi) {
        const int v = r.integer(key);
        if (v < 0 || v > hi)
            throw Error("parse", "noise record: '" + key + "' out of range");
        return v;
    };
    NoiseVector z;
    z.lighting.light_dir = r.vec3("light.L");
    z.lighting.ambient = r.rgb("light.a");
    z.lighting.diffuse = r.rgb("light.d");
    z.lighting.specular = r.rgb("light.s");
    z.lighting.shininess = r.real("light.sp");
    z.lighting.normalize_halfway = r.flag("light.nh");
    z.texture.mode = static_cast<TextureMode>(enum_in("tex.mode", 1));
    z.texture.hue = r.field("tex.hue");
    z.texture.saturation = r.field("tex.sat");
    z.texture.hue_offset = r.real("tex.hoff");
    z.texture.dropped_axis = static_cast<Axis>(enum_in("tex.drop", 2));
    z.background.source = static_cast<BackgroundSource>(enum_in("bg.src", 1));
    z.background.hue = r.field("bg.hue");
    z.background.saturation = r.field("bg.sat");
    z.background.lightness = r.field("bg.lit");
    z.background.hue_offset = r.real("bg.hoff");
    z.background.patch_index = r.u64("bg.patch");
    z.background.crop_x = r.real("bg.cx");
    z.background.crop_y = r.real("bg.cy");
    z.background.crop_size = r.real("bg.cs");
    z.background.flip = r.flag("bg.flip");
    z.occlusion.enabled = r.flag("occ.on");
    z.occlusion.center_x = r.real("occ.cx");
    z.occlusion.center_y = r.real("occ.cy");
    z.occlusion.mean_radius = r.real("occ.r");
    z.occlusion.vertex_count = r.integer("occ.n");
    z.occlusion.irregularity = r.real("occ.eps");
    z.occlusion.spikeyness = r.real("occ.sigma");
    z.occlusion.shape_seed = r.u64("occ.shape");
    z.occlusion.fill_seed = r.u64("occ.fill");
    z.blur.kind = static_cast<BlurKind>(enum_in("blur.kind", 3));
    z.blur.intensity = r.real("blur.u");
    return z;
}

// ===========================================================================
// Stage 1: shading
// ===========================================================================

namespace detail
{

inline void require_finite(std::initializer_list<double> values, const char* what)
{
    for (double v : values)
        if (!std::isfinite(v))
            throw Error("range", std::string(what) + ": non-finite parameter");
}

} // namespace detail

/// Approximate Blinn-Phong lightness map from a normal map, light at infinity.
/// The view vector of pixel (col, row) is normalize(-(col - w/2)/fx, (row - h/2)/fy, 1)
/// in the normal-map frame; H = V + L (unnormalized unless requested); D = N.L;
/// S = max(N.H, 0)^shininess; M = clamp(a + d D + s S, 0, 1) per channel.
/// Background normals are zero, so those pixels get clamp(a, 0, 1).
inline Image shade(const Image& normals, const LightingParams& p, double fx, double fy)
{
    if (normals.channels() != 3)
        throw Error("range", "shade: normal map needs 3 channels");
    detail::require_finite({p.light_dir.x, p.light_dir.y, p.light_dir.z, p.shininess, fx, fy}, "shade");
    for (const Rgb* v : {&p.ambient, &p.diffuse, &p.specular})
        detail::require_finite({(*v)[0], (*v)[1], (*v)[2]}, "shade");
    if (!(fx > 0.0) || !(fy > 0.0))
        throw Error("range", "shade: focal length must be > 0");

    const int w = normals.width(), h = normals.height();
    Image m(w, h, 3);
    const Vec3 L = p.light_dir;
    for (int row = 0; row < h; ++row) {
        for (int col = 0; col < w; ++col) {
            const float* np = normals.pixel(col, row);
            const Vec3 n{np[0], np[1], np[2]};
            const Vec3 v = normalized(Vec3{-(col - 0.5 * w) / fx, (row - 0.5 * h) / fy, 1.0});
            Vec3 half = v + L;
            if (p.normalize_halfway)
                half = normalized(half);
            const double diffuse = dot(n, L);
            const double base = std::max(dot(n, half), 0.0);
            const double spec = base > 0.0 ? std::pow(base, p.shininess) : 0.0;
            float* out = m.pixel(col, row);
            for (int c = 0; c < 3; ++c)
                out[c] = static_cast<float>(
                    std::clamp(p.ambient[c] + p.diffuse[c] * diffuse + p.specular[c] * spec, 0.0, 1.0));
        }
    }
    return m;
}

inline Image shade(const ModalityStack& stack, const LightingParams& p)
{
    return shade(stack.normal, p, stack.camera.fx, stack.camera.fy);
}

/// Channel mean of a 3-channel lightness map.
inline Image lightness_of(const Image& m)
{
    Image out(m.width(), m.height(), 1);
    for (std::size_t i = 0; i < m.pixel_count(); ++i) {
        const float* p = m.data().data() + i * 3;
        out.data()[i] = (p[0] + p[1] + p[2]) / 3.0f;
    }
    return out;
}

// ===========================================================================
// Stage 2: texturing
// ===========================================================================

/// Canonical HSL to RGB, all components in [0, 1].
namespace detail
{

inline double hsl_hue_channel(double p, double q, double t)
{
    if (t < 0.0) t += 1.0;
    if (t > 1.0) t -= 1.0;
    if (t < 1.0 / 6.0) return p + (q - p) * 6.0 * t;
    if (t < 0.5) return q;
    if (t < 2.0 / 3.0) return p + (q - p) * (2.0 / 3.0 - t) * 6.0;
    return p;
}

} // namespace detail

/// Channel c (0 = R, 1 = G, 2 = B) of hsl_to_rgb(hue, sat, light).
inline double hsl_channel(double hue, double sat, double light, int c)
{
    if (sat <= 0.0)
        return light;
    const double q = light < 0.5 ? light * (1.0 + sat) : light + sat - light * sat;
    const double p = 2.0 * light - q;
    return detail::hsl_hue_channel(p, q, hue + (1 - c) / 3.0);
}

inline Rgb hsl_to_rgb(double hue, double sat, double light)
{
    return {hsl_channel(hue, sat, light, 0), hsl_channel(hue, sat, light, 1), hsl_channel(hue, sat, light, 2)};
}

inline double wrap01(double v) { return v - std::floor(v); }

/// Colours the foreground: hue and saturation come from the z-selected noise fields,
/// sampled at the pixel (hsl_merge) or at the UV texel obtained by dropping one normal
/// axis (uv_texture); each output channel c is HSL(hue, sat, M_c). Background stays 0.
inline Image texture_object(const ModalityStack& stack, const Image& lightness, const TextureParams& t)
{
    const int w = stack.width(), h = stack.height();
    if (lightness.width() != w || lightness.height() != h || lightness.channels() != 3)
        throw Error("range", "texture_object: lightness map must match the stack, 3 channels");
    Image out(w, h, 3, 0.0f);
    NoiseSampler hue_field(t.hue), sat_field(t.saturation);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!stack.is_foreground(x, y))
                continue;
            double u = x, v = y;
            if (t.mode == TextureMode::uv_texture) {
                const float* n = stack.normal.pixel(x, y);
                double a = n[0], b = n[1];
                if (t.dropped_axis == Axis::x) {
                    a = n[1];
                    b = n[2];
                } else if (t.dropped_axis == Axis::y) {
                    a = n[0];
                    b = n[2];
                }
                u = 0.5 * (a + 1.0) * w;
                v = 0.5 * (b + 1.0) * h;
            }
            const double hue = wrap01(t.hue_offset + hue_field(u, v));
            const double sat = std::clamp(sat_field(u, v), 0.0, 1.0);
            const float* m = lightness.pixel(x, y);
            float* o = out.pixel(x, y);
            for (int c = 0; c < 3; ++c)
                o[c] = static_cast<float>(hsl_channel(hue, sat, m[c], c));
        }
    return out;
}

// ===========================================================================
// Stage 3: background
// ===========================================================================

/// Read-only set of background images addressed by sorted file name. PNG files are
/// decoded on first use and cached; safe to share between threads.
class PatchCorpus
{
public:
    PatchCorpus() = default;

    static PatchCorpus open(const std::filesystem::path& dir)
    {
        PatchCorpus c;
        std::error_code ec;
        if (!std::filesystem::is_directory(dir, ec))
            throw Error("io", "patch corpus is not a directory: " + dir.string());
        for (const auto& e : std::filesystem::directory_iterator(dir))
            if (e.is_regular_file() && detail::lowercase(e.path().extension().string()) == ".png")
                c.m_paths.push_back(e.path());
        std::sort(c.m_paths.begin(), c.m_paths.end());
        c.m_slots = std::make_unique<Slot[]>(c.m_paths.size());
        return c;
    }

    static PatchCorpus from_images(std::vector<Image> images)
    {
        PatchCorpus c;
        c.m_slots = std::make_unique<Slot[]>(images.size());
        for (std::size_t i = 0; i < images.size(); ++i) {
            if (images[i].channels() != 3)
                throw Error("range", "PatchCorpus: images must be RGB");
            c.m_paths.emplace_back("<memory>");
            std::call_once(c.m_slots[i].once, [&] { c.m_slots[i].image = std::move(images[i]); });
        }
        return c;
    }

    std::size_t size() const noexcept { return m_paths.size(); }
    bool empty() const noexcept { return m_paths.empty(); }
    const std::vector<std::filesystem::path>& paths() const noexcept { return m_paths; }

    const Image& image(std::size_t i) const
    {
        Slot& s = m_slots[i];
        std::call_once(s.once, [&] { s.image = read_png_rgb(m_paths[i]); });
        return s.image;
    }

private:
    struct Slot
    {
        std::once_flag once;
        Image image;
    };
    std::vector<std::filesystem::path> m_paths;
    std::unique_ptr<Slot[]> m_slots;
};

/// Square crop selected by z, bilinearly resized to width x height, optionally mirrored.
inline Image crop_patch(const Image& src, const BackgroundParams& b, int width, int height)
{
    const int short_side = std::min(src.width(), src.height());
    const double side = std::max(1.0, std::clamp(b.crop_size, 0.0, 1.0) * short_side);
    const double x0 = std::clamp(b.crop_x, 0.0, 1.0) * (src.width() - side);
    const double y0 = std::clamp(b.crop_y, 0.0, 1.0) * (src.height() - side);
    Image out(width, height, 3);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const int xs = b.flip ? width - 1 - x : x;
            const double sx = std::clamp(x0 + (xs + 0.5) * side / width - 0.5, 0.0, src.width() - 1.0);
            const double sy = std::clamp(y0 + (y + 0.5) * side / height - 0.5, 0.0, src.height() - 1.0);
            const int ix = static_cast<int>(sx), iy = static_cast<int>(sy);
            const int ix1 = std::min(ix + 1, src.width() - 1), iy1 = std::min(iy + 1, src.height() - 1);
            const double fx = sx - ix, fy = sy - iy;
            for (int c = 0; c < 3; ++c) {
                const double top = src.at(ix, iy, c) * (1 - fx) + src.at(ix1, iy, c) * fx;
                const double bottom = src.at(ix, iy1, c) * (1 - fx) + src.at(ix1, iy1, c) * fx;
                out.at(x, y, c) = static_cast<float>(top * (1 - fy) + bottom * fy);
            }
        }
    return out;
}

/// Mean lightness over foreground pixels (over all pixels when nothing is foreground).
inline double foreground_brightness(const ImageBuffer<std::uint8_t>& mask, const Image& lightness)
{
    double fg = 0.0, all = 0.0;
    std::size_t n_fg = 0;
    for (std::size_t i = 0; i < mask.pixel_count(); ++i) {
        all += lightness.data()[i];
        if (mask.data()[i] != 0) {
            fg += lightness.data()[i];
            ++n_fg;
        }
    }
    return n_fg ? fg / n_fg : all / static_cast<double>(mask.pixel_count());
}

/// Fills background pixels with a noise image or a corpus patch, multiplied by the
/// foreground brightness; foreground pixels are copied unchanged.
inline Image composite_background(const Image& fg, const ImageBuffer<std::uint8_t>& mask, const Image& lightness,
                                  const BackgroundParams& b, const PatchCorpus* corpus)
{
    const int w = fg.width(), h = fg.height();
    if (mask.width() != w || mask.height() != h || lightness.width() != w || lightness.height() != h ||
        lightness.channels() != 1)
        throw Error("range", "composite_background: inputs must be co-registered");
    Image out = fg;
    const bool any_background = std::any_of(mask.data().begin(), mask.data().end(), [](auto v) { return v == 0; });
    if (!any_background)
        return out;

    const double scale = foreground_brightness(mask, lightness);
    Image patch;
    if (b.source == BackgroundSource::image_patch) {
        if (corpus == nullptr || corpus->empty())
            throw Error("config", "image_patch background requested but the patch corpus is empty; "
                                  "use the procedural background (--bg proc)");
        patch = crop_patch(corpus->image(b.patch_index % corpus->size()), b, w, h);
    }
    NoiseSampler hue_field(b.hue), sat_field(b.saturation), light_field(b.lightness);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (mask.at(x, y) != 0)
                continue;
            Rgb color;
            if (b.source == BackgroundSource::image_patch) {
                const float* p = patch.pixel(x, y);
                color = {p[0], p[1], p[2]};
            } else {
                color = hsl_to_rgb(wrap01(b.hue_offset + hue_field(x, y)), sat_field(x, y), light_field(x, y));
            }
            float* o = out.pixel(x, y);
            for (int c = 0; c < 3; ++c)
                o[c] = static_cast<float>(std::clamp(color[c] * scale, 0.0, 1.0));
        }
    return out;
}

// ===========================================================================
// Stage 4: occlusion
// ===========================================================================

struct Polygon
{
    std::vector<Vec2> points;
    std::vector<double> angles; ///< angle of each point, strictly increasing
    std::vector<double> steps;  ///< normalized angle steps, sum to 2 pi
};

/// Random star-shaped polygon: angle steps drawn from U(2pi/N - eps, 2pi/N + eps) and
/// rescaled to sum to 2 pi, radii from N(r_ave, sigma r_ave) clamped to [0, 2 r_ave],
/// first angle uniform in [0, 2 pi).
inline Polygon random_polygon(const OcclusionParams& o)
{
    if (o.vertex_count < 3)
        throw Error("range", "random_polygon: need at least 3 vertices");
    const int n = o.vertex_count;
    const double base = 2.0 * std::numbers::pi / n;
    const double eps = std::clamp(o.irregularity, 0.0, base * (1.0 - 1e-9));
    CounterRng rng(o.shape_seed, "polygon");

    Polygon poly;
    poly.steps.resize(n);
    double sum = 0.0;
    for (double& step : poly.steps) {
        step = rng.uniform(base - eps, base + eps);
        sum += step;
    }
    const double k = sum / (2.0 * std::numbers::pi);
    for (double& step : poly.steps)
        step /= k;

    double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (int i = 0; i < n; ++i) {
        const double r = std::clamp(rng.normal(o.mean_radius, o.spikeyness * o.mean_radius), 0.0,
                                    2.0 * o.mean_radius);
        poly.points.push_back({o.center_x + r * std::cos(theta), o.center_y + r * std::sin(theta)});
        poly.angles.push_back(theta);
        theta += poly.steps[i];
    }
    return poly;
}

/// Even-odd point-in-polygon test.
inline bool polygon_contains(const std::vector<Vec2>& pts, double x, double y)
{
    bool inside = false;
    for (std::size_t i = 0, j = pts.size() - 1; i < pts.size(); j = i++) {
        const Vec2 a = pts[i], b = pts[j];
        if ((a.y > y) != (b.y > y) && x < (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x)
            inside = !inside;
    }
    return inside;
}

struct OcclusionResult
{
    Image rgb;
    ImageBuffer<std::uint8_t> mask; ///< 1 where the occluder was painted
};

/// Paints the polygon interior (pixel centres, even-odd rule) with white-noise colour.
inline OcclusionResult apply_occlusion(const Image& rgb, const Polygon& polygon, std::uint64_t fill_seed)
{
    if (polygon.points.size() < 3)
        throw Error("range", "apply_occlusion: degenerate polygon");
    OcclusionResult r{rgb, ImageBuffer<std::uint8_t>(rgb.width(), rgb.height(), 1, 0)};
    for (int y = 0; y < rgb.height(); ++y)
        for (int x = 0; x < rgb.width(); ++x) {
            if (!polygon_contains(polygon.points, x + 0.5, y + 0.5))
                continue;
            r.mask.at(x, y) = 1;
            float* p = r.rgb.pixel(x, y);
            for (int c = 0; c < rgb.channels(); ++c)
                p[c] = static_cast<float>(white(hash_combine(fill_seed, static_cast<std::uint64_t>(c)), x, y));
        }
    return r;
}

// ===========================================================================
// Stage 5: blur
// ===========================================================================

/// intensity u in [0, 1] -> 1 + 2 floor(3u), i.e. 1, 3, 5 or 7.
inline int blur_kernel_size(double intensity)
{
    const int level = std::clamp(static_cast<int>(std::floor(3.0 * std::clamp(intensity, 0.0, 1.0))), 0, 3);
    return 1 + 2 * level;
}

namespace detail
{

inline Image separable_filter(const Image& src, const std::vector<double>& kernel)
{
    const int w = src.width(), h = src.height(), ch = src.channels();
    const int r = static_cast<int>(kernel.size() / 2);
    Image tmp(w, h, ch), out(w, h, ch);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (int k = -r; k <= r; ++k)
                    acc += kernel[k + r] * src.at(std::clamp(x + k, 0, w - 1), y, c);
                tmp.at(x, y, c) = static_cast<float>(acc);
            }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (int k = -r; k <= r; ++k)
                    acc += kernel[k + r] * tmp.at(x, std::clamp(y + k, 0, h - 1), c);
                out.at(x, y, c) = static_cast<float>(acc);
            }
    return out;
}

/// Comparators of Batcher's odd-even merge sort over `n` (a power of two) slots,
/// keeping only those that can influence slot `target`.
inline std::vector<std::pair<int, int>> median_network(int n, int target)
{
    std::vector<std::pair<int, int>> all;
    for (int p = 1; p < n; p *= 2)
        for (int k = p; k >= 1; k /= 2)
            for (int j = k % p; j + k < n; j += 2 * k)
                for (int i = 0; i < std::min(k, n - j - k); ++i)
                    if ((i + j) / (2 * p) == (i + j + k) / (2 * p))
                        all.emplace_back(i + j, i + j + k);
    std::vector<bool> needed(static_cast<std::size_t>(n), false);
    needed[static_cast<std::size_t>(target)] = true;
    std::vector<std::pair<int, int>> kept;
    for (auto it = all.rbegin(); it != all.rend(); ++it)
        if (needed[it->first] || needed[it->second]) {
            needed[it->first] = needed[it->second] = true;
            kept.push_back(*it);
        }
    std::reverse(kept.begin(), kept.end());
    return kept;
}

/// Median of each k x k window with edge-clamp padding. The network runs on `lanes`
/// horizontally adjacent pixels at once.
inline Image median_filter(const Image& src, int kernel_size)
{
    constexpr int lanes = 8;
    const int w = src.width(), h = src.height(), ch = src.channels();
    const int r = kernel_size / 2;
    const int count = kernel_size * kernel_size;
    int slots = 1;
    while (slots < count)
        slots *= 2;
    const auto network = median_network(slots, count / 2);

    const int blocks = (w + lanes - 1) / lanes;
    const int pw = blocks * lanes + 2 * r, ph = h + 2 * r;
    std::vector<float> padded(static_cast<std::size_t>(pw) * ph);
    std::vector<std::array<float, lanes>> window(static_cast<std::size_t>(slots));
    for (int k = count; k < slots; ++k)
        window[k].fill(std::numeric_limits<float>::infinity());
    Image out(w, h, ch);
    for (int c = 0; c < ch; ++c) {
        for (int y = 0; y < ph; ++y)
            for (int x = 0; x < pw; ++x)
                padded[static_cast<std::size_t>(y) * pw + x] =
                    src.at(std::clamp(x - r, 0, w - 1), std::clamp(y - r, 0, h - 1), c);
        for (int y = 0; y < h; ++y)
            for (int b = 0; b < blocks; ++b) {
                const int x0 = b * lanes;
                int n = 0;
                for (int dy = 0; dy < kernel_size; ++dy) {
                    const float* row = padded.data() + static_cast<std::size_t>(y + dy) * pw + x0;
                    for (int dx = 0; dx < kernel_size; ++dx, ++n)
                        for (int l = 0; l < lanes; ++l)
                            window[n][l] = row[dx + l];
                }
                for (const auto& [i, j] : network) {
                    auto& lo = window[i];
                    auto& hi = window[j];
                    for (int l = 0; l < lanes; ++l) {
                        const float a = lo[l], v = hi[l];
                        lo[l] = std::min(a, v);
                        hi[l] = std::max(a, v);
                    }
                }
                for (int l = 0; l < lanes && x0 + l < w; ++l)
                    out.at(x0 + l, y, c) = window[count / 2][l];
            }
    }
    return out;
}

} // namespace detail

/// Gaussian, box or median filter of odd `kernel_size` with edge-clamp padding.
inline Image blur(const Image& src, BlurKind kind, int kernel_size)
{
    if (kernel_size < 1 || kernel_size % 2 == 0)
        throw Error("range", "blur: kernel size must be odd and >= 1");
    if (kind == BlurKind::none || kernel_size == 1)
        return src;
    const int r = kernel_size / 2;
    if (kind == BlurKind::gaussian || kind == BlurKind::uniform) {
        std::vector<double> kernel(kernel_size, 1.0);
        if (kind == BlurKind::gaussian) {
            const double sigma = 0.3 * ((kernel_size - 1) * 0.5 - 1.0) + 0.8;
            for (int k = -r; k <= r; ++k)
                kernel[k + r] = std::exp(-0.5 * k * k / (sigma * sigma));
        }
        double total = 0.0;
        for (double v : kernel)
            total += v;
        for (double& v : kernel)
            v /= total;
        return detail::separable_filter(src, kernel);
    }
    return detail::median_filter(src, kernel_size);
}

// ===========================================================================
// Pipeline
// ===========================================================================

struct Provenance
{
    int class_id = 0;
    Pose pose;
    NoiseVector z;
    std::uint64_t seed = 0;
    std::uint64_t source_index = 0; ///< index of the clean stack in its manifest
};

struct AugmentedSample
{
    Image rgb;                                ///< 3 channels in [-1, 1]
    Image lightness;                          ///< 1 channel in [0, 1], from the shading stage
    ImageBuffer<std::uint8_t> occlusion_mask; ///< 1 where an occluder was painted
    Provenance provenance;
};

/// Runs shading, texturing, background, occlusion and blur, in that order, as a pure
/// function of (stack, z, corpus contents). Output colours are rescaled to [-1, 1].
inline AugmentedSample augment(const ModalityStack& stack, const NoiseVector& z, const PatchCorpus* corpus = nullptr)
{
    if (stack.normal.empty() || stack.semantic.empty())
        throw Error("range", "augment: empty modality stack");
    const Image m = shade(stack, z.lighting);
    AugmentedSample s;
    s.lightness = lightness_of(m);
    Image img = texture_object(stack, m, z.texture);
    img = composite_background(img, stack.semantic, s.lightness, z.background, corpus);
    if (z.occlusion.enabled) {
        auto occ = apply_occlusion(img, random_polygon(z.occlusion), z.occlusion.fill_seed);
        img = std::move(occ.rgb);
        s.occlusion_mask = std::move(occ.mask);
    } else {
        s.occlusion_mask = ImageBuffer<std::uint8_t>(img.width(), img.height(), 1, 0);
    }
    img = blur(img, z.blur.kind, blur_kernel_size(z.blur.intensity));
    for (float& v : img.data())
        v = std::clamp(2.0f * v - 1.0f, -1.0f, 1.0f);
    s.rgb = std::move(img);
    s.provenance.class_id = stack.class_id;
    s.provenance.pose = stack.pose;
    s.provenance.z = z;
    return s;
}

} // namespace syntheon

#endif // SYNTHEON_AUGMENT_HPP
