#ifndef SYNTHEON_GEOMETRY_HPP
#define SYNTHEON_GEOMETRY_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace syntheon
{

struct Vec2
{
    double x = 0.0, y = 0.0;
};

struct Vec3
{
    double x = 0.0, y = 0.0, z = 0.0;

    constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr Vec3 operator-() const { return {-x, -y, -z}; }
    constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    constexpr Vec3& operator+=(const Vec3& o)
    {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    constexpr bool operator==(const Vec3&) const = default;
};

constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }
constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(const Vec3& a, const Vec3& b)
{
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline Vec3 normalized(const Vec3& v)
{
    const double n = norm(v);
    return n > 0.0 ? v / n : Vec3{};
}

/// Thrown for malformed inputs: bad files, out-of-range parameters, broken invariants.
class Error : public std::runtime_error
{
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), m_kind(std::move(kind))
    {
    }
    /// Short machine-readable category, e.g. "io", "parse", "range".
    const std::string& kind() const noexcept { return m_kind; }

private:
    std::string m_kind;
};

// ---------------------------------------------------------------------------
// Quaternion
// ---------------------------------------------------------------------------

/// Rotation quaternion (w, x, y, z). Construct through the factories, which
/// normalize; the raw constructor is for values already known to be unit.
struct Quaternion
{
    double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

    static Quaternion identity() { return {}; }

    static Quaternion unit(double w, double x, double y, double z)
    {
        const double n = std::sqrt(w * w + x * x + y * y + z * z);
        if (!(n > 0.0) || !std::isfinite(n))
            throw Error("range", "quaternion has zero or non-finite norm");
        return {w / n, x / n, y / n, z / n};
    }

    static Quaternion from_axis_angle(const Vec3& axis, double radians)
    {
        const Vec3 a = normalized(axis);
        const double s = std::sin(radians * 0.5);
        return unit(std::cos(radians * 0.5), a.x * s, a.y * s, a.z * s);
    }

    /// Rotation whose matrix has the given orthonormal columns.
    static Quaternion from_columns(const Vec3& c0, const Vec3& c1, const Vec3& c2)
    {
        const double m00 = c0.x, m10 = c0.y, m20 = c0.z;
        const double m01 = c1.x, m11 = c1.y, m21 = c1.z;
        const double m02 = c2.x, m12 = c2.y, m22 = c2.z;
        const double trace = m00 + m11 + m22;
        if (trace > 0.0) {
            const double s = 0.5 / std::sqrt(trace + 1.0);
            return unit(0.25 / s, (m21 - m12) * s, (m02 - m20) * s, (m10 - m01) * s);
        }
        if (m00 > m11 && m00 > m22) {
            const double s = 2.0 * std::sqrt(1.0 + m00 - m11 - m22);
            return unit((m21 - m12) / s, 0.25 * s, (m01 + m10) / s, (m02 + m20) / s);
        }
        if (m11 > m22) {
            const double s = 2.0 * std::sqrt(1.0 + m11 - m00 - m22);
            return unit((m02 - m20) / s, (m01 + m10) / s, 0.25 * s, (m12 + m21) / s);
        }
        const double s = 2.0 * std::sqrt(1.0 + m22 - m00 - m11);
        return unit((m10 - m01) / s, (m02 + m20) / s, (m12 + m21) / s, 0.25 * s);
    }

    double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
    Quaternion conjugate() const { return {w, -x, -y, -z}; }
    Quaternion operator-() const { return {-w, -x, -y, -z}; }

    Quaternion operator*(const Quaternion& o) const
    {
        return {w * o.w - x * o.x - y * o.y - z * o.z,
                w * o.x + x * o.w + y * o.z - z * o.y,
                w * o.y - x * o.z + y * o.w + z * o.x,
                w * o.z + x * o.y - y * o.x + z * o.w};
    }

    Vec3 rotate(const Vec3& v) const
    {
        const Vec3 u{x, y, z};
        const Vec3 t = 2.0 * cross(u, v);
        return v + w * t + cross(u, t);
    }

    bool operator==(const Quaternion&) const = default;
};

inline double dot(const Quaternion& a, const Quaternion& b)
{
    return a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
}

/// Geodesic angle between two rotations, 2 acos(|a.b|), in [0, pi].
inline double quat_angular_distance(const Quaternion& a, const Quaternion& b)
{
    constexpr double tolerance = 1e-6;
    if (std::abs(a.norm() - 1.0) > tolerance || std::abs(b.norm() - 1.0) > tolerance)
        throw Error("range", "quat_angular_distance: non-unit quaternion");
    const double c = std::clamp(std::abs(dot(a, b)), 0.0, 1.0);
    return 2.0 * std::acos(c);
}

// ---------------------------------------------------------------------------
// Image buffers
// ---------------------------------------------------------------------------

/// Interleaved row-major image, `channels` values per pixel.
template <class T>
class ImageBuffer
{
public:
    ImageBuffer() = default;
    ImageBuffer(int width, int height, int channels, T fill = T{})
        : m_width(width), m_height(height), m_channels(channels)
    {
        if (width <= 0 || height <= 0 || channels < 1 || channels > 4)
            throw Error("range", "ImageBuffer: invalid dimensions");
        m_data.assign(static_cast<std::size_t>(width) * height * channels, fill);
    }

    int width() const noexcept { return m_width; }
    int height() const noexcept { return m_height; }
    int channels() const noexcept { return m_channels; }
    std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(m_width) * m_height; }
    bool empty() const noexcept { return m_data.empty(); }

    T& at(int x, int y, int c = 0) { return m_data[index(x, y, c)]; }
    const T& at(int x, int y, int c = 0) const { return m_data[index(x, y, c)]; }

    T* pixel(int x, int y) { return m_data.data() + index(x, y, 0); }
    const T* pixel(int x, int y) const { return m_data.data() + index(x, y, 0); }

    std::vector<T>& data() noexcept { return m_data; }
    const std::vector<T>& data() const noexcept { return m_data; }

    bool same_shape(const ImageBuffer& o) const
    {
        return m_width == o.m_width && m_height == o.m_height && m_channels == o.m_channels;
    }

    bool all_finite() const
    {
        if constexpr (std::is_floating_point_v<T>)
            return std::all_of(m_data.begin(), m_data.end(), [](T v) { return std::isfinite(v); });
        else
            return true;
    }

    bool operator==(const ImageBuffer&) const = default;

private:
    std::size_t index(int x, int y, int c) const
    {
        return (static_cast<std::size_t>(y) * m_width + x) * m_channels + c;
    }

    int m_width = 0, m_height = 0, m_channels = 0;
    std::vector<T> m_data;
};

using Image = ImageBuffer<float>;

// ---------------------------------------------------------------------------
// Mesh
// ---------------------------------------------------------------------------

using Face = std::array<std::uint32_t, 3>;

/// Indexed triangle mesh of one object class. Units are millimetres.
class Mesh
{
public:
    Mesh() = default;

    /// Builds a mesh and computes its face normals. Zero-area faces are dropped.
    static Mesh create(std::vector<Vec3> vertices, std::vector<Face> faces, int class_id)
    {
        if (class_id < 1)
            throw Error("range", "Mesh: class_id must be >= 1 (0 is background)");
        Mesh m;
        m.m_class_id = class_id;
        m.m_vertices = std::move(vertices);
        const auto n = m.m_vertices.size();
        for (const Vec3& v : m.m_vertices)
            if (!std::isfinite(v.x) || !std::isfinite(v.y) || !std::isfinite(v.z))
                throw Error("parse", "Mesh: non-finite vertex coordinate");
        m.m_faces.reserve(faces.size());
        m.m_normals.reserve(faces.size());
        for (const Face& f : faces) {
            if (f[0] >= n || f[1] >= n || f[2] >= n)
                throw Error("parse", "Mesh: face index out of range");
            const Vec3 c = cross(m.m_vertices[f[1]] - m.m_vertices[f[0]],
                                 m.m_vertices[f[2]] - m.m_vertices[f[0]]);
            const double len = norm(c);
            if (!(len > 0.0))
                continue;
            m.m_faces.push_back(f);
            m.m_normals.push_back(c / len);
        }
        if (m.m_faces.empty())
            throw Error("empty", "Mesh: no non-degenerate triangles");
        m.m_radius = 0.0;
        for (const Vec3& v : m.m_vertices)
            m.m_radius = std::max(m.m_radius, norm(v));
        return m;
    }

    const std::vector<Vec3>& vertices() const noexcept { return m_vertices; }
    const std::vector<Face>& faces() const noexcept { return m_faces; }
    const std::vector<Vec3>& face_normals() const noexcept { return m_normals; }
    int class_id() const noexcept { return m_class_id; }
    /// Largest vertex distance from the frame origin.
    double bounding_radius() const noexcept { return m_radius; }
    bool empty() const noexcept { return m_faces.empty(); }

    /// Area-weighted vertex normals, for smooth shading.
    std::vector<Vec3> vertex_normals() const
    {
        std::vector<Vec3> out(m_vertices.size());
        for (std::size_t i = 0; i < m_faces.size(); ++i) {
            const Face& f = m_faces[i];
            const Vec3 c = cross(m_vertices[f[1]] - m_vertices[f[0]], m_vertices[f[2]] - m_vertices[f[0]]);
            for (auto idx : f)
                out[idx] += c;
        }
        for (Vec3& v : out)
            v = normalized(v);
        return out;
    }

    std::pair<Vec3, Vec3> bounds() const
    {
        Vec3 lo = m_vertices.front(), hi = lo;
        for (const Vec3& v : m_vertices) {
            lo = {std::min(lo.x, v.x), std::min(lo.y, v.y), std::min(lo.z, v.z)};
            hi = {std::max(hi.x, v.x), std::max(hi.y, v.y), std::max(hi.z, v.z)};
        }
        return {lo, hi};
    }

private:
    std::vector<Vec3> m_vertices;
    std::vector<Face> m_faces;
    std::vector<Vec3> m_normals;
    int m_class_id = 0;
    double m_radius = 0.0;
};

/// Translates the mesh so its bounding-box centre sits at the origin.
inline Mesh normalize_pose_frame(const Mesh& mesh)
{
    if (mesh.empty())
        throw Error("empty", "normalize_pose_frame: empty mesh");
    const auto [lo, hi] = mesh.bounds();
    const Vec3 centre = (lo + hi) * 0.5;
    std::vector<Vec3> moved = mesh.vertices();
    for (Vec3& v : moved)
        v = v - centre;
    return Mesh::create(std::move(moved), mesh.faces(), mesh.class_id());
}

} // namespace syntheon

#endif // SYNTHEON_GEOMETRY_HPP
