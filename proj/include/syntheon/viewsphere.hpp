#ifndef SYNTHEON_VIEWSPHERE_HPP
#define SYNTHEON_VIEWSPHERE_HPP

#include "syntheon/geometry.hpp"

#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string_view>

namespace syntheon
{

enum class Hemisphere { full, upper };
enum class EquatorRule { include, exclude };
enum class Symmetry { regular, plane_symmetric, axis_symmetric };

/// Which icosahedron feature the +z axis passes through.
///  - edge_z: canonical (0, +-1, +-phi) coordinates, z through an edge midpoint.
///  - pole_z: rotated so that two opposite vertices sit on +-z.
enum class IcoOrientation { edge_z, pole_z };

struct InplaneSpec
{
    double min_deg = 0.0;
    double max_deg = 0.0;
    double stride_deg = 15.0;

    int steps() const
    {
        if (!(stride_deg > 0.0))
            throw Error("range", "in-plane stride must be > 0");
        if (min_deg > max_deg)
            throw Error("range", "in-plane min must be <= max");
        return static_cast<int>(std::floor((max_deg - min_deg) / stride_deg + 1e-9)) + 1;
    }
};

struct ViewSphereConfig
{
    int subdivisions = 3;
    double radius = 600.0;
    Hemisphere hemisphere = Hemisphere::full;
    EquatorRule equator = EquatorRule::include;
    std::optional<InplaneSpec> inplane;
    Symmetry symmetry = Symmetry::regular;
    IcoOrientation orientation = IcoOrientation::edge_z;

    void validate() const
    {
        if (!(radius > 0.0) || !std::isfinite(radius))
            throw Error("range", "view sphere radius must be > 0");
        if (subdivisions < 0 || subdivisions > 6)
            throw Error("range", "subdivisions must be in [0, 6]");
        if (inplane)
            (void)inplane->steps();
    }
};

/// Full icosahedron, 3 subdivisions, 600 mm, no in-plane rotation (642 views).
inline ViewSphereConfig tless_config()
{
    return ViewSphereConfig{};
}

/// Upper hemisphere, 3 subdivisions, 600 mm, in-plane -45:45:15.
inline ViewSphereConfig linemod_config(Symmetry symmetry = Symmetry::regular)
{
    ViewSphereConfig c;
    c.hemisphere = Hemisphere::upper;
    c.equator = EquatorRule::include;
    c.inplane = InplaneSpec{-45.0, 45.0, 15.0};
    c.symmetry = symmetry;
    return c;
}

/// A camera viewpoint. The camera frame is x right, y down, z forward; `rotation`
/// maps camera axes to world axes and the forward axis points at the origin.
struct Pose
{
    Quaternion rotation;
    Vec3 position;
    double radius = 0.0;
    double inplane_deg = 0.0;
    std::size_t vertex_index = 0;

    Vec3 forward() const { return rotation.rotate({0.0, 0.0, 1.0}); }
};

/// An icosphere vertex tagged with its index in the unfiltered vertex list.
struct ViewPoint
{
    std::size_t vertex_index = 0;
    Vec3 direction;
};

inline Vec3 direction_of(const Vec3& v) { return normalized(v); }
inline Vec3 direction_of(const ViewPoint& v) { return v.direction; }
inline Vec3 direction_of(const Pose& p) { return normalized(p.position); }

// ---------------------------------------------------------------------------

struct Icosphere
{
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
};

/// Edge-midpoint subdivided icosahedron on the unit sphere: 10 * 4^s + 2 vertices and
/// 20 * 4^s faces. Ordering: the 12 base vertices, then midpoints in order of creation.
inline Icosphere icosphere(int subdivisions, IcoOrientation orientation = IcoOrientation::edge_z)
{
    if (subdivisions < 0 || subdivisions > 6)
        throw Error("range", "icosphere: subdivisions must be in [0, 6]");

    constexpr double phi = std::numbers::phi;
    std::vector<Vec3> v = {
        {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
        {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
        {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1},
    };
    // Faces are the vertex triples at mutual edge distance 2.
    std::vector<Face> faces;
    for (std::uint32_t i = 0; i < 12; ++i)
        for (std::uint32_t j = i + 1; j < 12; ++j)
            for (std::uint32_t k = j + 1; k < 12; ++k) {
                auto adjacent = [&](std::uint32_t a, std::uint32_t b) {
                    return std::abs(norm(v[a] - v[b]) - 2.0) < 1e-9;
                };
                if (adjacent(i, j) && adjacent(j, k) && adjacent(i, k)) {
                    // Counter-clockwise seen from outside.
                    if (dot(cross(v[j] - v[i], v[k] - v[i]), v[i] + v[j] + v[k]) > 0.0)
                        faces.push_back({i, j, k});
                    else
                        faces.push_back({i, k, j});
                }
            }

    Quaternion frame = Quaternion::identity();
    if (orientation == IcoOrientation::pole_z)
        frame = Quaternion::from_axis_angle({1, 0, 0}, std::atan2(1.0, phi));
    for (Vec3& p : v)
        p = normalized(frame.rotate(p));

    for (int level = 0; level < subdivisions; ++level) {
        std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoints;
        auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
            const auto key = std::minmax(a, b);
            const auto it = midpoints.find(key);
            if (it != midpoints.end())
                return it->second;
            v.push_back(normalized(v[a] + v[b]));
            const auto idx = static_cast<std::uint32_t>(v.size() - 1);
            midpoints.emplace(key, idx);
            return idx;
        };
        std::vector<Face> next;
        next.reserve(faces.size() * 4);
        for (const Face& f : faces) {
            const auto ab = midpoint(f[0], f[1]);
            const auto bc = midpoint(f[1], f[2]);
            const auto ca = midpoint(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }
    return {std::move(v), std::move(faces)};
}

inline std::vector<Vec3> icosphere_vertices(int subdivisions, IcoOrientation orientation = IcoOrientation::edge_z)
{
    return icosphere(subdivisions, orientation).vertices;
}

inline std::vector<ViewPoint> index_view_points(std::span<const Vec3> vertices)
{
    std::vector<ViewPoint> out;
    out.reserve(vertices.size());
    for (std::size_t i = 0; i < vertices.size(); ++i)
        out.push_back({i, vertices[i]});
    return out;
}

inline constexpr double equator_tolerance = 1e-9;

/// Keeps the views of the requested hemisphere; the z = 0 ring is kept only with EquatorRule::include.
template <class T>
std::vector<T> filter_hemisphere(std::span<const T> points, Hemisphere hemisphere, EquatorRule equator)
{
    if (hemisphere == Hemisphere::full)
        return {points.begin(), points.end()};
    std::vector<T> out;
    for (const T& p : points) {
        const double z = direction_of(p).z;
        if (z > equator_tolerance || (equator == EquatorRule::include && std::abs(z) <= equator_tolerance))
            out.push_back(p);
    }
    return out;
}

/// Removes views that are redundant under the object's symmetry about the z axis.
///  - plane_symmetric (mirror plane y = 0): keeps the closed half-space y >= 0,
///    i.e. azimuths in [0, 180] degrees.
///  - axis_symmetric: keeps the meridian arc in the xz plane (azimuth 0 or 180).
/// Output preserves input order and is a subset of the input.
template <class T>
std::vector<T> apply_symmetry(std::span<const T> points, Symmetry symmetry)
{
    if (symmetry == Symmetry::regular)
        return {points.begin(), points.end()};
    std::vector<T> out;
    for (const T& p : points) {
        const double y = direction_of(p).y;
        const bool keep = symmetry == Symmetry::plane_symmetric ? y >= -equator_tolerance
                                                                : std::abs(y) <= equator_tolerance;
        if (keep)
            out.push_back(p);
    }
    return out;
}

/// Camera at `direction * radius` looking at the origin. Up is world +z projected
/// (world +y at the poles); the in-plane angle rolls the camera about its forward axis.
inline Pose look_at_pose(const Vec3& direction, double radius, double inplane_deg, std::size_t vertex_index)
{
    const Vec3 dir = normalized(direction);
    const Vec3 forward = -dir;
    Vec3 right = cross(forward, Vec3{0, 0, 1});
    if (norm(right) < 1e-9)
        right = cross(forward, Vec3{0, 1, 0});
    right = normalized(right);
    const Vec3 down = cross(forward, right);
    Quaternion q = Quaternion::from_columns(right, down, forward);
    if (inplane_deg != 0.0)
        q = q * Quaternion::from_axis_angle({0, 0, 1}, inplane_deg * std::numbers::pi / 180.0);
    return {q, dir * radius, radius, inplane_deg, vertex_index};
}

/// One pose per (view point, in-plane angle); view-point major, angle minor.
inline std::vector<Pose> expand_inplane(std::span<const ViewPoint> points, const std::optional<InplaneSpec>& spec,
                                        double radius)
{
    const int steps = spec ? spec->steps() : 1;
    std::vector<Pose> out;
    out.reserve(points.size() * static_cast<std::size_t>(steps));
    for (const ViewPoint& p : points)
        for (int k = 0; k < steps; ++k) {
            const double angle = spec ? spec->min_deg + k * spec->stride_deg : 0.0;
            out.push_back(look_at_pose(p.direction, radius, angle, p.vertex_index));
        }
    return out;
}

/// icosphere -> hemisphere -> symmetry -> in-plane expansion -> look-at poses.
inline std::vector<Pose> build_pose_set(const ViewSphereConfig& config)
{
    config.validate();
    const auto vertices = icosphere_vertices(config.subdivisions, config.orientation);
    const auto indexed = index_view_points(vertices);
    const auto hemi = filter_hemisphere<ViewPoint>(indexed, config.hemisphere, config.equator);
    const auto sym = apply_symmetry<ViewPoint>(hemi, config.symmetry);
    return expand_inplane(sym, config.inplane, config.radius);
}

// ---------------------------------------------------------------------------
// Names used by the CLI and manifests.

inline std::string_view to_string(Hemisphere h) { return h == Hemisphere::full ? "full" : "upper"; }
inline std::string_view to_string(EquatorRule e) { return e == EquatorRule::include ? "include" : "exclude"; }
inline std::string_view to_string(IcoOrientation o) { return o == IcoOrientation::edge_z ? "edge" : "pole"; }
inline std::string_view to_string(Symmetry s)
{
    switch (s) {
    case Symmetry::regular: return "regular";
    case Symmetry::plane_symmetric: return "plane_symmetric";
    case Symmetry::axis_symmetric: return "axis_symmetric";
    }
    return "regular";
}

inline Symmetry parse_symmetry(std::string_view s)
{
    if (s == "regular") return Symmetry::regular;
    if (s == "plane_symmetric" || s == "plane") return Symmetry::plane_symmetric;
    if (s == "axis_symmetric" || s == "axis") return Symmetry::axis_symmetric;
    throw Error("parse", "unknown symmetry '" + std::string(s) + "'");
}

/// Parses "MIN:MAX:STRIDE" in degrees.
inline InplaneSpec parse_inplane(std::string_view text)
{
    InplaneSpec spec;
    const auto a = text.find(':');
    const auto b = a == std::string_view::npos ? a : text.find(':', a + 1);
    if (b == std::string_view::npos)
        throw Error("parse", "in-plane spec must be MIN:MAX:STRIDE");
    try {
        spec.min_deg = std::stod(std::string(text.substr(0, a)));
        spec.max_deg = std::stod(std::string(text.substr(a + 1, b - a - 1)));
        spec.stride_deg = std::stod(std::string(text.substr(b + 1)));
    } catch (const std::exception&) {
        throw Error("parse", "in-plane spec must be MIN:MAX:STRIDE");
    }
    (void)spec.steps();
    return spec;
}

} // namespace syntheon

#endif // SYNTHEON_VIEWSPHERE_HPP
