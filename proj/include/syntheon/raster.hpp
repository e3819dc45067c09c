#ifndef SYNTHEON_RASTER_HPP
#define SYNTHEON_RASTER_HPP

#include "syntheon/geometry.hpp"
#include "syntheon/parallel.hpp"
#include "syntheon/viewsphere.hpp"

#include <limits>

namespace syntheon
{

/// Pinhole intrinsics in pixels.
struct CameraIntrinsics
{
    double fx = 0.0, fy = 0.0;
    double cx = 0.0, cy = 0.0;
    int width = 0, height = 0;

    void validate() const
    {
        if (!(fx > 0.0) || !(fy > 0.0))
            throw Error("range", "CameraIntrinsics: focal lengths must be > 0");
        if (width <= 0 || height <= 0)
            throw Error("range", "CameraIntrinsics: image size must be > 0");
    }

    /// Square image whose focal length makes a sphere of `object_radius` seen from
    /// `distance` span `fill` of the frame width.
    static CameraIntrinsics fitting(double object_radius, double distance, int size = 64, double fill = 0.85)
    {
        if (!(object_radius > 0.0) || !(distance > object_radius))
            throw Error("range", "CameraIntrinsics::fitting: camera must be outside the object sphere");
        const double tangent = object_radius / std::sqrt(distance * distance - object_radius * object_radius);
        const double f = 0.5 * fill * size / tangent;
        return {f, f, 0.5 * size, 0.5 * size, size, size};
    }
};

/// Co-registered clean maps of one view.
///  normal:   3 channels, unit camera-space normals (x right, y up, z toward the camera), 0 on background
///  depth:    1 channel, distance along the optical axis in mm, 0 on background
///  semantic: class id per pixel, 0 on background
struct ModalityStack
{
    Image normal;
    Image depth;
    ImageBuffer<std::uint8_t> semantic;
    Pose pose;
    CameraIntrinsics camera;
    int class_id = 0;
    /// Set when no pixel is covered (object outside the frustum).
    bool empty_foreground = true;

    int width() const { return normal.width(); }
    int height() const { return normal.height(); }
    bool is_foreground(int x, int y) const { return semantic.at(x, y) != 0; }
};

struct RasterOptions
{
    /// Interpolated area-weighted vertex normals instead of per-face normals.
    bool smooth_normals = false;
    /// Geometry closer than this (mm, camera z) is clipped.
    double near_plane = 1.0;
};

/// Z-buffered triangle rasterizer accumulating into one ModalityStack. Several
/// meshes may be drawn into the same frame; the nearest surface wins per pixel.
class Rasterizer
{
public:
    Rasterizer(const CameraIntrinsics& cam, const Pose& pose, RasterOptions options = {})
        : m_cam(cam), m_pose(pose), m_options(options)
    {
        cam.validate();
        m_world_to_camera = pose.rotation.conjugate();
        m_stack.normal = Image(cam.width, cam.height, 3, 0.0f);
        m_stack.depth = Image(cam.width, cam.height, 1, 0.0f);
        m_stack.semantic = ImageBuffer<std::uint8_t>(cam.width, cam.height, 1, 0);
        m_stack.pose = pose;
        m_stack.camera = cam;
        m_zbuffer.assign(static_cast<std::size_t>(cam.width) * cam.height, std::numeric_limits<double>::infinity());
    }

    /// Draws `mesh` translated by `offset` (world mm).
    void draw(const Mesh& mesh, const Vec3& offset = {})
    {
        if (mesh.empty())
            throw Error("empty", "Rasterizer::draw: empty mesh");
        if (mesh.class_id() > 255)
            throw Error("range", "Rasterizer::draw: class id does not fit the 8-bit semantic map");
        m_class = static_cast<std::uint8_t>(mesh.class_id());
        if (m_stack.class_id == 0)
            m_stack.class_id = mesh.class_id();

        const auto& verts = mesh.vertices();
        std::vector<Vec3> cam_verts(verts.size());
        for (std::size_t i = 0; i < verts.size(); ++i)
            cam_verts[i] = to_camera(verts[i] + offset);
        std::vector<Vec3> cam_vnormals;
        if (m_options.smooth_normals) {
            const auto vn = mesh.vertex_normals();
            cam_vnormals.resize(vn.size());
            for (std::size_t i = 0; i < vn.size(); ++i)
                cam_vnormals[i] = m_world_to_camera.rotate(vn[i]);
        }

        const auto& faces = mesh.faces();
        const auto& fnormals = mesh.face_normals();
        for (std::size_t f = 0; f < faces.size(); ++f) {
            const Face& face = faces[f];
            const Vec3 p0 = cam_verts[face[0]], p1 = cam_verts[face[1]], p2 = cam_verts[face[2]];
            Vec3 n = m_world_to_camera.rotate(fnormals[f]);
            // The camera sits at the origin, so n.p has one sign over the whole plane.
            const bool flip = dot(n, p0) > 0.0;
            if (flip)
                n = -n;
            ClipVertex tri[3] = {{p0, {}}, {p1, {}}, {p2, {}}};
            if (m_options.smooth_normals) {
                for (int k = 0; k < 3; ++k)
                    tri[k].normal = flip ? -cam_vnormals[face[k]] : cam_vnormals[face[k]];
            }
            draw_clipped(tri, n);
        }
    }

    ModalityStack finish() &&
    {
        m_stack.empty_foreground =
            std::all_of(m_stack.semantic.data().begin(), m_stack.semantic.data().end(), [](auto v) { return v == 0; });
        return std::move(m_stack);
    }

private:
    struct ClipVertex
    {
        Vec3 position; // camera frame
        Vec3 normal;   // camera frame, smooth mode only
    };

    Vec3 to_camera(const Vec3& world) const { return m_world_to_camera.rotate(world - m_pose.position); }

    void draw_clipped(const ClipVertex (&tri)[3], const Vec3& face_normal)
    {
        // Sutherland-Hodgman against z = near.
        const double near = m_options.near_plane;
        ClipVertex poly[4];
        int count = 0;
        for (int i = 0; i < 3; ++i) {
            const ClipVertex& a = tri[i];
            const ClipVertex& b = tri[(i + 1) % 3];
            const bool a_in = a.position.z >= near;
            const bool b_in = b.position.z >= near;
            if (a_in)
                poly[count++] = a;
            if (a_in != b_in) {
                const double t = (near - a.position.z) / (b.position.z - a.position.z);
                poly[count++] = {a.position + t * (b.position - a.position), a.normal + t * (b.normal - a.normal)};
            }
        }
        for (int k = 1; k + 1 < count; ++k)
            draw_triangle(poly[0], poly[k], poly[k + 1], face_normal);
    }

    void draw_triangle(const ClipVertex& a, const ClipVertex& b, const ClipVertex& c, const Vec3& face_normal)
    {
        struct Screen
        {
            double u, v, inv_z;
        };
        auto project = [&](const Vec3& p) {
            return Screen{m_cam.fx * p.x / p.z + m_cam.cx, m_cam.fy * p.y / p.z + m_cam.cy, 1.0 / p.z};
        };
        const Screen s0 = project(a.position), s1 = project(b.position), s2 = project(c.position);
        const double area = (s1.u - s0.u) * (s2.v - s0.v) - (s1.v - s0.v) * (s2.u - s0.u);
        if (!(std::abs(area) > 1e-12))
            return;

        // Clamp before the integer cast: near-plane geometry can project far off-screen.
        auto pixel_floor = [](double v, int hi) { return static_cast<int>(std::clamp(std::floor(v - 0.5), -1.0, hi + 1.0)); };
        auto pixel_ceil = [](double v, int hi) { return static_cast<int>(std::clamp(std::ceil(v - 0.5), -1.0, hi + 1.0)); };
        const int x_lo = std::max(0, pixel_floor(std::min({s0.u, s1.u, s2.u}), m_cam.width));
        const int x_hi = std::min(m_cam.width - 1, pixel_ceil(std::max({s0.u, s1.u, s2.u}), m_cam.width));
        const int y_lo = std::max(0, pixel_floor(std::min({s0.v, s1.v, s2.v}), m_cam.height));
        const int y_hi = std::min(m_cam.height - 1, pixel_ceil(std::max({s0.v, s1.v, s2.v}), m_cam.height));

        const Vec3 flat_map = to_map_frame(face_normal);
        for (int y = y_lo; y <= y_hi; ++y) {
            const double pv = y + 0.5;
            for (int x = x_lo; x <= x_hi; ++x) {
                const double pu = x + 0.5;
                const double w0 = ((s1.u - pu) * (s2.v - pv) - (s1.v - pv) * (s2.u - pu)) / area;
                const double w1 = ((s2.u - pu) * (s0.v - pv) - (s2.v - pv) * (s0.u - pu)) / area;
                const double w2 = 1.0 - w0 - w1;
                if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0)
                    continue;
                const double inv_z = w0 * s0.inv_z + w1 * s1.inv_z + w2 * s2.inv_z;
                const double z = 1.0 / inv_z;
                const std::size_t idx = static_cast<std::size_t>(y) * m_cam.width + x;
                if (!(z < m_zbuffer[idx]))
                    continue;
                m_zbuffer[idx] = z;

                Vec3 n = flat_map;
                if (m_options.smooth_normals) {
                    const Vec3 interp = (w0 * s0.inv_z * a.normal + w1 * s1.inv_z * b.normal +
                                         w2 * s2.inv_z * c.normal) * z;
                    const Vec3 unit = normalized(interp);
                    if (norm(unit) > 0.0)
                        n = to_map_frame(unit);
                }
                float* np = m_stack.normal.pixel(x, y);
                np[0] = static_cast<float>(n.x);
                np[1] = static_cast<float>(n.y);
                np[2] = static_cast<float>(n.z);
                m_stack.depth.at(x, y) = static_cast<float>(z);
                m_stack.semantic.at(x, y) = m_class;
            }
        }
    }

    /// Camera frame (y down, z forward) to normal-map frame (y up, z toward the viewer).
    static Vec3 to_map_frame(const Vec3& n) { return {n.x, -n.y, -n.z}; }

    CameraIntrinsics m_cam;
    Pose m_pose;
    RasterOptions m_options;
    Quaternion m_world_to_camera;
    ModalityStack m_stack;
    std::vector<double> m_zbuffer;
    std::uint8_t m_class = 0;
};

/// Renders the normal, depth and semantic maps of one mesh from one pose.
/// A view with nothing in the frustum is returned with empty_foreground set.
inline ModalityStack render_view(const Mesh& mesh, const Pose& pose, const CameraIntrinsics& cam,
                                 RasterOptions options = {})
{
    Rasterizer r(cam, pose, options);
    r.draw(mesh);
    return std::move(r).finish();
}

struct RenderJob
{
    const Mesh* mesh = nullptr;
    std::vector<Pose> poses;
    CameraIntrinsics camera;
};

/// One stack per (job, pose), ordered job-major then pose order regardless of `workers`.
inline std::vector<ModalityStack> render_dataset(std::span<const RenderJob> jobs, unsigned workers = 1,
                                                 RasterOptions options = {})
{
    if (jobs.empty())
        throw Error("empty", "render_dataset: no meshes");
    std::vector<std::pair<std::size_t, std::size_t>> work;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        if (jobs[j].mesh == nullptr || jobs[j].poses.empty())
            throw Error("empty", "render_dataset: job without mesh or poses");
        for (std::size_t p = 0; p < jobs[j].poses.size(); ++p)
            work.emplace_back(j, p);
    }
    std::vector<ModalityStack> out(work.size());
    parallel_for(work.size(), workers, [&](std::size_t i) {
        const auto [j, p] = work[i];
        out[i] = render_view(*jobs[j].mesh, jobs[j].poses[p], jobs[j].camera, options);
    });
    return out;
}

} // namespace syntheon

#endif // SYNTHEON_RASTER_HPP
