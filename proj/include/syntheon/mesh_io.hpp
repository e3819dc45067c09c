#ifndef SYNTHEON_MESH_IO_HPP
#define SYNTHEON_MESH_IO_HPP

#include "syntheon/geometry.hpp"

#include <bit>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string_view>

namespace syntheon
{

namespace detail
{

inline std::string lowercase(std::string s)
{
    for (char& c : s)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

/// Appends the fan triangulation of a polygon. Only triangles and quads are accepted.
inline void append_polygon(std::vector<Face>& faces, const std::vector<std::uint32_t>& idx,
                           const std::string& where)
{
    if (idx.size() < 3)
        throw Error("parse", where + ": face with fewer than 3 vertices");
    if (idx.size() > 4)
        throw Error("parse", where + ": polygons with more than 4 vertices are not supported");
    for (std::size_t k = 1; k + 1 < idx.size(); ++k)
        faces.push_back({idx[0], idx[k], idx[k + 1]});
}

inline Mesh finish_mesh(std::vector<Vec3> vertices, std::vector<Face> faces, int class_id, double scale,
                        const std::string& path)
{
    if (vertices.empty() || faces.empty())
        throw Error("empty", path + ": no geometry");
    if (scale != 1.0)
        for (Vec3& v : vertices)
            v = v * scale;
    return Mesh::create(std::move(vertices), std::move(faces), class_id);
}

inline Mesh read_obj(const std::filesystem::path& path, int class_id, double scale)
{
    std::ifstream in(path);
    if (!in)
        throw Error("io", "cannot open " + path.string());
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    std::vector<std::uint32_t> poly;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag) || tag[0] == '#')
            continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        if (tag == "v") {
            Vec3 v;
            if (!(ss >> v.x >> v.y >> v.z))
                throw Error("parse", where + ": malformed vertex");
            vertices.push_back(v);
        } else if (tag == "f") {
            poly.clear();
            std::string tok;
            while (ss >> tok) {
                // v, v/vt, v//vn, v/vt/vn; negative indices are relative to the end.
                long long i = 0;
                const auto slash = tok.find('/');
                const std::string_view head(tok.data(), slash == std::string::npos ? tok.size() : slash);
                const auto res = std::from_chars(head.data(), head.data() + head.size(), i);
                if (res.ec != std::errc{} || i == 0)
                    throw Error("parse", where + ": malformed face index '" + tok + "'");
                const long long resolved = i > 0 ? i - 1 : static_cast<long long>(vertices.size()) + i;
                if (resolved < 0 || resolved >= static_cast<long long>(vertices.size()))
                    throw Error("parse", where + ": face index out of range");
                poly.push_back(static_cast<std::uint32_t>(resolved));
            }
            append_polygon(faces, poly, where);
        }
    }
    return finish_mesh(std::move(vertices), std::move(faces), class_id, scale, path.string());
}

enum class PlyScalar { i8, u8, i16, u16, i32, u32, f32, f64 };

inline PlyScalar ply_scalar(const std::string& name, const std::string& where)
{
    if (name == "char" || name == "int8") return PlyScalar::i8;
    if (name == "uchar" || name == "uint8") return PlyScalar::u8;
    if (name == "short" || name == "int16") return PlyScalar::i16;
    if (name == "ushort" || name == "uint16") return PlyScalar::u16;
    if (name == "int" || name == "int32") return PlyScalar::i32;
    if (name == "uint" || name == "uint32") return PlyScalar::u32;
    if (name == "float" || name == "float32") return PlyScalar::f32;
    if (name == "double" || name == "float64") return PlyScalar::f64;
    throw Error("parse", where + ": unknown PLY scalar type '" + name + "'");
}

inline std::size_t ply_size(PlyScalar t)
{
    switch (t) {
    case PlyScalar::i8:
    case PlyScalar::u8: return 1;
    case PlyScalar::i16:
    case PlyScalar::u16: return 2;
    case PlyScalar::i32:
    case PlyScalar::u32:
    case PlyScalar::f32: return 4;
    case PlyScalar::f64: return 8;
    }
    return 0;
}

struct PlyProperty
{
    std::string name;
    PlyScalar type = PlyScalar::f32;
    bool is_list = false;
    PlyScalar count_type = PlyScalar::u8;
};

struct PlyElement
{
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> properties;
};

/// Pulls scalars out of either the ASCII token stream or the binary payload.
class PlyReader
{
public:
    PlyReader(std::istream& in, int format) : m_in(in), m_format(format) {}

    double read(PlyScalar t)
    {
        if (m_format == 0) {
            double v;
            if (!(m_in >> v))
                throw Error("parse", "PLY: truncated ASCII body");
            return v;
        }
        unsigned char buf[8];
        const std::size_t n = ply_size(t);
        if (!m_in.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(n)))
            throw Error("parse", "PLY: truncated binary body");
        const bool file_little = m_format == 1;
        if (file_little != (std::endian::native == std::endian::little))
            std::reverse(buf, buf + n);
        switch (t) {
        case PlyScalar::i8: return static_cast<double>(static_cast<std::int8_t>(buf[0]));
        case PlyScalar::u8: return static_cast<double>(buf[0]);
        case PlyScalar::i16: return decode<std::int16_t>(buf);
        case PlyScalar::u16: return decode<std::uint16_t>(buf);
        case PlyScalar::i32: return decode<std::int32_t>(buf);
        case PlyScalar::u32: return decode<std::uint32_t>(buf);
        case PlyScalar::f32: return decode<float>(buf);
        case PlyScalar::f64: return decode<double>(buf);
        }
        return 0.0;
    }

private:
    template <class T>
    static double decode(const unsigned char* buf)
    {
        T v;
        std::memcpy(&v, buf, sizeof(T));
        return static_cast<double>(v);
    }

    std::istream& m_in;
    int m_format; // 0 ascii, 1 little endian, 2 big endian
};

inline Mesh read_ply(const std::filesystem::path& path, int class_id, double scale)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("io", "cannot open " + path.string());
    const std::string where = path.string();
    std::string line;
    if (!std::getline(in, line) || line.rfind("ply", 0) != 0)
        throw Error("parse", where + ": missing 'ply' magic");

    int format = -1;
    std::vector<PlyElement> elements;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "format") {
            std::string f;
            ss >> f;
            if (f == "ascii") format = 0;
            else if (f == "binary_little_endian") format = 1;
            else if (f == "binary_big_endian") format = 2;
            else throw Error("parse", where + ": unknown PLY format '" + f + "'");
        } else if (key == "element") {
            PlyElement e;
            ss >> e.name >> e.count;
            elements.push_back(e);
        } else if (key == "property") {
            if (elements.empty())
                throw Error("parse", where + ": property before element");
            PlyProperty p;
            std::string type;
            ss >> type;
            if (type == "list") {
                std::string count_type, item_type;
                ss >> count_type >> item_type >> p.name;
                p.is_list = true;
                p.count_type = ply_scalar(count_type, where);
                p.type = ply_scalar(item_type, where);
            } else {
                p.type = ply_scalar(type, where);
                ss >> p.name;
            }
            elements.back().properties.push_back(p);
        } else if (key == "end_header") {
            break;
        }
    }
    if (format < 0)
        throw Error("parse", where + ": missing format line");

    PlyReader reader(in, format);
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    std::vector<std::uint32_t> poly;
    for (const PlyElement& e : elements) {
        const bool is_vertex = e.name == "vertex";
        const bool is_face = e.name == "face";
        for (std::size_t i = 0; i < e.count; ++i) {
            Vec3 v;
            for (const PlyProperty& p : e.properties) {
                if (p.is_list) {
                    const auto n = static_cast<std::size_t>(reader.read(p.count_type));
                    poly.clear();
                    for (std::size_t k = 0; k < n; ++k) {
                        const double idx = reader.read(p.type);
                        if (idx < 0 || idx >= static_cast<double>(std::numeric_limits<std::uint32_t>::max()))
                            throw Error("parse", where + ": negative face index");
                        poly.push_back(static_cast<std::uint32_t>(idx));
                    }
                    if (is_face && (p.name == "vertex_indices" || p.name == "vertex_index"))
                        append_polygon(faces, poly, where);
                } else {
                    const double value = reader.read(p.type);
                    if (is_vertex) {
                        if (p.name == "x") v.x = value;
                        else if (p.name == "y") v.y = value;
                        else if (p.name == "z") v.z = value;
                    }
                }
            }
            if (is_vertex)
                vertices.push_back(v);
        }
    }
    for (const Face& f : faces)
        for (auto idx : f)
            if (idx >= vertices.size())
                throw Error("parse", where + ": face index out of range");
    return finish_mesh(std::move(vertices), std::move(faces), class_id, scale, where);
}

} // namespace detail

/// Loads an OBJ or PLY triangle mesh. Quads are fan-triangulated; larger polygons are rejected.
/// Coordinates are multiplied by `scale` (files are assumed to be in millimetres).
inline Mesh load_mesh(const std::filesystem::path& path, int class_id, double scale = 1.0)
{
    if (!(scale > 0.0) || !std::isfinite(scale))
        throw Error("range", "load_mesh: scale must be positive");
    const std::string ext = detail::lowercase(path.extension().string());
    if (ext == ".obj")
        return detail::read_obj(path, class_id, scale);
    if (ext == ".ply")
        return detail::read_ply(path, class_id, scale);
    throw Error("io", "unsupported mesh extension '" + ext + "' for " + path.string());
}

/// Debug dump as OBJ, 1-based indices, round-trip precision.
inline void write_obj(const Mesh& mesh, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw Error("io", "cannot write " + path.string());
    char buf[128];
    for (const Vec3& v : mesh.vertices()) {
        std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v.x, v.y, v.z);
        out << buf;
    }
    for (const Face& f : mesh.faces())
        out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
    if (!out)
        throw Error("io", "write failed for " + path.string());
}

} // namespace syntheon

#endif // SYNTHEON_MESH_IO_HPP
