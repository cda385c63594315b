#include "nvf/mesh_io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace nvf {

namespace {

static_assert(std::endian::native == std::endian::little, "binary writers assume a little-endian host");

template <typename T>
void put(std::ostream& out, T value)
{
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in)
{
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in)
        throw IoError("truncated binary payload");
    return value;
}

std::ofstream open_out(const std::filesystem::path& path, bool binary)
{
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

std::ifstream open_in(const std::filesystem::path& path, bool binary)
{
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in)
        throw IoError("cannot open " + path.string());
    return in;
}

TriMesh from_lists(const std::vector<Vec3>& verts, const std::vector<Eigen::Vector3i>& faces)
{
    TriMesh mesh;
    mesh.vertices.resize(static_cast<Eigen::Index>(verts.size()), 3);
    for (std::size_t i = 0; i < verts.size(); ++i)
        mesh.vertices.row(static_cast<Eigen::Index>(i)) = verts[i].transpose();
    mesh.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
    for (std::size_t i = 0; i < faces.size(); ++i)
        mesh.faces.row(static_cast<Eigen::Index>(i)) = faces[i].transpose();
    return mesh;
}

struct PlyProperty {
    std::string type;
    std::string name;
    bool list = false;
    std::string count_type;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> props;
};

double read_scalar(std::istream& in, const std::string& type)
{
    if (type == "float" || type == "float32")
        return get<float>(in);
    if (type == "double" || type == "float64")
        return get<double>(in);
    if (type == "uchar" || type == "uint8")
        return get<std::uint8_t>(in);
    if (type == "char" || type == "int8")
        return get<std::int8_t>(in);
    if (type == "short" || type == "int16")
        return get<std::int16_t>(in);
    if (type == "ushort" || type == "uint16")
        return get<std::uint16_t>(in);
    if (type == "int" || type == "int32")
        return get<std::int32_t>(in);
    if (type == "uint" || type == "uint32")
        return get<std::uint32_t>(in);
    throw IoError("unsupported PLY property type " + type);
}

std::string extension(const std::filesystem::path& path)
{
    std::string ext = path.extension().string();
    for (auto& c : ext)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext;
}

} // namespace

void write_obj(const std::filesystem::path& path, const TriMesh& mesh)
{
    auto out = open_out(path, false);
    char line[128];
    for (Eigen::Index i = 0; i < mesh.vertex_count(); ++i) {
        std::snprintf(line, sizeof line, "v %.17g %.17g %.17g\n", mesh.vertices(i, 0), mesh.vertices(i, 1),
                      mesh.vertices(i, 2));
        out << line;
    }
    for (Eigen::Index i = 0; i < mesh.face_count(); ++i)
        out << "f " << mesh.faces(i, 0) + 1 << ' ' << mesh.faces(i, 1) + 1 << ' ' << mesh.faces(i, 2) + 1 << '\n';
    if (!out)
        throw IoError("write failed for " + path.string());
}

TriMesh read_obj(const std::filesystem::path& path)
{
    auto in = open_in(path, false);
    std::vector<Vec3> verts;
    std::vector<Eigen::Vector3i> faces;
    std::string line;
    while (std::getline(in, line)) {
        if (line.size() < 2)
            continue;
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "v") {
            Vec3 v;
            ss >> v.x() >> v.y() >> v.z();
            if (!ss)
                throw IoError("malformed vertex line in " + path.string());
            verts.push_back(v);
        } else if (tag == "f") {
            std::vector<int> idx;
            std::string tok;
            while (ss >> tok) {
                // Accept `i`, `i/t`, `i/t/n`.
                const int i = std::stoi(tok.substr(0, tok.find('/')));
                idx.push_back(i < 0 ? static_cast<int>(verts.size()) + i : i - 1);
            }
            if (idx.size() < 3)
                throw IoError("face with fewer than 3 vertices in " + path.string());
            for (std::size_t k = 1; k + 1 < idx.size(); ++k)
                faces.emplace_back(idx[0], idx[k], idx[k + 1]);
        }
    }
    return from_lists(verts, faces);
}

void write_ply(const std::filesystem::path& path, const TriMesh& mesh)
{
    auto out = open_out(path, true);
    out << "ply\nformat binary_little_endian 1.0\n"
        << "element vertex " << mesh.vertex_count() << "\n"
        << "property float x\nproperty float y\nproperty float z\n"
        << "element face " << mesh.face_count() << "\n"
        << "property list uchar int vertex_indices\nend_header\n";
    for (Eigen::Index i = 0; i < mesh.vertex_count(); ++i)
        for (int k = 0; k < 3; ++k)
            put(out, static_cast<float>(mesh.vertices(i, k)));
    for (Eigen::Index i = 0; i < mesh.face_count(); ++i) {
        put<std::uint8_t>(out, 3);
        for (int k = 0; k < 3; ++k)
            put<std::int32_t>(out, mesh.faces(i, k));
    }
    if (!out)
        throw IoError("write failed for " + path.string());
}

TriMesh read_ply(const std::filesystem::path& path)
{
    auto in = open_in(path, true);
    std::string line;
    std::getline(in, line);
    if (line != "ply")
        throw IoError(path.string() + " is not a PLY file");
    std::vector<PlyElement> elements;
    bool binary_le = false;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "format") {
            std::string fmt;
            ss >> fmt;
            binary_le = fmt == "binary_little_endian";
        } else if (tag == "element") {
            PlyElement e;
            ss >> e.name >> e.count;
            elements.push_back(e);
        } else if (tag == "property") {
            if (elements.empty())
                throw IoError("PLY property before element");
            PlyProperty p;
            ss >> p.type;
            if (p.type == "list") {
                p.list = true;
                ss >> p.count_type >> p.type;
            }
            ss >> p.name;
            elements.back().props.push_back(p);
        } else if (tag == "end_header") {
            break;
        }
    }
    if (!binary_le)
        throw IoError("only binary_little_endian PLY is supported");

    std::vector<Vec3> verts;
    std::vector<Eigen::Vector3i> faces;
    for (const auto& e : elements) {
        for (std::size_t i = 0; i < e.count; ++i) {
            Vec3 v = Vec3::Zero();
            for (const auto& p : e.props) {
                if (p.list) {
                    const auto n = static_cast<std::size_t>(read_scalar(in, p.count_type));
                    std::vector<int> idx(n);
                    for (auto& x : idx)
                        x = static_cast<int>(read_scalar(in, p.type));
                    if (e.name == "face")
                        for (std::size_t k = 1; k + 1 < n; ++k)
                            faces.emplace_back(idx[0], idx[k], idx[k + 1]);
                } else {
                    const double x = read_scalar(in, p.type);
                    if (p.name == "x")
                        v.x() = x;
                    else if (p.name == "y")
                        v.y() = x;
                    else if (p.name == "z")
                        v.z() = x;
                }
            }
            if (e.name == "vertex")
                verts.push_back(v);
        }
    }
    return from_lists(verts, faces);
}

void write_point_cloud_ply(const std::filesystem::path& path, const Points3& points,
                           const std::vector<std::array<std::uint8_t, 3>>& colors)
{
    if (static_cast<Eigen::Index>(colors.size()) != points.cols())
        throw ShapeError("point/color count mismatch");
    auto out = open_out(path, true);
    out << "ply\nformat binary_little_endian 1.0\n"
        << "element vertex " << points.cols() << "\n"
        << "property float x\nproperty float y\nproperty float z\n"
        << "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
    for (Eigen::Index i = 0; i < points.cols(); ++i) {
        for (int k = 0; k < 3; ++k)
            put(out, static_cast<float>(points(k, i)));
        for (int k = 0; k < 3; ++k)
            put(out, colors[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)]);
    }
    if (!out)
        throw IoError("write failed for " + path.string());
}

TriMesh read_mesh(const std::filesystem::path& path)
{
    const auto ext = extension(path);
    if (ext == ".obj")
        return read_obj(path);
    if (ext == ".ply")
        return read_ply(path);
    throw IoError("unknown mesh extension " + ext);
}

void write_mesh(const std::filesystem::path& path, const TriMesh& mesh)
{
    const auto ext = extension(path);
    if (ext == ".obj")
        return write_obj(path, mesh);
    if (ext == ".ply")
        return write_ply(path, mesh);
    throw IoError("unknown mesh extension " + ext);
}

} // namespace nvf
