#include "nvf/marching_cubes.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace nvf {

namespace {

// Edge e joins corner kEdgeCorners[e][0] to kEdgeCorners[e][1] along axis kEdgeAxis[e].
constexpr int kEdgeCorners[12][2] = {{0, 1}, {2, 3}, {4, 5}, {6, 7}, {0, 2}, {1, 3},
                                     {4, 6}, {5, 7}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};
constexpr int kEdgeAxis[12] = {0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2};

Eigen::Vector3i corner_offset(int c) { return {c & 1, (c >> 1) & 1, (c >> 2) & 1}; }

int edge_between(int a, int b)
{
    for (int e = 0; e < 12; ++e)
        if ((kEdgeCorners[e][0] == a && kEdgeCorners[e][1] == b) || (kEdgeCorners[e][0] == b && kEdgeCorners[e][1] == a))
            return e;
    return -1;
}

struct Face {
    std::array<int, 4> corners; // counter-clockwise seen from outside the cube
    std::array<int, 4> edges;   // edges[k] joins corners[k] and corners[k + 1]
};

std::array<Face, 6> cube_faces()
{
    std::array<Face, 6> faces{};
    int idx = 0;
    for (int axis = 0; axis < 3; ++axis) {
        const int b = (axis + 1) % 3;
        const int c = (axis + 2) % 3;
        for (int side = 0; side < 2; ++side) {
            std::array<int, 4> cyc{};
            const int square[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
            for (int k = 0; k < 4; ++k) {
                Eigen::Vector3i o = Eigen::Vector3i::Zero();
                o(axis) = side;
                o(b) = square[k][0];
                o(c) = square[k][1];
                cyc[static_cast<std::size_t>(k)] = o(0) | (o(1) << 1) | (o(2) << 2);
            }
            Eigen::Vector3d normal = Eigen::Vector3d::Zero();
            normal(axis) = side == 0 ? -1.0 : 1.0;
            const Eigen::Vector3d p0 = corner_offset(cyc[0]).cast<double>();
            const Eigen::Vector3d p1 = corner_offset(cyc[1]).cast<double>();
            const Eigen::Vector3d p2 = corner_offset(cyc[2]).cast<double>();
            if ((p1 - p0).cross(p2 - p1).dot(normal) < 0.0)
                std::reverse(cyc.begin(), cyc.end());
            Face f{};
            f.corners = cyc;
            for (int k = 0; k < 4; ++k)
                f.edges[static_cast<std::size_t>(k)] =
                    edge_between(cyc[static_cast<std::size_t>(k)], cyc[static_cast<std::size_t>((k + 1) % 4)]);
            faces[static_cast<std::size_t>(idx++)] = f;
        }
    }
    return faces;
}

bool share_face(int e1, int e2, const std::array<Face, 6>& faces)
{
    for (const auto& f : faces) {
        const bool a = std::find(f.edges.begin(), f.edges.end(), e1) != f.edges.end();
        const bool b = std::find(f.edges.begin(), f.edges.end(), e2) != f.edges.end();
        if (a && b)
            return true;
    }
    return false;
}

std::vector<std::array<int, 3>> triangulate_case(int config, const std::array<Face, 6>& faces)
{
    auto inside = [config](int corner) { return ((config >> corner) & 1) != 0; };
    std::array<int, 12> next;
    next.fill(-1);
    for (const auto& f : faces) {
        std::vector<int> crossings;
        for (int k = 0; k < 4; ++k) {
            const int a = f.corners[static_cast<std::size_t>(k)];
            const int b = f.corners[static_cast<std::size_t>((k + 1) % 4)];
            if (inside(a) != inside(b))
                crossings.push_back(k);
        }
        for (std::size_t i = 0; i < crossings.size(); ++i) {
            const int k = crossings[i];
            const bool entering = !inside(f.corners[static_cast<std::size_t>(k)]);
            if (!entering)
                continue;
            // Pair with the following crossing; on ambiguous faces this isolates each inside corner.
            const int k_next = crossings[(i + 1) % crossings.size()];
            next[static_cast<std::size_t>(f.edges[static_cast<std::size_t>(k)])] =
                f.edges[static_cast<std::size_t>(k_next)];
        }
    }

    std::vector<std::array<int, 3>> tris;
    std::array<bool, 12> seen{};
    for (int start = 0; start < 12; ++start) {
        if (next[static_cast<std::size_t>(start)] < 0 || seen[static_cast<std::size_t>(start)])
            continue;
        std::vector<int> poly;
        for (int e = start; !seen[static_cast<std::size_t>(e)]; e = next[static_cast<std::size_t>(e)]) {
            seen[static_cast<std::size_t>(e)] = true;
            poly.push_back(e);
        }
        // Fan from the vertex whose diagonals avoid pairs that share a cube face.
        const auto n = poly.size();
        std::size_t best = 0;
        int best_bad = 1 << 20;
        for (std::size_t s = 0; s < n; ++s) {
            int bad = 0;
            for (std::size_t k = 2; k + 1 < n; ++k)
                bad += share_face(poly[s], poly[(s + k) % n], faces) ? 1 : 0;
            if (bad < best_bad) {
                best_bad = bad;
                best = s;
            }
        }
        for (std::size_t k = 1; k + 1 < n; ++k)
            tris.push_back({poly[best], poly[(best + k) % n], poly[(best + k + 1) % n]});
    }
    return tris;
}

} // namespace

const std::array<std::vector<std::array<int, 3>>, 256>& marching_cubes_table()
{
    static const auto table = [] {
        std::array<std::vector<std::array<int, 3>>, 256> t;
        const auto faces = cube_faces();
        for (int c = 0; c < 256; ++c)
            t[static_cast<std::size_t>(c)] = triangulate_case(c, faces);
        return t;
    }();
    return table;
}

void ScalarGrid::validate() const
{
    if ((dims < 2).any())
        throw ShapeError("grid needs at least 2 samples per axis");
    if (!(pitch > 0.0))
        throw ShapeError("grid pitch must be positive");
    if (values.size() != static_cast<std::size_t>(dims.prod()))
        throw ShapeError("grid value count does not match dims");
}

ScalarGrid ScalarGrid::sample(const Vec3& origin, double pitch, const Eigen::Array3i& dims,
                              const std::function<double(const Vec3&)>& field)
{
    ScalarGrid g;
    g.origin = origin;
    g.pitch = pitch;
    g.dims = dims;
    g.values.resize(static_cast<std::size_t>(dims.prod()));
    for (int k = 0; k < dims(2); ++k)
        for (int j = 0; j < dims(1); ++j)
            for (int i = 0; i < dims(0); ++i)
                g.values[g.index(i, j, k)] = field(g.position(i, j, k));
    return g;
}

TriMesh marching_cubes(const ScalarGrid& grid, double iso)
{
    grid.validate();
    const auto& table = marching_cubes_table();
    auto value = [&](int i, int j, int k) {
        const double v = grid.at(i, j, k);
        if (!std::isfinite(v))
            throw ShapeError("grid contains non-finite values");
        return v == iso ? iso + 1e-9 : v;
    };

    std::unordered_map<std::int64_t, int> vertex_of_edge;
    std::vector<Vec3> verts;
    std::vector<Eigen::Vector3i> faces;

    auto edge_vertex = [&](int i, int j, int k, int edge) {
        const Eigen::Vector3i a = Eigen::Vector3i(i, j, k) + corner_offset(kEdgeCorners[edge][0]);
        const std::int64_t key =
            (static_cast<std::int64_t>(grid.index(a(0), a(1), a(2))) << 2) | kEdgeAxis[edge];
        auto it = vertex_of_edge.find(key);
        if (it != vertex_of_edge.end())
            return it->second;
        const Eigen::Vector3i b = Eigen::Vector3i(i, j, k) + corner_offset(kEdgeCorners[edge][1]);
        const double va = value(a(0), a(1), a(2));
        const double vb = value(b(0), b(1), b(2));
        const double t = (iso - va) / (vb - va);
        const Vec3 pa = grid.position(a(0), a(1), a(2));
        const Vec3 pb = grid.position(b(0), b(1), b(2));
        const int id = static_cast<int>(verts.size());
        verts.push_back(pa + t * (pb - pa));
        vertex_of_edge.emplace(key, id);
        return id;
    };

    for (int k = 0; k + 1 < grid.dims(2); ++k)
        for (int j = 0; j + 1 < grid.dims(1); ++j)
            for (int i = 0; i + 1 < grid.dims(0); ++i) {
                int config = 0;
                for (int c = 0; c < 8; ++c) {
                    const Eigen::Vector3i o = corner_offset(c);
                    if (value(i + o(0), j + o(1), k + o(2)) < iso)
                        config |= 1 << c;
                }
                for (const auto& tri : table[static_cast<std::size_t>(config)])
                    faces.emplace_back(edge_vertex(i, j, k, tri[0]), edge_vertex(i, j, k, tri[1]),
                                       edge_vertex(i, j, k, tri[2]));
            }

    TriMesh mesh;
    mesh.vertices.resize(static_cast<Eigen::Index>(verts.size()), 3);
    for (std::size_t v = 0; v < verts.size(); ++v)
        mesh.vertices.row(static_cast<Eigen::Index>(v)) = verts[v].transpose();
    mesh.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
    for (std::size_t f = 0; f < faces.size(); ++f)
        mesh.faces.row(static_cast<Eigen::Index>(f)) = faces[f].transpose();
    return mesh;
}

} // namespace nvf
