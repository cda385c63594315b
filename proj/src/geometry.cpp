#include "nvf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace nvf {

void CameraIntrinsics::validate() const
{
    if (!(fx > 0.0) || !(fy > 0.0))
        throw ConfigError("focal lengths must be positive");
    if (width <= 0 || height <= 0)
        throw ConfigError("image size must be positive");
    if (cx < 0.0 || cx >= width || cy < 0.0 || cy >= height)
        throw ConfigError("principal point outside the image");
}

PixelUV project(const Vec3& p, const CameraIntrinsics& cam)
{
    if (!(p.z() > 0.0))
        throw DegenerateProjection("point has non-positive depth " + std::to_string(p.z()));
    PixelUV uv;
    uv.u = cam.fx * p.x() / p.z() + cam.cx;
    uv.v = cam.fy * p.y() / p.z() + cam.cy;
    uv.in_image = uv.u >= 0.0 && uv.u < cam.width && uv.v >= 0.0 && uv.v < cam.height;
    return uv;
}

bool frustum_contains(const Vec3& p, const CameraIntrinsics& cam, double z_near, double z_far)
{
    if (p.z() < z_near || p.z() > z_far || !(p.z() > 0.0))
        return false;
    return project(p, cam).in_image;
}

Vec3 pixel_ray(const CameraIntrinsics& cam, double u, double v)
{
    return Vec3((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
}

namespace {

using EdgeKey = std::pair<int, int>;

EdgeKey edge_key(int a, int b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

struct EdgeUse {
    int face;
    int local; // 0: ab, 1: bc, 2: ca
    int from;
};

std::map<EdgeKey, std::vector<EdgeUse>> edge_uses(const TriMesh& mesh)
{
    std::map<EdgeKey, std::vector<EdgeUse>> uses;
    for (Eigen::Index f = 0; f < mesh.face_count(); ++f) {
        for (int k = 0; k < 3; ++k) {
            const int a = mesh.faces(f, k);
            const int b = mesh.faces(f, (k + 1) % 3);
            uses[edge_key(a, b)].push_back({static_cast<int>(f), k, a});
        }
    }
    return uses;
}

bool faces_in_range(const TriMesh& mesh)
{
    return mesh.faces.size() == 0 ||
           (mesh.faces.minCoeff() >= 0 && mesh.faces.maxCoeff() < mesh.vertex_count());
}

} // namespace

bool is_edge_manifold_closed(const TriMesh& mesh)
{
    if (mesh.empty() || !faces_in_range(mesh))
        return false;
    for (const auto& [key, uses] : edge_uses(mesh)) {
        if (uses.size() != 2 || uses[0].from == uses[1].from)
            return false;
    }
    return true;
}

long euler_characteristic(const TriMesh& mesh)
{
    return static_cast<long>(mesh.vertex_count()) - static_cast<long>(edge_uses(mesh).size()) +
           static_cast<long>(mesh.face_count());
}

double enclosed_volume(const TriMesh& mesh)
{
    CompensatedSum<double> vol;
    for (Eigen::Index f = 0; f < mesh.face_count(); ++f) {
        const Vec3 a = mesh.vertex(mesh.faces(f, 0));
        const Vec3 b = mesh.vertex(mesh.faces(f, 1));
        const Vec3 c = mesh.vertex(mesh.faces(f, 2));
        vol.add(a.dot(b.cross(c)) / 6.0);
    }
    return vol.value();
}

TriMesh translated(const TriMesh& mesh, const Vec3& t)
{
    TriMesh out = mesh;
    out.vertices.rowwise() += t.transpose();
    return out;
}

ClosestPoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c)
{
    ClosestPoint out;
    const Vec3 ab = b - a;
    const Vec3 ac = c - a;
    const Vec3 ap = p - a;
    const double d1 = ab.dot(ap);
    const double d2 = ac.dot(ap);
    auto finish = [&](const Vec3& q, TriangleFeature f) {
        out.point = q;
        out.feature = f;
        out.distance = (p - q).norm();
        return out;
    };
    if (d1 <= 0.0 && d2 <= 0.0)
        return finish(a, TriangleFeature::VertexA);

    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp);
    const double d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3)
        return finish(b, TriangleFeature::VertexB);

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return finish(a + v * ab, TriangleFeature::EdgeAB);
    }

    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp);
    const double d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6)
        return finish(c, TriangleFeature::VertexC);

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return finish(a + w * ac, TriangleFeature::EdgeCA);
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return finish(b + w * (c - b), TriangleFeature::EdgeBC);
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom;
    const double w = vc * denom;
    return finish(a + ab * v + ac * w, TriangleFeature::Face);
}

MeshSdf::MeshSdf(TriMesh mesh) : mesh_(std::move(mesh))
{
    if (!faces_in_range(mesh_))
        throw IllFormedMesh("face index out of range");
    if (!is_edge_manifold_closed(mesh_))
        throw IllFormedMesh("mesh is not closed and consistently wound");

    const auto nf = static_cast<std::size_t>(mesh_.face_count());
    const auto nv = static_cast<std::size_t>(mesh_.vertex_count());
    face_normals_.resize(nf);
    vertex_normals_.assign(nv, Vec3::Zero());
    edge_normals_.resize(nf);
    face_boxes_.resize(nf);

    for (std::size_t f = 0; f < nf; ++f) {
        const Eigen::Index fi = static_cast<Eigen::Index>(f);
        const Vec3 v[3] = {mesh_.vertex(mesh_.faces(fi, 0)), mesh_.vertex(mesh_.faces(fi, 1)),
                           mesh_.vertex(mesh_.faces(fi, 2))};
        const Vec3 n = (v[1] - v[0]).cross(v[2] - v[0]);
        const double len = n.norm();
        face_normals_[f] = len > 0.0 ? Vec3(n / len) : Vec3::Zero();
        for (int k = 0; k < 3; ++k) {
            const Vec3 e1 = v[(k + 1) % 3] - v[k];
            const Vec3 e2 = v[(k + 2) % 3] - v[k];
            const double l1 = e1.norm();
            const double l2 = e2.norm();
            if (l1 > 0.0 && l2 > 0.0) {
                const double angle = std::atan2(e1.cross(e2).norm(), e1.dot(e2));
                vertex_normals_[static_cast<std::size_t>(mesh_.faces(fi, k))] += angle * face_normals_[f];
            }
        }
        face_boxes_[f] = Eigen::AlignedBox3d(v[0]);
        face_boxes_[f].extend(v[1]);
        face_boxes_[f].extend(v[2]);
    }
    for (const auto& [key, uses] : edge_uses(mesh_)) {
        const Vec3 n = face_normals_[static_cast<std::size_t>(uses[0].face)] +
                       face_normals_[static_cast<std::size_t>(uses[1].face)];
        for (const auto& u : uses)
            edge_normals_[static_cast<std::size_t>(u.face)][static_cast<std::size_t>(u.local)] = n;
    }

    order_.resize(nf);
    std::iota(order_.begin(), order_.end(), 0);
    nodes_.reserve(2 * nf);
    build(0, static_cast<int>(nf));
}

int MeshSdf::build(int first, int count)
{
    const int index = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    Eigen::AlignedBox3d box;
    Eigen::AlignedBox3d centroids;
    for (int i = first; i < first + count; ++i) {
        const auto& fb = face_boxes_[static_cast<std::size_t>(order_[static_cast<std::size_t>(i)])];
        box.extend(fb);
        centroids.extend(fb.center());
    }
    nodes_[static_cast<std::size_t>(index)].box = box;
    if (count <= 4) {
        nodes_[static_cast<std::size_t>(index)].first = first;
        nodes_[static_cast<std::size_t>(index)].count = count;
        return index;
    }
    Eigen::Index axis = 0;
    centroids.sizes().maxCoeff(&axis);
    const int half = count / 2;
    auto begin = order_.begin() + first;
    std::nth_element(begin, begin + half, begin + count, [&](int a, int b) {
        const double ca = face_boxes_[static_cast<std::size_t>(a)].center()(axis);
        const double cb = face_boxes_[static_cast<std::size_t>(b)].center()(axis);
        return ca < cb || (ca == cb && a < b);
    });
    const int left = build(first, half);
    const int right = build(first + half, count - half);
    nodes_[static_cast<std::size_t>(index)].left = left;
    nodes_[static_cast<std::size_t>(index)].right = right;
    return index;
}

Eigen::AlignedBox3d MeshSdf::bounds() const { return nodes_.front().box; }

ClosestPoint MeshSdf::closest(const Vec3& p) const
{
    ClosestPoint best;
    double best_sq = std::numeric_limits<double>::infinity();
    int stack[128];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const Node& node = nodes_[static_cast<std::size_t>(stack[--top])];
        if (node.box.squaredExteriorDistance(p) >= best_sq)
            continue;
        if (node.left < 0) {
            for (int i = node.first; i < node.first + node.count; ++i) {
                const int f = order_[static_cast<std::size_t>(i)];
                const ClosestPoint c = closest_point_on_triangle(
                    p, mesh_.vertex(mesh_.faces(f, 0)), mesh_.vertex(mesh_.faces(f, 1)),
                    mesh_.vertex(mesh_.faces(f, 2)));
                const double sq = c.distance * c.distance;
                if (sq < best_sq || (sq == best_sq && f < best.face)) {
                    best_sq = sq;
                    best = c;
                    best.face = f;
                }
            }
            continue;
        }
        const Node& l = nodes_[static_cast<std::size_t>(node.left)];
        const Node& r = nodes_[static_cast<std::size_t>(node.right)];
        const double dl = l.box.squaredExteriorDistance(p);
        const double dr = r.box.squaredExteriorDistance(p);
        if (dl <= dr) {
            stack[top++] = node.right;
            stack[top++] = node.left;
        } else {
            stack[top++] = node.left;
            stack[top++] = node.right;
        }
    }
    return best;
}

Vec3 MeshSdf::pseudonormal(Eigen::Index face, TriangleFeature feature) const
{
    const auto f = static_cast<std::size_t>(face);
    switch (feature) {
    case TriangleFeature::Face: return face_normals_[f];
    case TriangleFeature::VertexA: return vertex_normals_[static_cast<std::size_t>(mesh_.faces(face, 0))];
    case TriangleFeature::VertexB: return vertex_normals_[static_cast<std::size_t>(mesh_.faces(face, 1))];
    case TriangleFeature::VertexC: return vertex_normals_[static_cast<std::size_t>(mesh_.faces(face, 2))];
    case TriangleFeature::EdgeAB: return edge_normals_[f][0];
    case TriangleFeature::EdgeBC: return edge_normals_[f][1];
    case TriangleFeature::EdgeCA: return edge_normals_[f][2];
    }
    return face_normals_[f];
}

double MeshSdf::signed_distance(const Vec3& p) const
{
    const ClosestPoint c = closest(p);
    if (c.distance == 0.0)
        return 0.0;
    const double side = (p - c.point).dot(pseudonormal(c.face, c.feature));
    return side < 0.0 ? -c.distance : c.distance;
}

std::optional<RayHit> MeshSdf::first_hit(const Vec3& origin, const Vec3& dir, double t_min) const
{
    const Vec3 inv = dir.cwiseInverse();
    std::optional<RayHit> best;
    double best_t = std::numeric_limits<double>::infinity();

    auto box_hit = [&](const Eigen::AlignedBox3d& b) {
        double t0 = t_min;
        double t1 = best_t;
        for (int k = 0; k < 3; ++k) {
            double ta = (b.min()(k) - origin(k)) * inv(k);
            double tb = (b.max()(k) - origin(k)) * inv(k);
            if (std::isnan(ta) || std::isnan(tb)) {
                // Ray parallel to and on a slab plane.
                if (origin(k) < b.min()(k) || origin(k) > b.max()(k))
                    return false;
                continue;
            }
            if (ta > tb)
                std::swap(ta, tb);
            t0 = std::max(t0, ta);
            t1 = std::min(t1, tb);
            if (t0 > t1)
                return false;
        }
        return true;
    };

    int stack[128];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const Node& node = nodes_[static_cast<std::size_t>(stack[--top])];
        if (!box_hit(node.box))
            continue;
        if (node.left >= 0) {
            stack[top++] = node.left;
            stack[top++] = node.right;
            continue;
        }
        for (int i = node.first; i < node.first + node.count; ++i) {
            const int f = order_[static_cast<std::size_t>(i)];
            const Vec3 a = mesh_.vertex(mesh_.faces(f, 0));
            const Vec3 e1 = mesh_.vertex(mesh_.faces(f, 1)) - a;
            const Vec3 e2 = mesh_.vertex(mesh_.faces(f, 2)) - a;
            const Vec3 pv = dir.cross(e2);
            const double det = e1.dot(pv);
            if (det == 0.0)
                continue;
            const double inv_det = 1.0 / det;
            const Vec3 tv = origin - a;
            const double u = tv.dot(pv) * inv_det;
            if (u < 0.0 || u > 1.0)
                continue;
            const Vec3 qv = tv.cross(e1);
            const double v = dir.dot(qv) * inv_det;
            if (v < 0.0 || u + v > 1.0)
                continue;
            const double t = e2.dot(qv) * inv_det;
            if (t > t_min && t < best_t) {
                best_t = t;
                best = RayHit{t, f};
            }
        }
    }
    return best;
}

std::vector<int> knn_ball_select(const Vec3& center, const Points3& candidates, std::span<const int> subset,
                                 int k, double radius)
{
    std::vector<std::pair<double, int>> inside;
    inside.reserve(subset.size());
    for (int idx : subset) {
        const double d = (candidates.col(idx) - center).norm();
        if (d <= radius)
            inside.emplace_back(d, idx);
    }
    const auto keep = std::min<std::size_t>(inside.size(), static_cast<std::size_t>(std::max(k, 0)));
    std::partial_sort(inside.begin(), inside.begin() + static_cast<std::ptrdiff_t>(keep), inside.end());
    std::vector<int> out(keep);
    for (std::size_t i = 0; i < keep; ++i)
        out[i] = inside[i].second;
    return out;
}

std::vector<int> knn_ball_select(const Vec3& center, const Points3& candidates, int k, double radius)
{
    std::vector<int> all(static_cast<std::size_t>(candidates.cols()));
    std::iota(all.begin(), all.end(), 0);
    return knn_ball_select(center, candidates, all, k, radius);
}

} // namespace nvf
