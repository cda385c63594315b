#pragma once

#include "nvf/common.hpp"

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace nvf {

/// Pinhole intrinsics. Pixel (i, j) covers [i, i+1) x [j, j+1); its center is (i+0.5, j+0.5).
struct CameraIntrinsics {
    double fx = 160.0;
    double fy = 160.0;
    double cx = 64.0;
    double cy = 64.0;
    int width = 128;
    int height = 128;

    /// Throws ConfigError when the invariants fx, fy > 0 and 0 <= c < size do not hold.
    void validate() const;
};

struct PixelUV {
    double u = 0.0;
    double v = 0.0;
    bool in_image = false;
};

/// Continuous pinhole projection. Throws DegenerateProjection for z <= 0.
PixelUV project(const Vec3& p, const CameraIntrinsics& cam);

/// True iff z in [z_near, z_far] and the projection lies in [0, width) x [0, height).
bool frustum_contains(const Vec3& p, const CameraIntrinsics& cam, double z_near, double z_far);

/// Unnormalized ray direction (z = 1) through continuous pixel position (u, v).
Vec3 pixel_ray(const CameraIntrinsics& cam, double u, double v);

/// Indexed triangle mesh in millimetres; faces wind counter-clockwise seen from outside.
struct TriMesh {
    Eigen::MatrixX3d vertices;
    Eigen::MatrixX3i faces;

    Eigen::Index vertex_count() const { return vertices.rows(); }
    Eigen::Index face_count() const { return faces.rows(); }
    Vec3 vertex(Eigen::Index i) const { return vertices.row(i).transpose(); }

    bool empty() const { return faces.rows() == 0; }
};

/// Every undirected edge is used by exactly two faces, once in each direction.
bool is_edge_manifold_closed(const TriMesh& mesh);

/// V - E + F over the indexed mesh.
long euler_characteristic(const TriMesh& mesh);

/// Signed volume by the divergence theorem; positive for outward winding.
double enclosed_volume(const TriMesh& mesh);

TriMesh translated(const TriMesh& mesh, const Vec3& t);

struct RayHit {
    double t = 0.0;
    Eigen::Index face = -1;
};

/// Which feature of a triangle the closest point lies on.
enum class TriangleFeature { Face, VertexA, VertexB, VertexC, EdgeAB, EdgeBC, EdgeCA };

struct ClosestPoint {
    Vec3 point;
    double distance = 0.0;
    Eigen::Index face = -1;
    TriangleFeature feature = TriangleFeature::Face;
};

/// Closest point on triangle (a, b, c) to p, with the feature it lies on.
ClosestPoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Signed-distance and ray queries over a closed, consistently wound mesh.
///
/// Construction validates the mesh (IllFormedMesh otherwise), computes face normals and
/// angle-weighted vertex / edge pseudonormals, and builds an AABB hierarchy over the faces.
/// All queries are const and safe to run concurrently.
class MeshSdf {
public:
    explicit MeshSdf(TriMesh mesh);

    const TriMesh& mesh() const { return mesh_; }

    /// Exact unsigned distance with the closest feature.
    ClosestPoint closest(const Vec3& p) const;

    /// Negative inside, positive outside, zero on the surface.
    double signed_distance(const Vec3& p) const;

    /// First intersection along origin + t * dir with t > t_min.
    std::optional<RayHit> first_hit(const Vec3& origin, const Vec3& dir, double t_min = 0.0) const;

    Eigen::AlignedBox3d bounds() const;

private:
    struct Node {
        Eigen::AlignedBox3d box;
        int left = -1;
        int right = -1;
        int first = 0;
        int count = 0;
    };

    int build(int first, int count);
    Vec3 pseudonormal(Eigen::Index face, TriangleFeature feature) const;

    TriMesh mesh_;
    std::vector<Vec3> face_normals_;
    std::vector<Vec3> vertex_normals_;
    std::vector<std::array<Vec3, 3>> edge_normals_; // per face: ab, bc, ca
    std::vector<int> order_;
    std::vector<Eigen::AlignedBox3d> face_boxes_;
    std::vector<Node> nodes_;
};

inline double signed_distance(const Vec3& p, const MeshSdf& sdf) { return sdf.signed_distance(p); }

/// Indices of the K nearest candidates to `center` with distance <= radius,
/// ordered by (distance, index). Ties go to the smaller index.
std::vector<int> knn_ball_select(const Vec3& center, const Points3& candidates, int k, double radius);

/// Same, restricted to candidate columns listed in `subset`; returned values are entries of `subset`.
std::vector<int> knn_ball_select(const Vec3& center, const Points3& candidates,
                                 std::span<const int> subset, int k, double radius);

} // namespace nvf
