#pragma once

#include "nvf/geometry.hpp"

#include <cstdint>
#include <filesystem>

namespace nvf {

/// Camera frustum between two depth planes.
struct Frustum {
    CameraIntrinsics cam;
    double z_near = 300.0;
    double z_far = 1000.0;

    bool contains(const Vec3& p) const { return frustum_contains(p, cam, z_near, z_far); }
};

/// Axis-aligned cube, closed lower bound and open upper bound.
struct Cube {
    Vec3 center = Vec3::Zero();
    double half_extent = 160.0;

    bool contains(const Vec3& p) const
    {
        return ((p - center).array() >= -half_extent).all() && ((p - center).array() < half_extent).all();
    }
};

enum class SamplingMode { CameraFrustum, RootCube };

struct TrainSampleSpec {
    int n_near_surface = 12500;
    double surface_noise_sigma = 10.0; ///< mm, 2 * delta
    int n_bounding_sphere = 1000;
    int n_frustum = 1000; ///< uniform in the frustum (or in the root cube)
    int n_inside = 2500;
    int n_outside = 2500;
    int max_retries = 8;
    std::uint64_t seed = 0;

    int batch_size() const { return n_inside + n_outside; }
    void validate() const;
};

/// Where the uniform "scene" points are drawn from.
struct SamplingVolume {
    SamplingMode mode = SamplingMode::CameraFrustum;
    Frustum frustum;
    Cube cube;
};

struct TrainingPoints {
    Points3 points;
    Eigen::VectorXd sdf;
};

/// Stratified training sampler: jittered surface points, bounding-sphere and volume points form
/// a pool, from which exactly n_inside interior and n_outside exterior points are drawn.
TrainingPoints sample_training_points(const MeshSdf& mesh, const SamplingVolume& volume,
                                      const TrainSampleSpec& spec);

/// Bounding sphere used by the sampler: vertex centroid, 1.1 x max vertex distance.
std::pair<Vec3, double> bounding_sphere(const TriMesh& mesh);

struct GridSampleSpec {
    double step = 16.0;
    SamplingMode mode = SamplingMode::CameraFrustum;
    Frustum frustum;
    Cube cube;
};

/// Voxel centers of pitch `step`, grid anchored at the bounds minimum.
/// Throws EmptyGrid when nothing survives the containment test.
Points3 sample_inference_grid(const GridSampleSpec& spec);

/// Point dump: u64 little-endian count followed by float32 xyz triples.
void write_point_dump(const std::filesystem::path& path, const Points3& points);
Points3 read_point_dump(const std::filesystem::path& path);

} // namespace nvf
