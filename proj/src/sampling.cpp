#include "nvf/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace nvf {

void TrainSampleSpec::validate() const
{
    if (n_near_surface <= 0 || n_bounding_sphere <= 0 || n_frustum <= 0 || n_inside <= 0 || n_outside <= 0)
        throw ConfigError("all training sample counts must be positive");
    if (!(surface_noise_sigma >= 0.0))
        throw ConfigError("surface noise sigma must be non-negative");
}

std::pair<Vec3, double> bounding_sphere(const TriMesh& mesh)
{
    const Vec3 center = mesh.vertices.colwise().mean().transpose();
    const double radius = (mesh.vertices.rowwise() - center.transpose()).rowwise().norm().maxCoeff();
    return {center, 1.1 * radius};
}

namespace {

using Rng = std::mt19937_64;

double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

void append_surface(const TriMesh& mesh, int count, double sigma, Rng& rng, std::vector<Vec3>& pool)
{
    std::vector<double> cumulative(static_cast<std::size_t>(mesh.face_count()));
    double total = 0.0;
    for (Eigen::Index f = 0; f < mesh.face_count(); ++f) {
        const Vec3 a = mesh.vertex(mesh.faces(f, 0));
        total += 0.5 * (mesh.vertex(mesh.faces(f, 1)) - a).cross(mesh.vertex(mesh.faces(f, 2)) - a).norm();
        cumulative[static_cast<std::size_t>(f)] = total;
    }
    std::normal_distribution<double> noise(0.0, sigma);
    for (int i = 0; i < count; ++i) {
        const double pick = uniform01(rng) * total;
        const auto f = static_cast<Eigen::Index>(
            std::min<std::ptrdiff_t>(std::lower_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin(),
                                     static_cast<std::ptrdiff_t>(cumulative.size()) - 1));
        double r1 = std::sqrt(uniform01(rng));
        double r2 = uniform01(rng);
        const Vec3 p = (1.0 - r1) * mesh.vertex(mesh.faces(f, 0)) + r1 * (1.0 - r2) * mesh.vertex(mesh.faces(f, 1)) +
                       r1 * r2 * mesh.vertex(mesh.faces(f, 2));
        pool.push_back(p + Vec3(noise(rng), noise(rng), noise(rng)));
    }
}

void append_ball(const Vec3& center, double radius, int count, Rng& rng, std::vector<Vec3>& pool)
{
    for (int i = 0; i < count;) {
        const Vec3 q(2.0 * uniform01(rng) - 1.0, 2.0 * uniform01(rng) - 1.0, 2.0 * uniform01(rng) - 1.0);
        if (q.squaredNorm() > 1.0)
            continue;
        pool.push_back(center + radius * q);
        ++i;
    }
}

void append_volume(const SamplingVolume& volume, int count, Rng& rng, std::vector<Vec3>& pool)
{
    if (volume.mode == SamplingMode::RootCube) {
        const double h = volume.cube.half_extent;
        for (int i = 0; i < count; ++i)
            pool.push_back(volume.cube.center +
                           Vec3((2.0 * uniform01(rng) - 1.0) * h, (2.0 * uniform01(rng) - 1.0) * h,
                                (2.0 * uniform01(rng) - 1.0) * h));
        return;
    }
    // Uniform in volume: depth density grows with z^2.
    const auto& f = volume.frustum;
    const double n3 = f.z_near * f.z_near * f.z_near;
    const double f3 = f.z_far * f.z_far * f.z_far;
    for (int i = 0; i < count; ++i) {
        const double z = std::cbrt(n3 + uniform01(rng) * (f3 - n3));
        const double u = uniform01(rng) * f.cam.width;
        const double v = uniform01(rng) * f.cam.height;
        pool.push_back(z * pixel_ray(f.cam, u, v));
    }
}

} // namespace

TrainingPoints sample_training_points(const MeshSdf& mesh, const SamplingVolume& volume, const TrainSampleSpec& spec)
{
    spec.validate();
    Rng rng(spec.seed);
    const auto [sphere_center, sphere_radius] = bounding_sphere(mesh.mesh());

    std::vector<Vec3> inside_pts, outside_pts;
    std::vector<double> inside_sdf, outside_sdf;
    for (int attempt = 0; attempt <= spec.max_retries; ++attempt) {
        std::vector<Vec3> pool;
        pool.reserve(static_cast<std::size_t>(spec.n_near_surface + spec.n_bounding_sphere + spec.n_frustum));
        append_surface(mesh.mesh(), spec.n_near_surface, spec.surface_noise_sigma, rng, pool);
        append_ball(sphere_center, sphere_radius, spec.n_bounding_sphere, rng, pool);
        append_volume(volume, spec.n_frustum, rng, pool);
        for (const Vec3& p : pool) {
            const double s = mesh.signed_distance(p);
            if (s < 0.0) {
                inside_pts.push_back(p);
                inside_sdf.push_back(s);
            } else {
                outside_pts.push_back(p);
                outside_sdf.push_back(s);
            }
        }
        if (inside_pts.size() >= static_cast<std::size_t>(spec.n_inside) &&
            outside_pts.size() >= static_cast<std::size_t>(spec.n_outside))
            break;
        if (attempt == spec.max_retries)
            throw InsufficientSamples("pool has " + std::to_string(inside_pts.size()) + " interior and " +
                                      std::to_string(outside_pts.size()) + " exterior points");
    }

    TrainingPoints out;
    out.points.resize(3, spec.batch_size());
    out.sdf.resize(spec.batch_size());
    Eigen::Index col = 0;
    auto draw = [&](const std::vector<Vec3>& pts, const std::vector<double>& sdf, int count) {
        // Partial Fisher-Yates: uniform without replacement.
        std::vector<std::size_t> idx(pts.size());
        for (std::size_t i = 0; i < idx.size(); ++i)
            idx[i] = i;
        for (int i = 0; i < count; ++i) {
            const auto j = static_cast<std::size_t>(i) +
                           std::uniform_int_distribution<std::size_t>(0, idx.size() - 1 - static_cast<std::size_t>(i))(rng);
            std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
            out.points.col(col) = pts[idx[static_cast<std::size_t>(i)]];
            out.sdf(col) = sdf[idx[static_cast<std::size_t>(i)]];
            ++col;
        }
    };
    draw(inside_pts, inside_sdf, spec.n_inside);
    draw(outside_pts, outside_sdf, spec.n_outside);
    return out;
}

Points3 sample_inference_grid(const GridSampleSpec& spec)
{
    if (!(spec.step > 0.0))
        throw ConfigError("grid step must be positive");

    Vec3 lo, hi;
    if (spec.mode == SamplingMode::RootCube) {
        if (!(spec.cube.half_extent > 0.0))
            throw EmptyGrid("cube half-extent must be positive");
        lo = spec.cube.center.array() - spec.cube.half_extent;
        hi = spec.cube.center.array() + spec.cube.half_extent;
    } else {
        const auto& f = spec.frustum;
        if (!(f.z_near > 0.0 && f.z_near < f.z_far))
            throw EmptyGrid("frustum depth range is degenerate");
        const Vec3 a = f.z_far * pixel_ray(f.cam, 0.0, 0.0);
        const Vec3 b = f.z_far * pixel_ray(f.cam, f.cam.width, f.cam.height);
        const Vec3 c = f.z_near * pixel_ray(f.cam, 0.0, 0.0);
        const Vec3 d = f.z_near * pixel_ray(f.cam, f.cam.width, f.cam.height);
        lo = a.cwiseMin(b).cwiseMin(c).cwiseMin(d);
        hi = a.cwiseMax(b).cwiseMax(c).cwiseMax(d);
        lo.z() = f.z_near;
        hi.z() = f.z_far;
    }

    Eigen::Array3i dims;
    for (int k = 0; k < 3; ++k)
        dims(k) = static_cast<int>(std::ceil((hi(k) - lo(k)) / spec.step - 1e-9));

    std::vector<Vec3> kept;
    for (int iz = 0; iz < dims(2); ++iz)
        for (int iy = 0; iy < dims(1); ++iy)
            for (int ix = 0; ix < dims(0); ++ix) {
                const Vec3 p = lo + spec.step * Vec3(ix + 0.5, iy + 0.5, iz + 0.5);
                const bool in = spec.mode == SamplingMode::RootCube ? spec.cube.contains(p) : spec.frustum.contains(p);
                if (in)
                    kept.push_back(p);
            }
    if (kept.empty())
        throw EmptyGrid("no voxel center inside the sampling bounds");
    Points3 out(3, static_cast<Eigen::Index>(kept.size()));
    for (std::size_t i = 0; i < kept.size(); ++i)
        out.col(static_cast<Eigen::Index>(i)) = kept[i];
    return out;
}

void write_point_dump(const std::filesystem::path& path, const Points3& points)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open " + path.string());
    const auto count = static_cast<std::uint64_t>(points.cols());
    out.write(reinterpret_cast<const char*>(&count), sizeof count);
    for (Eigen::Index i = 0; i < points.cols(); ++i)
        for (int k = 0; k < 3; ++k) {
            const auto v = static_cast<float>(points(k, i));
            out.write(reinterpret_cast<const char*>(&v), sizeof v);
        }
    if (!out)
        throw IoError("write failed for " + path.string());
}

Points3 read_point_dump(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    std::uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&count), sizeof count);
    Points3 out(3, static_cast<Eigen::Index>(count));
    for (Eigen::Index i = 0; i < out.cols(); ++i)
        for (int k = 0; k < 3; ++k) {
            float v = 0.0f;
            in.read(reinterpret_cast<char*>(&v), sizeof v);
            out(k, i) = v;
        }
    if (!in)
        throw IoError("truncated point dump " + path.string());
    return out;
}

} // namespace nvf
