#include "doctest.h"
#include "oracles.hpp"

#include "nvf/sampling.hpp"

#include <filesystem>

using namespace nvf;

namespace {

const SceneRecord& scene()
{
    static const SceneRecord s = [] {
        const CameraIntrinsics cam;
        HandProxySpec hand = HandProxySpec::nominal();
        hand.scale = 0.8;
        return generate_scene(hand, cam, 17);
    }();
    return s;
}

SamplingVolume frustum_volume()
{
    SamplingVolume v;
    v.frustum.cam = scene().cam;
    return v;
}

} // namespace

TEST_CASE("training batch is split exactly inside and outside")
{
    const MeshSdf sdf(scene().mesh);
    TrainSampleSpec spec;
    spec.seed = 3;
    const TrainingPoints tp = sample_training_points(sdf, frustum_volume(), spec);
    REQUIRE(tp.points.cols() == 5000);
    int inside = 0;
    for (Eigen::Index i = 0; i < tp.points.cols(); ++i) {
        const double s = sdf.signed_distance(tp.points.col(i));
        CHECK(s == doctest::Approx(tp.sdf(i)).epsilon(1e-12));
        if (s < 0.0)
            ++inside;
    }
    CHECK(inside == 2500);
}

TEST_CASE("training batches are seed reproducible")
{
    const MeshSdf sdf(scene().mesh);
    TrainSampleSpec spec;
    spec.seed = 99;
    const TrainingPoints a = sample_training_points(sdf, frustum_volume(), spec);
    const TrainingPoints b = sample_training_points(sdf, frustum_volume(), spec);
    CHECK(a.points == b.points);
    spec.seed = 100;
    CHECK_FALSE(sample_training_points(sdf, frustum_volume(), spec).points == a.points);
}

TEST_CASE("training samples concentrate near a small mesh")
{
    const MeshSdf sdf(scene().mesh);
    const TrainSampleSpec spec;
    const double radius = bounding_sphere(scene().mesh).second;
    // mesh volume against frustum volume
    const Frustum& fr = frustum_volume().frustum;
    const double frustum_volume_mm3 = (fr.z_far * fr.z_far * fr.z_far - fr.z_near * fr.z_near * fr.z_near) / 3.0 *
                                      (fr.cam.width / fr.cam.fx) * (fr.cam.height / fr.cam.fy);
    REQUIRE(enclosed_volume(scene().mesh) < 1e-3 * frustum_volume_mm3);
    const TrainingPoints tp = sample_training_points(sdf, frustum_volume(), spec);
    int close = 0;
    for (Eigen::Index i = 0; i < tp.points.cols(); ++i)
        if (std::abs(tp.sdf(i)) <= 3.0 * spec.surface_noise_sigma + radius)
            ++close;
    CHECK(close >= 3500);
}

TEST_CASE("impossible inside quota throws InsufficientSamples")
{
    const MeshSdf sdf(translated(oracle::icosphere(20.0, 1), Vec3(0, 0, 600)));
    TrainSampleSpec spec;
    spec.n_near_surface = 10;
    spec.n_bounding_sphere = 10;
    spec.n_frustum = 10;
    spec.max_retries = 2;
    CHECK_THROWS_AS(sample_training_points(sdf, frustum_volume(), spec), InsufficientSamples);
}

TEST_CASE("bounding sphere construction")
{
    const TriMesh m = oracle::icosphere(10.0, 1);
    const auto [c, r] = bounding_sphere(translated(m, Vec3(1, 2, 3)));
    CHECK((c - Vec3(1, 2, 3)).norm() < 1e-9);
    CHECK(r == doctest::Approx(11.0));
}

TEST_CASE("root cube grid count")
{
    GridSampleSpec g;
    g.mode = SamplingMode::RootCube;
    g.cube.center = Vec3(10, -20, 600);
    g.cube.half_extent = 160.0;
    const Points3 p = sample_inference_grid(g);
    CHECK(p.cols() == 8000);
    for (Eigen::Index i = 0; i < p.cols(); ++i)
        CHECK(g.cube.contains(p.col(i)));
}

TEST_CASE("camera grid is inside the frustum and near the published size")
{
    GridSampleSpec g;
    g.frustum.cam = CameraIntrinsics{};
    g.frustum.z_near = 350.0;
    g.frustum.z_far = 850.0;
    const Points3 p = sample_inference_grid(g);
    for (Eigen::Index i = 0; i < p.cols(); ++i)
        REQUIRE(g.frustum.contains(p.col(i)));
    CHECK(std::abs(p.cols() - 28000.0) <= 0.15 * 28000.0);
}

TEST_CASE("halving the step multiplies the grid by about eight")
{
    GridSampleSpec g;
    g.frustum.cam = CameraIntrinsics{};
    const double n16 = static_cast<double>(sample_inference_grid(g).cols());
    g.step = 8.0;
    const double n8 = static_cast<double>(sample_inference_grid(g).cols());
    g.step = 32.0;
    const double n32 = static_cast<double>(sample_inference_grid(g).cols());
    CHECK(n8 / n16 == doctest::Approx(8.0).epsilon(0.2));
    CHECK(n16 / n32 == doctest::Approx(8.0).epsilon(0.2));
}

TEST_CASE("degenerate bounds give EmptyGrid")
{
    GridSampleSpec g;
    g.frustum.z_near = 500.0;
    g.frustum.z_far = 500.0 + 1e-6;
    g.step = 16.0;
    g.frustum.cam = CameraIntrinsics{};
    CHECK_THROWS_AS(sample_inference_grid(g), EmptyGrid);
}

TEST_CASE("point dump round trip")
{
    Points3 p(3, 3);
    p << 1, 2, 3, 4.5, 5.5, 6.5, -7, 8, 9.25;
    const auto path = std::filesystem::temp_directory_path() / "nvf_points.bin";
    write_point_dump(path, p);
    CHECK(read_point_dump(path) == p);
    CHECK(std::filesystem::file_size(path) == 8 + 3 * 3 * 4);
    std::filesystem::remove(path);
}
