#include "doctest.h"
#include "oracles.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace nvf;

namespace {

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

} // namespace

TEST_CASE("open hand joints are coplanar")
{
    const HandProxySpec spec = HandProxySpec::nominal();
    const Points3 j = spec.local_joints();
    REQUIRE(j.cols() == 21);
    const Vec3 c = j.rowwise().mean();
    const Eigen::Matrix3Xd centred = j.colwise() - c;
    const Eigen::JacobiSVD<Eigen::Matrix3Xd> svd(centred, Eigen::ComputeFullU);
    const Vec3 normal = svd.matrixU().col(2);
    double max_radius = spec.palm_radius;
    for (const auto& chain : spec.bone_radius)
        for (double r : chain)
            max_radius = std::max(max_radius, r);
    CHECK((normal.transpose() * centred).cwiseAbs().maxCoeff() <= max_radius);
}

TEST_CASE("global translation moves joints exactly")
{
    const CameraIntrinsics cam;
    HandProxySpec a = HandProxySpec::nominal();
    HandProxySpec b = a;
    const Vec3 t(12.0, -7.0, 30.0);
    b.translation += t;
    const SceneRecord sa = generate_scene(a, cam, 1), sb = generate_scene(b, cam, 1);
    CHECK(((sb.joints.joints.colwise() - t) - sa.joints.joints).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(sa.hand_scale == sb.hand_scale);
    // the silhouette moves with the projected centroid
    auto mask_centroid = [](const Mask& m) {
        Eigen::Vector2d c = Eigen::Vector2d::Zero();
        double n = 0;
        for (int y = 0; y < m.rows(); ++y)
            for (int x = 0; x < m.cols(); ++x)
                if (m(y, x)) {
                    c += Eigen::Vector2d(x + 0.5, y + 0.5);
                    ++n;
                }
        return Eigen::Vector2d(c / n);
    };
    const PixelUV pa = project(sa.joints.centroid(), cam), pb = project(sb.joints.centroid(), cam);
    const Eigen::Vector2d shift = mask_centroid(sb.mask) - mask_centroid(sa.mask);
    CHECK(std::abs(shift.x() - (pb.u - pa.u)) < 1.5);
    CHECK(std::abs(shift.y() - (pb.v - pa.v)) < 1.5);
}

TEST_CASE("random scenes are watertight with joints inside")
{
    const CameraIntrinsics cam;
    const RandomizationRanges ranges;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const SceneRecord s = generate_scene(random_hand(ranges, cam, seed), cam, seed);
        CHECK(is_edge_manifold_closed(s.mesh));
        const MeshSdf sdf(s.mesh);
        for (int t = 0; t < s.joints.count(); ++t)
            CHECK(sdf.signed_distance(s.joints[t]) < 0.0);
        const double z = s.joints.centroid().z();
        CHECK(z >= ranges.depth_min);
        CHECK(z <= ranges.depth_max);
        CHECK(s.scale >= ranges.scale_min);
        CHECK(s.scale <= ranges.scale_max);
    }
}

TEST_CASE("mask agrees with ray casting")
{
    const CameraIntrinsics cam;
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> px(0, cam.width - 1), py(0, cam.height - 1);
    for (std::uint64_t seed : {3u, 4u}) {
        const SceneRecord s = generate_scene(random_hand(RandomizationRanges{}, cam, seed), cam, seed);
        const MeshSdf sdf(s.mesh);
        int disagree = 0;
        for (int i = 0; i < 1000; ++i) {
            const int x = px(rng), y = py(rng);
            const bool hit = sdf.first_hit(Vec3::Zero(), pixel_ray(cam, x + 0.5, y + 0.5)).has_value();
            if (hit != (s.mask(y, x) != 0))
                ++disagree;
        }
        CHECK(disagree == 0);
    }
}

TEST_CASE("hand scale follows global scale and ignores articulation")
{
    HandProxySpec a = HandProxySpec::nominal();
    a.scale = 0.8;
    HandProxySpec b = a;
    b.scale = 1.25;
    CHECK(b.hand_scale() / a.hand_scale() == doctest::Approx(1.5625).epsilon(1e-15));
    HandProxySpec c = a;
    for (auto& chain : c.flexion)
        chain = {0.7, 0.4, 0.2};
    c.abduction = {0.1, -0.2, 0.0, 0.2, 0.3};
    CHECK(c.hand_scale() == a.hand_scale());
    const CameraIntrinsics cam;
    const SceneRecord sa = generate_scene(a, cam, 1), sc = generate_scene(c, cam, 1);
    CHECK(sa.hand_scale == sc.hand_scale);
    const Points3 lj = a.local_joints();
    CHECK((lj.col(joints::kMiddlePip) - lj.col(joints::kMiddleMcp)).norm() ==
          doctest::Approx(a.bone_length[2][0]));
}

TEST_CASE("datasets are byte reproducible")
{
    const CameraIntrinsics cam;
    const RandomizationRanges ranges;
    const auto root = std::filesystem::temp_directory_path() / "nvf_test_dataset";
    std::filesystem::remove_all(root);
    write_dataset(root / "a", generate_dataset(64, ranges, cam, 42));
    write_dataset(root / "b", generate_dataset(64, ranges, cam, 42, SceneOptions{}, 2));
    int files = 0;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root / "a")) {
        if (!e.is_regular_file())
            continue;
        const auto rel = std::filesystem::relative(e.path(), root / "a");
        CHECK(slurp(e.path()) == slurp(root / "b" / rel));
        ++files;
    }
    CHECK(files >= 64 * 6);
    const auto back = read_dataset(root / "a");
    REQUIRE(back.size() == 64);
    const auto again = generate_dataset(1, ranges, cam, 42);
    CHECK((back[0].joints.joints - again[0].joints.joints).cwiseAbs().maxCoeff() < 1e-9);
    std::filesystem::remove_all(root);
}

TEST_CASE("joints json round trip")
{
    JointSet j;
    j.joints = Points3::Random(3, 21) * 300.0;
    const JointSet back = joints_from_json(joints_to_json(j));
    CHECK(back.joints == j.joints);
    CHECK(back.space == PoseSpace::Camera);
}
