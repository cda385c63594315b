#pragma once

#include "nvf/image.hpp"
#include "nvf/pose_field.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace nvf {

/// Joint order: 0 wrist; 1-4 thumb (CMC, MCP, IP, tip); 5-8 index, 9-12 middle,
/// 13-16 ring, 17-20 pinky (MCP, PIP, DIP, tip).
namespace joints {
inline constexpr int kWrist = 0;
inline constexpr int kMiddleMcp = 9;
inline constexpr int kMiddlePip = 10;
inline constexpr int kFingerBase[5] = {1, 5, 9, 13, 17};
} // namespace joints

/// Articulated hand proxy built from capsules (sphere-swept segments).
struct HandProxySpec {
    /// Chain base joint (thumb CMC, finger MCP) in the hand frame, mm. The wrist is the origin,
    /// fingers extend along +y and the palm faces -z.
    std::array<Vec3, 5> chain_base;
    std::array<std::array<double, 3>, 5> bone_length; ///< per chain, proximal to distal
    std::array<std::array<double, 3>, 5> bone_radius;
    double palm_radius = 12.0;
    double knuckle_radius = 10.0;

    std::array<std::array<double, 3>, 5> flexion{};  ///< radians, [0, pi/2]
    std::array<double, 5> abduction{};               ///< radians, [-pi/6, pi/6]

    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3(0.0, 0.0, 600.0);
    double scale = 1.0;

    /// Nominal adult proportions with zero articulation.
    static HandProxySpec nominal();

    void validate() const;

    /// Middle-finger proximal bone length x scale.
    double hand_scale() const { return bone_length[2][0] * scale; }

    /// Joints in the hand frame (scale and global pose not applied).
    Points3 local_joints() const;
    /// Joints in the camera frame.
    JointSet camera_joints() const;
};

struct Capsule {
    Vec3 a;
    Vec3 b;
    double radius;

    double signed_distance(const Vec3& p) const;
};

/// Capsules of the posed hand in the camera frame.
std::vector<Capsule> hand_capsules(const HandProxySpec& spec);

struct SceneOptions {
    double mesh_pitch = 2.5;           ///< marching-cubes pitch for the capsule union
    bool occluder = false;             ///< random sphere partly in front of the hand
    Vec3 light_dir = Vec3(-0.4, -0.5, -1.0).normalized(); ///< towards the light
    Eigen::Vector3f albedo = Eigen::Vector3f(0.85f, 0.66f, 0.55f);
    double background_noise = 0.02;
};

struct SceneRecord {
    Image image;
    Mask mask;    ///< visible hand pixels
    TriMesh mesh; ///< watertight union surface
    JointSet joints;
    CameraIntrinsics cam;
    double hand_scale = 0.0;
    double scale = 1.0;
    std::uint64_t seed = 0;
};

/// Forward kinematics, capsule-union meshing, flat-shaded rasterization.
/// Throws InvalidPlacement when the hand is not fully in front of the camera.
SceneRecord generate_scene(const HandProxySpec& spec, const CameraIntrinsics& cam, std::uint64_t seed,
                           const SceneOptions& options = {});

/// Capsule union meshed by marching cubes at `pitch`.
TriMesh mesh_capsule_union(const std::vector<Capsule>& capsules, double pitch);

/// Per-pixel first hit via depth-buffered rasterization of `mesh`.
struct RasterResult {
    Eigen::MatrixXd depth;        ///< height x width, +inf where empty
    Eigen::MatrixXi face;         ///< height x width, -1 where empty
};
RasterResult rasterize(const TriMesh& mesh, const CameraIntrinsics& cam);

struct RandomizationRanges {
    double flexion_max = 1.5707963267948966;
    double abduction_max = 0.5235987755982988;
    double tilt_max = 1.0471975511965976; ///< out-of-plane rotation
    double roll_max = 3.141592653589793;  ///< in-plane rotation
    double depth_min = 400.0;             ///< joint-centroid depth
    double depth_max = 800.0;
    double scale_min = 0.8;
    double scale_max = 1.25;
    double image_margin = 0.3; ///< centroid projects into [margin, 1 - margin] of the image
};

/// Random hand for scene `index` of a dataset seeded with `seed`.
HandProxySpec random_hand(const RandomizationRanges& ranges, const CameraIntrinsics& cam, std::uint64_t seed);

/// Seed of scene `index` in a dataset with base seed `seed`.
std::uint64_t scene_seed(std::uint64_t seed, std::size_t index);

std::vector<SceneRecord> generate_dataset(std::size_t n, const RandomizationRanges& ranges,
                                          const CameraIntrinsics& cam, std::uint64_t seed,
                                          const SceneOptions& options = {}, int threads = 1);

/// Dataset layout: scene_%05d/{image.ppm, mask.pbm, mesh.obj, joints.json, camera.json, meta.json}.
void write_scene(const std::filesystem::path& dir, const SceneRecord& scene);
SceneRecord read_scene(const std::filesystem::path& dir);
void write_dataset(const std::filesystem::path& root, const std::vector<SceneRecord>& scenes);
std::vector<SceneRecord> read_dataset(const std::filesystem::path& root);

/// JointSet JSON: {"unit":"mm","space":"camera"|"root_relative","joints":[[x,y,z],...]}.
std::string joints_to_json(const JointSet& joints, const std::vector<bool>* valid = nullptr);
JointSet joints_from_json(const std::string& text);

std::string camera_to_json(const CameraIntrinsics& cam);
CameraIntrinsics camera_from_json(const std::string& text);

} // namespace nvf
