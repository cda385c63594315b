#include "nvf/synthetic.hpp"

#include "nvf/marching_cubes.hpp"
#include "nvf/mesh_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

namespace nvf {

namespace {

const Vec3 kPalmNormal(0.0, 0.0, -1.0);

std::string slurp(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot open " + path.string());
    out << text;
    if (!out)
        throw IoError("write failed for " + path.string());
}

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

HandProxySpec HandProxySpec::nominal()
{
    HandProxySpec s;
    s.chain_base = {Vec3(24.0, 24.0, 0.0), Vec3(30.0, 86.0, 0.0), Vec3(9.0, 90.0, 0.0), Vec3(-11.0, 85.0, 0.0),
                    Vec3(-29.0, 76.0, 0.0)};
    s.bone_length = {{{40.0, 32.0, 27.0}, {40.0, 24.0, 20.0}, {45.0, 28.0, 22.0}, {42.0, 27.0, 21.0}, {33.0, 20.0, 18.0}}};
    s.bone_radius = {{{11.0, 10.0, 9.0}, {9.0, 8.5, 7.5}, {9.5, 8.5, 7.5}, {9.0, 8.0, 7.0}, {8.0, 7.0, 6.5}}};
    return s;
}

void HandProxySpec::validate() const
{
    constexpr double kTol = 1e-12;
    for (int c = 0; c < 5; ++c) {
        for (int k = 0; k < 3; ++k) {
            const auto ci = static_cast<std::size_t>(c);
            const auto ki = static_cast<std::size_t>(k);
            if (flexion[ci][ki] < -kTol || flexion[ci][ki] > std::numbers::pi / 2 + kTol)
                throw ConfigError("flexion outside [0, pi/2]");
            if (!(bone_radius[ci][ki] > 0.0) || !(bone_length[ci][ki] > 0.0))
                throw ConfigError("bone lengths and radii must be positive");
        }
        if (std::abs(abduction[static_cast<std::size_t>(c)]) > std::numbers::pi / 6 + kTol)
            throw ConfigError("abduction outside [-pi/6, pi/6]");
    }
    if (!(scale > 0.0) || !(palm_radius > 0.0) || !(knuckle_radius > 0.0))
        throw ConfigError("scale and palm radii must be positive");
}

Points3 HandProxySpec::local_joints() const
{
    Points3 j(3, kJointCount);
    j.col(joints::kWrist) = Vec3::Zero();
    for (int c = 0; c < 5; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        const Vec3 base = chain_base[ci];
        Vec3 dir = Vec3(base.x(), base.y(), 0.0).normalized();
        dir = Eigen::AngleAxisd(abduction[ci], Vec3::UnitZ()) * dir;
        int col = joints::kFingerBase[c];
        j.col(col) = base;
        Vec3 p = base;
        double bend = 0.0;
        for (int k = 0; k < 3; ++k) {
            bend += flexion[ci][static_cast<std::size_t>(k)];
            const Vec3 d = std::cos(bend) * dir + std::sin(bend) * kPalmNormal;
            p += bone_length[ci][static_cast<std::size_t>(k)] * d;
            j.col(++col) = p;
        }
    }
    return j;
}

JointSet HandProxySpec::camera_joints() const
{
    JointSet out;
    out.joints = (rotation * (scale * local_joints())).colwise() + translation;
    out.space = PoseSpace::Camera;
    return out;
}

double Capsule::signed_distance(const Vec3& p) const
{
    const Vec3 pa = p - a;
    const Vec3 ba = b - a;
    const double len2 = ba.squaredNorm();
    const double h = len2 > 0.0 ? std::clamp(pa.dot(ba) / len2, 0.0, 1.0) : 0.0;
    return (pa - h * ba).norm() - radius;
}

std::vector<Capsule> hand_capsules(const HandProxySpec& spec)
{
    spec.validate();
    const Points3 local = spec.local_joints();
    auto cam = [&](const Vec3& p) -> Vec3 { return spec.rotation * (spec.scale * p) + spec.translation; };
    std::vector<Capsule> caps;
    for (int c = 0; c < 5; ++c) {
        const int base = joints::kFingerBase[c];
        caps.push_back({cam(local.col(joints::kWrist)), cam(local.col(base)), spec.palm_radius * spec.scale});
        for (int k = 0; k < 3; ++k)
            caps.push_back({cam(local.col(base + k)), cam(local.col(base + k + 1)),
                            spec.bone_radius[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)] * spec.scale});
    }
    for (int c = 1; c < 4; ++c)
        caps.push_back({cam(local.col(joints::kFingerBase[c])), cam(local.col(joints::kFingerBase[c + 1])),
                        spec.knuckle_radius * spec.scale});
    const Vec3 mid_a = 0.5 * local.col(joints::kFingerBase[1]);
    const Vec3 mid_b = 0.5 * local.col(joints::kFingerBase[4]);
    caps.push_back({cam(mid_a), cam(mid_b), spec.palm_radius * spec.scale});
    return caps;
}

TriMesh mesh_capsule_union(const std::vector<Capsule>& capsules, double pitch)
{
    Eigen::AlignedBox3d box;
    double rmax = 0.0;
    for (const auto& c : capsules) {
        box.extend(c.a);
        box.extend(c.b);
        rmax = std::max(rmax, c.radius);
    }
    const Vec3 origin = box.min().array() - (rmax + 2.0 * pitch);
    const Vec3 extent = box.sizes().array() + 2.0 * (rmax + 2.0 * pitch);
    Eigen::Array3i dims;
    for (int k = 0; k < 3; ++k)
        dims(k) = static_cast<int>(std::ceil(extent(k) / pitch)) + 1;
    const double floor_mag = 1e-3 * pitch;
    const ScalarGrid grid = ScalarGrid::sample(origin, pitch, dims, [&](const Vec3& p) {
        double d = std::numeric_limits<double>::infinity();
        for (const auto& c : capsules)
            d = std::min(d, c.signed_distance(p));
        // Keep vertices away from grid nodes so no triangle collapses.
        if (std::abs(d) < floor_mag)
            d = d < 0.0 ? -floor_mag : floor_mag;
        return d;
    });
    return marching_cubes(grid);
}

RasterResult rasterize(const TriMesh& mesh, const CameraIntrinsics& cam)
{
    RasterResult out;
    out.depth = Eigen::MatrixXd::Constant(cam.height, cam.width, std::numeric_limits<double>::infinity());
    out.face = Eigen::MatrixXi::Constant(cam.height, cam.width, -1);

    const auto nv = mesh.vertex_count();
    Eigen::Matrix2Xd screen(2, nv);
    Eigen::VectorXd inv_z(nv);
    for (Eigen::Index i = 0; i < nv; ++i) {
        const PixelUV uv = project(mesh.vertex(i), cam);
        screen.col(i) << uv.u, uv.v;
        inv_z(i) = 1.0 / mesh.vertices(i, 2);
    }
    auto edge = [](const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& p) {
        return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
    };
    for (Eigen::Index f = 0; f < mesh.face_count(); ++f) {
        const int i0 = mesh.faces(f, 0), i1 = mesh.faces(f, 1), i2 = mesh.faces(f, 2);
        const Eigen::Vector2d a = screen.col(i0), b = screen.col(i1), c = screen.col(i2);
        const double area = edge(a, b, c);
        if (area == 0.0)
            continue;
        const int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.x(), b.x(), c.x()}) - 0.5)));
        const int x1 = std::min(cam.width - 1, static_cast<int>(std::ceil(std::max({a.x(), b.x(), c.x()}) - 0.5)));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.y(), b.y(), c.y()}) - 0.5)));
        const int y1 = std::min(cam.height - 1, static_cast<int>(std::ceil(std::max({a.y(), b.y(), c.y()}) - 0.5)));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const Eigen::Vector2d p(x + 0.5, y + 0.5);
                const double w0 = edge(b, c, p) / area;
                const double w1 = edge(c, a, p) / area;
                const double w2 = edge(a, b, p) / area;
                if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0)
                    continue;
                const double z = 1.0 / (w0 * inv_z(i0) + w1 * inv_z(i1) + w2 * inv_z(i2));
                if (z < out.depth(y, x)) {
                    out.depth(y, x) = z;
                    out.face(y, x) = static_cast<int>(f);
                }
            }
    }
    return out;
}

SceneRecord generate_scene(const HandProxySpec& spec, const CameraIntrinsics& cam, std::uint64_t seed,
                           const SceneOptions& options)
{
    cam.validate();
    spec.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    SceneRecord scene;
    scene.cam = cam;
    scene.seed = seed;
    scene.scale = spec.scale;
    scene.hand_scale = spec.hand_scale();
    scene.joints = spec.camera_joints();

    const auto caps = hand_capsules(spec);
    for (const auto& c : caps)
        if (std::min(c.a.z(), c.b.z()) - c.radius <= 1.0)
            throw InvalidPlacement("hand is not entirely in front of the camera");

    scene.mesh = mesh_capsule_union(caps, options.mesh_pitch * spec.scale);
    const RasterResult raster = rasterize(scene.mesh, cam);

    // Optional occluding sphere between the camera and the hand.
    std::optional<std::pair<Vec3, double>> occluder;
    Eigen::Vector3f occluder_color = Eigen::Vector3f::Zero();
    if (options.occluder) {
        const Vec3 centroid = scene.joints.centroid();
        const double along = 0.6 + 0.2 * unit(rng);
        const double radius = (20.0 + 20.0 * unit(rng)) * spec.scale;
        const Vec3 lateral(60.0 * (unit(rng) - 0.5), 60.0 * (unit(rng) - 0.5), 0.0);
        occluder = std::make_pair(Vec3(along * centroid + lateral), radius);
        occluder_color = Eigen::Vector3f(static_cast<float>(unit(rng)), static_cast<float>(unit(rng)),
                                         static_cast<float>(unit(rng)));
    }

    const float background = static_cast<float>(0.15 + 0.2 * unit(rng));
    std::normal_distribution<double> noise(0.0, options.background_noise);
    scene.image = Image(cam.width, cam.height);
    scene.mask = Mask::Zero(cam.height, cam.width);
    const Vec3 light = options.light_dir.normalized();

    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            Eigen::Vector3f color = Eigen::Vector3f::Constant(background);
            for (int k = 0; k < 3; ++k)
                color(k) += static_cast<float>(noise(rng));
            double hand_z = raster.depth(y, x);
            if (raster.face(y, x) >= 0) {
                const auto f = raster.face(y, x);
                const Vec3 a = scene.mesh.vertex(scene.mesh.faces(f, 0));
                const Vec3 n = (scene.mesh.vertex(scene.mesh.faces(f, 1)) - a)
                                   .cross(scene.mesh.vertex(scene.mesh.faces(f, 2)) - a)
                                   .normalized();
                const float lambert = static_cast<float>(std::max(0.0, n.dot(light)));
                color = options.albedo * (0.2f + 0.8f * lambert);
                scene.mask(y, x) = 1;
            }
            if (occluder) {
                const Vec3 dir = pixel_ray(cam, x + 0.5, y + 0.5);
                const Vec3& c = occluder->first;
                const double r = occluder->second;
                const double A = dir.squaredNorm();
                const double B = dir.dot(c);
                const double disc = B * B - A * (c.squaredNorm() - r * r);
                if (disc >= 0.0) {
                    const double t = (B - std::sqrt(disc)) / A;
                    if (t > 0.0 && t < hand_z) {
                        const Vec3 n = (t * dir - c).normalized();
                        color = occluder_color * static_cast<float>(0.2 + 0.8 * std::max(0.0, n.dot(light)));
                        scene.mask(y, x) = 0;
                    }
                }
            }
            scene.image.rgb.col(scene.image.index(x, y)) = color;
        }
    quantize_8bit(scene.image);
    return scene;
}

std::uint64_t scene_seed(std::uint64_t seed, std::size_t index)
{
    return splitmix64(splitmix64(seed) ^ (0x632be59bd9b4e019ULL * (static_cast<std::uint64_t>(index) + 1)));
}

HandProxySpec random_hand(const RandomizationRanges& ranges, const CameraIntrinsics& cam, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

    HandProxySpec spec = HandProxySpec::nominal();
    for (auto& chain : spec.flexion)
        for (auto& f : chain)
            f = uniform(0.0, ranges.flexion_max);
    for (auto& a : spec.abduction)
        a = uniform(-ranges.abduction_max, ranges.abduction_max);

    const double roll = uniform(-ranges.roll_max, ranges.roll_max);
    const double tilt_x = uniform(-ranges.tilt_max, ranges.tilt_max);
    const double tilt_y = uniform(-ranges.tilt_max, ranges.tilt_max);
    spec.rotation = (Eigen::AngleAxisd(roll, Vec3::UnitZ()) * Eigen::AngleAxisd(tilt_x, Vec3::UnitX()) *
                     Eigen::AngleAxisd(tilt_y, Vec3::UnitY()))
                        .toRotationMatrix();
    spec.scale = uniform(ranges.scale_min, ranges.scale_max);

    const double depth = uniform(ranges.depth_min, ranges.depth_max);
    const double u = uniform(ranges.image_margin, 1.0 - ranges.image_margin) * cam.width;
    const double v = uniform(ranges.image_margin, 1.0 - ranges.image_margin) * cam.height;
    const Vec3 target = depth * pixel_ray(cam, u, v);
    const Vec3 local_centroid = spec.local_joints().rowwise().mean();
    spec.translation = target - spec.rotation * (spec.scale * local_centroid);
    return spec;
}

std::vector<SceneRecord> generate_dataset(std::size_t n, const RandomizationRanges& ranges,
                                          const CameraIntrinsics& cam, std::uint64_t seed,
                                          const SceneOptions& options, int threads)
{
    if (n == 0)
        throw ConfigError("dataset needs at least one scene");
    std::vector<SceneRecord> scenes(n);
    auto work = [&](std::size_t begin, std::size_t stride) {
        for (std::size_t i = begin; i < n; i += stride) {
            const auto s = scene_seed(seed, i);
            scenes[i] = generate_scene(random_hand(ranges, cam, s), cam, s, options);
        }
    };
    const auto workers = static_cast<std::size_t>(std::max(1, threads));
    if (workers == 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back(work, w, workers);
        for (auto& t : pool)
            t.join();
    }
    return scenes;
}

std::string joints_to_json(const JointSet& joints, const std::vector<bool>* valid)
{
    nlohmann::json j;
    j["unit"] = "mm";
    j["space"] = joints.space == PoseSpace::Camera ? "camera" : "root_relative";
    j["joints"] = nlohmann::json::array();
    for (int t = 0; t < joints.count(); ++t)
        j["joints"].push_back({joints.joints(0, t), joints.joints(1, t), joints.joints(2, t)});
    if (valid) {
        j["valid"] = nlohmann::json::array();
        for (bool v : *valid)
            j["valid"].push_back(v);
    }
    return j.dump(1);
}

JointSet joints_from_json(const std::string& text)
{
    const auto j = nlohmann::json::parse(text);
    if (j.value("unit", "mm") != "mm")
        throw IoError("joint unit must be mm");
    JointSet out;
    out.space = j.value("space", "camera") == "root_relative" ? PoseSpace::RootRelative : PoseSpace::Camera;
    const auto& arr = j.at("joints");
    out.joints.resize(3, static_cast<Eigen::Index>(arr.size()));
    for (std::size_t t = 0; t < arr.size(); ++t)
        for (std::size_t k = 0; k < 3; ++k)
            out.joints(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t)) = arr.at(t).at(k).get<double>();
    return out;
}

std::string camera_to_json(const CameraIntrinsics& cam)
{
    nlohmann::json j;
    j["fx"] = cam.fx;
    j["fy"] = cam.fy;
    j["cx"] = cam.cx;
    j["cy"] = cam.cy;
    j["width"] = cam.width;
    j["height"] = cam.height;
    return j.dump(1);
}

CameraIntrinsics camera_from_json(const std::string& text)
{
    const auto j = nlohmann::json::parse(text);
    CameraIntrinsics cam;
    cam.fx = j.at("fx").get<double>();
    cam.fy = j.at("fy").get<double>();
    cam.cx = j.at("cx").get<double>();
    cam.cy = j.at("cy").get<double>();
    cam.width = j.at("width").get<int>();
    cam.height = j.at("height").get<int>();
    cam.validate();
    return cam;
}

void write_scene(const std::filesystem::path& dir, const SceneRecord& scene)
{
    std::filesystem::create_directories(dir);
    write_ppm(dir / "image.ppm", scene.image);
    write_pbm(dir / "mask.pbm", scene.mask);
    write_obj(dir / "mesh.obj", scene.mesh);
    spit(dir / "joints.json", joints_to_json(scene.joints));
    spit(dir / "camera.json", camera_to_json(scene.cam));
    nlohmann::json meta;
    meta["hand_scale"] = scene.hand_scale;
    meta["scale"] = scene.scale;
    meta["seed"] = scene.seed;
    spit(dir / "meta.json", meta.dump(1));
}

SceneRecord read_scene(const std::filesystem::path& dir)
{
    SceneRecord scene;
    scene.image = read_ppm(dir / "image.ppm");
    scene.mask = read_pbm(dir / "mask.pbm");
    scene.mesh = read_obj(dir / "mesh.obj");
    scene.joints = joints_from_json(slurp(dir / "joints.json"));
    scene.cam = camera_from_json(slurp(dir / "camera.json"));
    const auto meta = nlohmann::json::parse(slurp(dir / "meta.json"));
    scene.hand_scale = meta.at("hand_scale").get<double>();
    scene.scale = meta.at("scale").get<double>();
    scene.seed = meta.at("seed").get<std::uint64_t>();
    return scene;
}

void write_dataset(const std::filesystem::path& root, const std::vector<SceneRecord>& scenes)
{
    std::filesystem::create_directories(root);
    char name[32];
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        std::snprintf(name, sizeof name, "scene_%05zu", i);
        write_scene(root / name, scenes[i]);
    }
}

std::vector<SceneRecord> read_dataset(const std::filesystem::path& root)
{
    if (!std::filesystem::is_directory(root))
        throw IoError("dataset directory " + root.string() + " does not exist");
    std::vector<std::filesystem::path> dirs;
    for (const auto& entry : std::filesystem::directory_iterator(root))
        if (entry.is_directory() && entry.path().filename().string().rfind("scene_", 0) == 0)
            dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty())
        throw IoError("no scene_* directories under " + root.string());
    std::vector<SceneRecord> scenes;
    scenes.reserve(dirs.size());
    for (const auto& d : dirs)
        scenes.push_back(read_scene(d));
    return scenes;
}

} // namespace nvf
