#include "nvf/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace nvf {

namespace {

const char* const kPublished = "published default";
const char* const kDesk = "desk-scale choice";

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string fmt(double v)
{
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text)
{
    T v{};
    const auto* first = text.data();
    const auto* last = first + text.size();
    const auto r = std::from_chars(first, last, v);
    if (r.ec != std::errc() || r.ptr != last)
        throw ConfigError("bad value for " + key + ": '" + text + "'");
    return v;
}

bool parse_bool(const std::string& key, const std::string& text)
{
    if (text == "true" || text == "1")
        return true;
    if (text == "false" || text == "0")
        return false;
    throw ConfigError("bad boolean for " + key + ": '" + text + "'");
}

template <typename T>
std::string join(const std::vector<T>& v)
{
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i)
            out += ',';
        if constexpr (std::is_floating_point_v<T>)
            out += fmt(v[i]);
        else
            out += std::to_string(v[i]);
    }
    return out;
}

template <typename T>
std::vector<T> split(const std::string& key, const std::string& text)
{
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(parse_number<T>(key, trim(item)));
    return out;
}

template <typename Get>
ConfigKey typed_key(std::string name, std::string help, std::string prov, Get access)
{
    using T = std::remove_reference_t<decltype(access(std::declval<RunConfig&>()))>;
    ConfigKey k;
    k.name = name;
    k.help = std::move(help);
    k.provenance = std::move(prov);
    k.get = [access](const RunConfig& c) {
        const T& v = access(const_cast<RunConfig&>(c));
        if constexpr (std::is_same_v<T, bool>)
            return std::string(v ? "true" : "false");
        else if constexpr (std::is_floating_point_v<T>)
            return fmt(v);
        else if constexpr (std::is_same_v<T, std::string>)
            return v;
        else
            return std::to_string(v);
    };
    k.set = [access, name](RunConfig& c, const std::string& v) {
        T& ref = access(c);
        if constexpr (std::is_same_v<T, bool>)
            ref = parse_bool(name, v);
        else if constexpr (std::is_same_v<T, std::string>)
            ref = v;
        else
            ref = parse_number<T>(name, v);
    };
    return k;
}

template <typename T, typename Get>
ConfigKey list_key(std::string name, std::string help, std::string prov, Get access)
{
    ConfigKey k;
    k.name = name;
    k.help = std::move(help);
    k.provenance = std::move(prov);
    k.get = [access](const RunConfig& c) { return join(access(const_cast<RunConfig&>(c))); };
    k.set = [access, name](RunConfig& c, const std::string& v) { access(c) = split<T>(name, v); };
    return k;
}

std::vector<ConfigKey> make_keys()
{
    std::vector<ConfigKey> k;
#define NVF_FIELD(expr) [](RunConfig& c) -> auto& { return expr; }
    k.push_back(typed_key("seed", "base seed for data, initialization and sampling", "", NVF_FIELD(c.seed)));
    k.push_back({"mode", "camera_space or root_relative", "",
                 [](const RunConfig& c) { return to_string(c.model.space); },
                 [](RunConfig& c, const std::string& v) { c.model.space = parse_pose_space(v); }});
    k.push_back({"model", "nvf, holistic or dense2d", "",
                 [](const RunConfig& c) { return to_string(c.model.kind); },
                 [](RunConfig& c, const std::string& v) { c.model.kind = parse_model_kind(v); }});

    k.push_back(typed_key("camera.fx", "focal length x (px)", kDesk, NVF_FIELD(c.camera.fx)));
    k.push_back(typed_key("camera.fy", "focal length y (px)", kDesk, NVF_FIELD(c.camera.fy)));
    k.push_back(typed_key("camera.cx", "principal point x (px)", kDesk, NVF_FIELD(c.camera.cx)));
    k.push_back(typed_key("camera.cy", "principal point y (px)", kDesk, NVF_FIELD(c.camera.cy)));
    k.push_back(typed_key("camera.width", "image width (px)", kDesk, NVF_FIELD(c.camera.width)));
    k.push_back(typed_key("camera.height", "image height (px)", kDesk, NVF_FIELD(c.camera.height)));

    k.push_back(typed_key("voting.delta", "SDF clamping distance (mm)", kPublished, NVF_FIELD(c.voting.delta)));
    k.push_back(typed_key("voting.radius", "vote ball radius (mm)", kPublished, NVF_FIELD(c.voting.radius)));
    k.push_back(typed_key("voting.knn", "nearest near-surface points per joint", kPublished, NVF_FIELD(c.voting.knn)));
    k.push_back(typed_key("voting.fraction", "top fraction of voters per joint", kPublished,
                          NVF_FIELD(c.voting.fraction)));

    k.push_back(typed_key("sampling.n_near_surface", "jittered surface points in the pool", kPublished,
                          NVF_FIELD(c.sampling.n_near_surface)));
    k.push_back(typed_key("sampling.surface_noise_sigma", "surface jitter standard deviation (mm)", "",
                          NVF_FIELD(c.sampling.surface_noise_sigma)));
    k.push_back(typed_key("sampling.n_bounding_sphere", "bounding-sphere points in the pool", kPublished,
                          NVF_FIELD(c.sampling.n_bounding_sphere)));
    k.push_back(typed_key("sampling.n_frustum", "frustum (or root cube) points in the pool", kPublished,
                          NVF_FIELD(c.sampling.n_frustum)));
    k.push_back(typed_key("sampling.n_inside", "interior points per batch", kPublished, NVF_FIELD(c.sampling.n_inside)));
    k.push_back(typed_key("sampling.n_outside", "exterior points per batch", kPublished,
                          NVF_FIELD(c.sampling.n_outside)));
    k.push_back(typed_key("sampling.max_retries", "pool redraws before InsufficientSamples", "",
                          NVF_FIELD(c.sampling.max_retries)));

    k.push_back(typed_key("frustum.z_near", "near plane (mm)", kDesk, NVF_FIELD(c.z_near)));
    k.push_back(typed_key("frustum.z_far", "far plane (mm)", kDesk, NVF_FIELD(c.z_far)));
    k.push_back(typed_key("cube.half_extent", "root cube half extent (mm)", kDesk, NVF_FIELD(c.cube_half_extent)));
    k.push_back(typed_key("grid.step", "inference voxel pitch (mm)", kPublished, NVF_FIELD(c.grid_step)));

    k.push_back(list_key<int>("encoder.channels", "channels per encoder block", kDesk, NVF_FIELD(c.model.encoder.channels)));
    k.push_back(list_key<int>("encoder.strides", "stride per encoder block", kDesk, NVF_FIELD(c.model.encoder.strides)));
    k.push_back(list_key<int>("encoder.dilations", "dilation per encoder block", kDesk,
                              NVF_FIELD(c.model.encoder.dilations)));
    k.push_back(typed_key("encoder.kernel", "convolution kernel size", kDesk, NVF_FIELD(c.model.encoder.kernel)));
    k.push_back({"encoder.norm", "group or none", kDesk,
                 [](const RunConfig& c) {
                     return std::string(c.model.encoder.norm == nn::NormKind::Group ? "group" : "none");
                 },
                 [](RunConfig& c, const std::string& v) {
                     if (v == "group")
                         c.model.encoder.norm = nn::NormKind::Group;
                     else if (v == "none")
                         c.model.encoder.norm = nn::NormKind::None;
                     else
                         throw ConfigError("bad value for encoder.norm: '" + v + "'");
                 }});
    k.push_back(typed_key("encoder.groups", "group-norm groups", kDesk, NVF_FIELD(c.model.encoder.groups)));
    k.push_back(list_key<int>("model.hidden", "MLP hidden sizes", kDesk, NVF_FIELD(c.model.hidden)));
    k.push_back(typed_key("model.hand_scale_conditioning", "feed the hand scale to the implicit MLP", "",
                          NVF_FIELD(c.model.hand_scale_conditioning)));
    k.push_back(typed_key("model.hand_scale_reference", "hand scale mapped to 0 (mm)", kDesk,
                          NVF_FIELD(c.model.hand_scale_reference)));
    k.push_back(typed_key("model.hand_scale_spread", "relative hand-scale change mapped to 1", kDesk,
                          NVF_FIELD(c.model.hand_scale_spread)));
    k.push_back(typed_key("model.coord_scale", "mm per unit of regressed baseline coordinates", kDesk,
                          NVF_FIELD(c.model.coord_scale)));

    k.push_back(typed_key("train.steps", "optimizer steps", kDesk, NVF_FIELD(c.train_steps)));
    k.push_back(typed_key("train.batch_scenes", "scenes per step", kDesk, NVF_FIELD(c.batch_scenes)));
    k.push_back(typed_key("train.learning_rate", "initial learning rate", kDesk, NVF_FIELD(c.learning_rate)));
    k.push_back({"train.lambda", "offset-loss weight, auto = 0.1 camera space / 10 root relative", kPublished,
                 [](const RunConfig& c) { return c.lambda ? fmt(*c.lambda) : std::string("auto"); },
                 [](RunConfig& c, const std::string& v) {
                     if (v == "auto")
                         c.lambda.reset();
                     else
                         c.lambda = parse_number<double>("train.lambda", v);
                 }});
    k.push_back(typed_key("train.lambda_dense", "dense-baseline vote-loss weight", kPublished,
                          NVF_FIELD(c.lambda_dense)));
    k.push_back(typed_key("train.rms_rho", "RMSProp squared-gradient decay", "", NVF_FIELD(c.rms_rho)));
    k.push_back(typed_key("train.rms_eps", "RMSProp denominator epsilon", "", NVF_FIELD(c.rms_eps)));
    k.push_back(typed_key("train.cache_variants", "point batches cached per training scene", kDesk,
                          NVF_FIELD(c.cache_variants)));
    k.push_back(typed_key("train.points_per_step", "points per scene per step, 0 = whole batch", kDesk,
                          NVF_FIELD(c.points_per_step)));

    k.push_back(typed_key("data.gen_count", "scenes written by gen", kDesk, NVF_FIELD(c.gen_count)));
    k.push_back(typed_key("data.eval_count", "held-out scenes written by gen", kDesk, NVF_FIELD(c.eval_count)));
    k.push_back(typed_key("data.train_dir", "training scene directory", "", NVF_FIELD(c.train_dir)));
    k.push_back(typed_key("data.eval_dir", "evaluation scene directory", "", NVF_FIELD(c.eval_dir)));
    k.push_back(typed_key("scene.mesh_pitch", "capsule-union meshing pitch (mm)", kDesk, NVF_FIELD(c.scene.mesh_pitch)));
    k.push_back(typed_key("scene.occluder", "add a random occluding sphere", kDesk, NVF_FIELD(c.scene.occluder)));
    k.push_back(typed_key("scene.background_noise", "background noise amplitude", kDesk,
                          NVF_FIELD(c.scene.background_noise)));
    k.push_back(typed_key("random.flexion_max", "max joint flexion (rad)", kDesk, NVF_FIELD(c.ranges.flexion_max)));
    k.push_back(typed_key("random.abduction_max", "max finger abduction (rad)", kDesk,
                          NVF_FIELD(c.ranges.abduction_max)));
    k.push_back(typed_key("random.tilt_max", "max out-of-plane rotation (rad)", kDesk, NVF_FIELD(c.ranges.tilt_max)));
    k.push_back(typed_key("random.roll_max", "max in-plane rotation (rad)", kDesk, NVF_FIELD(c.ranges.roll_max)));
    k.push_back(typed_key("random.depth_min", "min joint-centroid depth (mm)", kDesk, NVF_FIELD(c.ranges.depth_min)));
    k.push_back(typed_key("random.depth_max", "max joint-centroid depth (mm)", kDesk, NVF_FIELD(c.ranges.depth_max)));
    k.push_back(typed_key("random.scale_min", "min hand scale factor", kDesk, NVF_FIELD(c.ranges.scale_min)));
    k.push_back(typed_key("random.scale_max", "max hand scale factor", kDesk, NVF_FIELD(c.ranges.scale_max)));
    k.push_back(typed_key("random.image_margin", "centroid margin as a fraction of the image", kDesk,
                          NVF_FIELD(c.ranges.image_margin)));

    k.push_back(typed_key("ablation.param", "delta, knn, fraction or step", "", NVF_FIELD(c.ablation_param)));
    k.push_back(list_key<double>("ablation.values", "comma-separated sweep values", "",
                                 NVF_FIELD(c.ablation_values)));

    k.push_back(typed_key("threads", "worker cap", "", NVF_FIELD(c.threads)));
    k.push_back(typed_key("deterministic", "sequential reductions and timing-free outputs", "",
                          NVF_FIELD(c.deterministic)));
#undef NVF_FIELD
    return k;
}

} // namespace

SamplingVolume RunConfig::sampling_volume(const Vec3& root) const
{
    SamplingVolume v;
    v.mode = sampling_mode();
    v.frustum = frustum();
    v.cube = Cube{root, cube_half_extent};
    return v;
}

GridSampleSpec RunConfig::grid_spec(const Vec3& root) const
{
    GridSampleSpec g;
    g.step = grid_step;
    g.mode = sampling_mode();
    g.frustum = frustum();
    g.cube = Cube{root, cube_half_extent};
    return g;
}

void RunConfig::sync()
{
    model.z_near = z_near;
    model.z_far = z_far;
    model.cube_half_extent = cube_half_extent;
}

void RunConfig::validate() const
{
    camera.validate();
    voting.validate();
    sampling.validate();
    model.validate();
    if (!(z_near > 0.0 && z_far > z_near))
        throw ConfigError("frustum needs 0 < z_near < z_far");
    if (!(cube_half_extent > 0.0))
        throw ConfigError("cube.half_extent must be positive");
    if (!(grid_step > 0.0))
        throw ConfigError("grid.step must be positive");
    if (train_steps < 0 || batch_scenes < 1 || cache_variants < 1 || points_per_step < 0)
        throw ConfigError("training sizes out of range");
    if (!(learning_rate > 0.0))
        throw ConfigError("train.learning_rate must be positive");
    if (threads < 1)
        throw ConfigError("threads must be at least 1");
    if (camera.width % model.stride() != 0 || camera.height % model.stride() != 0)
        throw ConfigError("image size must be divisible by the encoder stride");
}

const std::vector<ConfigKey>& config_keys()
{
    static const std::vector<ConfigKey> keys = make_keys();
    return keys;
}

std::string serialize_config(const RunConfig& cfg)
{
    std::string out;
    for (const auto& k : config_keys())
        out += k.name + " = " + k.get(cfg) + "\n";
    return out;
}

void apply_config_text(RunConfig& cfg, const std::string& text)
{
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        bool found = false;
        for (const auto& k : config_keys())
            if (k.name == key) {
                k.set(cfg, value);
                found = true;
                break;
            }
        if (!found)
            throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    cfg.sync();
}

RunConfig parse_config(const std::string& text)
{
    RunConfig cfg;
    apply_config_text(cfg, text);
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void save_config(const std::filesystem::path& path, const RunConfig& cfg)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write config " + path.string());
    out << serialize_config(cfg);
}

std::string config_help()
{
    const RunConfig defaults;
    std::string out = "Config keys (key = default; provenance):\n";
    for (const auto& k : config_keys()) {
        out += "  " + k.name + " = " + k.get(defaults);
        if (!k.provenance.empty())
            out += "  [" + k.provenance + "]";
        out += "\n      " + k.help + "\n";
    }
    return out;
}

std::string to_string(PoseSpace space)
{
    return space == PoseSpace::Camera ? "camera_space" : "root_relative";
}

PoseSpace parse_pose_space(const std::string& text)
{
    if (text == "camera_space" || text == "camera")
        return PoseSpace::Camera;
    if (text == "root_relative" || text == "root")
        return PoseSpace::RootRelative;
    throw ConfigError("unknown mode '" + text + "'");
}

std::string to_string(ModelKind kind)
{
    switch (kind) {
    case ModelKind::Nvf:
        return "nvf";
    case ModelKind::Holistic:
        return "holistic";
    case ModelKind::Dense2d:
        return "dense2d";
    }
    return "nvf";
}

ModelKind parse_model_kind(const std::string& text)
{
    std::string t = text;
    if (t.rfind("baseline=", 0) == 0)
        t = t.substr(9);
    if (t == "nvf")
        return ModelKind::Nvf;
    if (t == "holistic")
        return ModelKind::Holistic;
    if (t == "dense2d")
        return ModelKind::Dense2d;
    throw ConfigError("unknown model '" + text + "'");
}

int ModelConfig::input_width() const
{
    switch (kind) {
    case ModelKind::Nvf:
        return encoder.out_channels() + 1 + (hand_scale_conditioning ? 1 : 0);
    case ModelKind::Holistic:
    case ModelKind::Dense2d:
        return encoder.out_channels();
    }
    return 0;
}

int ModelConfig::output_width() const
{
    switch (kind) {
    case ModelKind::Nvf:
    case ModelKind::Dense2d:
        return 1 + 4 * joints;
    case ModelKind::Holistic:
        return 3 * joints;
    }
    return 0;
}

void ModelConfig::validate() const
{
    encoder.validate();
    if (joints < 1)
        throw ConfigError("model needs at least one joint");
    for (int h : hidden)
        if (h < 1)
            throw ConfigError("hidden sizes must be positive");
    if (!(z_far > z_near) || !(cube_half_extent > 0.0) || !(coord_scale > 0.0) || !(hand_scale_reference > 0.0) ||
        !(hand_scale_spread > 0.0))
        throw ConfigError("model normalization constants out of range");
}

SampleContext make_context(const ModelConfig& cfg, const CameraIntrinsics& cam, const Vec3& root,
                           std::optional<double> hand_scale)
{
    SampleContext ctx;
    ctx.cam = cam;
    ctx.anchor = cfg.space == PoseSpace::Camera ? Vec3(0.0, 0.0, 0.5 * (cfg.z_near + cfg.z_far)) : root;
    ctx.hand_scale = hand_scale;
    return ctx;
}

} // namespace nvf
