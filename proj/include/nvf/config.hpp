#pragma once

#include "nvf/nn/models.hpp"
#include "nvf/sampling.hpp"
#include "nvf/synthetic.hpp"

#include <filesystem>
#include <functional>
#include <optional>

namespace nvf {

/// Everything a command needs. Serialized as flat `key = value` lines.
struct RunConfig {
    std::uint64_t seed = 0;
    CameraIntrinsics camera;
    VotingParams voting;
    TrainSampleSpec sampling;
    double z_near = 300.0;
    double z_far = 1000.0;
    double cube_half_extent = 160.0;
    double grid_step = 16.0;
    ModelConfig model;

    long train_steps = 3000;
    int batch_scenes = 4;
    double learning_rate = 3e-3;
    std::optional<double> lambda; ///< unset: 0.1 camera space, 10 root relative
    double lambda_dense = 0.1;
    double rms_rho = 0.99;
    double rms_eps = 1e-8;
    int cache_variants = 1;
    int points_per_step = 1000; ///< subset of each cached batch used per step, 0 for all

    std::size_t gen_count = 512;
    std::size_t eval_count = 64;
    RandomizationRanges ranges;
    SceneOptions scene;

    std::string train_dir = "data/train";
    std::string eval_dir = "data/eval";

    std::string ablation_param = "step";
    std::vector<double> ablation_values{8.0, 16.0, 32.0};

    int threads = 1;
    bool deterministic = false;

    PoseSpace space() const { return model.space; }
    SamplingMode sampling_mode() const
    {
        return model.space == PoseSpace::Camera ? SamplingMode::CameraFrustum : SamplingMode::RootCube;
    }
    double effective_lambda() const { return lambda ? *lambda : (model.space == PoseSpace::Camera ? 0.1 : 10.0); }

    Frustum frustum() const { return Frustum{camera, z_near, z_far}; }
    SamplingVolume sampling_volume(const Vec3& root) const;
    GridSampleSpec grid_spec(const Vec3& root) const;

    /// Copies the shared geometry fields into `model`.
    void sync();
    void validate() const;
};

/// One documented config key.
struct ConfigKey {
    std::string name;
    std::string help;
    std::string provenance; ///< empty, "published default" or "desk-scale choice"
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

const std::vector<ConfigKey>& config_keys();

std::string serialize_config(const RunConfig& cfg);
/// Later keys override earlier ones; unknown keys throw ConfigError.
void apply_config_text(RunConfig& cfg, const std::string& text);
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const RunConfig& cfg);

/// `--help` text: one line per key with default and provenance.
std::string config_help();

std::string to_string(PoseSpace space);
PoseSpace parse_pose_space(const std::string& text);

} // namespace nvf
