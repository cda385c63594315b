#pragma once

#include "nvf/config.hpp"
#include "nvf/nn/objectives.hpp"
#include "nvf/nn/optim.hpp"

#include <functional>
#include <memory>

namespace nvf {

/// A float model of any of the three kinds.
class PoseModel {
public:
    explicit PoseModel(const ModelConfig& cfg);

    ModelKind kind() const { return cfg_.kind; }
    const ModelConfig& config() const { return cfg_; }

    void init(std::uint64_t seed);
    nn::ParamList<float> params();

    nn::NvfModel<float>& nvf() { return *nvf_; }
    nn::HolisticModel<float>& holistic() { return *holistic_; }
    nn::Dense2dModel<float>& dense() { return *dense_; }

private:
    ModelConfig cfg_;
    std::unique_ptr<nn::NvfModel<float>> nvf_;
    std::unique_ptr<nn::HolisticModel<float>> holistic_;
    std::unique_ptr<nn::Dense2dModel<float>> dense_;
};

/// Training model from the run config, initialized with its seed.
PoseModel make_model(const RunConfig& cfg);

/// Per-scene precomputed targets. Point batches (and their fields) come in `variants` copies
/// drawn with different seeds.
struct SceneTargets {
    std::vector<Points3> points;
    std::vector<FieldSet> fields;
    DenseTargets dense;
};

struct TrainingCache {
    std::vector<SceneTargets> scenes;
};

/// Sampler + targets for every scene. Work is spread over cfg.threads; the result does not
/// depend on the thread count.
TrainingCache build_training_cache(const std::vector<SceneRecord>& scenes, const RunConfig& cfg, bool implicit,
                                   bool dense);

/// Root joint of a scene: the ground-truth wrist.
inline Vec3 scene_root(const SceneRecord& scene) { return scene.joints[joints::kWrist]; }

SampleContext scene_context(const ModelConfig& model, const SceneRecord& scene);

/// Per-feature-cell targets: foreground from the mask at the cell-centre pixel, vote weights
/// from that pixel ray's first mesh hit.
DenseTargets build_dense_targets(const SceneRecord& scene, const MeshSdf& mesh, const ModelConfig& model,
                                 double radius);

struct LossRow {
    long step = 0;
    double learning_rate = 0.0;
    double total = 0.0;
    double l_s = 0.0;
    double l_v = 0.0;
};

/// Sequential RMSProp training. Throws NumericalError on a non-finite loss or gradient.
std::vector<LossRow> train_model(PoseModel& model, const std::vector<SceneRecord>& scenes,
                                 const TrainingCache& cache, const RunConfig& cfg,
                                 const std::function<void(const LossRow&)>& on_step = {});

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRow>& rows);

/// Implicit field at `points`, evaluated in chunks over up to `threads` workers.
FieldSet predict_field(const nn::NvfModel<float>& model, const nn::FeatureGrid<float>& features,
                       const Points3& points, const SampleContext& ctx, int threads);

/// Dense-baseline outputs with joint coordinates in mm.
struct DenseFields {
    Eigen::VectorXd foreground; ///< L
    Eigen::MatrixXd weight;     ///< T x L
    Eigen::MatrixXd joints;     ///< 3T x L
};

/// Per joint, the weight-averaged coordinates over cells with foreground > 0.5 (a plain mean when
/// all weights vanish). Throws NoValidVoters when no cell is foreground.
VoteResult vote_dense2d(const DenseFields& fields);

struct Prediction {
    JointSet joints;
    std::vector<bool> valid;
    long query_points = 0;
    double seconds = 0.0;

    int invalid_count() const;
};

/// Full inference for one scene. Joints without valid voters fall back to the query-point centroid
/// (implicit model) or the normalization anchor (dense baseline).
Prediction predict(PoseModel& model, const SceneRecord& scene, const RunConfig& cfg);

/// Predicted SDF and vote weights at grid points, for rendering.
struct FieldDump {
    Points3 points;
    FieldSet field;
};
FieldDump predict_grid_field(PoseModel& model, const SceneRecord& scene, const RunConfig& cfg);

} // namespace nvf
