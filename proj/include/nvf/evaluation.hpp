#pragma once

#include "nvf/training.hpp"

#include <ostream>

namespace nvf {

/// Mean Euclidean joint error without alignment.
double cs_mje(const JointSet& pred, const JointSet& gt);

/// Per-joint Euclidean errors.
std::vector<double> joint_errors(const JointSet& pred, const JointSet& gt);

/// Area under PCK(tau) for tau uniform on [0, max_threshold] with `steps` intervals,
/// trapezoidal rule over the normalized threshold axis.
double auc_pck(const std::vector<double>& errors, double max_threshold = 50.0, int steps = 100);

/// Fraction of errors <= tau.
double pck(const std::vector<double>& errors, double tau);

struct CentroidError {
    double te = 0.0;
    double de = 0.0;
};
CentroidError te_de(const JointSet& pred, const JointSet& gt);

struct AlignedError {
    double mje = 0.0;    ///< after root translation and least-squares scale
    double rs_mje = 0.0; ///< after root translation only
    double scale = 1.0;  ///< s*
};
/// Root (joint 0) translation plus s* = sum <p, g> / sum |p|^2 about the root.
/// Throws DegenerateAlignment when every predicted joint sits on the root.
AlignedError aligned_mje(const JointSet& pred, const JointSet& gt);

struct SampleMetrics {
    double cs_mje = 0.0;
    double te = 0.0;
    double de = 0.0;
    double mje = 0.0;
    double rs_mje = 0.0;
    int invalid_joints = 0;
};

struct MetricReport {
    double cs_mje = 0.0;
    double cs_auc = 0.0;
    double te = 0.0;
    double de = 0.0;
    double mje = 0.0;
    double rs_mje = 0.0;
    std::size_t n_samples = 0;
    long invalid_joint_count = 0;
    double pts_per_sec = 0.0;
    std::vector<SampleMetrics> samples;
    std::vector<double> joint_errors; ///< all samples, camera space
};

SampleMetrics sample_metrics(const Prediction& pred, const JointSet& gt);
MetricReport summarize(const std::vector<Prediction>& preds, const std::vector<JointSet>& gts);

/// Runs inference on every scene and summarizes.
MetricReport evaluate_model(PoseModel& model, const std::vector<SceneRecord>& scenes, const RunConfig& cfg,
                            std::vector<Prediction>* predictions = nullptr);

struct AblationRow {
    std::string param_name;
    std::string param_value;
    MetricReport report;
};

/// One row per value of `param` (delta, knn, fraction or step) for an implicit model.
std::vector<AblationRow> run_ablation(PoseModel& model, const std::vector<SceneRecord>& scenes, const RunConfig& cfg,
                                      const std::string& param, const std::vector<double>& values);

/// Schema: param_name,param_value,cs_mje,cs_auc,te,de,mje,rs_mje,pts_per_sec,invalid_joint_count.
/// With `timing` false the pts_per_sec column is left empty so output is reproducible.
void write_metric_csv(std::ostream& out, const std::vector<AblationRow>& rows, bool timing);

/// Eval CSV: one row per scene plus a summary row.
std::vector<AblationRow> eval_rows(const MetricReport& report);

} // namespace nvf
