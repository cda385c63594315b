#include "nvf/evaluation.hpp"

#include <algorithm>
#include <cstdio>

namespace nvf {

namespace {

void require_same_count(const JointSet& pred, const JointSet& gt)
{
    if (pred.count() != gt.count())
        throw ShapeError("joint counts differ: " + std::to_string(pred.count()) + " vs " +
                         std::to_string(gt.count()));
    if (pred.count() == 0)
        throw EmptyBatch("no joints");
}

double mean(const std::vector<double>& v)
{
    CompensatedSum<double> s;
    for (double x : v)
        s.add(x);
    return v.empty() ? 0.0 : s.value() / static_cast<double>(v.size());
}

std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

} // namespace

std::vector<double> joint_errors(const JointSet& pred, const JointSet& gt)
{
    require_same_count(pred, gt);
    std::vector<double> e(static_cast<std::size_t>(pred.count()));
    for (int t = 0; t < pred.count(); ++t)
        e[static_cast<std::size_t>(t)] = (pred[t] - gt[t]).norm();
    return e;
}

double cs_mje(const JointSet& pred, const JointSet& gt) { return mean(joint_errors(pred, gt)); }

double pck(const std::vector<double>& errors, double tau)
{
    if (errors.empty())
        throw EmptyBatch("PCK over zero errors");
    long hits = 0;
    for (double e : errors)
        if (e <= tau)
            ++hits;
    return static_cast<double>(hits) / static_cast<double>(errors.size());
}

double auc_pck(const std::vector<double>& errors, double max_threshold, int steps)
{
    if (errors.empty())
        throw EmptyBatch("AUC over zero errors");
    if (steps < 1 || !(max_threshold > 0.0))
        throw ConfigError("AUC needs a positive threshold range");
    auto hits = [&](double threshold) {
        return static_cast<long>(std::count_if(errors.begin(), errors.end(), [&](double e) { return e <= threshold; }));
    };
    long twice = hits(0.0) + hits(max_threshold);
    for (int i = 1; i < steps; ++i)
        twice += 2 * hits(max_threshold * i / steps);
    return static_cast<double>(twice) / (2.0 * steps * static_cast<double>(errors.size()));
}

CentroidError te_de(const JointSet& pred, const JointSet& gt)
{
    require_same_count(pred, gt);
    const Vec3 d = pred.centroid() - gt.centroid();
    return {d.norm(), std::abs(d.z())};
}

AlignedError aligned_mje(const JointSet& pred, const JointSet& gt)
{
    require_same_count(pred, gt);
    const Vec3 pr = pred[0];
    const Vec3 gr = gt[0];
    double num = 0.0;
    double den = 0.0;
    for (int t = 0; t < pred.count(); ++t) {
        const Vec3 p = pred[t] - pr;
        const Vec3 g = gt[t] - gr;
        num += p.dot(g);
        den += p.squaredNorm();
    }
    if (!(den > 0.0))
        throw DegenerateAlignment("prediction collapses onto its root");
    AlignedError out;
    out.scale = num / den;
    std::vector<double> rs(static_cast<std::size_t>(pred.count()));
    std::vector<double> scaled(static_cast<std::size_t>(pred.count()));
    for (int t = 0; t < pred.count(); ++t) {
        const Vec3 p = pred[t] - pr;
        const Vec3 g = gt[t] - gr;
        rs[static_cast<std::size_t>(t)] = (p - g).norm();
        scaled[static_cast<std::size_t>(t)] = (out.scale * p - g).norm();
    }
    out.rs_mje = mean(rs);
    out.mje = mean(scaled);
    return out;
}

SampleMetrics sample_metrics(const Prediction& pred, const JointSet& gt)
{
    SampleMetrics m;
    m.cs_mje = cs_mje(pred.joints, gt);
    const CentroidError c = te_de(pred.joints, gt);
    m.te = c.te;
    m.de = c.de;
    try {
        const AlignedError a = aligned_mje(pred.joints, gt);
        m.mje = a.mje;
        m.rs_mje = a.rs_mje;
    } catch (const DegenerateAlignment&) {
        // A collapsed prediction has no scale; report the root-translated error for both.
        double sum = 0.0;
        for (int t = 0; t < gt.count(); ++t)
            sum += (gt[t] - gt[0]).norm();
        m.mje = m.rs_mje = sum / gt.count();
    }
    m.invalid_joints = pred.invalid_count();
    return m;
}

MetricReport summarize(const std::vector<Prediction>& preds, const std::vector<JointSet>& gts)
{
    if (preds.size() != gts.size())
        throw ShapeError("prediction and ground-truth counts differ");
    if (preds.empty())
        throw EmptyBatch("no samples to evaluate");
    MetricReport r;
    r.n_samples = preds.size();
    std::vector<double> cs, te, de, mje, rs;
    long points = 0;
    double seconds = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const SampleMetrics m = sample_metrics(preds[i], gts[i]);
        r.samples.push_back(m);
        cs.push_back(m.cs_mje);
        te.push_back(m.te);
        de.push_back(m.de);
        mje.push_back(m.mje);
        rs.push_back(m.rs_mje);
        r.invalid_joint_count += m.invalid_joints;
        const auto e = joint_errors(preds[i].joints, gts[i]);
        r.joint_errors.insert(r.joint_errors.end(), e.begin(), e.end());
        points += preds[i].query_points;
        seconds += preds[i].seconds;
    }
    r.cs_mje = mean(cs);
    r.te = mean(te);
    r.de = mean(de);
    r.mje = mean(mje);
    r.rs_mje = mean(rs);
    r.cs_auc = auc_pck(r.joint_errors);
    r.pts_per_sec = seconds > 0.0 ? static_cast<double>(points) / seconds : 0.0;
    return r;
}

MetricReport evaluate_model(PoseModel& model, const std::vector<SceneRecord>& scenes, const RunConfig& cfg,
                            std::vector<Prediction>* predictions)
{
    std::vector<Prediction> preds;
    std::vector<JointSet> gts;
    for (const auto& s : scenes) {
        preds.push_back(predict(model, s, cfg));
        gts.push_back(s.joints);
    }
    MetricReport r = summarize(preds, gts);
    if (predictions)
        *predictions = std::move(preds);
    return r;
}

std::vector<AblationRow> run_ablation(PoseModel& model, const std::vector<SceneRecord>& scenes, const RunConfig& cfg,
                                      const std::string& param, const std::vector<double>& values)
{
    if (model.kind() != ModelKind::Nvf)
        throw ConfigError("ablation sweeps apply to the implicit model");
    std::vector<AblationRow> rows;
    for (double v : values) {
        RunConfig c = cfg;
        if (param == "delta")
            c.voting.delta = v;
        else if (param == "knn")
            c.voting.knn = static_cast<int>(v);
        else if (param == "fraction")
            c.voting.fraction = v;
        else if (param == "step")
            c.grid_step = v;
        else
            throw ConfigError("unknown ablation parameter '" + param + "'");
        c.voting.validate();
        char buf[64];
        std::snprintf(buf, sizeof buf, "%g", v);
        rows.push_back({param, buf, evaluate_model(model, scenes, c)});
    }
    return rows;
}

void write_metric_csv(std::ostream& out, const std::vector<AblationRow>& rows, bool timing)
{
    out << "param_name,param_value,cs_mje,cs_auc,te,de,mje,rs_mje,pts_per_sec,invalid_joint_count\n";
    for (const auto& row : rows) {
        const MetricReport& r = row.report;
        out << row.param_name << ',' << row.param_value << ',' << fmt(r.cs_mje) << ',' << fmt(r.cs_auc) << ','
            << fmt(r.te) << ',' << fmt(r.de) << ',' << fmt(r.mje) << ',' << fmt(r.rs_mje) << ','
            << (timing ? fmt(r.pts_per_sec) : std::string()) << ',' << r.invalid_joint_count << '\n';
    }
}

std::vector<AblationRow> eval_rows(const MetricReport& report)
{
    std::vector<AblationRow> rows;
    for (std::size_t i = 0; i < report.samples.size(); ++i) {
        const SampleMetrics& m = report.samples[i];
        MetricReport one;
        one.cs_mje = m.cs_mje;
        one.te = m.te;
        one.de = m.de;
        one.mje = m.mje;
        one.rs_mje = m.rs_mje;
        one.invalid_joint_count = m.invalid_joints;
        const auto t = report.joint_errors.size() / report.samples.size();
        one.cs_auc = auc_pck(std::vector<double>(report.joint_errors.begin() + static_cast<long>(i * t),
                                                 report.joint_errors.begin() + static_cast<long>((i + 1) * t)));
        one.pts_per_sec = report.pts_per_sec;
        rows.push_back({"scene", std::to_string(i), one});
    }
    rows.push_back({"summary", "all", report});
    return rows;
}

} // namespace nvf
