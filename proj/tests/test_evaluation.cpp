#include "doctest.h"
#include "oracles.hpp"

#include <sstream>

using namespace nvf;

namespace {

JointSet random_pose(std::mt19937_64& rng)
{
    std::normal_distribution<double> g;
    JointSet j;
    j.joints.resize(3, 21);
    const Vec3 root(g(rng) * 50, g(rng) * 50, 600 + g(rng) * 50);
    for (int t = 0; t < 21; ++t)
        j.joints.col(t) = root + Vec3(g(rng), g(rng), g(rng)) * 60.0;
    j.joints.col(0) = root;
    return j;
}

JointSet shifted(const JointSet& j, const Vec3& t)
{
    JointSet out = j;
    out.joints.colwise() += t;
    return out;
}

} // namespace

TEST_CASE("cs_mje examples")
{
    std::mt19937_64 rng(1);
    const JointSet gt = random_pose(rng);
    CHECK(cs_mje(gt, gt) == 0.0);
    CHECK(cs_mje(shifted(gt, Vec3(3, 4, 0)), gt) == doctest::Approx(5.0).epsilon(1e-12));
    const JointSet pred = random_pose(rng);
    double ref = 0.0;
    for (int t = 0; t < 21; ++t) {
        const double dx = pred.joints(0, t) - gt.joints(0, t);
        const double dy = pred.joints(1, t) - gt.joints(1, t);
        const double dz = pred.joints(2, t) - gt.joints(2, t);
        ref += std::sqrt(dx * dx + dy * dy + dz * dz);
    }
    CHECK(std::abs(cs_mje(pred, gt) - ref / 21.0) < 1e-12);
    JointSet short_set = gt;
    short_set.joints.conservativeResize(3, 20);
    CHECK_THROWS_AS(cs_mje(short_set, gt), ShapeError);
}

TEST_CASE("auc examples")
{
    CHECK(auc_pck(std::vector<double>(10, 0.0)) == 1.0);
    CHECK(auc_pck(std::vector<double>(10, 50.5)) == 0.0);
    CHECK(std::abs(auc_pck(std::vector<double>(10, 25.0)) - 0.5) <= 0.01);
    CHECK_THROWS_AS(auc_pck({}), EmptyBatch);
}

TEST_CASE("auc is monotone in each error and pck is a step function")
{
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 70.0);
    std::vector<double> e(50);
    for (double& x : e)
        x = u(rng);
    const double base = auc_pck(e);
    for (std::size_t i = 0; i < e.size(); ++i) {
        auto f = e;
        f[i] *= 0.5;
        CHECK(auc_pck(f) >= base);
    }
    double prev = 0.0;
    for (int k = 0; k <= 100; ++k) {
        const double p = pck(e, k * 0.7);
        CHECK(p >= prev);
        prev = p;
    }
}

TEST_CASE("te_de examples")
{
    std::mt19937_64 rng(3);
    const JointSet gt = random_pose(rng);
    CentroidError c = te_de(shifted(gt, Vec3(0, 0, 10)), gt);
    CHECK(c.te == doctest::Approx(10.0));
    CHECK(c.de == doctest::Approx(10.0));
    c = te_de(shifted(gt, Vec3(10, 0, 0)), gt);
    CHECK(c.te == doctest::Approx(10.0));
    CHECK(c.de == doctest::Approx(0.0).epsilon(1e-12));
    JointSet p = gt;
    p.joints.col(3) += Vec3(4, -2, 7);
    p.joints.col(8) -= Vec3(4, -2, 7);
    c = te_de(p, gt);
    CHECK(c.te < 1e-12);
    CHECK(c.de < 1e-12);
}

TEST_CASE("aligned_mje examples")
{
    std::mt19937_64 rng(4);
    const JointSet gt = random_pose(rng);
    JointSet twice = gt;
    twice.joints = ((gt.joints.colwise() - gt[0]) * 2.0).colwise() + gt[0];
    const AlignedError a = aligned_mje(twice, gt);
    CHECK(a.mje < 1e-12);
    CHECK(a.scale == doctest::Approx(0.5));
    CHECK(a.rs_mje == doctest::Approx(cs_mje(twice, gt)).epsilon(1e-12));

    const AlignedError b = aligned_mje(shifted(gt, Vec3(5, -8, 13)), gt);
    CHECK(b.mje < 1e-12);
    CHECK(b.rs_mje < 1e-12);

    JointSet collapsed = gt;
    collapsed.joints = gt[0].replicate(1, 21);
    CHECK_THROWS_AS(aligned_mje(collapsed, gt), DegenerateAlignment);
}

TEST_CASE("s* matches a golden-section search")
{
    std::mt19937_64 rng(5);
    for (int i = 0; i < 100; ++i) {
        const JointSet gt = random_pose(rng);
        const JointSet pred = random_pose(rng);
        const double s = aligned_mje(pred, gt).scale;
        const auto g = static_cast<double>(oracle::golden_section(
            [&](long double x) { return oracle::scale_objective(pred, gt, x); }, -10.0L, 10.0L));
        CHECK(std::abs(s - g) < 1e-8);
        CHECK(oracle::scale_objective(pred, gt, s) <= oracle::scale_objective(pred, gt, 1.0) + 1e-9);
    }
}

TEST_CASE("metric invariants over random pairs")
{
    std::mt19937_64 rng(6);
    std::vector<int> perm(21);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = 0; i < 50; ++i) {
        const JointSet gt = random_pose(rng);
        const JointSet pred = random_pose(rng);
        const CentroidError c = te_de(pred, gt);
        CHECK(c.de <= c.te);
        // permutation keeping the root first
        std::shuffle(perm.begin() + 1, perm.end(), rng);
        JointSet pg = gt, pp = pred;
        for (int t = 0; t < 21; ++t) {
            pg.joints.col(t) = gt[perm[static_cast<std::size_t>(t)]];
            pp.joints.col(t) = pred[perm[static_cast<std::size_t>(t)]];
        }
        CHECK(cs_mje(pp, pg) == doctest::Approx(cs_mje(pred, gt)).epsilon(1e-12));
        CHECK(auc_pck(joint_errors(pp, pg)) == auc_pck(joint_errors(pred, gt)));
        CHECK(te_de(pp, pg).te == doctest::Approx(c.te).epsilon(1e-12));
        CHECK(aligned_mje(pp, pg).mje == doctest::Approx(aligned_mje(pred, gt).mje).epsilon(1e-12));
    }
}

TEST_CASE("metric csv layout")
{
    MetricReport r;
    r.cs_mje = 12.5;
    r.pts_per_sec = 1000.0;
    std::ostringstream timed, plain;
    write_metric_csv(timed, {{"fraction", "0.5", r}}, true);
    write_metric_csv(plain, {{"fraction", "0.5", r}}, false);
    CHECK(timed.str() ==
          "param_name,param_value,cs_mje,cs_auc,te,de,mje,rs_mje,pts_per_sec,invalid_joint_count\n"
          "fraction,0.5,12.500000,0.000000,0.000000,0.000000,0.000000,0.000000,1000.000000,0\n");
    CHECK(plain.str().find(",0.000000,,0\n") != std::string::npos);
}

TEST_CASE("ablation sweeps over an untrained implicit model")
{
    RunConfig cfg;
    cfg.model = oracle::tiny_model(ModelKind::Nvf);
    cfg.sync();
    cfg.grid_step = 32.0;
    const std::vector<SceneRecord> scenes = generate_dataset(2, cfg.ranges, cfg.camera, 77);
    PoseModel model = make_model(cfg);
    const auto rows = run_ablation(model, scenes, cfg, "fraction", {0.25, 0.5, 1.0});
    CHECK(rows.size() == 3);
    std::ostringstream a, b;
    write_metric_csv(a, rows, false);
    write_metric_csv(b, run_ablation(model, scenes, cfg, "fraction", {0.25, 0.5, 1.0}), false);
    CHECK(a.str() == b.str());
    CHECK_THROWS_AS(run_ablation(model, scenes, cfg, "radius", {1.0}), ConfigError);

    long previous = 0;
    for (double step : {32.0, 16.0, 8.0}) {
        RunConfig c = cfg;
        c.grid_step = step;
        const long n = sample_inference_grid(c.grid_spec(Vec3::Zero())).cols();
        if (previous > 0)
            CHECK(static_cast<double>(n) / previous == doctest::Approx(8.0).epsilon(0.2));
        previous = n;
    }
}

TEST_CASE("eval rows have one line per scene and a summary")
{
    std::mt19937_64 rng(7);
    std::vector<Prediction> preds(3);
    std::vector<JointSet> gts;
    for (auto& p : preds) {
        gts.push_back(random_pose(rng));
        p.joints = shifted(gts.back(), Vec3(1, 2, 2));
        p.valid.assign(21, true);
    }
    preds[1].valid[4] = false;
    const MetricReport r = summarize(preds, gts);
    CHECK(r.cs_mje == doctest::Approx(3.0));
    CHECK(r.invalid_joint_count == 1);
    const auto rows = eval_rows(r);
    REQUIRE(rows.size() == 4);
    CHECK(rows.back().param_name == "summary");
    CHECK(rows[1].report.invalid_joint_count == 1);
}
