#include "doctest.h"
#include "oracles.hpp"

using namespace nvf;
using namespace nvf::nn;

namespace {

FeatureGrid<double> ramp_grid(int channels, int w, int h)
{
    FeatureGrid<double> g;
    g.width = w;
    g.height = h;
    g.data.resize(channels, w * h);
    for (int c = 0; c < channels; ++c)
        for (int i = 0; i < w * h; ++i)
            g.data(c, i) = 100.0 * c + i;
    return g;
}

Mat<double> sample_at(const FeatureGrid<double>& g, int stride, double u, double v)
{
    Eigen::Matrix2Xd uv(2, 1);
    uv << u, v;
    return gather(g, bilinear_taps<double>(uv, stride, g.width, g.height));
}

} // namespace

TEST_CASE("bilinear sampling examples")
{
    const int stride = 4;
    const FeatureGrid<double> g = ramp_grid(3, 8, 8);
    // centre of cell (2, 3) sits at pixel (2 * 4 + 2, 3 * 4 + 2)
    CHECK((sample_at(g, stride, 10.0, 14.0) - g.data.col(3 * 8 + 2)).norm() < 1e-12);
    const Mat<double> mid = sample_at(g, stride, 12.0, 14.0);
    CHECK((mid - 0.5 * (g.data.col(3 * 8 + 2) + g.data.col(3 * 8 + 3))).norm() < 1e-12);
    CHECK((sample_at(g, stride, -100.0, 14.0) - g.data.col(3 * 8)).norm() < 1e-12);
    CHECK((sample_at(g, stride, 132.0, 200.0) - g.data.col(7 * 8 + 7)).norm() < 1e-12);
    const CellCoord c = cell_coord(-100.0, 14.0, stride, 8, 8);
    CHECK(c.clamped_u);
    CHECK_FALSE(c.clamped_v);
}

TEST_CASE("scatter is the adjoint of gather")
{
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-10.0, 40.0);
    const FeatureGrid<double> g = ramp_grid(2, 6, 5);
    Eigen::Matrix2Xd uv(2, 50);
    for (int i = 0; i < 50; ++i)
        uv.col(i) << u(rng), u(rng);
    const auto taps = bilinear_taps<double>(uv, 4, 6, 5);
    const Mat<double> y = Mat<double>::Random(2, 50);
    FeatureGrid<double> dg = g;
    dg.data.setZero();
    scatter(y, taps, dg);
    const double lhs = (gather(g, taps).array() * y.array()).sum();
    const double rhs = (g.data.array() * dg.data.array()).sum();
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("encoder output shape and sanity")
{
    const EncoderConfig cfg;
    CHECK(cfg.stride() == 4);
    CHECK(cfg.out_channels() == 32);
    Encoder<float> enc(cfg);
    Rng rng(1);
    enc.init(rng);
    const Image img(128, 128);
    const FeatureGrid<float> f = enc.apply(Encoder<float>::to_grid(img));
    CHECK(f.width == 32);
    CHECK(f.height == 32);
    CHECK(f.channels() == 32);
    CHECK(f.data.allFinite());
    CHECK(f.data.cwiseAbs().maxCoeff() < 1e3f);

    CHECK_THROWS_AS(enc.apply(Encoder<float>::to_grid(Image(30, 32))), ShapeError);
}

TEST_CASE("a single pixel change stays within the receptive field")
{
    EncoderConfig cfg;
    cfg.norm = NormKind::None;
    Encoder<double> enc(cfg);
    Rng rng(4);
    enc.init(rng);
    Image a = oracle::random_image(128, 128, 3);
    Image b = a;
    const int px = 20, py = 100;
    b.rgb(1, b.index(px, py)) += 0.5f;
    const FeatureGrid<double> fa = enc.apply(Encoder<double>::to_grid(a));
    const FeatureGrid<double> fb = enc.apply(Encoder<double>::to_grid(b));
    const int stride = cfg.stride();
    const int radius = cfg.receptive_radius();
    int changed = 0;
    for (int y = 0; y < fa.height; ++y)
        for (int x = 0; x < fa.width; ++x) {
            const Eigen::Index i = static_cast<Eigen::Index>(y) * fa.width + x;
            const bool differs = (fa.data.col(i) - fb.data.col(i)).cwiseAbs().maxCoeff() > 0.0;
            // output cell (x, y) reads input pixels within radius of its top-left input pixel
            const bool reachable = std::abs(stride * x - px) <= radius && std::abs(stride * y - py) <= radius;
            if (differs) {
                ++changed;
                CHECK(reachable);
            }
        }
    CHECK(changed > 0);
}

TEST_CASE("sdf loss examples")
{
    Eigen::VectorXd t(3);
    t << 1.0, -2.0, 30.0;
    CHECK(loss_sdf(t, t, 5.0) == 0.0);
    Eigen::VectorXd p(1), s(1);
    p << -50.0;
    s << 50.0;
    CHECK(loss_sdf(p, s, 5.0) == doctest::Approx(10.0));
    Eigen::VectorXd p2(2), s2(2);
    p2 << 3.0, 7.0;
    s2 << -2.0, 1.0;
    CHECK(loss_sdf(p2, s2, 5.0) == doctest::Approx(4.5));
    CHECK_THROWS_AS(loss_sdf(Eigen::VectorXd(), Eigen::VectorXd(), 5.0), EmptyBatch);
}

TEST_CASE("offset loss examples")
{
    FieldSet truth(2, 1), pred(2, 1);
    truth.set_offset(0, 0, {0.5, Vec3(1, 0, 0)});
    pred.set_offset(0, 0, {0.7, Vec3(0, 1, 0)});
    Eigen::VectorXd far(2);
    far << 5.0, -6.0;
    CHECK(loss_offsets(pred, truth, far, 5.0) == 0.0);

    Eigen::VectorXd s(1);
    s << 0.5;
    FieldSet t1(1, 1), p1(1, 1);
    t1.set_offset(0, 0, {0.5, Vec3(1, 0, 0)});
    p1.set_offset(0, 0, {0.7, Vec3(0.6, 0.8, 0)});
    const double sq = 0.2 * 0.2 + 0.4 * 0.4 + 0.8 * 0.8;
    CHECK(loss_offsets(p1, t1, s, 5.0) == doctest::Approx(0.5 * sq).epsilon(1e-12));
}

TEST_CASE("offset loss matches a straight-line implementation")
{
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const int n = 200, t = 5;
    FieldSet a(n, t), b(n, t);
    Eigen::VectorXd s(n);
    for (int i = 0; i < n; ++i) {
        s(i) = 10.0 * u(rng);
        for (int k = 0; k < t; ++k) {
            a.set_offset(i, k, {0.5 + 0.5 * u(rng), 2.0 * Vec3(u(rng), u(rng), u(rng))});
            b.set_offset(i, k, {0.5 + 0.5 * u(rng), Vec3(u(rng), u(rng), u(rng))});
        }
    }
    double ref = 0.0;
    for (int i = 0; i < n; ++i) {
        if (std::abs(s(i)) >= 5.0)
            continue;
        for (int k = 0; k < t; ++k) {
            std::vector<double> e{a.weight(k, i) - b.weight(k, i)};
            for (int c = 0; c < 3; ++c)
                e.push_back(a.direction(3 * k + c, i) - b.direction(3 * k + c, i));
            for (double x : e)
                ref += std::abs(x) <= 1.0 ? 0.5 * x * x : std::abs(x) - 0.5;
        }
    }
    ref /= n;
    CHECK(std::abs(loss_offsets(a, b, s, 5.0) - ref) < 1e-12);
}

TEST_CASE("bce at the labels")
{
    CHECK(std::abs(bce(1.0, 1.0, kBceEpsilon)) < 1e-11);
    CHECK(std::abs(bce(0.0, 0.0, kBceEpsilon)) < 1e-11);
    CHECK(std::isfinite(bce(0.0, 1.0, kBceEpsilon)));
    CHECK(bce(0.3, 1.0, kBceEpsilon) == doctest::Approx(-std::log(0.3)));
}

TEST_CASE("nvf output arity and ranges")
{
    ModelConfig cfg;
    CHECK(cfg.output_width() == 85);
    CHECK(cfg.input_width() == 33);
    cfg.hand_scale_conditioning = true;
    CHECK(cfg.input_width() == 34);
    cfg.hand_scale_conditioning = false;
    NvfModel<float> m(cfg);
    m.init(3);
    const CameraIntrinsics cam;
    const SampleContext ctx = make_context(cfg, cam, Vec3::Zero(), std::nullopt);
    Points3 pts(3, 64);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 64; ++i)
        pts.col(i) = Vec3(100 * u(rng), 100 * u(rng), 650 + 300 * u(rng));
    const auto f = m.encode(Encoder<float>::to_grid(oracle::random_image(128, 128, 1)));
    const FieldHeads<float> h = m.evaluate(f, pts, ctx);
    CHECK(h.sdf.size() == 64);
    CHECK(h.weight.rows() == 21);
    CHECK(h.direction.rows() == 63);
    CHECK(h.weight.minCoeff() > 0.0f);
    CHECK(h.weight.maxCoeff() < 1.0f);
    for (Eigen::Index i = 0; i < 64; ++i)
        for (int t = 0; t < 21; ++t) {
            const float n = h.direction.block<3, 1>(3 * t, i).norm();
            CHECK((n == 0.0f || std::abs(n - 1.0f) < 1e-5f));
        }
}

TEST_CASE("nvf depends only on the projected feature and the depth")
{
    ModelConfig cfg;
    NvfModel<double> m(cfg);
    m.init(5);
    const CameraIntrinsics cam;
    const SampleContext ctx = make_context(cfg, cam, Vec3::Zero(), std::nullopt);
    const auto f = m.encode(Encoder<double>::to_grid(oracle::random_image(128, 128, 2)));
    Points3 pts(3, 2);
    // same depth, both projecting into the clamped corner region
    pts.col(0) = Vec3(-400, -400, 500);
    pts.col(1) = Vec3(-300, -500, 500);
    const FieldHeads<double> h = m.evaluate(f, pts, ctx);
    CHECK(h.sdf(0) == h.sdf(1));
    CHECK(h.weight.col(0) == h.weight.col(1));
    CHECK(h.direction.col(0) == h.direction.col(1));
}

TEST_CASE("hand-scale conditioning requires a hand scale")
{
    ModelConfig cfg;
    cfg.hand_scale_conditioning = true;
    NvfModel<float> m(cfg);
    m.init(1);
    const CameraIntrinsics cam;
    const auto f = m.encode(Encoder<float>::to_grid(Image(128, 128)));
    Points3 pts(3, 1);
    pts.col(0) = Vec3(0, 0, 600);
    CHECK_THROWS_AS(m.evaluate(f, pts, make_context(cfg, cam, Vec3::Zero(), std::nullopt)), ConfigError);
    CHECK_NOTHROW(m.evaluate(f, pts, make_context(cfg, cam, Vec3::Zero(), 45.0)));
}

TEST_CASE("holistic arity and constant pooling")
{
    ModelConfig cfg;
    cfg.kind = ModelKind::Holistic;
    HolisticModel<float> m(cfg);
    m.init(2);
    CHECK(m.evaluate(Encoder<float>::to_grid(Image(128, 128))).size() == 63);
    FeatureGrid<double> g;
    g.width = 5;
    g.height = 3;
    Vec<double> c(4);
    c << 1.5, -2.0, 0.25, 7.0;
    g.data = c.replicate(1, 15);
    CHECK((HolisticModel<double>::pool(g) - c).norm() < 1e-12);
}

TEST_CASE("analytic gradients match finite differences")
{
    for (ModelKind kind : {ModelKind::Nvf, ModelKind::Holistic, ModelKind::Dense2d}) {
        const auto r = oracle::model_gradient_check(kind, 100, 10);
        INFO(to_string(kind), " max rel error ", r.max_rel_error);
        CHECK(r.probes == 100);
        CHECK(r.max_rel_error < 1e-4);
    }
}

TEST_CASE("reported total is L_s plus lambda L_V")
{
    const ModelConfig cfg = oracle::tiny_model(ModelKind::Nvf);
    NvfModel<double> m(cfg);
    m.init(1);
    const CameraIntrinsics cam = oracle::small_camera(16, 16);
    Points3 pts(3, 4);
    pts << 0, 10, -20, 5, 0, 3, 7, -9, 600, 610, 590, 620;
    FieldSet targets(4, cfg.joints);
    targets.sdf << 1.0, -2.0, 3.0, 8.0;
    const auto r = nvf_objective(m, oracle::random_image(16, 16, 1), pts, targets,
                                 make_context(cfg, cam, Vec3::Zero(), std::nullopt), 0.1, 5.0, 0.0);
    CHECK(r.total == r.l_s + 0.1 * r.l_v);
    CHECK(r.n_near_surface == 3);
}

TEST_CASE("zero lambda leaves the offset heads without gradient")
{
    const ModelConfig cfg = oracle::tiny_model(ModelKind::Nvf);
    NvfModel<double> m(cfg);
    m.init(1);
    const CameraIntrinsics cam = oracle::small_camera(16, 16);
    Points3 pts(3, 4);
    pts << 0, 10, -20, 5, 0, 3, 7, -9, 600, 610, 590, 620;
    FieldSet targets(4, cfg.joints);
    targets.weight.setConstant(0.5);
    auto params = m.params();
    zero_grad(params);
    nvf_objective(m, oracle::random_image(16, 16, 1), pts, targets, make_context(cfg, cam, Vec3::Zero(), std::nullopt),
                  0.0, 5.0, 1.0);
    const Param<double>* last_w = params[params.size() - 2];
    CHECK(last_w->grad.bottomRows(4 * cfg.joints).isZero());
    CHECK_FALSE(last_w->grad.topRows(1).isZero());
}

TEST_CASE("dense loss with an all-background mask has no vote term")
{
    ModelConfig cfg = oracle::tiny_model(ModelKind::Dense2d);
    Dense2dModel<double> m(cfg);
    m.init(3);
    const Image img = oracle::random_image(16, 16, 4);
    DenseTargets t;
    t.foreground = Eigen::VectorXd::Zero(16);
    t.weight = Eigen::MatrixXd::Constant(cfg.joints, 16, 0.3);
    t.joints = Eigen::VectorXd::Constant(3 * cfg.joints, 2.0);
    const double with = dense_objective(m, img, t, 0.1, 0.0);
    const double without = dense_objective(m, img, t, 0.0, 0.0);
    CHECK(with == without);
}

TEST_CASE("dense voting recovers exact fields")
{
    const int t_count = 3, cells = 6;
    DenseFields f;
    f.foreground = Eigen::VectorXd::Zero(cells);
    f.foreground << 0.9, 0.2, 0.7, 0.8, 0.1, 0.6;
    f.weight = Eigen::MatrixXd::Random(t_count, cells).cwiseAbs();
    const Eigen::VectorXd truth = Eigen::VectorXd::LinSpaced(3 * t_count, -50.0, 700.0);
    f.joints = truth.replicate(1, cells);
    const VoteResult r = vote_dense2d(f);
    for (int t = 0; t < t_count; ++t)
        CHECK((r.joints[t] - truth.segment<3>(3 * t)).norm() < 1e-4);
    f.foreground.setConstant(0.1);
    CHECK_THROWS_AS(vote_dense2d(f), NoValidVoters);
}

TEST_CASE("learning rate schedule")
{
    CHECK(step_learning_rate(1.0, 0, 600) == 1.0);
    CHECK(step_learning_rate(1.0, 399, 600) == 1.0);
    CHECK(step_learning_rate(1.0, 400, 600) == doctest::Approx(0.1));
    CHECK(step_learning_rate(1.0, 500, 600) == doctest::Approx(0.01));
}

TEST_CASE("rmsprop first step")
{
    Param<double> p("p", 2, 1);
    p.value << 1.0, -1.0;
    p.grad << 0.5, -2.0;
    RmsProp<double> opt({&p});
    opt.step(0.01);
    // v = 0.01 g^2, step = lr g / (sqrt(v) + eps) = lr / 0.1 per unit-sign gradient
    CHECK(p.value(0) == doctest::Approx(1.0 - 0.1).epsilon(1e-6));
    CHECK(p.value(1) == doctest::Approx(-1.0 + 0.1).epsilon(1e-6));
}
