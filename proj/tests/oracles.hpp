#pragma once

// Independent reference implementations used by the unit tests and the acceptance suite.

#include "nvf/evaluation.hpp"
#include "nvf/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>

namespace nvf::oracle {

inline double segment_distance(const Vec3& p, const Vec3& a, const Vec3& b)
{
    const Vec3 ab = b - a;
    const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    return (a + t * ab - p).norm();
}

/// Plane distance when the projection falls inside the triangle, else the nearest edge.
inline double triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c)
{
    const Vec3 n = (b - a).cross(c - a);
    const Vec3 q = p - n * ((p - a).dot(n) / n.squaredNorm());
    const bool inside = n.dot((b - a).cross(q - a)) >= 0.0 && n.dot((c - b).cross(q - b)) >= 0.0 &&
                        n.dot((a - c).cross(q - c)) >= 0.0;
    if (inside)
        return (p - q).norm();
    return std::min({segment_distance(p, a, b), segment_distance(p, b, c), segment_distance(p, c, a)});
}

inline double brute_force_distance(const Vec3& p, const TriMesh& mesh)
{
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index f = 0; f < mesh.face_count(); ++f)
        best = std::min(best, triangle_distance(p, mesh.vertex(mesh.faces(f, 0)), mesh.vertex(mesh.faces(f, 1)),
                                                mesh.vertex(mesh.faces(f, 2))));
    return best;
}

/// Inside test by counting ray crossings. A direction whose ray grazes an edge or vertex is
/// rejected and another is tried; nullopt when every direction was degenerate.
inline std::optional<bool> ray_parity_inside(const Vec3& p, const TriMesh& mesh, std::uint64_t seed = 7)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    for (int attempt = 0; attempt < 16; ++attempt) {
        const Vec3 dir = Vec3(g(rng), g(rng), g(rng)).normalized();
        int crossings = 0;
        bool degenerate = false;
        for (Eigen::Index f = 0; f < mesh.face_count() && !degenerate; ++f) {
            const Vec3 a = mesh.vertex(mesh.faces(f, 0));
            const Vec3 e1 = mesh.vertex(mesh.faces(f, 1)) - a;
            const Vec3 e2 = mesh.vertex(mesh.faces(f, 2)) - a;
            const Vec3 h = dir.cross(e2);
            const double det = e1.dot(h);
            const double scale = e1.norm() * e2.norm();
            if (std::abs(det) < 1e-12 * scale)
                continue;
            const Vec3 s = p - a;
            const double u = s.dot(h) / det;
            const Vec3 q = s.cross(e1);
            const double v = dir.dot(q) / det;
            const double t = e2.dot(q) / det;
            constexpr double tol = 1e-9;
            if (u < -tol || v < -tol || u + v > 1.0 + tol || t < -tol)
                continue;
            if (u < tol || v < tol || u + v > 1.0 - tol || t < tol) {
                degenerate = true;
                break;
            }
            ++crossings;
        }
        if (!degenerate)
            return crossings % 2 == 1;
    }
    return std::nullopt;
}

inline TriMesh icosahedron(double radius)
{
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    TriMesh m;
    m.vertices.resize(12, 3);
    const double v[12][3] = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                             {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (int i = 0; i < 12; ++i)
        m.vertices.row(i) = Vec3(v[i][0], v[i][1], v[i][2]).normalized().transpose() * radius;
    const int f[20][3] = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                          {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                          {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    m.faces.resize(20, 3);
    for (int i = 0; i < 20; ++i)
        m.faces.row(i) << f[i][0], f[i][1], f[i][2];
    return m;
}

/// Loop-style midpoint subdivision with vertices pushed back onto the sphere.
inline TriMesh icosphere(double radius, int levels)
{
    TriMesh m = icosahedron(radius);
    for (int l = 0; l < levels; ++l) {
        std::vector<Vec3> verts;
        for (Eigen::Index i = 0; i < m.vertex_count(); ++i)
            verts.push_back(m.vertex(i));
        std::map<std::pair<int, int>, int> mid;
        auto midpoint = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            auto it = mid.find(key);
            if (it != mid.end())
                return it->second;
            verts.push_back((verts[a] + verts[b]).normalized() * radius);
            const int id = static_cast<int>(verts.size()) - 1;
            mid.emplace(key, id);
            return id;
        };
        std::vector<std::array<int, 3>> faces;
        for (Eigen::Index f = 0; f < m.face_count(); ++f) {
            const int a = m.faces(f, 0), b = m.faces(f, 1), c = m.faces(f, 2);
            const int ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
            faces.push_back({a, ab, ca});
            faces.push_back({b, bc, ab});
            faces.push_back({c, ca, bc});
            faces.push_back({ab, bc, ca});
        }
        m.vertices.resize(static_cast<Eigen::Index>(verts.size()), 3);
        for (std::size_t i = 0; i < verts.size(); ++i)
            m.vertices.row(static_cast<Eigen::Index>(i)) = verts[i].transpose();
        m.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
        for (std::size_t i = 0; i < faces.size(); ++i)
            m.faces.row(static_cast<Eigen::Index>(i)) << faces[i][0], faces[i][1], faces[i][2];
    }
    return m;
}

/// Star-shaped random closed mesh: an icosphere (320 faces) with radially jittered vertices,
/// then an anisotropic scale, rotation and translation.
inline TriMesh random_mesh(std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    TriMesh m = icosphere(1.0, 2);
    const Vec3 axes(40.0 + 60.0 * u(rng), 40.0 + 60.0 * u(rng), 40.0 + 60.0 * u(rng));
    const Mat3 r = Eigen::Quaterniond::UnitRandom().toRotationMatrix();
    const Vec3 t(200.0 * (u(rng) - 0.5), 200.0 * (u(rng) - 0.5), 500.0 + 200.0 * (u(rng) - 0.5));
    for (Eigen::Index i = 0; i < m.vertex_count(); ++i) {
        const Vec3 v = m.vertex(i) * (0.75 + 0.5 * u(rng));
        m.vertices.row(i) = (r * v.cwiseProduct(axes) + t).transpose();
    }
    return m;
}

/// Golden-section minimization of a unimodal function on [a, b], in extended precision.
inline long double golden_section(const std::function<long double(long double)>& f, long double a, long double b,
                                  long double tol = 1e-15L)
{
    const long double g = (std::sqrt(5.0L) - 1.0L) / 2.0L;
    long double c = b - g * (b - a);
    long double d = a + g * (b - a);
    long double fc = f(c), fd = f(d);
    while (b - a > tol * std::max(1.0L, std::abs(a) + std::abs(b))) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    return 0.5L * (a + b);
}

/// Root-translated least-squares scale objective.
inline long double scale_objective(const JointSet& pred, const JointSet& gt, long double s)
{
    long double e = 0.0L;
    for (int t = 0; t < pred.count(); ++t)
        for (int k = 0; k < 3; ++k) {
            const long double p = static_cast<long double>(pred.joints(k, t)) - pred.joints(k, 0);
            const long double q = static_cast<long double>(gt.joints(k, t)) - gt.joints(k, 0);
            e += (s * p - q) * (s * p - q);
        }
    return e;
}

/// Exhaustive KNN-ball oracle: full sort by (distance, index).
inline std::vector<int> knn_sort(const Vec3& c, const Points3& pts, const std::vector<int>& subset, int k, double r)
{
    std::vector<std::pair<double, int>> d;
    for (int i : subset) {
        const double dist = (pts.col(i) - c).norm();
        if (dist <= r)
            d.emplace_back(dist, i);
    }
    std::sort(d.begin(), d.end());
    std::vector<int> out;
    for (std::size_t i = 0; i < d.size() && static_cast<int>(i) < k; ++i)
        out.push_back(d[i].second);
    return out;
}

struct GradientCheck {
    double max_rel_error = 0.0;
    int probes = 0;
    std::string worst_param;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

/// Probes `count` random scalar parameters: analytic gradient (filled by `backprop`) against
/// central differences of `loss` with step h. Relative error uses max(|a|, |n|, floor).
inline GradientCheck check_gradients(const nn::ParamList<double>& params, const std::function<double()>& loss,
                                     const std::function<void()>& backprop, int count, std::uint64_t seed,
                                     double h = 1e-5, double floor = 1e-6)
{
    nn::zero_grad(params);
    backprop();
    std::vector<Eigen::Index> sizes;
    Eigen::Index total = 0;
    for (auto* p : params) {
        sizes.push_back(p->value.size());
        total += p->value.size();
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Eigen::Index> pick(0, total - 1);
    GradientCheck out;
    for (int k = 0; k < count; ++k) {
        Eigen::Index flat = pick(rng);
        std::size_t which = 0;
        while (flat >= sizes[which])
            flat -= sizes[which++];
        auto& value = params[which]->value;
        const double saved = value.data()[flat];
        value.data()[flat] = saved + h;
        const double up = loss();
        value.data()[flat] = saved - h;
        const double down = loss();
        value.data()[flat] = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double analytic = params[which]->grad.data()[flat];
        const double rel = std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), floor});
        if (rel > out.max_rel_error) {
            out.max_rel_error = rel;
            out.worst_param = params[which]->name;
            out.worst_analytic = analytic;
            out.worst_numeric = numeric;
        }
        ++out.probes;
    }
    return out;
}

/// Small model configuration for gradient checks.
inline ModelConfig tiny_model(ModelKind kind, bool scale = false)
{
    ModelConfig m;
    m.kind = kind;
    m.encoder.channels = {4, 4, 4, 4};
    m.encoder.groups = 2;
    m.hidden = {8, 8};
    m.hand_scale_conditioning = scale;
    return m;
}

inline Image random_image(int w, int h, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    Image img(w, h);
    for (Eigen::Index i = 0; i < img.rgb.size(); ++i)
        img.rgb.data()[i] = u(rng);
    return img;
}

inline CameraIntrinsics small_camera(int w, int h)
{
    CameraIntrinsics cam;
    cam.width = w;
    cam.height = h;
    cam.cx = w / 2.0;
    cam.cy = h / 2.0;
    cam.fx = cam.fy = 1.25 * w;
    return cam;
}

/// Max relative error of the full loss gradient for one of the three models on random small inputs.
inline GradientCheck model_gradient_check(ModelKind kind, int probes, std::uint64_t seed)
{
    constexpr int size = 16;
    const CameraIntrinsics cam = small_camera(size, size);
    const Image image = random_image(size, size, seed);
    std::mt19937_64 rng(seed + 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g;
    const ModelConfig cfg = tiny_model(kind, kind == ModelKind::Nvf);
    const SampleContext ctx = make_context(cfg, cam, Vec3(5.0, -3.0, 640.0), 47.0);

    if (kind == ModelKind::Nvf) {
        nn::NvfModel<double> model(cfg);
        model.init(seed);
        const int n = 24;
        Points3 pts(3, n);
        for (int i = 0; i < n; ++i) {
            const double z = 450.0 + 300.0 * u(rng);
            pts.col(i) = Vec3((u(rng) - 0.5) * 0.8 * z, (u(rng) - 0.5) * 0.8 * z, z);
        }
        FieldSet targets(n, cfg.joints);
        for (int i = 0; i < n; ++i) {
            targets.sdf(i) = 16.0 * (u(rng) - 0.5);
            for (int t = 0; t < cfg.joints; ++t)
                targets.set_offset(i, t, {u(rng), Vec3(g(rng), g(rng), g(rng)).normalized()});
        }
        auto params = model.params();
        return check_gradients(
            params,
            [&] { return nn::nvf_objective(model, image, pts, targets, ctx, 0.7, 5.0, 0.0).total; },
            [&] { nn::nvf_objective(model, image, pts, targets, ctx, 0.7, 5.0, 1.0); }, probes, seed + 2);
    }
    if (kind == ModelKind::Holistic) {
        nn::HolisticModel<double> model(cfg);
        model.init(seed);
        JointSet truth;
        truth.joints.resize(3, cfg.joints);
        for (int t = 0; t < cfg.joints; ++t)
            truth.joints.col(t) = ctx.anchor + Vec3(g(rng), g(rng), g(rng)) * 80.0;
        auto params = model.params();
        return check_gradients(
            params, [&] { return nn::holistic_objective(model, image, truth, ctx, 0.0); },
            [&] { nn::holistic_objective(model, image, truth, ctx, 1.0); }, probes, seed + 2);
    }
    nn::Dense2dModel<double> model(cfg);
    model.init(seed);
    const int cells = (size / cfg.stride()) * (size / cfg.stride());
    DenseTargets targets;
    targets.foreground.resize(cells);
    targets.weight.resize(cfg.joints, cells);
    for (int l = 0; l < cells; ++l) {
        targets.foreground(l) = u(rng) < 0.5 ? 1.0 : 0.0;
        for (int t = 0; t < cfg.joints; ++t)
            targets.weight(t, l) = targets.foreground(l) * u(rng);
    }
    targets.joints.resize(3 * cfg.joints);
    for (int r = 0; r < 3 * cfg.joints; ++r)
        targets.joints(r) = 1.5 * g(rng);
    auto params = model.params();
    return check_gradients(
        params, [&] { return nn::dense_objective(model, image, targets, 0.1, 0.0); },
        [&] { nn::dense_objective(model, image, targets, 0.1, 1.0); }, probes, seed + 2);
}

} // namespace nvf::oracle
