#include "nvf/training.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

namespace nvf {

namespace {

/// Runs body(i) for i in [0, n) on up to `threads` workers.
template <typename F>
void parallel_for(std::size_t n, int threads, F&& body)
{
    const auto workers = static_cast<std::size_t>(std::max(1, std::min<int>(threads, static_cast<int>(n))));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error)
                        error = std::current_exception();
                }
            }
        });
    for (auto& t : pool)
        t.join();
    if (error)
        std::rethrow_exception(error);
}

Points3 select_columns(const Points3& m, const std::vector<Eigen::Index>& idx)
{
    Points3 out(3, static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i)
        out.col(static_cast<Eigen::Index>(i)) = m.col(idx[i]);
    return out;
}

FieldSet select_columns(const FieldSet& f, const std::vector<Eigen::Index>& idx)
{
    FieldSet out(static_cast<Eigen::Index>(idx.size()), f.joint_count());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto c = static_cast<Eigen::Index>(i);
        out.sdf(c) = f.sdf(idx[i]);
        out.weight.col(c) = f.weight.col(idx[i]);
        out.direction.col(c) = f.direction.col(idx[i]);
    }
    return out;
}

/// Uniform subset of `count` out of n indices, kept in ascending order.
std::vector<Eigen::Index> random_subset(Eigen::Index n, Eigen::Index count, std::mt19937_64& rng)
{
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    if (count >= n)
        return idx;
    for (Eigen::Index i = 0; i < count; ++i) {
        const auto j = i + std::uniform_int_distribution<Eigen::Index>(0, n - 1 - i)(rng);
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(count));
    std::sort(idx.begin(), idx.end());
    return idx;
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t salt)
{
    return scene_seed(seed ^ 0x9e3779b97f4a7c15ULL * (salt + 1), static_cast<std::size_t>(salt));
}

} // namespace

PoseModel::PoseModel(const ModelConfig& cfg) : cfg_(cfg)
{
    switch (cfg.kind) {
    case ModelKind::Nvf:
        nvf_ = std::make_unique<nn::NvfModel<float>>(cfg);
        break;
    case ModelKind::Holistic:
        holistic_ = std::make_unique<nn::HolisticModel<float>>(cfg);
        break;
    case ModelKind::Dense2d:
        dense_ = std::make_unique<nn::Dense2dModel<float>>(cfg);
        break;
    }
}

void PoseModel::init(std::uint64_t seed)
{
    if (nvf_)
        nvf_->init(seed);
    if (holistic_)
        holistic_->init(seed);
    if (dense_)
        dense_->init(seed);
}

nn::ParamList<float> PoseModel::params()
{
    if (nvf_)
        return nvf_->params();
    if (holistic_)
        return holistic_->params();
    return dense_->params();
}

PoseModel make_model(const RunConfig& cfg)
{
    PoseModel m(cfg.model);
    m.init(mix(cfg.seed, 1));
    return m;
}

SampleContext scene_context(const ModelConfig& model, const SceneRecord& scene)
{
    return make_context(model, scene.cam, scene_root(scene),
                        model.hand_scale_conditioning ? std::optional<double>(scene.hand_scale) : std::nullopt);
}

DenseTargets build_dense_targets(const SceneRecord& scene, const MeshSdf& mesh, const ModelConfig& model,
                                 double radius)
{
    const int stride = model.stride();
    const int w = scene.cam.width / stride;
    const int h = scene.cam.height / stride;
    const int t_count = scene.joints.count();
    const SampleContext ctx = scene_context(model, scene);
    DenseTargets d;
    d.foreground = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(w) * h);
    d.weight = Eigen::MatrixXd::Zero(t_count, static_cast<Eigen::Index>(w) * h);
    d.joints.resize(3 * t_count);
    for (int t = 0; t < t_count; ++t)
        d.joints.segment<3>(3 * t) = (scene.joints[t] - ctx.anchor) / model.coord_scale;
    for (int cy = 0; cy < h; ++cy)
        for (int cx = 0; cx < w; ++cx) {
            const int px = cx * stride + stride / 2;
            const int py = cy * stride + stride / 2;
            if (!scene.mask(py, px))
                continue;
            const Vec3 dir = pixel_ray(scene.cam, px + 0.5, py + 0.5);
            const auto hit = mesh.first_hit(Vec3::Zero(), dir);
            if (!hit)
                continue;
            const Vec3 p = hit->t * dir;
            const Eigen::Index l = static_cast<Eigen::Index>(cy) * w + cx;
            d.foreground(l) = 1.0;
            for (int t = 0; t < t_count; ++t) {
                const double dist = (scene.joints[t] - p).norm();
                if (dist <= radius)
                    d.weight(t, l) = 1.0 - dist / radius;
            }
        }
    return d;
}

TrainingCache build_training_cache(const std::vector<SceneRecord>& scenes, const RunConfig& cfg, bool implicit,
                                   bool dense)
{
    TrainingCache cache;
    cache.scenes.resize(scenes.size());
    parallel_for(scenes.size(), cfg.threads, [&](std::size_t i) {
        const SceneRecord& scene = scenes[i];
        const MeshSdf mesh(scene.mesh);
        SceneTargets& out = cache.scenes[i];
        if (implicit) {
            for (int v = 0; v < cfg.cache_variants; ++v) {
                TrainSampleSpec spec = cfg.sampling;
                spec.seed = mix(scene.seed, 100 + static_cast<std::uint64_t>(v));
                const TrainingPoints pts = sample_training_points(mesh, cfg.sampling_volume(scene_root(scene)), spec);
                out.fields.push_back(build_targets(pts.points, pts.sdf, scene.joints, cfg.voting));
                out.points.push_back(pts.points);
            }
        }
        if (dense)
            out.dense = build_dense_targets(scene, mesh, cfg.model, cfg.voting.radius);
    });
    return cache;
}

std::vector<LossRow> train_model(PoseModel& model, const std::vector<SceneRecord>& scenes,
                                 const TrainingCache& cache, const RunConfig& cfg,
                                 const std::function<void(const LossRow&)>& on_step)
{
    if (scenes.empty())
        throw EmptyBatch("training needs at least one scene");
    if (cache.scenes.size() != scenes.size())
        throw ShapeError("training cache does not match the scene list");
    const nn::ParamList<float> params = model.params();
    nn::RmsProp<float> optimizer(params, cfg.rms_rho, cfg.rms_eps);
    std::mt19937_64 rng(mix(cfg.seed, 2));

    std::vector<std::size_t> order(scenes.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t cursor = 0;
    long epoch = 0;

    const float scale = 1.0f / static_cast<float>(cfg.batch_scenes);
    std::vector<LossRow> rows;
    rows.reserve(static_cast<std::size_t>(cfg.train_steps));
    for (long step = 0; step < cfg.train_steps; ++step) {
        const double lr = nn::step_learning_rate(cfg.learning_rate, step, cfg.train_steps);
        nn::zero_grad(params);
        LossRow row;
        row.step = step;
        row.learning_rate = lr;
        for (int b = 0; b < cfg.batch_scenes; ++b) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
                ++epoch;
            }
            const std::size_t s = order[cursor++];
            const SceneRecord& scene = scenes[s];
            const SampleContext ctx = scene_context(cfg.model, scene);
            switch (model.kind()) {
            case ModelKind::Nvf: {
                const SceneTargets& st = cache.scenes[s];
                if (st.points.empty())
                    throw ShapeError("training cache has no point batches");
                const auto v = static_cast<std::size_t>(epoch % static_cast<long>(st.points.size()));
                const Points3& pts = st.points[v];
                const auto idx = random_subset(pts.cols(), cfg.points_per_step > 0 ? cfg.points_per_step : pts.cols(), rng);
                const LossReport r = nn::nvf_objective<float>(model.nvf(), scene.image, select_columns(pts, idx),
                                                              select_columns(st.fields[v], idx), ctx,
                                                              cfg.effective_lambda(), cfg.voting.delta, scale);
                row.total += r.total / cfg.batch_scenes;
                row.l_s += r.l_s / cfg.batch_scenes;
                row.l_v += r.l_v / cfg.batch_scenes;
                break;
            }
            case ModelKind::Holistic:
                row.total += nn::holistic_objective<float>(model.holistic(), scene.image, scene.joints, ctx, scale) /
                             cfg.batch_scenes;
                break;
            case ModelKind::Dense2d:
                row.total += nn::dense_objective<float>(model.dense(), scene.image, cache.scenes[s].dense,
                                                        cfg.lambda_dense, scale) /
                             cfg.batch_scenes;
                break;
            }
        }
        const double gnorm = nn::gradient_norm(params);
        if (!std::isfinite(row.total) || !std::isfinite(gnorm)) {
            std::string detail = "step " + std::to_string(step) + ", learning rate " + std::to_string(lr) +
                                 ", loss " + std::to_string(row.total) + ", gradient norm " + std::to_string(gnorm);
            for (const auto* p : params)
                detail += ", |grad " + p->name + "| = " + std::to_string(p->grad.norm());
            throw NumericalError(detail);
        }
        optimizer.step(lr);
        rows.push_back(row);
        if (on_step)
            on_step(row);
    }
    return rows;
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRow>& rows)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write " + path.string());
    out << "step,learning_rate,total,l_s,l_v\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%ld,%.9g,%.9g,%.9g,%.9g\n", r.step, r.learning_rate, r.total, r.l_s, r.l_v);
        out << buf;
    }
}

FieldSet predict_field(const nn::NvfModel<float>& model, const nn::FeatureGrid<float>& features,
                       const Points3& points, const SampleContext& ctx, int threads)
{
    constexpr Eigen::Index kChunk = 4096;
    const Eigen::Index n = points.cols();
    const int t_count = model.config().joints;
    FieldSet out(n, t_count);
    const auto chunks = static_cast<std::size_t>((n + kChunk - 1) / kChunk);
    parallel_for(chunks, threads, [&](std::size_t c) {
        const Eigen::Index first = static_cast<Eigen::Index>(c) * kChunk;
        const Eigen::Index count = std::min(kChunk, n - first);
        const nn::FieldHeads<float> h = model.evaluate(features, points.middleCols(first, count), ctx);
        out.sdf.segment(first, count) = h.sdf.cast<double>();
        out.weight.middleCols(first, count) = h.weight.cast<double>();
        out.direction.middleCols(first, count) = h.direction.cast<double>();
    });
    return out;
}

VoteResult vote_dense2d(const DenseFields& fields)
{
    const Eigen::Index cells = fields.foreground.size();
    const int t_count = static_cast<int>(fields.weight.rows());
    if (fields.weight.cols() != cells || fields.joints.cols() != cells || fields.joints.rows() != 3 * t_count)
        throw ShapeError("dense fields have inconsistent shapes");
    std::vector<Eigen::Index> fg;
    for (Eigen::Index l = 0; l < cells; ++l)
        if (fields.foreground(l) > 0.5)
            fg.push_back(l);
    if (fg.empty())
        throw NoValidVoters("no feature cell is foreground");
    VoteResult r;
    r.joints.joints.resize(3, t_count);
    r.valid.assign(static_cast<std::size_t>(t_count), true);
    r.voter_count.assign(static_cast<std::size_t>(t_count), static_cast<int>(fg.size()));
    for (int t = 0; t < t_count; ++t) {
        CompensatedSum<double> sw;
        CompensatedSum<double> sx[3];
        for (Eigen::Index l : fg) {
            const double w = fields.weight(t, l);
            sw.add(w);
            for (int k = 0; k < 3; ++k)
                sx[k].add(w * fields.joints(3 * t + k, l));
        }
        if (sw.value() > 0.0) {
            for (int k = 0; k < 3; ++k)
                r.joints.joints(k, t) = sx[k].value() / sw.value();
        } else {
            for (int k = 0; k < 3; ++k) {
                CompensatedSum<double> m;
                for (Eigen::Index l : fg)
                    m.add(fields.joints(3 * t + k, l));
                r.joints.joints(k, t) = m.value() / static_cast<double>(fg.size());
            }
        }
    }
    return r;
}

int Prediction::invalid_count() const
{
    return static_cast<int>(std::count(valid.begin(), valid.end(), false));
}

Prediction predict(PoseModel& model, const SceneRecord& scene, const RunConfig& cfg)
{
    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    const ModelConfig& mc = model.config();
    const SampleContext ctx = scene_context(mc, scene);
    const auto image = nn::Encoder<float>::to_grid(scene.image);
    Prediction p;
    switch (model.kind()) {
    case ModelKind::Nvf: {
        const Points3 grid = sample_inference_grid(cfg.grid_spec(scene_root(scene)));
        const auto features = model.nvf().encode(image);
        const FieldSet field = predict_field(model.nvf(), features, grid, ctx, cfg.threads);
        VoteResult votes = cast_votes(grid, field, cfg.voting);
        fill_invalid(votes, grid.rowwise().mean());
        p.joints = std::move(votes.joints);
        p.valid = std::move(votes.valid);
        p.query_points = grid.cols();
        break;
    }
    case ModelKind::Holistic:
        p.joints = model.holistic().decode(model.holistic().evaluate(image), ctx);
        p.valid.assign(static_cast<std::size_t>(mc.joints), true);
        p.query_points = 1;
        break;
    case ModelKind::Dense2d: {
        const nn::DenseHeads<float> h = model.dense().evaluate(image);
        DenseFields f;
        f.foreground = h.foreground.cast<double>();
        f.weight = h.weight.cast<double>();
        f.joints = mc.coord_scale * h.joints.cast<double>();
        for (int t = 0; t < mc.joints; ++t)
            f.joints.middleRows(3 * t, 3).colwise() += ctx.anchor;
        p.query_points = f.foreground.size();
        try {
            VoteResult votes = vote_dense2d(f);
            p.joints = std::move(votes.joints);
            p.valid = std::move(votes.valid);
        } catch (const NoValidVoters&) {
            p.joints.joints = ctx.anchor.replicate(1, mc.joints);
            p.valid.assign(static_cast<std::size_t>(mc.joints), false);
        }
        break;
    }
    }
    p.joints.space = mc.space;
    p.seconds = std::chrono::duration<double>(clock::now() - start).count();
    return p;
}

FieldDump predict_grid_field(PoseModel& model, const SceneRecord& scene, const RunConfig& cfg)
{
    if (model.kind() != ModelKind::Nvf)
        throw ConfigError("field dumps need an implicit model");
    FieldDump d;
    d.points = sample_inference_grid(cfg.grid_spec(scene_root(scene)));
    const auto features = model.nvf().encode(nn::Encoder<float>::to_grid(scene.image));
    d.field = predict_field(model.nvf(), features, d.points, scene_context(model.config(), scene), cfg.threads);
    return d;
}

} // namespace nvf
