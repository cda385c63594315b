// nvf: dataset generation, training, inference, evaluation, ablation and rendering.

#include "nvf/checkpoint.hpp"
#include "nvf/evaluation.hpp"
#include "nvf/marching_cubes.hpp"
#include "nvf/mesh_io.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace nvf;

namespace {

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

LogLevel log_level()
{
    const char* env = std::getenv("NVF_LOG");
    if (!env)
        return LogLevel::Info;
    const std::string v = env;
    if (v == "error")
        return LogLevel::Error;
    if (v == "debug")
        return LogLevel::Debug;
    if (v == "info")
        return LogLevel::Info;
    throw ConfigError("NVF_LOG must be error, info or debug");
}

void log(LogLevel level, const std::string& msg)
{
    if (level <= log_level())
        std::cerr << (level == LogLevel::Debug ? "[debug] " : "[info] ") << msg << '\n';
}

/// Outputs written by the running command, removed again if it fails.
class OutputTracker {
public:
    void file(const fs::path& p) { paths_.push_back(p); }
    void directory(const fs::path& p)
    {
        if (!fs::exists(p)) {
            fs::create_directories(p);
            paths_.push_back(p);
        }
    }
    void rollback() noexcept
    {
        for (auto it = paths_.rbegin(); it != paths_.rend(); ++it) {
            std::error_code ec;
            fs::remove_all(*it, ec);
        }
        paths_.clear();
    }

private:
    std::vector<fs::path> paths_;
};

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string mode;
    std::string model;
    std::string out;
    std::optional<int> threads;
    bool deterministic = false;
    std::vector<std::string> set;

    std::string scenes;
    std::string checkpoint;
    std::optional<std::size_t> count;
    int scene = 0;
    bool dump_sdf = false;
    std::string param;
    std::vector<double> values;
    double render_pitch = 4.0;
};

RunConfig resolve_config(const Options& o)
{
    RunConfig cfg;
    if (!o.config.empty())
        cfg = load_config(o.config);
    for (const auto& kv : o.set)
        apply_config_text(cfg, kv);
    if (o.seed)
        cfg.seed = *o.seed;
    if (!o.mode.empty())
        cfg.model.space = parse_pose_space(o.mode);
    if (!o.model.empty())
        cfg.model.kind = parse_model_kind(o.model);
    if (o.threads)
        cfg.threads = *o.threads;
    if (o.deterministic)
        cfg.deterministic = true;
    if (cfg.deterministic)
        cfg.threads = 1;
    cfg.sync();
    cfg.validate();
    return cfg;
}

/// Run config for a trained model: architecture from the checkpoint, everything else from `cfg`.
RunConfig with_checkpoint_model(const RunConfig& cfg, const CheckpointInfo& info)
{
    RunConfig out = cfg;
    const RunConfig trained = parse_config(info.config);
    out.model = trained.model;
    out.sync();
    return out;
}

PoseModel load_model(const RunConfig& cfg, const fs::path& path, RunConfig& effective)
{
    const CheckpointInfo info = read_checkpoint_info(path);
    effective = with_checkpoint_model(cfg, info);
    PoseModel model(effective.model);
    load_checkpoint(path, to_string(effective.model.kind), model.params());
    return model;
}

std::string scenes_dir(const Options& o, const std::string& fallback) { return o.scenes.empty() ? fallback : o.scenes; }

void cmd_gen(const Options& o, OutputTracker& out)
{
    RunConfig cfg = resolve_config(o);
    const fs::path dir = o.out.empty() ? fs::path(cfg.train_dir) : fs::path(o.out);
    const std::size_t n = o.count ? *o.count : cfg.gen_count;
    log(LogLevel::Info, "generating " + std::to_string(n) + " scenes into " + dir.string());
    out.directory(dir);
    const auto scenes = generate_dataset(n, cfg.ranges, cfg.camera, cfg.seed, cfg.scene, cfg.threads);
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "scene_%05zu", i);
        out.file(dir / name);
    }
    write_dataset(dir, scenes);
}

void cmd_train(const Options& o, OutputTracker& out)
{
    RunConfig cfg = resolve_config(o);
    const fs::path ckpt = o.out.empty() ? fs::path("model.nvf") : fs::path(o.out);
    const auto scenes = read_dataset(scenes_dir(o, cfg.train_dir));
    log(LogLevel::Info, "training " + to_string(cfg.model.kind) + " (" + to_string(cfg.model.space) + ") on " +
                            std::to_string(scenes.size()) + " scenes");
    const TrainingCache cache =
        build_training_cache(scenes, cfg, cfg.model.kind == ModelKind::Nvf, cfg.model.kind == ModelKind::Dense2d);
    PoseModel model = make_model(cfg);
    const auto rows = train_model(model, scenes, cache, cfg, [&](const LossRow& r) {
        if (r.step % 100 == 0 || log_level() == LogLevel::Debug)
            log(r.step % 100 == 0 ? LogLevel::Info : LogLevel::Debug,
                "step " + std::to_string(r.step) + " loss " + std::to_string(r.total));
    });
    if (ckpt.has_parent_path())
        out.directory(ckpt.parent_path());
    out.file(ckpt);
    save_checkpoint(ckpt, to_string(cfg.model.kind), serialize_config(cfg), model.params());
    fs::path loss = ckpt;
    loss.replace_extension(".loss.csv");
    out.file(loss);
    write_loss_csv(loss, rows);
}

void cmd_infer(const Options& o, OutputTracker& out)
{
    const RunConfig base = resolve_config(o);
    RunConfig cfg;
    PoseModel model = load_model(base, o.checkpoint, cfg);
    const fs::path dir = o.out.empty() ? fs::path("predictions") : fs::path(o.out);
    const auto scenes = read_dataset(scenes_dir(o, cfg.eval_dir));
    out.directory(dir);
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        char name[48];
        std::snprintf(name, sizeof name, "scene_%05zu", i);
        const Prediction p = predict(model, scenes[i], cfg);
        const fs::path jpath = dir / (std::string(name) + ".joints.json");
        out.file(jpath);
        std::ofstream(jpath) << joints_to_json(p.joints, &p.valid) << '\n';
        if (o.dump_sdf && model.kind() == ModelKind::Nvf) {
            const FieldDump d = predict_grid_field(model, scenes[i], cfg);
            const fs::path gpath = dir / (std::string(name) + ".grid.bin");
            const fs::path spath = dir / (std::string(name) + ".sdf.bin");
            out.file(gpath);
            out.file(spath);
            write_point_dump(gpath, d.points);
            std::ofstream s(spath, std::ios::binary);
            const auto count = static_cast<std::uint64_t>(d.field.size());
            s.write(reinterpret_cast<const char*>(&count), sizeof count);
            for (Eigen::Index k = 0; k < d.field.size(); ++k) {
                const auto v = static_cast<float>(d.field.sdf(k));
                s.write(reinterpret_cast<const char*>(&v), sizeof v);
            }
        }
    }
}

void write_rows(const fs::path& path, const std::vector<AblationRow>& rows, bool timing, OutputTracker& out)
{
    if (path.has_parent_path())
        out.directory(path.parent_path());
    out.file(path);
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot write " + path.string());
    write_metric_csv(f, rows, timing);
}

void cmd_eval(const Options& o, OutputTracker& out)
{
    const RunConfig base = resolve_config(o);
    RunConfig cfg;
    PoseModel model = load_model(base, o.checkpoint, cfg);
    const auto scenes = read_dataset(scenes_dir(o, cfg.eval_dir));
    const MetricReport r = evaluate_model(model, scenes, cfg);
    log(LogLevel::Info, "cs_mje " + std::to_string(r.cs_mje) + " mm over " + std::to_string(r.n_samples) + " scenes");
    write_rows(o.out.empty() ? fs::path("eval.csv") : fs::path(o.out), eval_rows(r), !cfg.deterministic, out);
}

void cmd_ablate(const Options& o, OutputTracker& out)
{
    const RunConfig base = resolve_config(o);
    RunConfig cfg;
    PoseModel model = load_model(base, o.checkpoint, cfg);
    const auto scenes = read_dataset(scenes_dir(o, cfg.eval_dir));
    const std::string param = o.param.empty() ? cfg.ablation_param : o.param;
    const std::vector<double> values = o.values.empty() ? cfg.ablation_values : o.values;
    const auto rows = run_ablation(model, scenes, cfg, param, values);
    write_rows(o.out.empty() ? fs::path("ablation.csv") : fs::path(o.out), rows, !cfg.deterministic, out);
}

std::array<std::uint8_t, 3> gray(double w)
{
    const auto v = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(w, 0.0, 1.0)));
    return {v, v, v};
}

void cmd_render(const Options& o, OutputTracker& out)
{
    const RunConfig base = resolve_config(o);
    RunConfig cfg;
    PoseModel model = load_model(base, o.checkpoint, cfg);
    if (model.kind() != ModelKind::Nvf)
        throw ConfigError("render needs an implicit model checkpoint");
    const auto scenes = read_dataset(scenes_dir(o, cfg.eval_dir));
    if (o.scene < 0 || static_cast<std::size_t>(o.scene) >= scenes.size())
        throw ConfigError("scene index " + std::to_string(o.scene) + " out of range");
    const SceneRecord& scene = scenes[static_cast<std::size_t>(o.scene)];
    const fs::path dir = o.out.empty() ? fs::path("render") : fs::path(o.out);
    out.directory(dir);

    const Prediction p = predict(model, scene, cfg);
    const Vec3 center = cfg.space() == PoseSpace::Camera ? p.joints.centroid() : scene_root(scene);
    const double h = cfg.cube_half_extent;
    const int n = static_cast<int>(std::ceil(2.0 * h / o.render_pitch)) + 1;
    const Vec3 origin = center - Vec3::Constant(h);
    Points3 nodes(3, static_cast<Eigen::Index>(n) * n * n);
    Eigen::Index col = 0;
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i)
                nodes.col(col++) = origin + o.render_pitch * Vec3(i, j, k);
    // Nodes behind the camera cannot be projected; keep them outside the surface.
    std::vector<Eigen::Index> visible;
    for (Eigen::Index c = 0; c < nodes.cols(); ++c)
        if (nodes(2, c) > 1.0)
            visible.push_back(c);
    Points3 query(3, static_cast<Eigen::Index>(visible.size()));
    for (std::size_t i = 0; i < visible.size(); ++i)
        query.col(static_cast<Eigen::Index>(i)) = nodes.col(visible[i]);
    const auto features = model.nvf().encode(nn::Encoder<float>::to_grid(scene.image));
    const FieldSet field = predict_field(model.nvf(), features, query, scene_context(cfg.model, scene), cfg.threads);

    ScalarGrid grid;
    grid.origin = origin;
    grid.pitch = o.render_pitch;
    grid.dims = Eigen::Array3i::Constant(n);
    grid.values.assign(static_cast<std::size_t>(nodes.cols()), cfg.voting.delta);
    for (std::size_t i = 0; i < visible.size(); ++i)
        grid.values[static_cast<std::size_t>(visible[i])] = field.sdf(static_cast<Eigen::Index>(i));
    const fs::path mesh_path = dir / "surface.obj";
    out.file(mesh_path);
    write_obj(mesh_path, marching_cubes(grid, 0.0));

    std::vector<Eigen::Index> near;
    for (Eigen::Index i = 0; i < field.size(); ++i)
        if (std::abs(field.sdf(i)) < cfg.voting.delta)
            near.push_back(i);
    Points3 pts(3, static_cast<Eigen::Index>(near.size()));
    for (std::size_t i = 0; i < near.size(); ++i)
        pts.col(static_cast<Eigen::Index>(i)) = query.col(near[i]);
    for (int t = 0; t < field.joint_count(); ++t) {
        std::vector<std::array<std::uint8_t, 3>> colors;
        for (Eigen::Index i : near)
            colors.push_back(gray(field.weight(t, i)));
        char name[32];
        std::snprintf(name, sizeof name, "votes_joint%02d.ply", t);
        out.file(dir / name);
        write_point_cloud_ply(dir / name, pts, colors);
    }
    const fs::path jpath = dir / "joints.json";
    out.file(jpath);
    std::ofstream(jpath) << joints_to_json(p.joints, &p.valid) << '\n';
}

std::string one_line(std::string s)
{
    for (char& c : s)
        if (c == '\n' || c == '\r')
            c = ' ';
    return s;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Neural voting field hand pose pipeline"};
    app.footer(config_help());
    app.require_subcommand(1);
    Options o;

    auto common = [&o](CLI::App* sub) {
        sub->add_option("--config", o.config, "config file (key = value lines)");
        sub->add_option("--seed", o.seed, "base seed (u64)");
        sub->add_option("--mode", o.mode, "camera_space or root_relative");
        sub->add_option("--model", o.model, "nvf, baseline=holistic or baseline=dense2d");
        sub->add_option("--out", o.out, "output path");
        sub->add_option("--threads", o.threads, "worker cap");
        sub->add_flag("--deterministic", o.deterministic, "sequential reductions, timing-free outputs");
        sub->add_option("--set", o.set, "override a config key, KEY=VALUE");
    };

    auto* gen = app.add_subcommand("gen", "generate a synthetic scene dataset");
    common(gen);
    gen->add_option("--count", o.count, "number of scenes");

    auto* train = app.add_subcommand("train", "train a model and write a checkpoint plus loss CSV");
    common(train);
    train->add_option("--scenes", o.scenes, "training scene directory");

    auto* infer = app.add_subcommand("infer", "predict joints for every scene");
    common(infer);
    infer->add_option("--checkpoint", o.checkpoint, "model checkpoint")->required();
    infer->add_option("--scenes", o.scenes, "scene directory");
    infer->add_flag("--dump-sdf", o.dump_sdf, "also write grid points and predicted SDF");

    auto* eval = app.add_subcommand("eval", "per-scene and summary metrics as CSV");
    common(eval);
    eval->add_option("--checkpoint", o.checkpoint, "model checkpoint")->required();
    eval->add_option("--scenes", o.scenes, "scene directory");

    auto* ablate = app.add_subcommand("ablate", "metric sweep over delta, knn, fraction or step");
    common(ablate);
    ablate->add_option("--checkpoint", o.checkpoint, "model checkpoint")->required();
    ablate->add_option("--scenes", o.scenes, "scene directory");
    ablate->add_option("--param", o.param, "swept parameter");
    ablate->add_option("--values", o.values, "sweep values")->delimiter(',');

    auto* render = app.add_subcommand("render", "surface OBJ and per-joint vote-weight PLYs for one scene");
    common(render);
    render->add_option("--checkpoint", o.checkpoint, "model checkpoint")->required();
    render->add_option("--scenes", o.scenes, "scene directory");
    render->add_option("--scene", o.scene, "scene index");
    render->add_option("--pitch", o.render_pitch, "surface grid pitch (mm)");

    CLI11_PARSE(app, argc, argv);

    OutputTracker out;
    try {
        if (*gen)
            cmd_gen(o, out);
        else if (*train)
            cmd_train(o, out);
        else if (*infer)
            cmd_infer(o, out);
        else if (*eval)
            cmd_eval(o, out);
        else if (*ablate)
            cmd_ablate(o, out);
        else if (*render)
            cmd_render(o, out);
    } catch (const Error& e) {
        out.rollback();
        std::cerr << "error: " << one_line(e.what()) << '\n';
        return 1;
    } catch (const std::exception& e) {
        out.rollback();
        std::cerr << "error: Internal: " << one_line(e.what()) << '\n';
        return 1;
    }
    return 0;
}
