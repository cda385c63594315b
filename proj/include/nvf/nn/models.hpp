#pragma once

#include "nvf/nn/encoder.hpp"
#include "nvf/nn/losses.hpp"

#include <optional>

namespace nvf {

enum class ModelKind { Nvf, Holistic, Dense2d };

std::string to_string(ModelKind kind);
/// Accepts "nvf", "holistic", "dense2d", optionally prefixed with "baseline=".
ModelKind parse_model_kind(const std::string& text);

struct ModelConfig {
    ModelKind kind = ModelKind::Nvf;
    int joints = kJointCount;
    nn::EncoderConfig encoder;
    std::vector<int> hidden{128, 64, 64, 32};
    bool hand_scale_conditioning = false;
    PoseSpace space = PoseSpace::Camera;
    double z_near = 300.0;
    double z_far = 1000.0;
    double cube_half_extent = 160.0;
    double hand_scale_reference = 45.0;
    double hand_scale_spread = 0.25;
    double coord_scale = 100.0; ///< mm per unit for regressed joint coordinates

    int stride() const { return encoder.stride(); }
    int input_width() const;
    int output_width() const;
    void validate() const;
};

/// Per-image context shared by every query of that image.
struct SampleContext {
    CameraIntrinsics cam;
    /// Camera mode: centre of the depth range on the optical axis. Root mode: the root-cube centre.
    Vec3 anchor = Vec3(0.0, 0.0, 650.0);
    std::optional<double> hand_scale;
};

SampleContext make_context(const ModelConfig& cfg, const CameraIntrinsics& cam, const Vec3& root,
                           std::optional<double> hand_scale);

namespace nn {

template <typename S>
struct FieldHeads {
    Vec<S> sdf;          ///< N
    Mat<S> weight;       ///< T x N, in (0, 1)
    Mat<S> direction;    ///< 3T x N, unit or zero
};

/// Pixel-aligned implicit function: (feature at projection, depth [, hand scale]) -> (s, T x (w, d)).
template <typename S>
class NvfModel {
public:
    explicit NvfModel(const ModelConfig& cfg)
        : cfg_(cfg), encoder_(cfg.encoder), mlp_("mlp", layer_sizes(cfg))
    {
        cfg.validate();
    }

    const ModelConfig& config() const { return cfg_; }

    void init(std::uint64_t seed)
    {
        Rng rng(seed);
        encoder_.init(rng);
        mlp_.init(rng);
    }

    ParamList<S> params()
    {
        ParamList<S> out;
        encoder_.collect(out);
        mlp_.collect(out);
        return out;
    }

    FeatureGrid<S> encode(const FeatureGrid<S>& image) const { return encoder_.apply(image); }

    /// MLP input columns for `points`; also returns the bilinear taps used.
    Mat<S> inputs(const FeatureGrid<S>& features, const Points3& points, const SampleContext& ctx,
                  BilinearTaps<S>& taps) const
    {
        const Eigen::Index n = points.cols();
        Eigen::Matrix2Xd uv(2, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const PixelUV p = project(points.col(i), ctx.cam);
            uv(0, i) = p.u;
            uv(1, i) = p.v;
        }
        taps = bilinear_taps<S>(uv, cfg_.stride(), features.width, features.height);
        Mat<S> x(mlp_.in(), n);
        const int c = features.channels();
        x.topRows(c) = gather(features, taps);
        for (Eigen::Index i = 0; i < n; ++i)
            x(c, i) = static_cast<S>(normalized_depth(points(2, i), ctx));
        if (cfg_.hand_scale_conditioning) {
            if (!ctx.hand_scale)
                throw ConfigError("model is conditioned on hand scale but none was given");
            x.row(c + 1).setConstant(static_cast<S>(normalized_hand_scale(*ctx.hand_scale)));
        }
        return x;
    }

    double normalized_depth(double z, const SampleContext& ctx) const
    {
        if (cfg_.space == PoseSpace::Camera)
            return 2.0 * (z - cfg_.z_near) / (cfg_.z_far - cfg_.z_near) - 1.0;
        return (z - ctx.anchor.z()) / cfg_.cube_half_extent;
    }

    double normalized_hand_scale(double hs) const
    {
        return (hs / cfg_.hand_scale_reference - 1.0) / cfg_.hand_scale_spread;
    }

    FieldHeads<S> heads(const Mat<S>& raw) const
    {
        const int t = cfg_.joints;
        FieldHeads<S> h;
        h.sdf = raw.row(0).transpose();
        h.weight = sigmoid(raw.middleRows(1, t).array()).matrix();
        h.direction = raw.middleRows(1 + t, 3 * t);
        for (Eigen::Index i = 0; i < raw.cols(); ++i)
            for (int j = 0; j < t; ++j) {
                auto d = h.direction.template block<3, 1>(3 * j, i);
                const S norm = d.norm();
                if (norm > S(1e-8))
                    d /= norm;
                else
                    d.setZero();
            }
        return h;
    }

    /// Inference on an already encoded image.
    FieldHeads<S> evaluate(const FeatureGrid<S>& features, const Points3& points, const SampleContext& ctx) const
    {
        BilinearTaps<S> taps;
        return heads(mlp_.infer(inputs(features, points, ctx, taps)));
    }

    /// Training forward pass; caches what backward() needs.
    FieldHeads<S> forward(const FeatureGrid<S>& image, const Points3& points, const SampleContext& ctx)
    {
        features_ = encoder_.forward(image);
        const Mat<S> x = inputs(features_, points, ctx, taps_);
        raw_ = mlp_.forward(x);
        out_ = heads(raw_);
        return out_;
    }

    void backward(const Vec<S>& d_sdf, const Mat<S>& d_weight, const Mat<S>& d_direction)
    {
        const int t = cfg_.joints;
        Mat<S> draw(raw_.rows(), raw_.cols());
        draw.row(0) = d_sdf.transpose();
        draw.middleRows(1, t) = (d_weight.array() * out_.weight.array() * (S(1) - out_.weight.array())).matrix();
        for (Eigen::Index i = 0; i < raw_.cols(); ++i)
            for (int j = 0; j < t; ++j) {
                const auto r = raw_.template block<3, 1>(1 + t + 3 * j, i);
                const S norm = r.norm();
                auto g = draw.template block<3, 1>(1 + t + 3 * j, i);
                if (norm > S(1e-8)) {
                    const auto d = out_.direction.template block<3, 1>(3 * j, i);
                    const auto gd = d_direction.template block<3, 1>(3 * j, i);
                    g = (gd - d * d.dot(gd)) / norm;
                } else {
                    g.setZero();
                }
            }
        const Mat<S> dx = mlp_.backward(draw);
        FeatureGrid<S> dF;
        dF.height = features_.height;
        dF.width = features_.width;
        dF.data = Mat<S>::Zero(features_.data.rows(), features_.data.cols());
        scatter<S>(dx.topRows(features_.channels()), taps_, dF);
        encoder_.backward(dF);
    }

private:
    static std::vector<int> layer_sizes(const ModelConfig& cfg)
    {
        std::vector<int> sizes{cfg.encoder.out_channels() + 1 + (cfg.hand_scale_conditioning ? 1 : 0)};
        sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
        sizes.push_back(1 + 4 * cfg.joints);
        return sizes;
    }

    ModelConfig cfg_;
    Encoder<S> encoder_;
    Mlp<S> mlp_;
    FeatureGrid<S> features_;
    BilinearTaps<S> taps_;
    Mat<S> raw_;
    FieldHeads<S> out_;
};

/// Global average pooling followed by an MLP regressing 3T normalized coordinates.
template <typename S>
class HolisticModel {
public:
    explicit HolisticModel(const ModelConfig& cfg)
        : cfg_(cfg), encoder_(cfg.encoder), mlp_("mlp", layer_sizes(cfg))
    {
        cfg.validate();
    }

    const ModelConfig& config() const { return cfg_; }

    void init(std::uint64_t seed)
    {
        Rng rng(seed);
        encoder_.init(rng);
        mlp_.init(rng);
    }

    ParamList<S> params()
    {
        ParamList<S> out;
        encoder_.collect(out);
        mlp_.collect(out);
        return out;
    }

    static Vec<S> pool(const FeatureGrid<S>& features) { return features.data.rowwise().mean(); }

    Vec<S> evaluate(const FeatureGrid<S>& image) const { return mlp_.infer(pool(encoder_.apply(image))); }

    Vec<S> forward(const FeatureGrid<S>& image)
    {
        const FeatureGrid<S> f = encoder_.forward(image);
        height_ = f.height;
        width_ = f.width;
        return mlp_.forward(pool(f));
    }

    void backward(const Vec<S>& dout)
    {
        const Vec<S> dpool = mlp_.backward(dout);
        FeatureGrid<S> dF;
        dF.height = height_;
        dF.width = width_;
        const auto cells = static_cast<Eigen::Index>(height_) * width_;
        dF.data = (dpool / static_cast<S>(cells)).replicate(1, cells);
        encoder_.backward(dF);
    }

    /// Normalized output to camera-frame joints.
    JointSet decode(const Vec<S>& out, const SampleContext& ctx) const
    {
        JointSet j;
        j.space = cfg_.space;
        j.joints.resize(3, cfg_.joints);
        for (int t = 0; t < cfg_.joints; ++t)
            j.joints.col(t) = ctx.anchor + cfg_.coord_scale * out.template segment<3>(3 * t).template cast<double>();
        return j;
    }

private:
    static std::vector<int> layer_sizes(const ModelConfig& cfg)
    {
        std::vector<int> sizes{cfg.encoder.out_channels()};
        sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
        sizes.push_back(3 * cfg.joints);
        return sizes;
    }

    ModelConfig cfg_;
    Encoder<S> encoder_;
    Mlp<S> mlp_;
    int height_ = 0;
    int width_ = 0;
};

template <typename S>
struct DenseHeads {
    Vec<S> foreground; ///< L, in (0, 1)
    Mat<S> weight;     ///< T x L, in (0, 1)
    Mat<S> joints;     ///< 3T x L, normalized coordinates
};

/// Per-feature-cell foreground probability, vote weights and joint coordinates.
template <typename S>
class Dense2dModel {
public:
    explicit Dense2dModel(const ModelConfig& cfg)
        : cfg_(cfg), encoder_(cfg.encoder), mlp_("mlp", layer_sizes(cfg))
    {
        cfg.validate();
    }

    const ModelConfig& config() const { return cfg_; }

    void init(std::uint64_t seed)
    {
        Rng rng(seed);
        encoder_.init(rng);
        mlp_.init(rng);
    }

    ParamList<S> params()
    {
        ParamList<S> out;
        encoder_.collect(out);
        mlp_.collect(out);
        return out;
    }

    DenseHeads<S> heads(const Mat<S>& raw) const
    {
        const int t = cfg_.joints;
        DenseHeads<S> h;
        h.foreground = sigmoid(raw.row(0).array()).matrix().transpose();
        h.weight = sigmoid(raw.middleRows(1, t).array()).matrix();
        h.joints = raw.middleRows(1 + t, 3 * t);
        return h;
    }

    DenseHeads<S> evaluate(const FeatureGrid<S>& image) const { return heads(mlp_.infer(encoder_.apply(image).data)); }

    DenseHeads<S> forward(const FeatureGrid<S>& image)
    {
        const FeatureGrid<S> f = encoder_.forward(image);
        height_ = f.height;
        width_ = f.width;
        out_ = heads(mlp_.forward(f.data));
        return out_;
    }

    void backward(const Vec<S>& d_fg, const Mat<S>& d_weight, const Mat<S>& d_joints)
    {
        const int t = cfg_.joints;
        Mat<S> draw(1 + 4 * t, out_.foreground.size());
        draw.row(0) = (d_fg.array() * out_.foreground.array() * (S(1) - out_.foreground.array())).matrix().transpose();
        draw.middleRows(1, t) = (d_weight.array() * out_.weight.array() * (S(1) - out_.weight.array())).matrix();
        draw.middleRows(1 + t, 3 * t) = d_joints;
        FeatureGrid<S> dF;
        dF.height = height_;
        dF.width = width_;
        dF.data = mlp_.backward(draw);
        encoder_.backward(dF);
    }

private:
    static std::vector<int> layer_sizes(const ModelConfig& cfg)
    {
        std::vector<int> sizes{cfg.encoder.out_channels()};
        sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
        sizes.push_back(1 + 4 * cfg.joints);
        return sizes;
    }

    ModelConfig cfg_;
    Encoder<S> encoder_;
    Mlp<S> mlp_;
    int height_ = 0;
    int width_ = 0;
    DenseHeads<S> out_;
};

} // namespace nn
} // namespace nvf
