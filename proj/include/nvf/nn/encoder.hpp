#pragma once

#include "nvf/image.hpp"
#include "nvf/nn/layers.hpp"

namespace nvf::nn {

enum class NormKind { Group, None };

struct EncoderConfig {
    std::vector<int> channels{16, 32, 32, 32};
    std::vector<int> strides{2, 2, 1, 1};
    std::vector<int> dilations{1, 1, 4, 12};
    int kernel = 3;
    NormKind norm = NormKind::Group;
    int groups = 4;

    int stride() const;
    int out_channels() const { return channels.back(); }
    /// Half-width in input pixels of the region that can influence one output cell.
    int receptive_radius() const;
    void validate() const;
};

inline int EncoderConfig::stride() const
{
    int s = 1;
    for (int v : strides)
        s *= v;
    return s;
}

inline int EncoderConfig::receptive_radius() const
{
    int jump = 1;
    int radius = 0;
    for (std::size_t i = 0; i < strides.size(); ++i) {
        radius += dilations[i] * (kernel - 1) / 2 * jump;
        jump *= strides[i];
    }
    return radius;
}

inline void EncoderConfig::validate() const
{
    if (channels.empty() || channels.size() != strides.size() || channels.size() != dilations.size())
        throw ConfigError("encoder channels, strides and dilations must have equal nonzero length");
    if (kernel < 1 || kernel % 2 == 0)
        throw ConfigError("encoder kernel must be odd");
    for (std::size_t i = 0; i < channels.size(); ++i) {
        if (channels[i] <= 0 || strides[i] <= 0 || dilations[i] <= 0)
            throw ConfigError("encoder sizes must be positive");
        if (norm == NormKind::Group && channels[i] % groups != 0)
            throw ConfigError("encoder channels must be divisible by the group count");
    }
}

/// Conv -> [GroupNorm] -> SiLU blocks; output stride is the product of block strides.
template <typename S>
class Encoder {
public:
    Encoder() = default;
    explicit Encoder(const EncoderConfig& cfg) : cfg_(cfg)
    {
        cfg.validate();
        int in = 3;
        for (std::size_t i = 0; i < cfg.channels.size(); ++i) {
            const std::string name = "encoder.block" + std::to_string(i);
            Block b;
            b.conv = Conv2d<S>(name + ".conv", in, cfg.channels[i], cfg.kernel, cfg.strides[i], cfg.dilations[i]);
            if (cfg.norm == NormKind::Group)
                b.norm = GroupNorm<S>(name + ".norm", cfg.channels[i], cfg.groups);
            blocks_.push_back(std::move(b));
            in = cfg.channels[i];
        }
    }

    const EncoderConfig& config() const { return cfg_; }
    int stride() const { return cfg_.stride(); }
    int channels() const { return cfg_.out_channels(); }

    void init(Rng& rng)
    {
        for (auto& b : blocks_) {
            b.conv.init(rng);
            b.norm.init(rng);
        }
    }

    static FeatureGrid<S> to_grid(const Image& image)
    {
        FeatureGrid<S> g;
        g.height = image.height;
        g.width = image.width;
        g.data = image.rgb.template cast<S>();
        return g;
    }

    void check_input(const FeatureGrid<S>& x) const
    {
        const int s = stride();
        if (x.channels() != 3 || x.height % s != 0 || x.width % s != 0)
            throw ShapeError("encoder expects 3 channels with height and width divisible by " + std::to_string(s) +
                             ", got " + std::to_string(x.channels()) + "x" + std::to_string(x.height) + "x" +
                             std::to_string(x.width));
    }

    FeatureGrid<S> apply(const FeatureGrid<S>& x) const
    {
        check_input(x);
        FeatureGrid<S> h = x;
        for (const auto& b : blocks_) {
            h = b.conv.apply(h);
            if (cfg_.norm == NormKind::Group)
                h = b.norm.apply(h);
            h.data = silu(h.data);
        }
        return h;
    }

    FeatureGrid<S> forward(const FeatureGrid<S>& x)
    {
        check_input(x);
        FeatureGrid<S> h = x;
        for (auto& b : blocks_) {
            h = b.conv.forward(h);
            if (cfg_.norm == NormKind::Group)
                h = b.norm.forward(h);
            b.pre = h.data;
            h.data = silu(h.data);
        }
        return h;
    }

    /// Returns the gradient with respect to the image.
    FeatureGrid<S> backward(const FeatureGrid<S>& dy)
    {
        FeatureGrid<S> g = dy;
        for (std::size_t i = blocks_.size(); i-- > 0;) {
            auto& b = blocks_[i];
            g.data = silu_backward(b.pre, g.data);
            if (cfg_.norm == NormKind::Group)
                g = b.norm.backward(g);
            g = b.conv.backward(g);
        }
        return g;
    }

    void collect(ParamList<S>& out)
    {
        for (auto& b : blocks_) {
            b.conv.collect(out);
            if (cfg_.norm == NormKind::Group)
                b.norm.collect(out);
        }
    }

private:
    struct Block {
        Conv2d<S> conv;
        GroupNorm<S> norm;
        Mat<S> pre;
    };

    EncoderConfig cfg_;
    std::vector<Block> blocks_;
};

} // namespace nvf::nn
