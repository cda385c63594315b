#pragma once

#include "nvf/common.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace nvf::nn {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using Rng = std::mt19937_64;

/// A trainable tensor with its accumulated gradient.
template <typename S>
struct Param {
    std::string name;
    Mat<S> value;
    Mat<S> grad;

    Param() = default;
    Param(std::string n, Eigen::Index rows, Eigen::Index cols)
        : name(std::move(n)), value(Mat<S>::Zero(rows, cols)), grad(Mat<S>::Zero(rows, cols))
    {
    }
};

template <typename S>
using ParamList = std::vector<Param<S>*>;

template <typename S>
void zero_grad(const ParamList<S>& params)
{
    for (auto* p : params)
        p->grad.setZero(p->value.rows(), p->value.cols());
}

template <typename S>
void xavier_uniform(Param<S>& p, int fan_in, int fan_out, Rng& rng)
{
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-a, a);
    for (Eigen::Index i = 0; i < p.value.size(); ++i)
        p.value.data()[i] = static_cast<S>(u(rng));
}

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& x)
{
    using S = typename Derived::Scalar;
    return S(1) / (S(1) + (-x).exp());
}

/// x * sigmoid(x).
template <typename S>
Mat<S> silu(const Mat<S>& x)
{
    return (x.array() * sigmoid(x.array())).matrix();
}

template <typename S>
Mat<S> silu_backward(const Mat<S>& x, const Mat<S>& dy)
{
    const auto s = sigmoid(x.array()).eval();
    return (dy.array() * (s * (S(1) + x.array() * (S(1) - s)))).matrix();
}

/// y = W x + b, one column per sample.
template <typename S>
class Linear {
public:
    Linear() = default;
    Linear(const std::string& name, int in, int out)
        : weight_(name + ".weight", out, in), bias_(name + ".bias", out, 1)
    {
    }

    void init(Rng& rng)
    {
        xavier_uniform(weight_, in(), out(), rng);
        bias_.value.setZero();
    }

    int in() const { return static_cast<int>(weight_.value.cols()); }
    int out() const { return static_cast<int>(weight_.value.rows()); }
    Param<S>& weight() { return weight_; }

    Mat<S> apply(const Mat<S>& x) const
    {
        Mat<S> y = weight_.value * x;
        y.colwise() += bias_.value.col(0);
        return y;
    }

    Mat<S> forward(const Mat<S>& x)
    {
        input_ = x;
        return apply(x);
    }

    Mat<S> backward(const Mat<S>& dy)
    {
        weight_.grad.noalias() += dy * input_.transpose();
        bias_.grad.col(0) += dy.rowwise().sum();
        return weight_.value.transpose() * dy;
    }

    void collect(ParamList<S>& out)
    {
        out.push_back(&weight_);
        out.push_back(&bias_);
    }

private:
    Param<S> weight_;
    Param<S> bias_;
    Mat<S> input_;
};

/// Fully connected stack with SiLU between layers and a linear output.
template <typename S>
class Mlp {
public:
    Mlp() = default;
    Mlp(const std::string& name, const std::vector<int>& sizes)
    {
        if (sizes.size() < 2)
            throw ShapeError("MLP needs input and output sizes");
        for (std::size_t i = 0; i + 1 < sizes.size(); ++i)
            layers_.emplace_back(name + ".fc" + std::to_string(i), sizes[i], sizes[i + 1]);
    }

    void init(Rng& rng)
    {
        for (auto& l : layers_)
            l.init(rng);
    }

    int in() const { return layers_.front().in(); }
    int out() const { return layers_.back().out(); }

    Mat<S> infer(const Mat<S>& x) const
    {
        Mat<S> h = x;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            h = layers_[i].apply(h);
            if (i + 1 < layers_.size())
                h = silu(h);
        }
        return h;
    }

    Mat<S> forward(const Mat<S>& x)
    {
        if (x.rows() != in())
            throw ShapeError("MLP input has " + std::to_string(x.rows()) + " rows, expected " + std::to_string(in()));
        pre_.resize(layers_.size());
        Mat<S> h = x;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            h = layers_[i].forward(h);
            if (i + 1 < layers_.size()) {
                pre_[i] = h;
                h = silu(h);
            }
        }
        return h;
    }

    Mat<S> backward(const Mat<S>& dy)
    {
        Mat<S> g = dy;
        for (std::size_t i = layers_.size(); i-- > 0;) {
            if (i + 1 < layers_.size())
                g = silu_backward(pre_[i], g);
            g = layers_[i].backward(g);
        }
        return g;
    }

    void collect(ParamList<S>& out)
    {
        for (auto& l : layers_)
            l.collect(out);
    }

private:
    std::vector<Linear<S>> layers_;
    std::vector<Mat<S>> pre_;
};

/// Channels x (height * width) map; column y * width + x holds cell (x, y).
template <typename S>
struct FeatureGrid {
    Mat<S> data;
    int height = 0;
    int width = 0;

    int channels() const { return static_cast<int>(data.rows()); }
    Eigen::Index index(int x, int y) const { return static_cast<Eigen::Index>(y) * width + x; }
};

/// 2D convolution via im2col; square kernel, zero padding that preserves size at stride 1.
template <typename S>
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(const std::string& name, int in, int out, int kernel, int stride, int dilation)
        : weight_(name + ".weight", out, in * kernel * kernel), bias_(name + ".bias", out, 1), in_(in),
          kernel_(kernel), stride_(stride), dilation_(dilation), pad_(dilation * (kernel - 1) / 2)
    {
    }

    void init(Rng& rng)
    {
        xavier_uniform(weight_, in_ * kernel_ * kernel_, static_cast<int>(weight_.value.rows()) * kernel_ * kernel_,
                       rng);
        bias_.value.setZero();
    }

    int out_size(int n) const { return (n + 2 * pad_ - dilation_ * (kernel_ - 1) - 1) / stride_ + 1; }
    int stride() const { return stride_; }
    int receptive_extent() const { return dilation_ * (kernel_ - 1); }

    FeatureGrid<S> apply(const FeatureGrid<S>& x) const
    {
        RowMat<S> cols;
        int ho = 0, wo = 0;
        im2col(x, cols, ho, wo);
        FeatureGrid<S> y;
        y.height = ho;
        y.width = wo;
        y.data.noalias() = weight_.value * cols;
        y.data.colwise() += bias_.value.col(0);
        return y;
    }

    FeatureGrid<S> forward(const FeatureGrid<S>& x)
    {
        in_h_ = x.height;
        in_w_ = x.width;
        int ho = 0, wo = 0;
        im2col(x, cols_, ho, wo);
        FeatureGrid<S> y;
        y.height = ho;
        y.width = wo;
        y.data.noalias() = weight_.value * cols_;
        y.data.colwise() += bias_.value.col(0);
        return y;
    }

    FeatureGrid<S> backward(const FeatureGrid<S>& dy)
    {
        weight_.grad.noalias() += dy.data * cols_.transpose();
        bias_.grad.col(0) += dy.data.rowwise().sum();
        const RowMat<S> dcols = weight_.value.transpose() * dy.data;
        FeatureGrid<S> dx;
        dx.height = in_h_;
        dx.width = in_w_;
        dx.data = Mat<S>::Zero(in_, static_cast<Eigen::Index>(in_h_) * in_w_);
        for (int c = 0; c < in_; ++c)
            for (int ky = 0; ky < kernel_; ++ky)
                for (int kx = 0; kx < kernel_; ++kx) {
                    const Eigen::Index row = (static_cast<Eigen::Index>(c) * kernel_ + ky) * kernel_ + kx;
                    for (int oy = 0; oy < dy.height; ++oy) {
                        const int iy = oy * stride_ - pad_ + ky * dilation_;
                        if (iy < 0 || iy >= in_h_)
                            continue;
                        for (int ox = 0; ox < dy.width; ++ox) {
                            const int ix = ox * stride_ - pad_ + kx * dilation_;
                            if (ix < 0 || ix >= in_w_)
                                continue;
                            dx.data(c, static_cast<Eigen::Index>(iy) * in_w_ + ix) +=
                                dcols(row, static_cast<Eigen::Index>(oy) * dy.width + ox);
                        }
                    }
                }
        return dx;
    }

    void collect(ParamList<S>& out)
    {
        out.push_back(&weight_);
        out.push_back(&bias_);
    }

private:
    void im2col(const FeatureGrid<S>& x, RowMat<S>& cols, int& ho, int& wo) const
    {
        if (x.channels() != in_)
            throw ShapeError("conv input has " + std::to_string(x.channels()) + " channels, expected " +
                             std::to_string(in_));
        ho = out_size(x.height);
        wo = out_size(x.width);
        cols.setZero(static_cast<Eigen::Index>(in_) * kernel_ * kernel_, static_cast<Eigen::Index>(ho) * wo);
        for (int c = 0; c < in_; ++c)
            for (int ky = 0; ky < kernel_; ++ky)
                for (int kx = 0; kx < kernel_; ++kx) {
                    const Eigen::Index row = (static_cast<Eigen::Index>(c) * kernel_ + ky) * kernel_ + kx;
                    for (int oy = 0; oy < ho; ++oy) {
                        const int iy = oy * stride_ - pad_ + ky * dilation_;
                        if (iy < 0 || iy >= x.height)
                            continue;
                        for (int ox = 0; ox < wo; ++ox) {
                            const int ix = ox * stride_ - pad_ + kx * dilation_;
                            if (ix < 0 || ix >= x.width)
                                continue;
                            cols(row, static_cast<Eigen::Index>(oy) * wo + ox) = x.data(c, x.index(ix, iy));
                        }
                    }
                }
    }

    Param<S> weight_;
    Param<S> bias_;
    int in_ = 0;
    int kernel_ = 3;
    int stride_ = 1;
    int dilation_ = 1;
    int pad_ = 1;
    int in_h_ = 0;
    int in_w_ = 0;
    RowMat<S> cols_;
};

/// Group normalization over (channels in group) x (all cells), per-channel affine.
template <typename S>
class GroupNorm {
public:
    GroupNorm() = default;
    GroupNorm(const std::string& name, int channels, int groups)
        : gamma_(name + ".gamma", channels, 1), beta_(name + ".beta", channels, 1), groups_(groups)
    {
        if (groups <= 0 || channels % groups != 0)
            throw ShapeError("channels must divide evenly into groups");
        gamma_.value.setOnes();
    }

    void init(Rng&)
    {
        gamma_.value.setOnes();
        beta_.value.setZero();
    }

    FeatureGrid<S> apply(const FeatureGrid<S>& x) const
    {
        Mat<S> xhat;
        Vec<S> inv_std;
        return normalize(x, xhat, inv_std);
    }

    FeatureGrid<S> forward(const FeatureGrid<S>& x) { return normalize(x, xhat_, inv_std_); }

    FeatureGrid<S> backward(const FeatureGrid<S>& dy)
    {
        const Eigen::Index cg = gamma_.value.rows() / groups_;
        const auto m = static_cast<S>(cg * dy.data.cols());
        gamma_.grad.col(0) += (dy.data.array() * xhat_.array()).rowwise().sum().matrix();
        beta_.grad.col(0) += dy.data.rowwise().sum();
        FeatureGrid<S> dx = dy;
        const Mat<S> dxhat = (dy.data.array().colwise() * gamma_.value.col(0).array()).matrix();
        for (int g = 0; g < groups_; ++g) {
            const auto blk = dxhat.middleRows(g * cg, cg);
            const auto xh = xhat_.middleRows(g * cg, cg);
            const S sum_d = blk.sum();
            const S sum_dx = (blk.array() * xh.array()).sum();
            dx.data.middleRows(g * cg, cg) =
                ((m * blk.array() - sum_d - xh.array() * sum_dx) * (inv_std_(g) / m)).matrix();
        }
        return dx;
    }

    void collect(ParamList<S>& out)
    {
        out.push_back(&gamma_);
        out.push_back(&beta_);
    }

private:
    FeatureGrid<S> normalize(const FeatureGrid<S>& x, Mat<S>& xhat, Vec<S>& inv_std) const
    {
        const Eigen::Index cg = gamma_.value.rows() / groups_;
        xhat.resize(x.data.rows(), x.data.cols());
        inv_std.resize(groups_);
        for (int g = 0; g < groups_; ++g) {
            const auto blk = x.data.middleRows(g * cg, cg);
            const S mean = blk.mean();
            const S var = (blk.array() - mean).square().mean();
            inv_std(g) = S(1) / std::sqrt(var + S(1e-5));
            xhat.middleRows(g * cg, cg) = ((blk.array() - mean) * inv_std(g)).matrix();
        }
        FeatureGrid<S> y = x;
        y.data = ((xhat.array().colwise() * gamma_.value.col(0).array()).colwise() + beta_.value.col(0).array())
                     .matrix();
        return y;
    }

    Param<S> gamma_;
    Param<S> beta_;
    int groups_ = 1;
    Mat<S> xhat_;
    Vec<S> inv_std_;
};

/// Precomputed bilinear taps into a feature grid, one set of four per query.
template <typename S>
struct BilinearTaps {
    std::vector<std::array<Eigen::Index, 4>> index;
    std::vector<std::array<S, 4>> weight;

    std::size_t size() const { return index.size(); }
};

/// Continuous image position (u, v) to feature-cell coordinates: uv / stride - 0.5, clamped to the
/// edge cells. `clamped_u` / `clamped_v` report when the clamp is active.
struct CellCoord {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    double tx = 0.0, ty = 0.0;
    bool clamped_u = false, clamped_v = false;
};

inline CellCoord cell_coord(double u, double v, int stride, int width, int height)
{
    CellCoord c;
    double fx = u / stride - 0.5;
    double fy = v / stride - 0.5;
    const double max_x = width - 1;
    const double max_y = height - 1;
    if (fx <= 0.0 || fx >= max_x) {
        c.clamped_u = true;
        fx = std::clamp(fx, 0.0, max_x);
    }
    if (fy <= 0.0 || fy >= max_y) {
        c.clamped_v = true;
        fy = std::clamp(fy, 0.0, max_y);
    }
    c.x0 = std::min(static_cast<int>(std::floor(fx)), std::max(width - 2, 0));
    c.y0 = std::min(static_cast<int>(std::floor(fy)), std::max(height - 2, 0));
    c.x1 = std::min(c.x0 + 1, width - 1);
    c.y1 = std::min(c.y0 + 1, height - 1);
    c.tx = c.x1 == c.x0 ? 0.0 : fx - c.x0;
    c.ty = c.y1 == c.y0 ? 0.0 : fy - c.y0;
    return c;
}

template <typename S>
BilinearTaps<S> bilinear_taps(const Eigen::Matrix2Xd& uv, int stride, int width, int height)
{
    BilinearTaps<S> taps;
    taps.index.resize(static_cast<std::size_t>(uv.cols()));
    taps.weight.resize(static_cast<std::size_t>(uv.cols()));
    for (Eigen::Index n = 0; n < uv.cols(); ++n) {
        const CellCoord c = cell_coord(uv(0, n), uv(1, n), stride, width, height);
        const auto i = static_cast<std::size_t>(n);
        taps.index[i] = {static_cast<Eigen::Index>(c.y0) * width + c.x0, static_cast<Eigen::Index>(c.y0) * width + c.x1,
                         static_cast<Eigen::Index>(c.y1) * width + c.x0, static_cast<Eigen::Index>(c.y1) * width + c.x1};
        taps.weight[i] = {static_cast<S>((1 - c.tx) * (1 - c.ty)), static_cast<S>(c.tx * (1 - c.ty)),
                          static_cast<S>((1 - c.tx) * c.ty), static_cast<S>(c.tx * c.ty)};
    }
    return taps;
}

/// Gather C x N features.
template <typename S>
Mat<S> gather(const FeatureGrid<S>& grid, const BilinearTaps<S>& taps)
{
    Mat<S> out(grid.channels(), static_cast<Eigen::Index>(taps.size()));
    for (std::size_t n = 0; n < taps.size(); ++n) {
        const auto& idx = taps.index[n];
        const auto& w = taps.weight[n];
        out.col(static_cast<Eigen::Index>(n)) = w[0] * grid.data.col(idx[0]) + w[1] * grid.data.col(idx[1]) +
                                                w[2] * grid.data.col(idx[2]) + w[3] * grid.data.col(idx[3]);
    }
    return out;
}

/// Adjoint of gather: accumulate dfeat into dgrid.
template <typename S>
void scatter(const Mat<S>& dfeat, const BilinearTaps<S>& taps, FeatureGrid<S>& dgrid)
{
    for (std::size_t n = 0; n < taps.size(); ++n) {
        const auto& idx = taps.index[n];
        const auto& w = taps.weight[n];
        const auto col = dfeat.col(static_cast<Eigen::Index>(n));
        for (int k = 0; k < 4; ++k)
            dgrid.data.col(idx[static_cast<std::size_t>(k)]) += w[static_cast<std::size_t>(k)] * col;
    }
}

} // namespace nvf::nn
