#pragma once

#include "nvf/nn/layers.hpp"
#include "nvf/pose_field.hpp"

namespace nvf {

namespace nn {

template <typename S>
S huber(S x, S h)
{
    const S a = x < S(0) ? -x : x;
    return a <= h ? S(0.5) * x * x : h * (a - S(0.5) * h);
}

template <typename S>
S huber_grad(S x, S h)
{
    if (x > h)
        return h;
    if (x < -h)
        return -h;
    return x;
}

template <typename S>
S clamp_sdf(S s, S delta)
{
    return std::min(delta, std::max(-delta, s));
}

/// mean |clamp(pred) - clamp(truth)|; writes d/dpred into `grad` when given.
template <typename S>
S sdf_loss(const Vec<S>& pred, const Vec<S>& truth, S delta, Vec<S>* grad = nullptr)
{
    if (pred.size() == 0)
        throw EmptyBatch("SDF loss over zero points");
    if (pred.size() != truth.size())
        throw ShapeError("SDF prediction and target lengths differ");
    const auto n = static_cast<S>(pred.size());
    if (grad)
        grad->setZero(pred.size());
    S total = 0;
    for (Eigen::Index i = 0; i < pred.size(); ++i) {
        const S diff = clamp_sdf(pred(i), delta) - clamp_sdf(truth(i), delta);
        total += diff < S(0) ? -diff : diff;
        if (grad && pred(i) > -delta && pred(i) < delta && diff != S(0))
            (*grad)(i) = (diff > S(0) ? S(1) : S(-1)) / n;
    }
    return total / n;
}

/// (1/N) sum_n 1(|s_n| < delta) sum_entries H(pred - truth). Weight rows are T x N, direction rows 3T x N.
template <typename S>
S offset_loss(const Mat<S>& pred_w, const Mat<S>& pred_d, const Mat<S>& true_w, const Mat<S>& true_d,
              const Vec<S>& true_s, S delta, S huber_h, Mat<S>* grad_w = nullptr, Mat<S>* grad_d = nullptr)
{
    const Eigen::Index n = true_s.size();
    if (n == 0)
        throw EmptyBatch("offset loss over zero points");
    if (pred_w.cols() != n || pred_d.cols() != n || true_w.cols() != n || true_d.cols() != n ||
        pred_w.rows() != true_w.rows() || pred_d.rows() != true_d.rows() || pred_d.rows() != 3 * pred_w.rows())
        throw ShapeError("offset prediction and target shapes differ");
    const auto inv_n = S(1) / static_cast<S>(n);
    if (grad_w)
        grad_w->setZero(pred_w.rows(), n);
    if (grad_d)
        grad_d->setZero(pred_d.rows(), n);
    S total = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const S s = true_s(i);
        if (!(s > -delta && s < delta))
            continue;
        for (Eigen::Index r = 0; r < pred_w.rows(); ++r) {
            const S e = pred_w(r, i) - true_w(r, i);
            total += huber(e, huber_h);
            if (grad_w)
                (*grad_w)(r, i) = huber_grad(e, huber_h) * inv_n;
        }
        for (Eigen::Index r = 0; r < pred_d.rows(); ++r) {
            const S e = pred_d(r, i) - true_d(r, i);
            total += huber(e, huber_h);
            if (grad_d)
                (*grad_d)(r, i) = huber_grad(e, huber_h) * inv_n;
        }
    }
    return total * inv_n;
}

/// Binary cross-entropy with eps inside the logs; d/dp into `grad`.
template <typename S>
S bce(S p, S y, S eps, S* grad = nullptr)
{
    if (grad)
        *grad = -y / (p + eps) + (S(1) - y) / (S(1) - p + eps);
    return -(y * std::log(p + eps) + (S(1) - y) * std::log(S(1) - p + eps));
}

} // namespace nn

struct LossReport {
    double l_s = 0.0;
    double l_v = 0.0;
    double lambda = 0.1;
    double total = 0.0;
    long n_near_surface = 0;
};

inline constexpr double kHuberThreshold = 1.0;
inline constexpr double kBceEpsilon = 1e-12;

inline double loss_sdf(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth, double delta)
{
    return nn::sdf_loss<double>(pred, truth, delta);
}

inline double loss_offsets(const FieldSet& pred, const FieldSet& truth, const Eigen::VectorXd& true_s, double delta)
{
    return nn::offset_loss<double>(pred.weight, pred.direction, truth.weight, truth.direction, true_s, delta,
                                   kHuberThreshold);
}

} // namespace nvf
