#pragma once

#include "nvf/nn/models.hpp"

namespace nvf {

/// Per-cell targets for the dense 2D baseline.
struct DenseTargets {
    Eigen::VectorXd foreground;   ///< L, 0 or 1
    Eigen::MatrixXd weight;       ///< T x L
    Eigen::VectorXd joints;       ///< 3T normalized coordinates, shared by every cell
};

namespace nn {

/// L_s + lambda * L_V for one image; accumulates grad_scale * gradient into the parameters
/// unless grad_scale is zero.
template <typename S>
LossReport nvf_objective(NvfModel<S>& model, const Image& image, const Points3& points, const FieldSet& targets,
                         const SampleContext& ctx, double lambda, double delta, S grad_scale)
{
    const FieldHeads<S> h = model.forward(Encoder<S>::to_grid(image), points, ctx);
    const Vec<S> ts = targets.sdf.template cast<S>();
    Vec<S> gs;
    Mat<S> gw, gd;
    const S ls = sdf_loss<S>(h.sdf, ts, static_cast<S>(delta), &gs);
    const S lv = offset_loss<S>(h.weight, h.direction, targets.weight.template cast<S>(),
                                targets.direction.template cast<S>(), ts, static_cast<S>(delta),
                                static_cast<S>(kHuberThreshold), &gw, &gd);
    LossReport r;
    r.l_s = static_cast<double>(ls);
    r.l_v = static_cast<double>(lv);
    r.lambda = lambda;
    r.total = r.l_s + lambda * r.l_v;
    r.n_near_surface = (targets.sdf.array().abs() < delta).count();
    if (grad_scale != S(0)) {
        const auto k = static_cast<S>(lambda) * grad_scale;
        model.backward(gs * grad_scale, gw * k, gd * k);
    }
    return r;
}

/// Mean over joints of the summed Huber loss on normalized coordinates.
template <typename S>
double holistic_objective(HolisticModel<S>& model, const Image& image, const JointSet& truth,
                          const SampleContext& ctx, S grad_scale)
{
    const ModelConfig& cfg = model.config();
    if (truth.count() != cfg.joints)
        throw ShapeError("holistic target has " + std::to_string(truth.count()) + " joints, expected " +
                         std::to_string(cfg.joints));
    const Vec<S> out = model.forward(Encoder<S>::to_grid(image));
    Vec<S> grad(out.size());
    const auto inv_t = S(1) / static_cast<S>(cfg.joints);
    S total = 0;
    for (int t = 0; t < cfg.joints; ++t)
        for (int k = 0; k < 3; ++k) {
            const S target = static_cast<S>((truth.joints(k, t) - ctx.anchor(k)) / cfg.coord_scale);
            const S e = out(3 * t + k) - target;
            total += huber(e, static_cast<S>(kHuberThreshold));
            grad(3 * t + k) = huber_grad(e, static_cast<S>(kHuberThreshold)) * inv_t * grad_scale;
        }
    if (grad_scale != S(0))
        model.backward(grad);
    return static_cast<double>(total * inv_t);
}

/// mean_l [BCE(e_l) + lambda * e_l * H(V_l)] over feature cells, e_l the ground-truth foreground.
template <typename S>
double dense_objective(Dense2dModel<S>& model, const Image& image, const DenseTargets& targets, double lambda,
                       S grad_scale)
{
    const DenseHeads<S> h = model.forward(Encoder<S>::to_grid(image));
    const Eigen::Index cells = h.foreground.size();
    const int t_count = model.config().joints;
    if (targets.foreground.size() != cells || targets.weight.rows() != t_count || targets.weight.cols() != cells ||
        targets.joints.size() != 3 * t_count)
        throw ShapeError("dense targets do not match the feature grid");
    const auto inv_l = S(1) / static_cast<S>(cells);
    const auto lam = static_cast<S>(lambda);
    const auto hub = static_cast<S>(kHuberThreshold);
    const auto eps = static_cast<S>(kBceEpsilon);
    Vec<S> d_fg(cells);
    Mat<S> d_w(t_count, cells);
    Mat<S> d_j(3 * t_count, cells);
    S total = 0;
    for (Eigen::Index l = 0; l < cells; ++l) {
        const auto e = static_cast<S>(targets.foreground(l));
        S dbce = 0;
        const S bce_l = bce(h.foreground(l), e, eps, &dbce);
        S hub_l = 0;
        for (int t = 0; t < t_count; ++t) {
            const S ew = h.weight(t, l) - static_cast<S>(targets.weight(t, l));
            hub_l += huber(ew, hub);
            d_w(t, l) = lam * e * huber_grad(ew, hub) * inv_l * grad_scale;
        }
        for (int r = 0; r < 3 * t_count; ++r) {
            const S ej = h.joints(r, l) - static_cast<S>(targets.joints(r));
            hub_l += huber(ej, hub);
            d_j(r, l) = lam * e * huber_grad(ej, hub) * inv_l * grad_scale;
        }
        total += bce_l + lam * e * hub_l;
        d_fg(l) = dbce * inv_l * grad_scale;
    }
    if (grad_scale != S(0))
        model.backward(d_fg, d_w, d_j);
    return static_cast<double>(total * inv_l);
}

} // namespace nn
} // namespace nvf
