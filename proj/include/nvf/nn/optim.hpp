#pragma once

#include "nvf/nn/layers.hpp"

namespace nvf::nn {

/// Squared-gradient moving average: v = rho v + (1 - rho) g^2; theta -= lr g / (sqrt(v) + eps).
template <typename S>
class RmsProp {
public:
    RmsProp(ParamList<S> params, double rho = 0.99, double eps = 1e-8)
        : params_(std::move(params)), rho_(static_cast<S>(rho)), eps_(static_cast<S>(eps))
    {
        for (auto* p : params_)
            square_avg_.push_back(Mat<S>::Zero(p->value.rows(), p->value.cols()));
    }

    void step(double lr)
    {
        const auto a = static_cast<S>(lr);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& v = square_avg_[i];
            const auto& g = params_[i]->grad;
            v = rho_ * v + (S(1) - rho_) * g.cwiseAbs2();
            params_[i]->value.array() -= a * g.array() / (v.array().sqrt() + eps_);
        }
    }

private:
    ParamList<S> params_;
    std::vector<Mat<S>> square_avg_;
    S rho_;
    S eps_;
};

/// Base rate decayed by 0.1 at 2/3 and again at 5/6 of the run.
inline double step_learning_rate(double base, long step, long total)
{
    double lr = base;
    if (3 * step >= 2 * total)
        lr *= 0.1;
    if (6 * step >= 5 * total)
        lr *= 0.1;
    return lr;
}

/// L2 norm over all gradients.
template <typename S>
double gradient_norm(const ParamList<S>& params)
{
    double sq = 0.0;
    for (const auto* p : params)
        sq += static_cast<double>(p->grad.squaredNorm());
    return std::sqrt(sq);
}

} // namespace nvf::nn
