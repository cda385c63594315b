#include "nvf/pose_field.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nvf {

void VotingParams::validate() const
{
    if (!(delta > 0.0))
        throw ConfigError("delta must be positive");
    if (!(radius > 0.0))
        throw ConfigError("ball radius must be positive");
    if (knn < 1)
        throw ConfigError("knn must be at least 1");
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw ConfigError("voting fraction must be in (0, 1]");
}

Eigen::VectorXd signed_distances(const Points3& points, const MeshSdf& mesh)
{
    Eigen::VectorXd sdf(points.cols());
    for (Eigen::Index n = 0; n < points.cols(); ++n)
        sdf(n) = mesh.signed_distance(points.col(n));
    return sdf;
}

FieldSet build_targets(const Points3& points, const JointSet& joints, const MeshSdf& mesh,
                       const VotingParams& params)
{
    return build_targets(points, signed_distances(points, mesh), joints, params);
}

FieldSet build_targets(const Points3& points, const Eigen::VectorXd& sdf, const JointSet& joints,
                       const VotingParams& params)
{
    params.validate();
    if (points.cols() == 0)
        throw EmptyBatch("no points to build targets for");
    if (sdf.size() != points.cols())
        throw ShapeError("sdf / point count mismatch");

    FieldSet out(points.cols(), joints.count());
    out.sdf = sdf;

    std::vector<int> near;
    for (Eigen::Index n = 0; n < points.cols(); ++n)
        if (std::abs(sdf(n)) < params.delta)
            near.push_back(static_cast<int>(n));

    for (int t = 0; t < joints.count(); ++t) {
        const Vec3 j = joints[t];
        for (int n : knn_ball_select(j, points, near, params.knn, params.radius)) {
            const Vec3 diff = j - points.col(n);
            const double dist = diff.norm();
            OffsetVector4 v;
            v.w = 1.0 - dist / params.radius;
            // At p == j the direction is 0/0; (1 - w) = 0 already pins the vote.
            v.d = dist > 0.0 ? Vec3(diff / dist) : Vec3::Zero();
            out.set_offset(n, t, v);
        }
    }
    return out;
}

Vec3 reconstruct_offset(const OffsetVector4& v, double s, const VotingParams& params)
{
    if (!(std::abs(s) < params.delta))
        return Vec3::Zero();
    return params.radius * (1.0 - v.w) * v.d;
}

int VoteResult::invalid_count() const
{
    return static_cast<int>(std::count(valid.begin(), valid.end(), false));
}

void VoteResult::require_valid() const
{
    for (std::size_t t = 0; t < valid.size(); ++t)
        if (!valid[t])
            throw NoValidVoters("joint " + std::to_string(t));
}

VoteResult cast_votes(const Points3& points, const FieldSet& predictions, const VotingParams& params)
{
    params.validate();
    if (predictions.size() != points.cols())
        throw ShapeError("predictions must align 1:1 with points");

    const int T = predictions.joint_count();
    VoteResult result;
    result.joints.joints = Points3::Zero(3, T);
    result.valid.assign(static_cast<std::size_t>(T), false);
    result.voter_count.assign(static_cast<std::size_t>(T), 0);

    std::vector<int> valid;
    for (Eigen::Index n = 0; n < points.cols(); ++n)
        if (std::abs(predictions.sdf(n)) < params.delta)
            valid.push_back(static_cast<int>(n));
    if (valid.empty())
        return result;

    const auto take = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(params.fraction * static_cast<double>(valid.size()) - 1e-12)));

    std::vector<int> order(valid.size());
    for (int t = 0; t < T; ++t) {
        order = valid;
        auto by_weight = [&](int a, int b) {
            const double wa = predictions.weight(t, a);
            const double wb = predictions.weight(t, b);
            return wa > wb || (wa == wb && a < b);
        };
        if (take < order.size())
            std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take) - 1, order.end(),
                             by_weight);
        order.resize(std::min(take, order.size()));
        // Fixed summation order independent of the input permutation.
        std::sort(order.begin(), order.end(), by_weight);

        CompensatedSum<double> den;
        CompensatedSum<double> num[3];
        for (int n : order) {
            const OffsetVector4 v = predictions.offset(n, t);
            const Vec3 vote = reconstruct_offset(v, predictions.sdf(n), params) + points.col(n);
            den.add(v.w);
            for (int k = 0; k < 3; ++k)
                num[k].add(v.w * vote(k));
        }
        const double total = den.value();
        result.voter_count[static_cast<std::size_t>(t)] = static_cast<int>(order.size());
        if (!(total > 0.0))
            continue;
        for (int k = 0; k < 3; ++k)
            result.joints.joints(k, t) = num[k].value() / total;
        result.valid[static_cast<std::size_t>(t)] = true;
    }
    return result;
}

void fill_invalid(VoteResult& result, const Vec3& fallback)
{
    for (std::size_t t = 0; t < result.valid.size(); ++t)
        if (!result.valid[t])
            result.joints.joints.col(static_cast<Eigen::Index>(t)) = fallback;
}

} // namespace nvf
