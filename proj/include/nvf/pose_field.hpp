#pragma once

#include "nvf/geometry.hpp"

#include <string>
#include <vector>

namespace nvf {

enum class PoseSpace { Camera, RootRelative };

/// T ordered joints (mm), one column each. Joint 0 is the wrist (root).
struct JointSet {
    Points3 joints;
    PoseSpace space = PoseSpace::Camera;

    int count() const { return static_cast<int>(joints.cols()); }
    Vec3 operator[](int t) const { return joints.col(t); }
    Vec3 centroid() const { return joints.rowwise().mean(); }
};

struct VotingParams {
    double delta = 5.0;   ///< clamping distance (mm)
    double radius = 80.0; ///< ball radius (mm)
    int knn = 1024;
    double fraction = 0.5;

    void validate() const;
};

struct OffsetVector4 {
    double w = 0.0;
    Vec3 d = Vec3::Zero();
};

/// Signed distance plus T 4D offset vectors for N points, column per point.
struct FieldSet {
    Eigen::VectorXd sdf;       ///< N
    Eigen::MatrixXd weight;    ///< T x N
    Eigen::MatrixXd direction; ///< 3T x N, rows 3t..3t+2 for joint t

    FieldSet() = default;
    FieldSet(Eigen::Index points, int joints)
        : sdf(Eigen::VectorXd::Zero(points)), weight(Eigen::MatrixXd::Zero(joints, points)),
          direction(Eigen::MatrixXd::Zero(3 * joints, points))
    {
    }

    Eigen::Index size() const { return sdf.size(); }
    int joint_count() const { return static_cast<int>(weight.rows()); }

    OffsetVector4 offset(Eigen::Index n, int t) const
    {
        return {weight(t, n), direction.block<3, 1>(3 * t, n)};
    }
    void set_offset(Eigen::Index n, int t, const OffsetVector4& v)
    {
        weight(t, n) = v.w;
        direction.block<3, 1>(3 * t, n) = v.d;
    }
};

/// Ground-truth signed distances for `points` against `mesh`.
Eigen::VectorXd signed_distances(const Points3& points, const MeshSdf& mesh);

/// Dense offset targets. The KNN ball sets are computed over the near-surface
/// subset (|s| < delta) of this batch.
FieldSet build_targets(const Points3& points, const JointSet& joints, const MeshSdf& mesh,
                       const VotingParams& params);

/// Same, reusing precomputed signed distances.
FieldSet build_targets(const Points3& points, const Eigen::VectorXd& sdf, const JointSet& joints,
                       const VotingParams& params);

/// 3D offset from voter to joint: 1(|s| < delta) * r * (1 - w) * d.
Vec3 reconstruct_offset(const OffsetVector4& v, double s, const VotingParams& params);

struct VoteResult {
    JointSet joints;
    std::vector<bool> valid;       ///< false where NoValidVoters applies
    std::vector<int> voter_count;  ///< voters used per joint

    int invalid_count() const;
    /// Throws NoValidVoters naming the first invalid joint.
    void require_valid() const;
};

/// Weighted-average vote casting. Per joint, only the top `fraction` of near-surface voters
/// by predicted weight take part (at least one). Sums are compensated.
VoteResult cast_votes(const Points3& points, const FieldSet& predictions, const VotingParams& params);

/// Replace invalid joints with `fallback`.
void fill_invalid(VoteResult& result, const Vec3& fallback);

} // namespace nvf
