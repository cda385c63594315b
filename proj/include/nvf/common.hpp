#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace nvf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
/// Column-per-point storage used throughout: 3 x N.
using Points3 = Eigen::Matrix3Xd;

/// Number of joints in the 21-keypoint hand convention.
inline constexpr int kJointCount = 21;

class Error : public std::runtime_error {
public:
    Error(const std::string& kind, const std::string& what)
        : std::runtime_error(kind + ": " + what), kind_(kind) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define NVF_DEFINE_ERROR(Name)                                                  \
    class Name : public Error {                                                 \
    public:                                                                     \
        explicit Name(const std::string& what) : Error(#Name, what) {}          \
    };

NVF_DEFINE_ERROR(DegenerateProjection)
NVF_DEFINE_ERROR(IllFormedMesh)
NVF_DEFINE_ERROR(ShapeError)
NVF_DEFINE_ERROR(EmptyBatch)
NVF_DEFINE_ERROR(NoValidVoters)
NVF_DEFINE_ERROR(InsufficientSamples)
NVF_DEFINE_ERROR(EmptyGrid)
NVF_DEFINE_ERROR(InvalidPlacement)
NVF_DEFINE_ERROR(DegenerateAlignment)
NVF_DEFINE_ERROR(ConfigError)
NVF_DEFINE_ERROR(IoError)
NVF_DEFINE_ERROR(NumericalError)

#undef NVF_DEFINE_ERROR

/// Neumaier-compensated running sum.
template <typename T>
class CompensatedSum {
public:
    void add(T x) {
        T t = sum_ + x;
        if (abs_(sum_) >= abs_(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    T value() const { return sum_ + comp_; }

private:
    static T abs_(T x) { return x < T(0) ? -x : x; }
    T sum_{0};
    T comp_{0};
};

} // namespace nvf
