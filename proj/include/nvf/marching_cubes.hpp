#pragma once

#include "nvf/geometry.hpp"

#include <functional>
#include <vector>

namespace nvf {

/// Regular grid of scalar samples at origin + pitch * (i, j, k).
struct ScalarGrid {
    Vec3 origin = Vec3::Zero();
    double pitch = 1.0;
    Eigen::Array3i dims = Eigen::Array3i::Constant(2);
    std::vector<double> values; ///< x fastest, then y, then z

    std::size_t index(int i, int j, int k) const
    {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims(0)) * (static_cast<std::size_t>(j) +
                                                    static_cast<std::size_t>(dims(1)) * static_cast<std::size_t>(k));
    }
    double at(int i, int j, int k) const { return values[index(i, j, k)]; }
    Vec3 position(int i, int j, int k) const { return origin + pitch * Vec3(i, j, k); }

    void validate() const;

    /// Sample `field` at every grid node.
    static ScalarGrid sample(const Vec3& origin, double pitch, const Eigen::Array3i& dims,
                             const std::function<double(const Vec3&)>& field);
};

/// Triangle list (as edge ids 0..11) for each of the 256 corner sign configurations.
/// Corner c sits at offset (c & 1, (c >> 1) & 1, (c >> 2) & 1); bit c of the case is set when the
/// corner is below the iso value.
const std::array<std::vector<std::array<int, 3>>, 256>& marching_cubes_table();

/// Iso-surface extraction. Vertices are interpolated linearly along crossing grid edges and shared
/// between neighbouring cells; triangles face towards larger values.
TriMesh marching_cubes(const ScalarGrid& grid, double iso = 0.0);

} // namespace nvf
