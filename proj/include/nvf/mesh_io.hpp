#pragma once

#include "nvf/geometry.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace nvf {

/// ASCII OBJ: `v x y z` and 1-based `f i j k`.
void write_obj(const std::filesystem::path& path, const TriMesh& mesh);
TriMesh read_obj(const std::filesystem::path& path);

/// Binary little-endian PLY. float32 vertex coordinates, int32 face indices.
void write_ply(const std::filesystem::path& path, const TriMesh& mesh);
TriMesh read_ply(const std::filesystem::path& path);

/// Point cloud with 8-bit colors (binary little-endian PLY, no faces).
void write_point_cloud_ply(const std::filesystem::path& path, const Points3& points,
                           const std::vector<std::array<std::uint8_t, 3>>& colors);

/// Picks OBJ or PLY by extension.
TriMesh read_mesh(const std::filesystem::path& path);
void write_mesh(const std::filesystem::path& path, const TriMesh& mesh);

} // namespace nvf
