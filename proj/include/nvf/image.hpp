#pragma once

#include "nvf/common.hpp"

#include <cstdint>
#include <filesystem>

namespace nvf {

/// RGB image with channel values in [0, 1]; column y * width + x holds pixel (x, y).
struct Image {
    int width = 0;
    int height = 0;
    Eigen::Matrix<float, 3, Eigen::Dynamic> rgb;

    Image() = default;
    Image(int w, int h) : width(w), height(h), rgb(Eigen::Matrix<float, 3, Eigen::Dynamic>::Zero(3, w * h)) {}

    Eigen::Index index(int x, int y) const { return static_cast<Eigen::Index>(y) * width + x; }
};

/// Binary mask, row-major height x width.
using Mask = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Binary PPM (P6, maxval 255).
void write_ppm(const std::filesystem::path& path, const Image& image);
Image read_ppm(const std::filesystem::path& path);

/// Binary PBM (P4); 1 bits are foreground.
void write_pbm(const std::filesystem::path& path, const Mask& mask);
Mask read_pbm(const std::filesystem::path& path);

/// Round each channel to the nearest k / 255.
void quantize_8bit(Image& image);

} // namespace nvf
