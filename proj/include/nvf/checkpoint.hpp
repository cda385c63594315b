#pragma once

#include "nvf/nn/layers.hpp"

#include <filesystem>

namespace nvf {

struct TensorInfo {
    std::string name;
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::uint64_t offset = 0; ///< bytes from the start of the payload
};

struct CheckpointInfo {
    std::string kind;   ///< model kind
    std::string config; ///< serialized run config used for training
    std::vector<TensorInfo> tensors;
};

/// "NVF1", u32 version, kind, config text, tensor manifest, then little-endian f32 payload
/// (each tensor column-major).
void save_checkpoint(const std::filesystem::path& path, const std::string& kind, const std::string& config,
                     const nn::ParamList<float>& params);

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

/// Fills `params` in order; throws ShapeError on any name, shape or count mismatch.
CheckpointInfo load_checkpoint(const std::filesystem::path& path, const std::string& kind,
                               const nn::ParamList<float>& params);

} // namespace nvf
