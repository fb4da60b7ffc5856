#pragma once

#include <filesystem>
#include <iosfwd>

#include "latefuse/imageprep.hpp"

namespace latefuse::image {

/// Binary PPM (P6, RGB) or PGM (P5, gray) with maxval <= 255. Header comments
/// are skipped. Pixel values land in [0, 255].
Image read_pnm(std::istream& in);
Image read_pnm(const std::filesystem::path& path);

/// Writes P6 for 3 channels and P5 for 1 channel; values are rounded and
/// clamped to [0, 255]. Other channel counts are rejected.
void write_pnm(std::ostream& out, const Image& img);
void write_pnm(const std::filesystem::path& path, const Image& img);

/// NumPy .npy (format 1.0), little-endian float64, shape (H, W, C). This is
/// the on-disk form for normalized and 4-channel tensors.
void write_npy(const std::filesystem::path& path, const Image& img);
Image read_npy(const std::filesystem::path& path);

}  // namespace latefuse::image
