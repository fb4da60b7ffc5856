#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "latefuse/core.hpp"

namespace latefuse::image {

/// H x W x C pixel grid, interleaved row-major (pixel-major, channel-minor).
class Image {
 public:
  Image() = default;
  Image(std::size_t height, std::size_t width, std::size_t channels, double fill = 0.0);
  Image(std::size_t height, std::size_t width, std::size_t channels, std::vector<double> data);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t channels() const { return channels_; }
  std::size_t pixels() const { return height_ * width_; }

  double& at(std::size_t y, std::size_t x, std::size_t c) {
    return data_[(y * width_ + x) * channels_ + c];
  }
  double at(std::size_t y, std::size_t x, std::size_t c) const {
    return data_[(y * width_ + x) * channels_ + c];
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool operator==(const Image&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> data_;
};

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> std;
};

inline constexpr std::size_t kDefaultSide = 224;

/// Bilinear resampling with corner-aligned sampling: output row i maps to
/// source row i * (H_in - 1) / (H_out - 1).
Image resize_bilinear(const Image& img, std::size_t out_h = kDefaultSide,
                      std::size_t out_w = kDefaultSide);

/// Population mean and standard deviation per channel over every pixel of
/// every image. Two passes; per-image partial sums run in parallel and are
/// combined in image order, so the result does not depend on thread count.
ChannelStats channel_stats(std::span<const Image> images, int threads = 0);

/// (p - mean_c) / std_c for each pixel.
Image normalize(const Image& img, const ChannelStats& stats);
std::vector<Image> normalize_all(std::span<const Image> images, const ChannelStats& stats,
                                 int threads = 0);

/// 0.299 R + 0.587 G + 0.114 B.
Image to_grayscale(const Image& rgb);

/// 3x3 local binary pattern with edge-replicated borders. Bit k is set when
/// neighbour k >= centre; neighbours run clockwise from the top-left
/// (bit 0) to the left (bit 7).
Image lbp(const Image& gray);

/// RGB plus lbp(to_grayscale(rgb)) as a fourth plane.
Image append_lbp_channel(const Image& rgb);

namespace reference {

// Straight serial loops kept as test oracles for the parallel kernels.
ChannelStats channel_stats(std::span<const Image> images);
std::vector<Image> normalize_all(std::span<const Image> images, const ChannelStats& stats);

}  // namespace reference

}  // namespace latefuse::image
