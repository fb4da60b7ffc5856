#include "latefuse/imageprep.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "latefuse/parallel.hpp"

namespace latefuse::image {

Image::Image(std::size_t height, std::size_t width, std::size_t channels, double fill)
    : height_(height), width_(width), channels_(channels),
      data_(height * width * channels, fill) {}

Image::Image(std::size_t height, std::size_t width, std::size_t channels,
             std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  if (data_.size() != height * width * channels) {
    throw ContractError("image data length " + std::to_string(data_.size()) +
                        " does not match " + std::to_string(height) + "x" +
                        std::to_string(width) + "x" + std::to_string(channels));
  }
}

Image resize_bilinear(const Image& img, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) throw ContractError("resize to a zero dimension");
  if (img.height() == 0 || img.width() == 0) throw ContractError("resize of an empty image");
  const std::size_t in_h = img.height();
  const std::size_t in_w = img.width();
  const std::size_t ch = img.channels();
  Image out(out_h, out_w, ch);

  auto source_coord = [](std::size_t i, std::size_t in, std::size_t out_n) {
    if (out_n == 1 || in == 1) return 0.0;
    return static_cast<double>(i) * static_cast<double>(in - 1) /
           static_cast<double>(out_n - 1);
  };

  for (std::size_t y = 0; y < out_h; ++y) {
    const double sy = source_coord(y, in_h, out_h);
    const auto y0 = std::min(static_cast<std::size_t>(sy), in_h - 1);
    const auto y1 = std::min(y0 + 1, in_h - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double sx = source_coord(x, in_w, out_w);
      const auto x0 = std::min(static_cast<std::size_t>(sx), in_w - 1);
      const auto x1 = std::min(x0 + 1, in_w - 1);
      const double fx = sx - static_cast<double>(x0);
      for (std::size_t c = 0; c < ch; ++c) {
        const double top = img.at(y0, x0, c) * (1.0 - fx) + img.at(y0, x1, c) * fx;
        const double bottom = img.at(y1, x0, c) * (1.0 - fx) + img.at(y1, x1, c) * fx;
        out.at(y, x, c) = top * (1.0 - fy) + bottom * fy;
      }
    }
  }
  return out;
}

namespace {

std::size_t common_channels(std::span<const Image> images) {
  if (images.empty()) throw ContractError("channel_stats of an empty image list");
  const std::size_t ch = images[0].channels();
  for (const auto& im : images) {
    if (im.channels() != ch) throw ContractError("images have differing channel counts");
  }
  return ch;
}

struct Partial {
  std::vector<double> sum;
  std::vector<double> lo;
  std::vector<double> hi;
};

Partial image_sums(const Image& im, std::size_t ch) {
  Partial p{std::vector<double>(ch, 0.0),
            std::vector<double>(ch, std::numeric_limits<double>::infinity()),
            std::vector<double>(ch, -std::numeric_limits<double>::infinity())};
  const auto data = im.data();
  for (std::size_t i = 0; i < data.size(); i += ch) {
    for (std::size_t c = 0; c < ch; ++c) {
      const double v = data[i + c];
      p.sum[c] += v;
      p.lo[c] = std::min(p.lo[c], v);
      p.hi[c] = std::max(p.hi[c], v);
    }
  }
  return p;
}

std::vector<double> image_sq_dev(const Image& im, std::span<const double> mean) {
  const std::size_t ch = mean.size();
  std::vector<double> acc(ch, 0.0);
  const auto data = im.data();
  for (std::size_t i = 0; i < data.size(); i += ch) {
    for (std::size_t c = 0; c < ch; ++c) {
      const double d = data[i + c] - mean[c];
      acc[c] += d * d;
    }
  }
  return acc;
}

ChannelStats finish(const std::vector<std::vector<double>>& sq, std::size_t ch,
                    double count) {
  ChannelStats s{std::vector<double>(ch, 0.0), std::vector<double>(ch, 0.0)};
  for (std::size_t c = 0; c < ch; ++c) {
    double ssd = 0.0;
    for (const auto& v : sq) ssd += v[c];
    s.std[c] = std::sqrt(ssd / count);
  }
  return s;
}

void check_not_constant(const std::vector<Partial>& parts, std::size_t ch) {
  for (std::size_t c = 0; c < ch; ++c) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& p : parts) {
      lo = std::min(lo, p.lo[c]);
      hi = std::max(hi, p.hi[c]);
    }
    if (!(hi > lo)) {
      throw ContractError("channel " + std::to_string(c) +
                          " is constant over the dataset (std = 0)");
    }
  }
}

}  // namespace

ChannelStats channel_stats(std::span<const Image> images, int threads) {
  const std::size_t ch = common_channels(images);
  const auto n = static_cast<std::ptrdiff_t>(images.size());
  const int nt = resolve_threads(threads);

  std::vector<Partial> parts(images.size());
#pragma omp parallel for schedule(static) num_threads(nt)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    parts[static_cast<std::size_t>(i)] = image_sums(images[static_cast<std::size_t>(i)], ch);
  }
  check_not_constant(parts, ch);

  double count = 0.0;
  for (const auto& im : images) count += static_cast<double>(im.pixels());
  std::vector<double> mean(ch, 0.0);
  for (std::size_t c = 0; c < ch; ++c) {
    double total = 0.0;
    for (const auto& p : parts) total += p.sum[c];
    mean[c] = total / count;
  }

  std::vector<std::vector<double>> sq(images.size());
#pragma omp parallel for schedule(static) num_threads(nt)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    sq[static_cast<std::size_t>(i)] = image_sq_dev(images[static_cast<std::size_t>(i)], mean);
  }

  auto stats = finish(sq, ch, count);
  stats.mean = std::move(mean);
  return stats;
}

Image normalize(const Image& img, const ChannelStats& stats) {
  const std::size_t ch = img.channels();
  if (stats.mean.size() != ch || stats.std.size() != ch) {
    throw ContractError("stats have " + std::to_string(stats.mean.size()) +
                        " channels, image has " + std::to_string(ch));
  }
  for (double s : stats.std) {
    if (!(s > 0.0)) throw ContractError("channel std must be positive");
  }
  Image out = img;
  auto data = out.data();
  for (std::size_t i = 0; i < data.size(); i += ch) {
    for (std::size_t c = 0; c < ch; ++c) data[i + c] = (data[i + c] - stats.mean[c]) / stats.std[c];
  }
  return out;
}

std::vector<Image> normalize_all(std::span<const Image> images, const ChannelStats& stats,
                                 int threads) {
  std::vector<Image> out(images.size());
  const auto n = static_cast<std::ptrdiff_t>(images.size());
  const int nt = resolve_threads(threads);
  // exceptions must not escape the parallel region
  for (const auto& im : images) {
    if (im.channels() != stats.mean.size() || im.channels() != stats.std.size()) {
      throw ContractError("stats/image channel mismatch");
    }
  }
  for (double s : stats.std) {
    if (!(s > 0.0)) throw ContractError("channel std must be positive");
  }
#pragma omp parallel for schedule(static) num_threads(nt)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = normalize(images[static_cast<std::size_t>(i)], stats);
  }
  return out;
}

Image to_grayscale(const Image& rgb) {
  if (rgb.channels() != 3) {
    throw ContractError("to_grayscale expects 3 channels, got " +
                        std::to_string(rgb.channels()));
  }
  Image out(rgb.height(), rgb.width(), 1);
  for (std::size_t y = 0; y < rgb.height(); ++y) {
    for (std::size_t x = 0; x < rgb.width(); ++x) {
      out.at(y, x, 0) =
          0.299 * rgb.at(y, x, 0) + 0.587 * rgb.at(y, x, 1) + 0.114 * rgb.at(y, x, 2);
    }
  }
  return out;
}

Image lbp(const Image& gray) {
  if (gray.channels() != 1) throw ContractError("lbp expects a single-channel image");
  if (gray.height() < 3 || gray.width() < 3) {
    throw ContractError("lbp needs an image of at least 3x3");
  }
  // clockwise from top-left
  static constexpr std::array<std::array<int, 2>, 8> kOffsets{{
      {-1, -1}, {-1, 0}, {-1, 1}, {0, 1}, {1, 1}, {1, 0}, {1, -1}, {0, -1}}};
  const auto h = static_cast<std::ptrdiff_t>(gray.height());
  const auto w = static_cast<std::ptrdiff_t>(gray.width());
  auto clamped = [&](std::ptrdiff_t y, std::ptrdiff_t x) {
    y = std::clamp<std::ptrdiff_t>(y, 0, h - 1);
    x = std::clamp<std::ptrdiff_t>(x, 0, w - 1);
    return gray.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), 0);
  };

  Image out(gray.height(), gray.width(), 1);
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      const double centre = clamped(y, x);
      unsigned code = 0;
      for (std::size_t k = 0; k < kOffsets.size(); ++k) {
        if (clamped(y + kOffsets[k][0], x + kOffsets[k][1]) >= centre) code |= 1u << k;
      }
      out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), 0) = code;
    }
  }
  return out;
}

Image append_lbp_channel(const Image& rgb) {
  const Image codes = lbp(to_grayscale(rgb));
  Image out(rgb.height(), rgb.width(), 4);
  for (std::size_t y = 0; y < rgb.height(); ++y) {
    for (std::size_t x = 0; x < rgb.width(); ++x) {
      for (std::size_t c = 0; c < 3; ++c) out.at(y, x, c) = rgb.at(y, x, c);
      out.at(y, x, 3) = codes.at(y, x, 0);
    }
  }
  return out;
}

namespace reference {

ChannelStats channel_stats(std::span<const Image> images) {
  const std::size_t ch = common_channels(images);
  std::vector<double> sum(ch, 0.0);
  double count = 0.0;
  for (const auto& im : images) {
    for (std::size_t y = 0; y < im.height(); ++y) {
      for (std::size_t x = 0; x < im.width(); ++x) {
        for (std::size_t c = 0; c < ch; ++c) sum[c] += im.at(y, x, c);
      }
    }
    count += static_cast<double>(im.pixels());
  }
  ChannelStats s{std::vector<double>(ch), std::vector<double>(ch)};
  for (std::size_t c = 0; c < ch; ++c) s.mean[c] = sum[c] / count;
  std::vector<double> ssd(ch, 0.0);
  for (const auto& im : images) {
    for (std::size_t y = 0; y < im.height(); ++y) {
      for (std::size_t x = 0; x < im.width(); ++x) {
        for (std::size_t c = 0; c < ch; ++c) {
          const double d = im.at(y, x, c) - s.mean[c];
          ssd[c] += d * d;
        }
      }
    }
  }
  for (std::size_t c = 0; c < ch; ++c) {
    s.std[c] = std::sqrt(ssd[c] / count);
    if (!(s.std[c] > 0.0)) {
      throw ContractError("channel " + std::to_string(c) +
                          " is constant over the dataset (std = 0)");
    }
  }
  return s;
}

std::vector<Image> normalize_all(std::span<const Image> images, const ChannelStats& stats) {
  std::vector<Image> out;
  out.reserve(images.size());
  for (const auto& im : images) out.push_back(normalize(im, stats));
  return out;
}

}  // namespace reference

}  // namespace latefuse::image
