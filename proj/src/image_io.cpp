#include "latefuse/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <regex>
#include <string>

namespace latefuse::image {

static_assert(std::endian::native == std::endian::little,
              "npy I/O assumes a little-endian host");

namespace {

// Next header integer, skipping whitespace and '#' comments.
std::size_t read_header_int(std::istream& in) {
  int c = in.peek();
  while (c != EOF) {
    if (std::isspace(c)) {
      in.get();
    } else if (c == '#') {
      std::string comment;
      std::getline(in, comment);
    } else {
      break;
    }
    c = in.peek();
  }
  std::size_t value = 0;
  bool any = false;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + static_cast<std::size_t>(in.get() - '0');
    any = true;
    if (value > (1u << 24)) throw FormatError("PNM header value too large");
    c = in.peek();
  }
  if (!any) throw FormatError("malformed PNM header");
  return value;
}

}  // namespace

Image read_pnm(std::istream& in) {
  char magic[2] = {0, 0};
  if (!in.read(magic, 2) || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6')) {
    throw FormatError("not a binary PGM/PPM file (expected P5 or P6)");
  }
  const std::size_t channels = magic[1] == '6' ? 3 : 1;
  const std::size_t width = read_header_int(in);
  const std::size_t height = read_header_int(in);
  const std::size_t maxval = read_header_int(in);
  if (width == 0 || height == 0) throw FormatError("PNM image has a zero dimension");
  if (maxval == 0 || maxval > 255) {
    throw FormatError("unsupported PNM maxval " + std::to_string(maxval) + " (need 1..255)");
  }
  if (!std::isspace(in.get())) throw FormatError("missing whitespace after PNM header");

  std::vector<unsigned char> raw(width * height * channels);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw FormatError("PNM pixel data truncated");
  }
  std::vector<double> data(raw.size());
  const double scale = 255.0 / static_cast<double>(maxval);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] > maxval) throw FormatError("PNM sample exceeds maxval");
    data[i] = maxval == 255 ? raw[i] : std::round(raw[i] * scale);
  }
  return Image(height, width, channels, std::move(data));
}

Image read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return read_pnm(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_pnm(std::ostream& out, const Image& img) {
  if (img.channels() != 1 && img.channels() != 3) {
    throw ContractError("PNM holds 1 or 3 channels, image has " +
                        std::to_string(img.channels()));
  }
  out << (img.channels() == 3 ? "P6" : "P5") << '\n'
      << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<unsigned char> raw(img.data().size());
  std::transform(img.data().begin(), img.data().end(), raw.begin(), [](double v) {
    return static_cast<unsigned char>(std::clamp(std::lround(v), 0L, 255L));
  });
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

void write_pnm(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  write_pnm(out, img);
}

void write_npy(const std::filesystem::path& path, const Image& img) {
  std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': (" +
                       std::to_string(img.height()) + ", " + std::to_string(img.width()) +
                       ", " + std::to_string(img.channels()) + "), }";
  // magic(6) + version(2) + length(2) + header + '\n' is a multiple of 64
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header.push_back('\n');

  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write("\x93NUMPY\x01\x00", 8);
  const auto len = static_cast<std::uint16_t>(header.size());
  const char len_bytes[2] = {static_cast<char>(len & 0xFF), static_cast<char>(len >> 8)};
  out.write(len_bytes, 2);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(img.data().data()),
            static_cast<std::streamsize>(img.data().size() * sizeof(double)));
}

Image read_npy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  char prefix[10];
  if (!in.read(prefix, 10) || std::memcmp(prefix, "\x93NUMPY\x01\x00", 8) != 0) {
    throw FormatError(path.string() + ": not a version 1.0 .npy file");
  }
  const std::size_t len = static_cast<unsigned char>(prefix[8]) |
                          (static_cast<std::size_t>(static_cast<unsigned char>(prefix[9])) << 8);
  std::string header(len, '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(len))) {
    throw FormatError(path.string() + ": truncated .npy header");
  }
  static const std::regex kShape(
      R"('descr':\s*'<f8',\s*'fortran_order':\s*False,\s*'shape':\s*\((\d+),\s*(\d+),\s*(\d+)\))");
  std::smatch m;
  if (!std::regex_search(header, m, kShape)) {
    throw FormatError(path.string() + ": unsupported .npy header " + header);
  }
  const auto h = std::stoul(m[1]);
  const auto w = std::stoul(m[2]);
  const auto c = std::stoul(m[3]);
  std::vector<double> data(h * w * c);
  if (!in.read(reinterpret_cast<char*>(data.data()),
               static_cast<std::streamsize>(data.size() * sizeof(double)))) {
    throw FormatError(path.string() + ": truncated .npy data");
  }
  return Image(h, w, c, std::move(data));
}

}  // namespace latefuse::image
