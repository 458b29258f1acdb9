#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace wmprobe {

/// Interleaved 8-bit RGB raster, row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  RgbImage() = default;
  RgbImage(int w, int h)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  bool operator==(const RgbImage&) const = default;
};

inline constexpr int kFrameSize = 224;

/// Decodes a PNG/JPEG file into RGB. Throws IoError on failure.
RgbImage read_image(const std::filesystem::path& path);

/// Lossless PNG with fixed encoder settings, so equal pixels give equal bytes.
void write_png(const std::filesystem::path& path, const RgbImage& image);

/// Resize so the shorter side equals `side` (area filter when shrinking,
/// bilinear when enlarging), then center-crop to side x side.
RgbImage resize_center_crop(const RgbImage& image, int side = kFrameSize);

/// PNG/JPEG files directly inside `dir`, sorted by filename.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

}  // namespace wmprobe
