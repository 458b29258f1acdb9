#include "wmprobe/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstring>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "wmprobe/errors.hpp"

namespace wmprobe {

namespace {

cv::Mat to_bgr(const RgbImage& image) {
  cv::Mat rgb(image.height, image.width, CV_8UC3,
              const_cast<std::uint8_t*>(image.data.data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  return bgr;
}

RgbImage from_bgr(const cv::Mat& bgr) {
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  RgbImage out(rgb.cols, rgb.rows);
  for (int y = 0; y < rgb.rows; ++y)
    std::memcpy(out.data.data() + static_cast<std::size_t>(y) * rgb.cols * 3,
                rgb.ptr<std::uint8_t>(y), static_cast<std::size_t>(rgb.cols) * 3);
  return out;
}

}  // namespace

RgbImage read_image(const std::filesystem::path& path) {
  const cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw IoError("cannot decode image " + path.string());
  return from_bgr(bgr);
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
  const std::vector<int> params = {cv::IMWRITE_PNG_COMPRESSION, 6,
                                   cv::IMWRITE_PNG_STRATEGY,
                                   cv::IMWRITE_PNG_STRATEGY_DEFAULT};
  if (!cv::imwrite(path.string(), to_bgr(image), params))
    throw IoError("cannot write " + path.string());
}

RgbImage resize_center_crop(const RgbImage& image, int side) {
  if (image.width == side && image.height == side) return image;
  const double scale = static_cast<double>(side) / std::min(image.width, image.height);
  const int w = std::max(side, static_cast<int>(std::lround(image.width * scale)));
  const int h = std::max(side, static_cast<int>(std::lround(image.height * scale)));
  cv::Mat resized;
  cv::resize(to_bgr(image), resized, {w, h}, 0, 0,
             scale < 1.0 ? cv::INTER_AREA : cv::INTER_LINEAR);
  const cv::Rect crop((w - side) / 2, (h - side) / 2, side, side);
  return from_bgr(resized(crop).clone());
}

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw ConfigError("baseline directory not found: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace wmprobe
