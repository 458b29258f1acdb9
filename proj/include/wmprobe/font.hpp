#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace wmprobe {

/// 8-bit glyph coverage (0 = transparent, 255 = fully inked), rows = height.
using CoverageMask =
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Unicode -> glyph mapping read from a TrueType/OpenType `cmap` table.
/// Supports subtable formats 4 and 12, which cover every Unicode font in
/// practical use.
class GlyphCoverage {
 public:
  static GlyphCoverage from_file(const std::filesystem::path& path);
  static GlyphCoverage from_bytes(std::vector<std::uint8_t> bytes,
                                  const std::string& label);

  bool covers(char32_t code_point) const;

  /// Code points from `charset` the font has no glyph for.
  std::vector<char32_t> missing(std::span<const char32_t> charset) const;

 private:
  struct Subtable {
    std::uint16_t format;
    std::size_t offset;
  };
  std::vector<std::uint8_t> bytes_;
  std::vector<Subtable> subtables_;
};

/// Rasterises UTF-8 text with a font file at a given pixel size and returns
/// the tight coverage mask around the inked pixels.
class TextRenderer {
 public:
  TextRenderer(const std::filesystem::path& font_path, int font_size);
  ~TextRenderer();
  TextRenderer(TextRenderer&&) noexcept;
  TextRenderer& operator=(TextRenderer&&) noexcept;

  CoverageMask render(const std::u32string& text) const;
  int font_size() const noexcept { return font_size_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int font_size_;
};

}  // namespace wmprobe
