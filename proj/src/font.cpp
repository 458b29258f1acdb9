#include "wmprobe/font.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include <opencv2/core.hpp>
#include <opencv2/freetype.hpp>
#include <opencv2/imgproc.hpp>

#include "wmprobe/charset.hpp"
#include "wmprobe/errors.hpp"

namespace wmprobe {

namespace {

struct Reader {
  const std::vector<std::uint8_t>& bytes;
  const std::string& label;

  void need(std::size_t offset, std::size_t n) const {
    if (offset + n > bytes.size())
      throw ConfigError(label + ": truncated font table at byte " +
                        std::to_string(offset));
  }
  std::uint16_t u16(std::size_t offset) const {
    need(offset, 2);
    return static_cast<std::uint16_t>((bytes[offset] << 8) | bytes[offset + 1]);
  }
  std::uint32_t u32(std::size_t offset) const {
    need(offset, 4);
    return (std::uint32_t{bytes[offset]} << 24) |
           (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | bytes[offset + 3];
  }
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open font file " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

GlyphCoverage GlyphCoverage::from_file(const std::filesystem::path& path) {
  return from_bytes(read_file(path), path.string());
}

GlyphCoverage GlyphCoverage::from_bytes(std::vector<std::uint8_t> bytes,
                                        const std::string& label) {
  GlyphCoverage out;
  out.bytes_ = std::move(bytes);
  const Reader r{out.bytes_, label};

  std::size_t font_offset = 0;
  if (r.u32(0) == 0x74746366)  // 'ttcf': use the first face of a collection
    font_offset = r.u32(12);

  const std::uint16_t num_tables = r.u16(font_offset + 4);
  std::size_t cmap = 0;
  for (std::uint16_t t = 0; t < num_tables; ++t) {
    const std::size_t rec = font_offset + 12 + 16 * std::size_t{t};
    if (r.u32(rec) == 0x636D6170) {  // 'cmap'
      cmap = r.u32(rec + 8);
      break;
    }
  }
  if (cmap == 0) throw ConfigError(label + ": font has no cmap table");

  const std::uint16_t n_sub = r.u16(cmap + 2);
  for (std::uint16_t s = 0; s < n_sub; ++s) {
    const std::size_t rec = cmap + 4 + 8 * std::size_t{s};
    const std::uint16_t platform = r.u16(rec);
    const std::uint16_t encoding = r.u16(rec + 2);
    const bool unicode =
        platform == 0 || (platform == 3 && (encoding == 1 || encoding == 10));
    if (!unicode) continue;
    const std::size_t off = cmap + r.u32(rec + 4);
    const std::uint16_t format = r.u16(off);
    if (format == 4 || format == 12) out.subtables_.push_back({format, off});
  }
  if (out.subtables_.empty())
    throw ConfigError(label + ": font has no Unicode cmap subtable");
  return out;
}

bool GlyphCoverage::covers(char32_t cp) const {
  static const std::string label = "font";
  const Reader r{bytes_, label};
  for (const Subtable& st : subtables_) {
    if (st.format == 4) {
      if (cp > 0xFFFF) continue;
      const std::size_t seg_count = r.u16(st.offset + 6) / 2;
      const std::size_t ends = st.offset + 14;
      const std::size_t starts = ends + 2 * seg_count + 2;
      const std::size_t deltas = starts + 2 * seg_count;
      const std::size_t range_offsets = deltas + 2 * seg_count;
      for (std::size_t s = 0; s < seg_count; ++s) {
        const std::uint16_t end = r.u16(ends + 2 * s);
        if (cp > end) continue;
        const std::uint16_t start = r.u16(starts + 2 * s);
        if (cp < start) break;
        const std::uint16_t delta = r.u16(deltas + 2 * s);
        const std::size_t ro_addr = range_offsets + 2 * s;
        const std::uint16_t ro = r.u16(ro_addr);
        std::uint16_t glyph;
        if (ro == 0) {
          glyph = static_cast<std::uint16_t>(cp + delta);
        } else {
          glyph = r.u16(ro_addr + ro + 2 * (cp - start));
          if (glyph != 0) glyph = static_cast<std::uint16_t>(glyph + delta);
        }
        if (glyph != 0) return true;
        break;
      }
    } else {
      const std::uint32_t n_groups = r.u32(st.offset + 12);
      for (std::uint32_t g = 0; g < n_groups; ++g) {
        const std::size_t grp = st.offset + 16 + 12 * std::size_t{g};
        const std::uint32_t first = r.u32(grp);
        const std::uint32_t last = r.u32(grp + 4);
        if (cp < first || cp > last) continue;
        if (r.u32(grp + 8) + (cp - first) != 0) return true;
      }
    }
  }
  return false;
}

std::vector<char32_t> GlyphCoverage::missing(
    std::span<const char32_t> charset) const {
  std::vector<char32_t> out;
  for (char32_t cp : charset)
    if (!covers(cp)) out.push_back(cp);
  return out;
}

struct TextRenderer::Impl {
  cv::Ptr<cv::freetype::FreeType2> face;
};

TextRenderer::TextRenderer(const std::filesystem::path& font_path, int font_size)
    : impl_(std::make_unique<Impl>()), font_size_(font_size) {
  if (font_size < 1) throw ConfigError("font size must be positive");
  if (!std::filesystem::is_regular_file(font_path))
    throw ConfigError("font file not found: " + font_path.string());
  impl_->face = cv::freetype::createFreeType2();
  try {
    impl_->face->loadFontData(font_path.string(), 0);
  } catch (const cv::Exception& e) {
    throw ConfigError("cannot load font " + font_path.string() + ": " + e.what());
  }
}

TextRenderer::~TextRenderer() = default;
TextRenderer::TextRenderer(TextRenderer&&) noexcept = default;
TextRenderer& TextRenderer::operator=(TextRenderer&&) noexcept = default;

CoverageMask TextRenderer::render(const std::u32string& text) const {
  const std::string utf8 = utf8_encode(text);
  int baseline = 0;
  cv::Size extent = impl_->face->getTextSize(utf8, font_size_, -1, &baseline);
  // Whitespace-only strings report a negative ink height.
  extent.width = std::max(extent.width, 0);
  extent.height = std::max(extent.height, 0);
  // Generous margins: glyph ink may overhang the advance box.
  const int margin = 2 * font_size_;
  cv::Mat canvas(extent.height + 2 * margin, extent.width + 2 * margin, CV_8UC3,
                 cv::Scalar::all(0));
  impl_->face->putText(canvas, utf8, {margin, margin + extent.height}, font_size_,
                       cv::Scalar::all(255), -1, cv::LINE_AA, true);

  cv::Mat ink;
  cv::extractChannel(canvas, ink, 0);
  const cv::Rect box = cv::boundingRect(ink);
  if (box.area() == 0) return CoverageMask(0, 0);

  CoverageMask mask(box.height, box.width);
  for (int y = 0; y < box.height; ++y)
    for (int x = 0; x < box.width; ++x)
      mask(y, x) = ink.at<std::uint8_t>(box.y + y, box.x + x);
  return mask;
}

}  // namespace wmprobe
