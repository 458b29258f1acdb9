#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "wmprobe/errors.hpp"
#include "wmprobe/font.hpp"
#include "wmprobe/image_io.hpp"
#include "wmprobe/types.hpp"

namespace wmprobe {

struct Rgba {
  std::uint8_t r = 255, g = 255, b = 255, a = 255;
  bool operator==(const Rgba&) const = default;
};

/// Everything that determines one watermark scenario's probe set.
/// The constructor enforces all invariants; a constructed spec is valid.
class WatermarkSpec {
 public:
  struct Options {
    Rgba color{};
    int string_length = 7;
    int font_size = 30;
  };

  WatermarkSpec(Scenario scenario, std::vector<char32_t> charset,
                std::filesystem::path font_path, std::uint64_t seed,
                Options options);
  WatermarkSpec(Scenario scenario, std::vector<char32_t> charset,
                std::filesystem::path font_path, std::uint64_t seed)
      : WatermarkSpec(scenario, std::move(charset), std::move(font_path), seed,
                      Options{}) {}

  Scenario scenario() const noexcept { return scenario_; }
  const std::vector<char32_t>& charset() const noexcept { return charset_; }
  const std::filesystem::path& font_path() const noexcept { return font_path_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const Rgba& color() const noexcept { return options_.color; }
  int string_length() const noexcept { return options_.string_length; }
  int font_size() const noexcept { return options_.font_size; }

 private:
  Scenario scenario_;
  std::vector<char32_t> charset_;
  std::filesystem::path font_path_;
  std::uint64_t seed_;
  Options options_;
};

/// Built-in charsets. Latin: 20 most frequent English letters; Numeric: 0-9;
/// Chinese and Hindi: fixed 20-symbol high-frequency lists.
std::vector<char32_t> default_charset(Scenario scenario);

/// Pixel rectangle [x, x+w) x [y, y+h).
struct Box {
  int x = 0, y = 0, w = 0, h = 0;
  bool operator==(const Box&) const = default;
};

struct BaselineImage {
  std::string id;
  RgbImage pixels;
};

struct StampResult {
  RgbImage stamped;
  Box box;
};

/// string_length code points drawn uniformly with replacement from the
/// charset, from the stream keyed by (seed, image_index).
std::u32string sample_text(const WatermarkSpec& spec, std::uint64_t image_index);

/// Places `mask` at a top-left corner drawn uniformly over all positions that
/// keep it inside the frame, and alpha-composites `color` through it. Only
/// pixels inside the returned box are touched. Throws TextTooLarge when the
/// mask does not fit.
StampResult place_and_composite(const RgbImage& image, const CoverageMask& mask,
                                const Rgba& color, std::uint64_t seed,
                                std::uint64_t image_index);

/// Holds the loaded font for one spec. Construction checks that the font
/// covers every charset code point (FontCoverage otherwise).
class Stamper {
 public:
  explicit Stamper(const WatermarkSpec& spec);

  const WatermarkSpec& spec() const noexcept { return spec_; }

  CoverageMask render(const std::u32string& text) const;
  StampResult place_and_render(const RgbImage& image, const std::u32string& text,
                               std::uint64_t image_index) const;

 private:
  WatermarkSpec spec_;
  TextRenderer renderer_;
};

StampResult place_and_render(const RgbImage& image, const std::u32string& text,
                             const WatermarkSpec& spec, std::uint64_t image_index);

struct ProbePair {
  std::string id;
  std::uint64_t index = 0;
  RgbImage clean;
  RgbImage stamped;
  Box box;
  std::u32string text;
};

struct ProbePairSet {
  Scenario scenario = Scenario::Chinese;
  std::vector<ProbePair> pairs;
};

/// Loads every PNG/JPEG in `dir` as a 224x224 baseline; id = filename stem.
std::vector<BaselineImage> load_baseline(const std::filesystem::path& dir);

/// One pair per baseline image; image_index is the position in `baseline`.
ProbePairSet build_probe_set(std::span<const BaselineImage> baseline,
                             const WatermarkSpec& spec);

/// manifest.json content for a probe set (stable key order, trailing newline).
std::string probe_manifest_json(const ProbePairSet& set, const WatermarkSpec& spec);

/// Writes <root>/<scenario>/{clean,stamped}/<id>.png and
/// <root>/<scenario>/manifest.json.
void write_probe_set(const ProbePairSet& set, const WatermarkSpec& spec,
                     const std::filesystem::path& root);

}  // namespace wmprobe
