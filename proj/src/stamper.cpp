#include "wmprobe/stamper.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "wmprobe/charset.hpp"
#include "wmprobe/errors.hpp"
#include "wmprobe/keyed_stream.hpp"

namespace wmprobe {

WatermarkSpec::WatermarkSpec(Scenario scenario, std::vector<char32_t> charset,
                             std::filesystem::path font_path, std::uint64_t seed,
                             Options options)
    : scenario_(scenario),
      charset_(std::move(charset)),
      font_path_(std::move(font_path)),
      seed_(seed),
      options_(options) {
  const std::string name(to_string(scenario_));
  if (charset_.empty()) throw ConfigError(name + ": charset is empty");
  if (std::set<char32_t>(charset_.begin(), charset_.end()).size() != charset_.size())
    throw ConfigError(name + ": charset contains duplicate code points");
  if (scenario_ == Scenario::Numeric) {
    std::vector<char32_t> sorted = charset_;
    std::sort(sorted.begin(), sorted.end());
    if (sorted != default_charset(Scenario::Numeric))
      throw ConfigError(name + ": charset must be exactly the digits 0-9");
  }
  if (options_.string_length < 1)
    throw ConfigError(name + ": string_length must be >= 1");
  if (options_.font_size < 1) throw ConfigError(name + ": font_size must be >= 1");
  if (font_path_.empty()) throw ConfigError(name + ": font_path is required");
}

std::vector<char32_t> default_charset(Scenario scenario) {
  std::u32string_view chars;
  switch (scenario) {
    case Scenario::Latin: chars = U"etaoinshrdlcumwfgypb"; break;
    case Scenario::Numeric: chars = U"0123456789"; break;
    case Scenario::Chinese: chars = U"的一是不了在人有我他这个们中来上大为和国"; break;
    case Scenario::Hindi: chars = U"करनसतमलहदपयगबवजअटचशख"; break;
  }
  return {chars.begin(), chars.end()};
}

std::u32string sample_text(const WatermarkSpec& spec, std::uint64_t image_index) {
  KeyedStream stream(spec.seed(), image_index, KeyedStream::kText);
  const auto& charset = spec.charset();
  std::u32string text;
  text.reserve(spec.string_length());
  for (int i = 0; i < spec.string_length(); ++i)
    text.push_back(charset[stream.uniform_below(charset.size())]);
  return text;
}

StampResult place_and_composite(const RgbImage& image, const CoverageMask& mask,
                                const Rgba& color, std::uint64_t seed,
                                std::uint64_t image_index) {
  const int w = static_cast<int>(mask.cols());
  const int h = static_cast<int>(mask.rows());
  if (w > image.width || h > image.height)
    throw TextTooLarge("rendered text is " + std::to_string(w) + "x" +
                       std::to_string(h) + " px, frame is " +
                       std::to_string(image.width) + "x" +
                       std::to_string(image.height));

  KeyedStream stream(seed, image_index, KeyedStream::kPlacement);
  const int x0 = static_cast<int>(stream.uniform_below(image.width - w + 1));
  const int y0 = static_cast<int>(stream.uniform_below(image.height - h + 1));

  StampResult out{image, {x0, y0, w, h}};
  const std::uint8_t ink[3] = {color.r, color.g, color.b};
  constexpr std::uint32_t kFull = 255u * 255u;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::uint32_t weight = std::uint32_t{color.a} * mask(y, x);
      if (weight == 0) continue;
      for (int c = 0; c < 3; ++c) {
        std::uint8_t& px = out.stamped.at(x0 + x, y0 + y, c);
        px = static_cast<std::uint8_t>(
            (px * (kFull - weight) + ink[c] * weight + kFull / 2) / kFull);
      }
    }
  }
  return out;
}

Stamper::Stamper(const WatermarkSpec& spec)
    : spec_(spec), renderer_(spec.font_path(), spec.font_size()) {
  const auto coverage = GlyphCoverage::from_file(spec.font_path());
  const auto missing = coverage.missing(spec.charset());
  if (!missing.empty()) {
    std::string list;
    for (char32_t cp : missing) {
      char buf[16];
      std::snprintf(buf, sizeof buf, "U+%04X", static_cast<unsigned>(cp));
      list += (list.empty() ? "" : " ") + std::string(buf);
    }
    throw FontCoverage(std::string(to_string(spec.scenario())) + ": font " +
                       spec.font_path().string() + " has no glyph for " + list);
  }
}

CoverageMask Stamper::render(const std::u32string& text) const {
  return renderer_.render(text);
}

StampResult Stamper::place_and_render(const RgbImage& image,
                                      const std::u32string& text,
                                      std::uint64_t image_index) const {
  const CoverageMask mask = render(text);
  if (mask.size() == 0)
    throw TextTooLarge("text '" + utf8_encode(text) + "' renders no visible pixels");
  return place_and_composite(image, mask, spec_.color(), spec_.seed(), image_index);
}

StampResult place_and_render(const RgbImage& image, const std::u32string& text,
                             const WatermarkSpec& spec, std::uint64_t image_index) {
  return Stamper(spec).place_and_render(image, text, image_index);
}

std::vector<BaselineImage> load_baseline(const std::filesystem::path& dir) {
  std::vector<BaselineImage> out;
  std::set<std::string> seen;
  for (const auto& path : list_images(dir)) {
    std::string id = path.stem().string();
    if (!seen.insert(id).second)
      throw ConfigError("duplicate baseline image id '" + id + "' in " + dir.string());
    out.push_back({std::move(id), resize_center_crop(read_image(path))});
  }
  if (out.empty()) throw ConfigError("no PNG/JPEG images in " + dir.string());
  return out;
}

ProbePairSet build_probe_set(std::span<const BaselineImage> baseline,
                             const WatermarkSpec& spec) {
  if (baseline.empty()) throw ConfigError("baseline image set is empty");
  const Stamper stamper(spec);
  ProbePairSet set{spec.scenario(), {}};
  set.pairs.reserve(baseline.size());
  for (std::size_t i = 0; i < baseline.size(); ++i) {
    const BaselineImage& image = baseline[i];
    if (image.pixels.width != kFrameSize || image.pixels.height != kFrameSize)
      throw ConfigError("baseline image '" + image.id + "' is not 224x224");
    std::u32string text = sample_text(spec, i);
    StampResult stamped;
    try {
      stamped = stamper.place_and_render(image.pixels, text, i);
    } catch (const TextTooLarge& e) {
      throw TextTooLarge("image '" + image.id + "': " + e.what());
    }
    set.pairs.push_back({image.id, i, image.pixels, std::move(stamped.stamped),
                         stamped.box, std::move(text)});
  }
  return set;
}

std::string probe_manifest_json(const ProbePairSet& set, const WatermarkSpec& spec) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["scenario"] = to_string(set.scenario);
  j["seed"] = spec.seed();
  j["string_length"] = spec.string_length();
  j["font_size"] = spec.font_size();
  j["font_file"] = spec.font_path().filename().string();
  j["color"] = {spec.color().r, spec.color().g, spec.color().b, spec.color().a};
  j["charset"] = utf8_encode(std::u32string(spec.charset().begin(), spec.charset().end()));
  auto& images = j["images"] = nlohmann::ordered_json::array();
  for (const ProbePair& p : set.pairs) {
    nlohmann::ordered_json entry;
    entry["id"] = p.id;
    entry["index"] = p.index;
    entry["text"] = utf8_encode(p.text);
    entry["box"] = {p.box.x, p.box.y, p.box.w, p.box.h};
    entry["seed"] = spec.seed();
    images.push_back(std::move(entry));
  }
  return j.dump(2) + "\n";
}

void write_probe_set(const ProbePairSet& set, const WatermarkSpec& spec,
                     const std::filesystem::path& root) {
  const auto dir = root / std::string(to_string(set.scenario));
  std::filesystem::create_directories(dir / "clean");
  std::filesystem::create_directories(dir / "stamped");
  for (const ProbePair& p : set.pairs) {
    write_png(dir / "clean" / (p.id + ".png"), p.clean);
    write_png(dir / "stamped" / (p.id + ".png"), p.stamped);
  }
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  out << probe_manifest_json(set, spec);
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
}

}  // namespace wmprobe
