#include "wmprobe/activation_store.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>
#include <unordered_map>

#include <json.hpp>

namespace wmprobe {

using nlohmann::json;

void validate(const ActivationMatrix& m) {
  if (static_cast<Eigen::Index>(m.image_ids.size()) != m.rows())
    throw LengthMismatch("image_ids has " + std::to_string(m.image_ids.size()) +
                         " entries for " + std::to_string(m.rows()) + " rows");
  if (static_cast<Eigen::Index>(m.reps.size()) != m.cols())
    throw LengthMismatch("reps has " + std::to_string(m.reps.size()) +
                         " entries for " + std::to_string(m.cols()) + " columns");
  if (std::set<std::string>(m.image_ids.begin(), m.image_ids.end()).size() !=
      m.image_ids.size())
    throw ConfigError("image_ids are not unique");
  std::set<std::pair<std::string, long>> seen;
  for (const auto& r : m.reps)
    if (!seen.emplace(r.layer_name, r.index).second)
      throw ConfigError("duplicate representation " + r.layer_name + "[" +
                        std::to_string(r.index) + "]");
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (!std::isfinite(m.values(i, j)))
        throw NonFiniteInput("non-finite activation at row " + std::to_string(i) +
                             ", column " + std::to_string(j));
}

ActivationMatrix pool_channels(const SpatialActivationBlock<float>& block,
                               std::vector<std::string> image_ids,
                               const std::string& layer_name, Group group,
                               Scenario scenario) {
  ActivationMatrix m;
  m.values = pool_channels(block);
  m.image_ids = std::move(image_ids);
  for (Eigen::Index c = 0; c < block.channels; ++c)
    m.reps.push_back({layer_name, static_cast<long>(c), RepKind::Feature});
  m.group = group;
  m.scenario = scenario;
  validate(m);
  return m;
}

std::string_view to_string(Split s) { return s == Split::Train ? "train" : "eval"; }

Split parse_split(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "eval") return Split::Eval;
  throw ConfigError("unknown split '" + std::string(name) + "'");
}

std::filesystem::path manifest_path(const std::filesystem::path& dump) {
  auto p = dump;
  p.replace_extension(".manifest.json");
  return p;
}

namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t k = 0; k < sizeof(T); ++k)
    out.push_back(static_cast<std::uint8_t>(value >> (8 * k)));
}

template <typename T>
T get_le(const std::vector<std::uint8_t>& in, std::size_t offset) {
  T value = 0;
  for (std::size_t k = 0; k < sizeof(T); ++k)
    value |= static_cast<T>(in[offset + k]) << (8 * k);
  return value;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path,
                 const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace

std::vector<std::uint8_t> encode_actd(const RowMatrixXf& values) {
  std::vector<std::uint8_t> out;
  out.reserve(kActdHeaderSize + 4 * static_cast<std::size_t>(values.size()));
  for (char c : {'A', 'C', 'T', 'D'}) out.push_back(static_cast<std::uint8_t>(c));
  put_le<std::uint16_t>(out, kActdVersion);
  put_le<std::uint8_t>(out, kActdFloat32);
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(values.rows()));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(values.cols()));
  for (Eigen::Index k = 0; k < values.size(); ++k)
    put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(values.data()[k]));
  return out;
}

RowMatrixXf decode_actd(const std::vector<std::uint8_t>& bytes,
                        const std::string& label, DumpHeader* header) {
  const std::size_t size = bytes.size();
  auto need = [&](std::size_t offset, std::size_t n, const char* field) {
    if (size < offset + n)
      throw FormatError(label, size,
                        std::string("file truncated inside ") + field);
  };
  need(0, 4, "magic");
  if (std::memcmp(bytes.data(), "ACTD", 4) != 0)
    throw FormatError(label, 0, "bad magic (expected \"ACTD\")");
  need(4, 2, "version");
  const auto version = get_le<std::uint16_t>(bytes, 4);
  if (version != kActdVersion)
    throw FormatError(label, 4, "unsupported version " + std::to_string(version));
  need(6, 1, "dtype");
  const auto dtype = bytes[6];
  if (dtype != kActdFloat32)
    throw FormatError(label, 6, "unsupported dtype code " + std::to_string(dtype));
  need(7, 8, "n_rows");
  const auto rows = get_le<std::uint64_t>(bytes, 7);
  need(15, 8, "n_cols");
  const auto cols = get_le<std::uint64_t>(bytes, 15);

  constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
  if (cols != 0 && rows > (kMax - kActdHeaderSize) / 4 / cols)
    throw FormatError(label, 7, "n_rows * n_cols overflows");
  const std::uint64_t expected = kActdHeaderSize + 4 * rows * cols;
  if (size < expected)
    throw FormatError(label, size,
                      "payload truncated: header declares " + std::to_string(rows) +
                          "x" + std::to_string(cols) + " (" +
                          std::to_string(expected) + " bytes), file has " +
                          std::to_string(size));
  if (size > expected)
    throw FormatError(label, expected,
                      std::to_string(size - expected) +
                          " trailing bytes after declared payload");

  RowMatrixXf values(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index k = 0; k < values.size(); ++k) {
    const std::size_t offset = kActdHeaderSize + 4 * static_cast<std::size_t>(k);
    const float v = std::bit_cast<float>(get_le<std::uint32_t>(bytes, offset));
    if (!std::isfinite(v))
      throw NonFiniteInput(label + " @ byte " + std::to_string(offset) +
                           ": non-finite value at row " +
                           std::to_string(k / values.cols()) + ", column " +
                           std::to_string(k % values.cols()));
    values.data()[k] = v;
  }
  if (header) *header = {version, dtype, rows, cols, size};
  return values;
}

void write_manifest(const DumpManifest& m, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["schema_version"] = m.schema_version;
  if (m.scenario) j["scenario"] = to_string(*m.scenario);
  if (m.group) j["group_label"] = to_string(*m.group);
  j["image_ids"] = m.image_ids;
  auto& reps = j["reps"] = nlohmann::ordered_json::array();
  for (const auto& r : m.reps)
    reps.push_back({{"layer", r.layer_name}, {"index", r.index},
                    {"kind", to_string(r.kind)}});
  if (m.labels) j["labels"] = *m.labels;
  if (m.split) j["split"] = to_string(*m.split);
  if (m.num_classes) j["num_classes"] = *m.num_classes;
  if (!m.warnings.empty()) j["warnings"] = m.warnings;
  const std::string text = j.dump(1) + "\n";
  write_bytes(path, {text.begin(), text.end()});
}

DumpManifest read_manifest(const std::filesystem::path& path) {
  const std::string label = path.string();
  if (!std::filesystem::exists(path))
    throw FormatError(label, std::nullopt, "manifest file missing");
  const auto bytes = read_bytes(path);
  DumpManifest m;
  try {
    const json j = json::parse(bytes.begin(), bytes.end());
    m.schema_version = j.at("schema_version").get<int>();
    if (m.schema_version != 1)
      throw FormatError(label, std::nullopt,
                        "unsupported schema_version " + std::to_string(m.schema_version));
    m.image_ids = j.at("image_ids").get<std::vector<std::string>>();
    for (const auto& r : j.at("reps"))
      m.reps.push_back({r.at("layer").get<std::string>(), r.at("index").get<long>(),
                        parse_rep_kind(r.at("kind").get<std::string>())});
    if (j.contains("scenario"))
      m.scenario = parse_scenario(j["scenario"].get<std::string>());
    if (j.contains("group_label"))
      m.group = parse_group(j["group_label"].get<std::string>());
    if (j.contains("labels")) m.labels = j["labels"].get<std::vector<int>>();
    if (j.contains("split")) m.split = parse_split(j["split"].get<std::string>());
    if (j.contains("num_classes")) m.num_classes = j["num_classes"].get<int>();
    if (j.contains("warnings")) m.warnings = j["warnings"].get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw FormatError(label, std::nullopt, std::string("invalid manifest: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(label, std::nullopt, std::string("invalid manifest: ") + e.what());
  }
  return m;
}

namespace {

void check_manifest_shape(const DumpManifest& m, const DumpHeader& h,
                          const std::filesystem::path& mpath) {
  if (m.image_ids.size() != h.rows)
    throw FormatError(mpath.string(), std::nullopt,
                      "manifest lists " + std::to_string(m.image_ids.size()) +
                          " image ids, dump has " + std::to_string(h.rows) + " rows");
  if (m.reps.size() != h.cols)
    throw FormatError(mpath.string(), std::nullopt,
                      "manifest lists " + std::to_string(m.reps.size()) +
                          " reps, dump has " + std::to_string(h.cols) + " columns");
  if (m.labels && m.labels->size() != h.rows)
    throw FormatError(mpath.string(), std::nullopt,
                      "manifest lists " + std::to_string(m.labels->size()) +
                          " labels, dump has " + std::to_string(h.rows) + " rows");
}

}  // namespace

void write_dump(const ActivationMatrix& m, const std::filesystem::path& path) {
  validate(m);
  write_bytes(path, encode_actd(m.values));
  DumpManifest manifest;
  manifest.image_ids = m.image_ids;
  manifest.reps = m.reps;
  manifest.scenario = m.scenario;
  manifest.group = m.group;
  write_manifest(manifest, manifest_path(path));
}

DumpReport validate_dump(const std::filesystem::path& path) {
  DumpReport report;
  decode_actd(read_bytes(path), path.string(), &report.header);
  const auto mpath = manifest_path(path);
  report.manifest = read_manifest(mpath);
  check_manifest_shape(report.manifest, report.header, mpath);
  return report;
}

ActivationMatrix read_dump(const std::filesystem::path& path) {
  DumpHeader header;
  ActivationMatrix m;
  m.values = decode_actd(read_bytes(path), path.string(), &header);
  const auto mpath = manifest_path(path);
  DumpManifest manifest = read_manifest(mpath);
  check_manifest_shape(manifest, header, mpath);
  if (!manifest.scenario || !manifest.group)
    throw FormatError(mpath.string(), std::nullopt,
                      "activation manifest needs scenario and group_label");
  m.image_ids = std::move(manifest.image_ids);
  m.reps = std::move(manifest.reps);
  m.scenario = *manifest.scenario;
  m.group = *manifest.group;
  validate(m);
  return m;
}

PairedView::PairedView(const ActivationMatrix& clean, const ActivationMatrix& stamped,
                       std::vector<Eigen::Index> perm)
    : clean_(&clean), stamped_(&stamped), perm_(std::move(perm)) {}

Eigen::VectorXf PairedView::positives(Eigen::Index j) const {
  Eigen::VectorXf out(images());
  for (Eigen::Index i = 0; i < images(); ++i) out(i) = stamped_->values(perm_[i], j);
  return out;
}

Eigen::VectorXf PairedView::negatives(Eigen::Index j) const {
  return clean_->values.col(j);
}

PairedView align_pairs(const ActivationMatrix& clean, const ActivationMatrix& stamped) {
  if (clean.reps != stamped.reps)
    throw MismatchedReps("clean and stamped dumps describe different representations (" +
                         std::to_string(clean.reps.size()) + " vs " +
                         std::to_string(stamped.reps.size()) + " reps)");
  if (clean.group != Group::Clean || stamped.group != Group::Stamped)
    throw MismatchedImages("expected a clean and a stamped dump, got " +
                           std::string(to_string(clean.group)) + " and " +
                           std::string(to_string(stamped.group)));
  if (clean.scenario != stamped.scenario)
    throw MismatchedImages("clean and stamped dumps belong to different scenarios");
  if (clean.image_ids.size() != stamped.image_ids.size())
    throw MismatchedImages("clean has " + std::to_string(clean.image_ids.size()) +
                           " images, stamped has " +
                           std::to_string(stamped.image_ids.size()));

  std::unordered_map<std::string, Eigen::Index> stamped_row;
  for (std::size_t r = 0; r < stamped.image_ids.size(); ++r)
    if (!stamped_row.emplace(stamped.image_ids[r], static_cast<Eigen::Index>(r)).second)
      throw MismatchedImages("duplicate image id '" + stamped.image_ids[r] +
                             "' in stamped dump");
  std::vector<Eigen::Index> perm;
  perm.reserve(clean.image_ids.size());
  std::set<std::string> clean_seen;
  for (const auto& id : clean.image_ids) {
    if (!clean_seen.insert(id).second)
      throw MismatchedImages("duplicate image id '" + id + "' in clean dump");
    const auto it = stamped_row.find(id);
    if (it == stamped_row.end())
      throw MismatchedImages("image '" + id + "' has no stamped counterpart");
    perm.push_back(it->second);
  }
  return PairedView(clean, stamped, std::move(perm));
}

}  // namespace wmprobe
