#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "wmprobe/errors.hpp"
#include "wmprobe/types.hpp"

namespace wmprobe {

template <typename Scalar>
using RowMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using RowMatrixXf = RowMatrix<float>;

/// n_images x n_reps activations for one (group, scenario), with the identity
/// of every row and column.
struct ActivationMatrix {
  RowMatrixXf values;
  std::vector<std::string> image_ids;
  std::vector<RepresentationId> reps;
  Group group = Group::Clean;
  Scenario scenario = Scenario::Chinese;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

/// Throws NonFiniteInput / LengthMismatch / ConfigError (duplicate ids or
/// reps) if `m` violates an ActivationMatrix invariant.
void validate(const ActivationMatrix& m);

/// n_images x channels x height x width, stored NCHW contiguous.
template <typename Scalar>
struct SpatialActivationBlock {
  Eigen::Index images = 0, channels = 0, height = 0, width = 0;
  std::vector<Scalar> values;

  SpatialActivationBlock() = default;
  SpatialActivationBlock(Eigen::Index n, Eigen::Index c, Eigen::Index h,
                         Eigen::Index w)
      : images(n), channels(c), height(h), width(w),
        values(static_cast<std::size_t>(n * c * h * w)) {}

  Scalar& operator()(Eigen::Index i, Eigen::Index c, Eigen::Index y,
                     Eigen::Index x) {
    return values[static_cast<std::size_t>(((i * channels + c) * height + y) * width + x)];
  }
  Scalar operator()(Eigen::Index i, Eigen::Index c, Eigen::Index y,
                    Eigen::Index x) const {
    return values[static_cast<std::size_t>(((i * channels + c) * height + y) * width + x)];
  }
};

/// Per-channel spatial mean: out(i, c) = mean over (h, w) of block(i, c, h, w).
/// Accumulates in double so the result is the correctly rounded mean for
/// float inputs.
template <typename Scalar>
RowMatrix<Scalar> pool_channels(const SpatialActivationBlock<Scalar>& block) {
  if (block.height < 1 || block.width < 1)
    throw LengthMismatch("spatial block needs height and width >= 1");
  if (static_cast<Eigen::Index>(block.values.size()) !=
      block.images * block.channels * block.height * block.width)
    throw LengthMismatch("spatial block value count does not match its shape");
  const Eigen::Index area = block.height * block.width;
  const Eigen::Map<const RowMatrix<Scalar>> maps(
      block.values.data(), block.images * block.channels, area);
  for (Eigen::Index r = 0; r < maps.rows(); ++r) {
    for (Eigen::Index k = 0; k < area; ++k) {
      if (!std::isfinite(maps(r, k))) {
        const Eigen::Index i = r / block.channels, c = r % block.channels;
        throw NonFiniteInput("non-finite activation at [" + std::to_string(i) +
                             "][" + std::to_string(c) + "][" +
                             std::to_string(k / block.width) + "][" +
                             std::to_string(k % block.width) + "]");
      }
    }
  }
  const Eigen::VectorXd means = maps.template cast<double>().rowwise().mean();
  RowMatrix<Scalar> out(block.images, block.channels);
  Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(out.data(), out.size()) =
      means.cast<Scalar>();
  return out;
}

/// Pools a float block into a full ActivationMatrix with feature reps
/// (layer_name, channel).
ActivationMatrix pool_channels(const SpatialActivationBlock<float>& block,
                               std::vector<std::string> image_ids,
                               const std::string& layer_name, Group group,
                               Scenario scenario);

// ---------------------------------------------------------------------------
// ACTD dump format
//
//   offset  size  field
//        0     4  magic "ACTD"
//        4     2  version (u16 LE) = 1
//        6     1  dtype (u8) = 1 (float32)
//        7     8  n_rows (u64 LE)
//       15     8  n_cols (u64 LE)
//       23   4*n  payload, float32 LE, row-major
//
// Companion manifest: <stem>.manifest.json next to the dump (see
// docs/formats.md).
// ---------------------------------------------------------------------------

inline constexpr std::uint16_t kActdVersion = 1;
inline constexpr std::uint8_t kActdFloat32 = 1;
inline constexpr std::size_t kActdHeaderSize = 23;

struct DumpHeader {
  std::uint16_t version = 0;
  std::uint8_t dtype = 0;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::uint64_t file_size = 0;
};

enum class Split { Train, Eval };
std::string_view to_string(Split s);
Split parse_split(std::string_view name);

/// Parsed manifest. scenario/group are required for probe dumps, labels/split
/// for labeled embedding sets.
struct DumpManifest {
  int schema_version = 1;
  std::vector<std::string> image_ids;
  std::vector<RepresentationId> reps;
  std::optional<Scenario> scenario;
  std::optional<Group> group;
  std::optional<std::vector<int>> labels;
  std::optional<Split> split;
  std::optional<int> num_classes;
  std::vector<std::string> warnings;  // written by exporters, e.g. empty class folders
};

std::filesystem::path manifest_path(const std::filesystem::path& dump);

/// Serialises header + payload. Separate from file I/O so byte layouts can
/// be checked directly.
std::vector<std::uint8_t> encode_actd(const RowMatrixXf& values);

/// Parses header + payload; checks magic/version/dtype/length and finiteness.
/// `label` names the source in error messages.
RowMatrixXf decode_actd(const std::vector<std::uint8_t>& bytes,
                        const std::string& label, DumpHeader* header = nullptr);

void write_dump(const ActivationMatrix& m, const std::filesystem::path& path);
ActivationMatrix read_dump(const std::filesystem::path& path);

void write_manifest(const DumpManifest& manifest, const std::filesystem::path& path);
DumpManifest read_manifest(const std::filesystem::path& path);

/// Header fields of a dump, after full validation of dump + manifest.
struct DumpReport {
  DumpHeader header;
  DumpManifest manifest;
};
DumpReport validate_dump(const std::filesystem::path& path);

// ---------------------------------------------------------------------------

/// Clean/stamped matrices with stamped rows matched to clean rows by image id.
class PairedView {
 public:
  PairedView(const ActivationMatrix& clean, const ActivationMatrix& stamped,
             std::vector<Eigen::Index> stamped_row_for_clean_row);

  Eigen::Index images() const { return clean_->rows(); }
  Eigen::Index reps() const { return clean_->cols(); }
  const std::vector<RepresentationId>& rep_ids() const { return clean_->reps; }

  /// Row of `stamped` holding the same image as clean row i.
  const std::vector<Eigen::Index>& permutation() const { return perm_; }

  /// Stamped activations of representation j, in clean row order.
  Eigen::VectorXf positives(Eigen::Index j) const;
  /// Clean activations of representation j.
  Eigen::VectorXf negatives(Eigen::Index j) const;

 private:
  const ActivationMatrix* clean_;
  const ActivationMatrix* stamped_;
  std::vector<Eigen::Index> perm_;
};

/// Throws MismatchedReps if the rep lists differ, MismatchedImages if the
/// stamped ids are not a permutation of the clean ids.
PairedView align_pairs(const ActivationMatrix& clean, const ActivationMatrix& stamped);

}  // namespace wmprobe
