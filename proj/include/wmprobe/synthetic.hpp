#pragma once

#include <cstdint>
#include <vector>

#include "wmprobe/activation_store.hpp"
#include "wmprobe/linear_head.hpp"

namespace wmprobe::synthetic {

/// Clean/stamped probe activations where a few "planted" columns carry a
/// watermark indicator (1 if stamped, else 0) plus Gaussian noise and every
/// other column is independent standard normal noise.
struct PlantedProbeOptions {
  Eigen::Index images_per_group = 500;
  Eigen::Index dim = 64;
  std::vector<std::size_t> planted = {7, 23, 51};
  double noise_sigma = 0.1;
  std::uint64_t seed = 1;
  std::string layer_name = "features";
  Scenario scenario = Scenario::Chinese;
};

struct PlantedProbe {
  ActivationMatrix clean;
  ActivationMatrix stamped;
  std::vector<std::size_t> planted;
};

PlantedProbe planted_probe(const PlantedProbeOptions& options);

/// Downstream classification data in the same embedding space as
/// planted_probe. Each class raises its own block of signal coordinates by
/// `signal_shift`; a watermark (planted columns = 1 + noise) appears with a
/// class-dependent rate, so labels are partially watermark-correlated.
struct PlantedTaskOptions {
  PlantedProbeOptions probe;
  int num_classes = 16;
  Eigen::Index train_size = 8000;
  Eigen::Index eval_size = 8000;
  Eigen::Index signal_coords_per_class = 1;
  double signal_shift = 3.0;
  /// Watermark rate per class; missing entries use the last value. The
  /// default stamps every class-0 image and nothing else.
  std::vector<double> watermark_rate = {1.0, 0.0};
};

struct PlantedTask {
  PlantedProbe probe;
  LabeledEmbeddingSet train;
  LabeledEmbeddingSet eval;
};

PlantedTask planted_task(const PlantedTaskOptions& options);

}  // namespace wmprobe::synthetic
