#include "wmprobe/synthetic.hpp"

#include <algorithm>
#include <random>
#include <set>

namespace wmprobe::synthetic {

namespace {

ActivationMatrix probe_group(const PlantedProbeOptions& o, Group group,
                             std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  const std::set<std::size_t> planted(o.planted.begin(), o.planted.end());
  const double indicator = group == Group::Stamped ? 1.0 : 0.0;

  ActivationMatrix m;
  m.values.resize(o.images_per_group, o.dim);
  for (Eigen::Index i = 0; i < o.images_per_group; ++i)
    for (Eigen::Index j = 0; j < o.dim; ++j)
      m.values(i, j) = static_cast<float>(
          planted.count(static_cast<std::size_t>(j)) ? indicator + o.noise_sigma * normal(rng)
                                                     : normal(rng));
  for (Eigen::Index i = 0; i < o.images_per_group; ++i)
    m.image_ids.push_back("img" + std::to_string(i));
  for (Eigen::Index j = 0; j < o.dim; ++j)
    m.reps.push_back({o.layer_name, static_cast<long>(j), RepKind::Feature});
  m.group = group;
  m.scenario = o.scenario;
  return m;
}

LabeledEmbeddingSet downstream(const PlantedTaskOptions& o, Eigen::Index n, Split split,
                               std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit;
  const auto& planted = o.probe.planted;
  const std::set<std::size_t> planted_set(planted.begin(), planted.end());

  // Signal blocks use the unplanted coordinates in ascending order.
  std::vector<Eigen::Index> free;
  for (Eigen::Index j = 0; j < o.probe.dim; ++j)
    if (!planted_set.count(static_cast<std::size_t>(j))) free.push_back(j);

  RowMatrixXf x(n, o.probe.dim);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % o.num_classes);
    labels[i] = c;
    for (Eigen::Index j = 0; j < o.probe.dim; ++j) x(i, j) = static_cast<float>(normal(rng));
    for (Eigen::Index s = 0; s < o.signal_coords_per_class; ++s) {
      const auto slot = static_cast<std::size_t>(c * o.signal_coords_per_class + s);
      if (slot < free.size()) x(i, free[slot]) += static_cast<float>(o.signal_shift);
    }
    const double rate = o.watermark_rate.empty()
                            ? 0.0
                            : o.watermark_rate[std::min<std::size_t>(
                                  c, o.watermark_rate.size() - 1)];
    const double indicator = unit(rng) < rate ? 1.0 : 0.0;
    for (std::size_t p : planted)
      x(i, static_cast<Eigen::Index>(p)) =
          static_cast<float>(indicator + o.probe.noise_sigma * normal(rng));
  }
  return make_labeled_set(std::move(x), std::move(labels), split, o.num_classes);
}

}  // namespace

PlantedProbe planted_probe(const PlantedProbeOptions& options) {
  std::mt19937_64 rng(options.seed);
  PlantedProbe out;
  out.clean = probe_group(options, Group::Clean, rng);
  out.stamped = probe_group(options, Group::Stamped, rng);
  out.planted = options.planted;
  return out;
}

PlantedTask planted_task(const PlantedTaskOptions& options) {
  PlantedTask task;
  task.probe = planted_probe(options.probe);
  std::mt19937_64 rng(options.probe.seed ^ 0x5DEECE66Dull);
  task.train = downstream(options, options.train_size, Split::Train, rng);
  task.eval = downstream(options, options.eval_size, Split::Eval, rng);
  return task;
}

}  // namespace wmprobe::synthetic
