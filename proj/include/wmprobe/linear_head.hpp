#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "wmprobe/activation_store.hpp"
#include "wmprobe/errors.hpp"
#include "wmprobe/probe.hpp"

namespace wmprobe {

/// Embeddings with integer class labels for training or evaluating a head.
struct LabeledEmbeddingSet {
  RowMatrixXf embeddings;
  std::vector<int> labels;
  Split split = Split::Train;
  int num_classes = 0;

  Eigen::Index size() const { return embeddings.rows(); }
  Eigen::Index dim() const { return embeddings.cols(); }
};

/// Checks n > 0, one label per row, labels in [0, num_classes), finite
/// values. num_classes <= 0 means max(label) + 1.
LabeledEmbeddingSet make_labeled_set(RowMatrixXf embeddings, std::vector<int> labels,
                                     Split split, int num_classes = 0);

/// ACTD dump whose manifest carries labels, split and num_classes.
void write_labeled_set(const LabeledEmbeddingSet& set, const std::filesystem::path& path);
LabeledEmbeddingSet read_labeled_set(const std::filesystem::path& path);

/// Coordinates excluded from the head: the first floor(alpha * D) entries of
/// the differentiability ranking.
struct MaskPlan {
  double alpha = 0;
  std::vector<std::size_t> ranking;
  std::vector<std::size_t> masked;  // ranking order
  std::vector<std::size_t> kept;    // ascending

  std::size_t dim() const { return ranking.size(); }
};

/// Throws LengthMismatch unless scores.size() == dim, OutOfRange unless
/// alpha is in [0, 1].
MaskPlan make_mask(std::span<const RepScore> scores, double alpha, std::size_t dim);

struct TrainingConfig {
  int batch_size = 128;
  double learning_rate = 0.01;
  double momentum = 0.9;
  int epochs = 30;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
};

/// Mean softmax cross-entropy of logits X W^T + b and its gradients.
template <typename Scalar>
struct SoftmaxLoss {
  Scalar loss = 0;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> grad_weights;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> grad_bias;
};

template <typename Scalar, typename DerivedX>
SoftmaxLoss<Scalar> softmax_cross_entropy(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& weights,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& bias,
    const Eigen::MatrixBase<DerivedX>& x, std::span<const int> labels) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index n = x.rows();
  Matrix logits = x * weights.transpose();
  logits.rowwise() += bias.transpose();

  // Row-wise softmax with the max subtracted; probs becomes P - Y in place.
  Matrix probs(n, weights.rows());
  Scalar loss = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar peak = logits.row(i).maxCoeff();
    probs.row(i) = (logits.row(i).array() - peak).exp().matrix();
    const Scalar total = probs.row(i).sum();
    probs.row(i) /= total;
    loss += std::log(total) - (logits(i, labels[i]) - peak);
    probs(i, labels[i]) -= Scalar(1);
  }
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(n);
  SoftmaxLoss<Scalar> out;
  out.loss = loss * inv_n;
  out.grad_weights = probs.transpose() * x * inv_n;
  out.grad_bias = probs.colwise().sum().transpose() * inv_n;
  return out;
}

/// Linear classification head over the kept coordinates of an embedding.
/// `weights` is C x D with masked columns identically zero.
struct LinearHead {
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;
  MaskPlan plan;
  TrainingConfig config;
  std::vector<double> epoch_loss;  // full training loss after each epoch

  Eigen::Index num_classes() const { return weights.rows(); }

  /// n x C logits. Masked input coordinates are never read.
  template <typename Derived>
  Eigen::MatrixXd logits(const Eigen::MatrixBase<Derived>& x) const {
    const std::vector<Eigen::Index> kept(plan.kept.begin(), plan.kept.end());
    Eigen::MatrixXd out =
        x(Eigen::all, kept).template cast<double>() * weights(Eigen::all, kept).transpose();
    out.rowwise() += bias.transpose();
    return out;
  }

  /// argmax per row, ties to the lowest class index.
  template <typename Derived>
  std::vector<int> predict(const Eigen::MatrixBase<Derived>& x) const {
    const Eigen::MatrixXd z = logits(x);
    std::vector<int> out(static_cast<std::size_t>(z.rows()));
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      Eigen::Index best = 0;
      for (Eigen::Index c = 1; c < z.cols(); ++c)
        if (z(i, c) > z(i, best)) best = c;
      out[i] = static_cast<int>(best);
    }
    return out;
  }
};

/// Mini-batch gradient descent with momentum on softmax cross-entropy,
/// zero-initialised, restricted to plan.kept. Deterministic for fixed data,
/// plan and config. Throws DegenerateData if a class has no training
/// example, NonFiniteLoss if the loss diverges.
LinearHead train_head(const LabeledEmbeddingSet& data, const MaskPlan& plan,
                      const TrainingConfig& config);

/// Top-1 accuracy; throws LengthMismatch on a dimension mismatch.
double evaluate_accuracy(const LinearHead& head, const LabeledEmbeddingSet& data);

struct OutputProbe {
  std::vector<RepScore> scores;  // one per class logit
  double max_diff = 0.5;
};

/// Scores every class logit of the head on clean vs stamped probe embeddings.
OutputProbe probe_outputs(const LinearHead& head, const ActivationMatrix& clean_emb,
                          const ActivationMatrix& stamped_emb);

inline const std::vector<double> kDefaultAlphas = {0,    0.005, 0.01, 0.02, 0.03,
                                                   0.05, 0.1,   0.15, 0.25, 0.5};

struct SweepRecord {
  double alpha = 0;
  std::size_t n_masked = 0;
  double eval_accuracy = 0;
  double max_output_diff = 0;
  std::vector<RepScore> output_scores;
  LinearHead head;
};

/// Trains one head per alpha with identical hyperparameters. `alphas` must be
/// ascending within [0, 1]. Trainings are independent; `threads` > 1 runs
/// them concurrently with identical results.
std::vector<SweepRecord> alpha_sweep(const LabeledEmbeddingSet& train,
                                     const LabeledEmbeddingSet& eval,
                                     std::span<const RepScore> scores,
                                     std::span<const double> alphas,
                                     const TrainingConfig& config,
                                     const ActivationMatrix& probe_clean,
                                     const ActivationMatrix& probe_stamped,
                                     unsigned threads = 1);

/// sweep.csv: alpha,n_masked,eval_accuracy,max_output_diff
std::string sweep_csv(std::span<const SweepRecord> records);
/// output_auc_<alpha>.csv: class,auc,diff
std::string output_auc_csv(const SweepRecord& record);
std::string output_auc_filename(double alpha);

}  // namespace wmprobe
