#include "wmprobe/linear_head.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <numeric>
#include <thread>

#include "wmprobe/keyed_stream.hpp"
#include "wmprobe/text_format.hpp"

namespace wmprobe {

LabeledEmbeddingSet make_labeled_set(RowMatrixXf embeddings, std::vector<int> labels,
                                     Split split, int num_classes) {
  if (embeddings.rows() == 0) throw DegenerateData("labeled embedding set is empty");
  if (static_cast<Eigen::Index>(labels.size()) != embeddings.rows())
    throw LengthMismatch(std::to_string(labels.size()) + " labels for " +
                         std::to_string(embeddings.rows()) + " embeddings");
  const int max_label = *std::max_element(labels.begin(), labels.end());
  if (num_classes <= 0) num_classes = max_label + 1;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] < 0 || labels[i] >= num_classes)
      throw OutOfRange("label " + std::to_string(labels[i]) + " at row " +
                       std::to_string(i) + " is outside [0, " +
                       std::to_string(num_classes) + ")");
  if (!embeddings.allFinite()) throw NonFiniteInput("embeddings contain NaN or Inf");
  return {std::move(embeddings), std::move(labels), split, num_classes};
}

void write_labeled_set(const LabeledEmbeddingSet& set, const std::filesystem::path& path) {
  ActivationMatrix m;
  m.values = set.embeddings;
  for (Eigen::Index i = 0; i < set.size(); ++i) m.image_ids.push_back("img" + std::to_string(i));
  for (Eigen::Index j = 0; j < set.dim(); ++j)
    m.reps.push_back({"embedding", static_cast<long>(j), RepKind::Feature});
  validate(m);
  const auto bytes = encode_actd(m.values);
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("cannot write " + path.string());
  }
  DumpManifest manifest;
  manifest.image_ids = m.image_ids;
  manifest.reps = m.reps;
  manifest.labels = set.labels;
  manifest.split = set.split;
  manifest.num_classes = set.num_classes;
  write_manifest(manifest, manifest_path(path));
}

LabeledEmbeddingSet read_labeled_set(const std::filesystem::path& path) {
  DumpReport report = validate_dump(path);
  if (!report.manifest.labels || !report.manifest.split)
    throw FormatError(manifest_path(path).string(), std::nullopt,
                      "labeled embedding manifest needs labels and split");
  std::ifstream in(path, std::ios::binary);
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                  std::istreambuf_iterator<char>()};
  return make_labeled_set(decode_actd(bytes, path.string()), *report.manifest.labels,
                          *report.manifest.split, report.manifest.num_classes.value_or(0));
}

MaskPlan make_mask(std::span<const RepScore> scores, double alpha, std::size_t dim) {
  if (scores.size() != dim)
    throw LengthMismatch(std::to_string(scores.size()) + " scores for a " +
                         std::to_string(dim) + "-dimensional embedding");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw OutOfRange("alpha " + format_double(alpha) + " is outside [0, 1]");
  MaskPlan plan;
  plan.alpha = alpha;
  plan.ranking = rank_by_diff(scores);
  const auto n_masked = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(dim)));
  plan.masked.assign(plan.ranking.begin(), plan.ranking.begin() + n_masked);
  plan.kept.assign(plan.ranking.begin() + n_masked, plan.ranking.end());
  std::sort(plan.kept.begin(), plan.kept.end());
  return plan;
}

LinearHead train_head(const LabeledEmbeddingSet& data, const MaskPlan& plan,
                      const TrainingConfig& config) {
  if (static_cast<Eigen::Index>(plan.dim()) != data.dim())
    throw LengthMismatch("mask plan covers " + std::to_string(plan.dim()) +
                         " coordinates, embeddings have " + std::to_string(data.dim()));
  if (config.batch_size < 1 || config.epochs < 0 || !(config.learning_rate > 0))
    throw ConfigError("invalid training config (batch_size >= 1, epochs >= 0, lr > 0)");
  const int num_classes = data.num_classes;
  std::vector<int> class_count(static_cast<std::size_t>(num_classes), 0);
  for (int y : data.labels) ++class_count[y];
  for (int c = 0; c < num_classes; ++c)
    if (class_count[c] == 0)
      throw DegenerateData("class " + std::to_string(c) + " has no training examples");

  const std::vector<Eigen::Index> kept(plan.kept.begin(), plan.kept.end());
  const Eigen::MatrixXd x = data.embeddings(Eigen::all, kept).cast<double>();
  const auto n = static_cast<std::size_t>(x.rows());
  const auto k = x.cols();

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(num_classes, k);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(num_classes);
  Eigen::MatrixXd vel_w = Eigen::MatrixXd::Zero(num_classes, k);
  Eigen::VectorXd vel_b = Eigen::VectorXd::Zero(num_classes);

  LinearHead head;
  head.plan = plan;
  head.config = config;

  std::vector<std::size_t> order(n);
  std::vector<Eigen::Index> batch_rows;
  std::vector<int> batch_labels;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    KeyedStream stream(config.seed, static_cast<std::uint64_t>(epoch), KeyedStream::kShuffle);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[stream.uniform_below(i)]);

    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(config.batch_size));
      batch_rows.assign(order.begin() + start, order.begin() + end);
      batch_labels.clear();
      for (auto r : batch_rows) batch_labels.push_back(data.labels[r]);
      const Eigen::MatrixXd xb = x(batch_rows, Eigen::all);
      const auto g = softmax_cross_entropy<double>(w, b, xb, batch_labels);
      if (!std::isfinite(g.loss))
        throw NonFiniteLoss("loss diverged in epoch " + std::to_string(epoch) +
                            " (learning rate " + format_double(config.learning_rate) +
                            " too large?)");
      vel_w = config.momentum * vel_w + g.grad_weights + config.weight_decay * w;
      vel_b = config.momentum * vel_b + g.grad_bias;
      w -= config.learning_rate * vel_w;
      b -= config.learning_rate * vel_b;
    }
    const double epoch_loss = softmax_cross_entropy<double>(w, b, x, data.labels).loss;
    if (!std::isfinite(epoch_loss))
      throw NonFiniteLoss("loss diverged after epoch " + std::to_string(epoch));
    head.epoch_loss.push_back(epoch_loss);
  }

  head.weights = Eigen::MatrixXd::Zero(num_classes, data.dim());
  head.weights(Eigen::all, kept) = w;
  head.bias = b;
  return head;
}

double evaluate_accuracy(const LinearHead& head, const LabeledEmbeddingSet& data) {
  if (data.dim() != head.weights.cols())
    throw LengthMismatch("head expects " + std::to_string(head.weights.cols()) +
                         "-dimensional embeddings, got " + std::to_string(data.dim()));
  const std::vector<int> predicted = head.predict(data.embeddings);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == data.labels[i];
  return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

namespace {

ActivationMatrix head_logits(const LinearHead& head, const ActivationMatrix& emb) {
  if (emb.cols() != head.weights.cols())
    throw LengthMismatch("head expects " + std::to_string(head.weights.cols()) +
                         "-dimensional embeddings, probe dump has " +
                         std::to_string(emb.cols()));
  ActivationMatrix out;
  out.values = head.logits(emb.values).cast<float>();
  out.image_ids = emb.image_ids;
  for (Eigen::Index c = 0; c < head.num_classes(); ++c)
    out.reps.push_back({"head", static_cast<long>(c), RepKind::Logit});
  out.group = emb.group;
  out.scenario = emb.scenario;
  return out;
}

}  // namespace

OutputProbe probe_outputs(const LinearHead& head, const ActivationMatrix& clean_emb,
                          const ActivationMatrix& stamped_emb) {
  align_pairs(clean_emb, stamped_emb);
  OutputProbe out;
  out.scores = score_all(head_logits(head, clean_emb), head_logits(head, stamped_emb));
  for (const auto& s : out.scores) out.max_diff = std::max(out.max_diff, s.diff);
  return out;
}

std::vector<SweepRecord> alpha_sweep(const LabeledEmbeddingSet& train,
                                     const LabeledEmbeddingSet& eval,
                                     std::span<const RepScore> scores,
                                     std::span<const double> alphas,
                                     const TrainingConfig& config,
                                     const ActivationMatrix& probe_clean,
                                     const ActivationMatrix& probe_stamped,
                                     unsigned threads) {
  if (alphas.empty()) throw ConfigError("alpha list is empty");
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    if (!(alphas[i] >= 0.0 && alphas[i] <= 1.0))
      throw OutOfRange("alpha " + format_double(alphas[i]) + " is outside [0, 1]");
    if (i > 0 && alphas[i] < alphas[i - 1])
      throw ConfigError("alphas must be sorted ascending");
  }
  if (eval.dim() != train.dim())
    throw LengthMismatch("train and eval embeddings differ in dimension");

  const auto dim = static_cast<std::size_t>(train.dim());
  std::vector<SweepRecord> records(alphas.size());
  auto run = [&](std::size_t i) {
    SweepRecord& rec = records[i];
    const MaskPlan plan = make_mask(scores, alphas[i], dim);
    rec.alpha = alphas[i];
    rec.n_masked = plan.masked.size();
    rec.head = train_head(train, plan, config);
    rec.eval_accuracy = evaluate_accuracy(rec.head, eval);
    OutputProbe probe = probe_outputs(rec.head, probe_clean, probe_stamped);
    rec.output_scores = std::move(probe.scores);
    rec.max_output_diff = probe.max_diff;
  };

  if (threads <= 1) {
    for (std::size_t i = 0; i < alphas.size(); ++i) run(i);
    return records;
  }
  std::vector<std::exception_ptr> errors(alphas.size());
  {
    std::vector<std::jthread> workers;
    for (unsigned t = 0; t < threads; ++t) {
      workers.emplace_back([&, t] {
        for (std::size_t i = t; i < alphas.size(); i += threads) {
          try {
            run(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return records;
}

std::string sweep_csv(std::span<const SweepRecord> records) {
  std::string out = "alpha,n_masked,eval_accuracy,max_output_diff\n";
  for (const auto& r : records)
    out += format_double(r.alpha) + "," + std::to_string(r.n_masked) + "," +
           format_double(r.eval_accuracy) + "," + format_double(r.max_output_diff) + "\n";
  return out;
}

std::string output_auc_csv(const SweepRecord& record) {
  std::string out = "class,auc,diff\n";
  for (const auto& s : record.output_scores)
    out += std::to_string(s.rep.index) + "," + format_double(s.auc) + "," +
           format_double(s.diff) + "\n";
  return out;
}

std::string output_auc_filename(double alpha) {
  return "output_auc_" + format_double(alpha) + ".csv";
}

}  // namespace wmprobe
