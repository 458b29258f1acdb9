#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "wmprobe/activation_store.hpp"
#include "wmprobe/types.hpp"

namespace wmprobe {

/// Mann-Whitney statistic kept as exact integers: twice_u counts every
/// (pos, neg) pair with pos > neg as 2 and every tie as 1.
struct MannWhitney {
  std::int64_t twice_u = 0;
  std::int64_t twice_pairs = 0;

  /// twice_u / twice_pairs. The larger of the two complementary AUCs is
  /// rounded once and the smaller is its exact complement, so
  /// auc(p, n) == 1 - auc(n, p) holds bitwise.
  double auc() const;
};

/// Midrank rank-sum statistic for samples pos (label 1) and neg (label 0).
/// Throws EmptyClass if either is empty, NonFiniteInput on NaN/Inf.
MannWhitney mann_whitney(std::span<const double> pos, std::span<const double> neg);

/// P(x_pos > x_neg) + 0.5 P(x_pos == x_neg). Accepts any Eigen vector
/// expression (columns, maps, casts).
template <typename DerivedPos, typename DerivedNeg>
double auc_roc(const Eigen::DenseBase<DerivedPos>& pos,
               const Eigen::DenseBase<DerivedNeg>& neg) {
  const Eigen::VectorXd p = pos.derived().template cast<double>();
  const Eigen::VectorXd n = neg.derived().template cast<double>();
  return mann_whitney({p.data(), static_cast<std::size_t>(p.size())},
                      {n.data(), static_cast<std::size_t>(n.size())})
      .auc();
}

inline double auc_roc(std::span<const double> pos, std::span<const double> neg) {
  return mann_whitney(pos, neg).auc();
}

/// max(auc, 1 - auc); throws OutOfRange unless auc is in [0, 1].
double differentiability(double auc);

struct RepScore {
  RepresentationId rep;
  double auc = 0.5;
  double diff = 0.5;

  bool operator==(const RepScore&) const = default;
};

/// One score per representation, stamped images as the positive class, in
/// input rep order. Columns are independent; `threads` > 1 splits them
/// across workers with results identical to a sequential run.
std::vector<RepScore> score_all(const ActivationMatrix& clean,
                                const ActivationMatrix& stamped,
                                unsigned threads = 1);

/// Indices ordered by diff desc, then auc desc, then index asc.
std::vector<std::size_t> rank_by_diff(std::span<const RepScore> scores);

/// |{s : s.diff > threshold}|; threshold must lie in [0.5, 1).
std::size_t count_sensitive(std::span<const RepScore> scores, double threshold);

inline constexpr double kDefaultSensitiveThreshold = 0.95;

// ---------------------------------------------------------------------------
// Cross-model summaries

struct ModelScores {
  std::string model;
  Scenario scenario = Scenario::Chinese;
  std::vector<RepScore> scores;
};

struct SensitivityReport {
  std::string model;
  Scenario scenario = Scenario::Chinese;
  double threshold = kDefaultSensitiveThreshold;
  std::size_t sensitive_count = 0;
  std::vector<RepScore> scores;
  std::vector<std::size_t> top;     // by auc descending
  std::vector<std::size_t> bottom;  // by auc ascending
};

/// A representation index averaged over every model that has it.
struct ClassSummary {
  long rep = 0;
  double mean_auc = 0;
  double mean_diff = 0;
  std::vector<std::pair<std::string, double>> model_aucs;  // sorted by model
};

struct ScenarioSummary {
  Scenario scenario = Scenario::Chinese;
  double threshold = kDefaultSensitiveThreshold;
  std::vector<SensitivityReport> models;  // sorted by model name
  std::vector<ClassSummary> classes;      // mean_auc desc, rep asc
  std::size_t top_k = 5;
};

/// Groups runs by scenario (in enum order) and averages per representation
/// index across models. Output is independent of input order. Throws
/// ConfigError on a duplicate (model, scenario).
std::vector<ScenarioSummary> summarize(std::vector<ModelScores> runs,
                                       double threshold = kDefaultSensitiveThreshold,
                                       std::size_t top_k = 5);

// ---------------------------------------------------------------------------
// Report files

/// scores_<model>_<scenario>.csv: rep,layer,auc,diff
std::string scores_csv(std::span<const RepScore> scores);
std::vector<RepScore> parse_scores_csv(std::string_view text, const std::string& label);
std::vector<RepScore> read_scores_csv(const std::filesystem::path& path);

/// rank_<model>_<scenario>.csv: position,rep,layer,auc,diff
std::string rank_csv(std::span<const RepScore> scores,
                     std::span<const std::size_t> order);

/// summary_<scenario>.csv: rank,rep,name,mean_auc,mean_diff,n_models
std::string summary_csv(const ScenarioSummary& summary,
                        std::span<const std::string> class_names = {});

/// plotdata_<scenario>.json: top/bottom classes with per-model points,
/// per-model sensitive counts and full diff distributions.
std::string plotdata_json(const ScenarioSummary& summary,
                          std::span<const std::string> class_names = {});

}  // namespace wmprobe
