#include "wmprobe/probe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "wmprobe/errors.hpp"
#include "wmprobe/text_format.hpp"

namespace wmprobe {

double MannWhitney::auc() const {
  const std::int64_t complement = twice_pairs - twice_u;
  if (twice_u == complement) return 0.5;
  const bool upper = twice_u > complement;
  const double high =
      static_cast<double>(upper ? twice_u : complement) / static_cast<double>(twice_pairs);
  // high >= 0.5 so 1 - high is exact (Sterbenz): one rounding for both orientations.
  return upper ? high : 1.0 - high;
}

MannWhitney mann_whitney(std::span<const double> pos, std::span<const double> neg) {
  if (pos.empty() || neg.empty())
    throw EmptyClass("AUC needs at least one sample per class (got " +
                     std::to_string(pos.size()) + " positive, " +
                     std::to_string(neg.size()) + " negative)");
  std::vector<std::pair<double, bool>> pooled;
  pooled.reserve(pos.size() + neg.size());
  for (double v : pos) pooled.emplace_back(v, true);
  for (double v : neg) pooled.emplace_back(v, false);
  for (const auto& [v, is_pos] : pooled)
    if (!std::isfinite(v)) throw NonFiniteInput("non-finite value passed to AUC");
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  // Midrank of a tie group starting at 1-based rank r with g members is
  // r + (g - 1) / 2; doubled it is the integer 2r + g - 1.
  std::int64_t twice_rank_sum = 0;
  std::size_t i = 0;
  while (i < pooled.size()) {
    std::size_t j = i;
    std::int64_t group_pos = 0;
    while (j < pooled.size() && pooled[j].first == pooled[i].first) {
      group_pos += pooled[j].second;
      ++j;
    }
    const auto r = static_cast<std::int64_t>(i) + 1;
    const auto g = static_cast<std::int64_t>(j - i);
    twice_rank_sum += group_pos * (2 * r + g - 1);
    i = j;
  }
  const auto np = static_cast<std::int64_t>(pos.size());
  const auto nn = static_cast<std::int64_t>(neg.size());
  return {twice_rank_sum - np * (np + 1), 2 * np * nn};
}

double differentiability(double auc) {
  if (!(auc >= 0.0 && auc <= 1.0))
    throw OutOfRange("AUC " + format_double(auc) + " is outside [0, 1]");
  return std::max(auc, 1.0 - auc);
}

std::vector<RepScore> score_all(const ActivationMatrix& clean,
                                const ActivationMatrix& stamped, unsigned threads) {
  const PairedView view = align_pairs(clean, stamped);
  const Eigen::Index n_reps = view.reps();
  std::vector<RepScore> scores(static_cast<std::size_t>(n_reps));

  auto score_range = [&](Eigen::Index begin, Eigen::Index end) {
    for (Eigen::Index j = begin; j < end; ++j) {
      const double auc = auc_roc(view.positives(j), view.negatives(j));
      scores[j] = {view.rep_ids()[j], auc, differentiability(auc)};
    }
  };

  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n_reps)));
  if (threads <= 1) {
    score_range(0, n_reps);
    return scores;
  }
  std::vector<std::jthread> workers;
  const Eigen::Index chunk = (n_reps + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const Eigen::Index begin = t * chunk;
    const Eigen::Index end = std::min(n_reps, begin + chunk);
    if (begin >= end) break;
    workers.emplace_back(score_range, begin, end);
  }
  workers.clear();  // joins
  return scores;
}

std::vector<std::size_t> rank_by_diff(std::span<const RepScore> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a].diff != scores[b].diff) return scores[a].diff > scores[b].diff;
    if (scores[a].auc != scores[b].auc) return scores[a].auc > scores[b].auc;
    return a < b;
  });
  return order;
}

std::size_t count_sensitive(std::span<const RepScore> scores, double threshold) {
  if (!(threshold >= 0.5 && threshold < 1.0))
    throw OutOfRange("sensitivity threshold " + format_double(threshold) +
                     " is outside [0.5, 1)");
  return static_cast<std::size_t>(std::count_if(
      scores.begin(), scores.end(), [&](const RepScore& s) { return s.diff > threshold; }));
}

namespace {

std::vector<std::size_t> order_by_auc(std::span<const RepScore> scores, bool descending) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a].auc != scores[b].auc)
      return descending ? scores[a].auc > scores[b].auc : scores[a].auc < scores[b].auc;
    return a < b;
  });
  return order;
}

}  // namespace

std::vector<ScenarioSummary> summarize(std::vector<ModelScores> runs, double threshold,
                                       std::size_t top_k) {
  std::sort(runs.begin(), runs.end(), [](const ModelScores& a, const ModelScores& b) {
    return std::tie(a.scenario, a.model) < std::tie(b.scenario, b.model);
  });
  for (std::size_t i = 1; i < runs.size(); ++i)
    if (runs[i].scenario == runs[i - 1].scenario && runs[i].model == runs[i - 1].model)
      throw ConfigError("duplicate scores for model '" + runs[i].model + "' in scenario " +
                        std::string(to_string(runs[i].scenario)));

  std::vector<ScenarioSummary> out;
  for (const ModelScores& run : runs) {
    if (out.empty() || out.back().scenario != run.scenario)
      out.push_back({run.scenario, threshold, {}, {}, top_k});
    SensitivityReport report;
    report.model = run.model;
    report.scenario = run.scenario;
    report.threshold = threshold;
    report.sensitive_count = count_sensitive(run.scores, threshold);
    report.scores = run.scores;
    report.top = order_by_auc(run.scores, true);
    report.bottom = order_by_auc(run.scores, false);
    report.top.resize(std::min(top_k, report.top.size()));
    report.bottom.resize(std::min(top_k, report.bottom.size()));
    out.back().models.push_back(std::move(report));
  }

  for (ScenarioSummary& summary : out) {
    std::map<long, ClassSummary> by_rep;
    for (const SensitivityReport& m : summary.models) {
      for (const RepScore& s : m.scores) {
        ClassSummary& c = by_rep[s.rep.index];
        c.rep = s.rep.index;
        c.model_aucs.emplace_back(m.model, s.auc);
        c.mean_diff += s.diff;
      }
    }
    for (auto& [rep, c] : by_rep) {
      double sum = 0;
      for (const auto& [model, auc] : c.model_aucs) sum += auc;
      const auto n = static_cast<double>(c.model_aucs.size());
      c.mean_auc = sum / n;
      c.mean_diff /= n;
      summary.classes.push_back(std::move(c));
    }
    std::stable_sort(summary.classes.begin(), summary.classes.end(),
                     [](const ClassSummary& a, const ClassSummary& b) {
                       return a.mean_auc > b.mean_auc;
                     });
  }
  return out;
}

std::string scores_csv(std::span<const RepScore> scores) {
  std::string out = "rep,layer,auc,diff\n";
  for (const RepScore& s : scores)
    out += std::to_string(s.rep.index) + "," + s.rep.layer_name + "," +
           format_double(s.auc) + "," + format_double(s.diff) + "\n";
  return out;
}

std::vector<RepScore> parse_scores_csv(std::string_view text, const std::string& label) {
  const auto rows = parse_csv(text);
  if (rows.empty() || rows[0] != std::vector<std::string>{"rep", "layer", "auc", "diff"})
    throw FormatError(label, std::nullopt, "expected header rep,layer,auc,diff");
  std::vector<RepScore> scores;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r];
    if (f.size() != 4)
      throw FormatError(label, std::nullopt,
                        "line " + std::to_string(r + 1) + ": expected 4 fields");
    try {
      RepScore s;
      s.rep = {f[1], parse_long(f[0], "rep"), RepKind::Feature};
      s.auc = parse_double(f[2], "auc");
      s.diff = parse_double(f[3], "diff");
      if (differentiability(s.auc) != s.diff)
        throw FormatError(label, std::nullopt,
                          "line " + std::to_string(r + 1) + ": diff != max(auc, 1-auc)");
      scores.push_back(std::move(s));
    } catch (const ConfigError& e) {
      throw FormatError(label, std::nullopt, "line " + std::to_string(r + 1) + ": " + e.what());
    } catch (const OutOfRange& e) {
      throw FormatError(label, std::nullopt, "line " + std::to_string(r + 1) + ": " + e.what());
    }
  }
  return scores;
}

std::vector<RepScore> read_scores_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open scores file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scores_csv(buf.str(), path.string());
}

std::string rank_csv(std::span<const RepScore> scores, std::span<const std::size_t> order) {
  std::string out = "position,rep,layer,auc,diff\n";
  for (std::size_t p = 0; p < order.size(); ++p) {
    const RepScore& s = scores[order[p]];
    out += std::to_string(p) + "," + std::to_string(s.rep.index) + "," +
           s.rep.layer_name + "," + format_double(s.auc) + "," + format_double(s.diff) +
           "\n";
  }
  return out;
}

namespace {

std::string class_name(std::span<const std::string> names, long rep) {
  if (rep >= 0 && static_cast<std::size_t>(rep) < names.size()) return names[rep];
  return std::to_string(rep);
}

}  // namespace

std::string summary_csv(const ScenarioSummary& summary,
                        std::span<const std::string> class_names) {
  std::string out = "rank,rep,name,mean_auc,mean_diff,n_models\n";
  for (std::size_t k = 0; k < summary.classes.size(); ++k) {
    const ClassSummary& c = summary.classes[k];
    out += std::to_string(k) + "," + std::to_string(c.rep) + "," +
           class_name(class_names, c.rep) + "," + format_double(c.mean_auc) + "," +
           format_double(c.mean_diff) + "," + std::to_string(c.model_aucs.size()) + "\n";
  }
  return out;
}

std::string plotdata_json(const ScenarioSummary& summary,
                          std::span<const std::string> class_names) {
  using ojson = nlohmann::ordered_json;
  auto class_entry = [&](const ClassSummary& c) {
    ojson models = ojson::array();
    for (const auto& [model, auc] : c.model_aucs)
      models.push_back({{"model", model}, {"auc", auc}});
    return ojson{{"rep", c.rep},
                 {"name", class_name(class_names, c.rep)},
                 {"mean_auc", c.mean_auc},
                 {"mean_diff", c.mean_diff},
                 {"models", std::move(models)}};
  };

  std::vector<const ClassSummary*> lowest;
  for (const auto& c : summary.classes) lowest.push_back(&c);
  std::stable_sort(lowest.begin(), lowest.end(),
                   [](const ClassSummary* a, const ClassSummary* b) {
                     if (a->mean_auc != b->mean_auc) return a->mean_auc < b->mean_auc;
                     return a->rep < b->rep;
                   });

  ojson j;
  j["scenario"] = to_string(summary.scenario);
  j["threshold"] = summary.threshold;
  j["top_k"] = summary.top_k;
  const std::size_t k = std::min(summary.top_k, summary.classes.size());
  auto& highest_j = j["highest_mean_auc"] = ojson::array();
  for (std::size_t i = 0; i < k; ++i) highest_j.push_back(class_entry(summary.classes[i]));
  auto& lowest_j = j["lowest_mean_auc"] = ojson::array();
  for (std::size_t i = 0; i < k; ++i) lowest_j.push_back(class_entry(*lowest[i]));
  auto& counts = j["sensitive_counts"] = ojson::array();
  auto& dists = j["diff_distributions"] = ojson::array();
  for (const SensitivityReport& m : summary.models) {
    const auto total = m.scores.size();
    counts.push_back({{"model", m.model},
                      {"count", m.sensitive_count},
                      {"total", total},
                      {"fraction", total ? static_cast<double>(m.sensitive_count) / total
                                         : 0.0}});
    std::vector<double> diffs;
    for (const auto& s : m.scores) diffs.push_back(s.diff);
    dists.push_back({{"model", m.model}, {"diff", std::move(diffs)}});
  }
  return j.dump(1) + "\n";
}

}  // namespace wmprobe
