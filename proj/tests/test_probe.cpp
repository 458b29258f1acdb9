#include <doctest.h>

#include <algorithm>
#include <random>

#include "support.hpp"
#include "wmprobe/probe.hpp"
#include "wmprobe/synthetic.hpp"

using namespace wmprobe;

namespace {

std::vector<RepScore> scores_from(std::initializer_list<double> aucs) {
  std::vector<RepScore> out;
  long k = 0;
  for (double a : aucs) out.push_back({{"l", k++, RepKind::Logit}, a, differentiability(a)});
  return out;
}

std::vector<RepScore> scores_from_diffs(std::initializer_list<double> diffs) {
  std::vector<RepScore> out;
  long k = 0;
  for (double d : diffs) out.push_back({{"l", k++, RepKind::Logit}, d, d});
  return out;
}

std::pair<ActivationMatrix, ActivationMatrix> pair_of(const RowMatrixXf& clean,
                                                      const RowMatrixXf& stamped) {
  ActivationMatrix c, s;
  c.values = clean;
  s.values = stamped;
  for (Eigen::Index i = 0; i < clean.rows(); ++i) c.image_ids.push_back("i" + std::to_string(i));
  s.image_ids = c.image_ids;
  for (Eigen::Index j = 0; j < clean.cols(); ++j)
    c.reps.push_back({"fc", static_cast<long>(j), RepKind::Logit});
  s.reps = c.reps;
  c.group = Group::Clean;
  s.group = Group::Stamped;
  return {c, s};
}

}  // namespace

TEST_CASE("score_all: planted detector and constant rep") {
  RowMatrixXf clean(4, 2), stamped(4, 2);
  clean << 0, 3, 0, 3, 0, 3, 0, 3;
  stamped << 1, 3, 1, 3, 1, 3, 1, 3;
  const auto [c, s] = pair_of(clean, stamped);
  const auto scores = score_all(c, s);
  REQUIRE(scores.size() == 2);
  CHECK(scores[0].auc == 1.0);
  CHECK(scores[0].diff == 1.0);
  CHECK(scores[1].auc == 0.5);
  CHECK(scores[1].diff == 0.5);
  CHECK(scores[1].rep == c.reps[1]);
}

TEST_CASE("score_all: random 998x50 matches column-wise pair counting") {
  std::mt19937_64 rng(998);
  std::normal_distribution<float> normal;
  RowMatrixXf clean(998, 50), stamped(998, 50);
  for (Eigen::Index k = 0; k < clean.size(); ++k) clean.data()[k] = normal(rng);
  for (Eigen::Index k = 0; k < stamped.size(); ++k)
    stamped.data()[k] = normal(rng) + 0.02f * static_cast<float>(k % 50);
  auto [c, s] = pair_of(clean, stamped);
  // shuffle stamped rows: alignment must undo it
  std::vector<Eigen::Index> perm(998);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  ActivationMatrix shuffled = s;
  for (Eigen::Index i = 0; i < 998; ++i) {
    shuffled.values.row(i) = s.values.row(perm[i]);
    shuffled.image_ids[i] = s.image_ids[perm[i]];
  }
  const auto scores = score_all(c, shuffled);
  for (Eigen::Index j = 0; j < 50; ++j) {
    std::vector<double> pos, neg;
    for (Eigen::Index i = 0; i < 998; ++i) {
      pos.push_back(stamped(i, j));
      neg.push_back(clean(i, j));
    }
    REQUIRE(std::abs(scores[j].auc - wmtest::brute_auc(pos, neg)) <= 1e-12);
    REQUIRE(scores[j].diff == differentiability(scores[j].auc));
  }
}

TEST_CASE("score_all: threaded run equals sequential") {
  synthetic::PlantedProbeOptions o;
  o.images_per_group = 120;
  o.dim = 37;
  o.planted = {3, 30};
  const auto probe = synthetic::planted_probe(o);
  const auto one = score_all(probe.clean, probe.stamped, 1);
  for (unsigned t : {2u, 3u, 8u, 64u}) CHECK(score_all(probe.clean, probe.stamped, t) == one);
}

TEST_CASE("property: k planted detectors give exactly k perfect scores") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    synthetic::PlantedProbeOptions o;
    o.images_per_group = 60;
    o.dim = 40;
    o.planted = {0, 9, 39};
    o.noise_sigma = 0.0;
    o.seed = seed;
    const auto probe = synthetic::planted_probe(o);
    const auto scores = score_all(probe.clean, probe.stamped);
    std::size_t perfect = 0;
    for (const auto& sc : scores) perfect += sc.diff == 1.0;
    CHECK(perfect == 3);
  }
}

TEST_CASE("rank_by_diff: examples") {
  CHECK(rank_by_diff(scores_from_diffs({0.9, 0.99, 0.6, 0.95})) ==
        std::vector<std::size_t>{1, 3, 0, 2});
  CHECK(rank_by_diff(scores_from_diffs({0.7, 0.7, 0.7})) == std::vector<std::size_t>{0, 1, 2});
  // equal diff, higher auc first
  CHECK(rank_by_diff(scores_from({0.2, 0.8, 0.8, 0.2})) == std::vector<std::size_t>{1, 2, 0, 3});
  CHECK(rank_by_diff(std::vector<RepScore>{}).empty());
}

TEST_CASE("property: ranking is non-increasing in diff and a permutation") {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> grid(0, 20);
  for (int t = 0; t < 100; ++t) {
    std::vector<RepScore> s;
    for (long k = 0; k < 50; ++k) {
      const double a = grid(rng) / 20.0;
      s.push_back({{"x", k, RepKind::Feature}, a, differentiability(a)});
    }
    const auto order = rank_by_diff(s);
    auto sorted = order;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 0; k < sorted.size(); ++k) REQUIRE(sorted[k] == k);
    for (std::size_t k = 1; k < order.size(); ++k) {
      const auto& a = s[order[k - 1]];
      const auto& b = s[order[k]];
      REQUIRE(a.diff >= b.diff);
      if (a.diff == b.diff) {
        REQUIRE(a.auc >= b.auc);
        if (a.auc == b.auc) REQUIRE(order[k - 1] < order[k]);
      }
    }
  }
}

TEST_CASE("count_sensitive: examples") {
  CHECK(count_sensitive(scores_from_diffs({0.96, 0.95, 0.5}), 0.95) == 1);
  CHECK(count_sensitive(scores_from_diffs({0.96, 0.95, 0.5, 0.51}), 0.5) == 3);
  CHECK_THROWS_AS(count_sensitive(scores_from_diffs({0.9}), 1.0), OutOfRange);
  CHECK_THROWS_AS(count_sensitive(scores_from_diffs({0.9}), 0.49), OutOfRange);

  std::vector<RepScore> many;
  for (long k = 0; k < 1000; ++k)
    many.push_back({{"fc", k, RepKind::Logit}, k < 285 ? 0.99 : 0.6, k < 285 ? 0.99 : 0.6});
  std::mt19937_64 rng(285);
  std::shuffle(many.begin(), many.end(), rng);
  CHECK(count_sensitive(many, 0.95) == 285);
}

TEST_CASE("property: count_sensitive is non-increasing in threshold") {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> unit;
  std::vector<RepScore> s;
  for (long k = 0; k < 500; ++k) {
    const double a = unit(rng);
    s.push_back({{"x", k, RepKind::Feature}, a, differentiability(a)});
  }
  std::size_t prev = count_sensitive(s, 0.5);
  for (double t = 0.5; t < 1.0; t += 0.01) {
    const std::size_t now = count_sensitive(s, t);
    REQUIRE(now <= prev);
    prev = now;
  }
}

TEST_CASE("summarize: one model reproduces its scores") {
  const auto scores = scores_from({0.9, 0.2, 0.5, 0.97});
  const auto out = summarize({{"m", Scenario::Latin, scores}}, 0.95, 2);
  REQUIRE(out.size() == 1);
  const auto& s = out[0];
  CHECK(s.scenario == Scenario::Latin);
  REQUIRE(s.models.size() == 1);
  CHECK(s.models[0].scores == scores);
  CHECK(s.models[0].sensitive_count == 1);
  CHECK(s.models[0].top == std::vector<std::size_t>{3, 0});
  CHECK(s.models[0].bottom == std::vector<std::size_t>{1, 2});
  REQUIRE(s.classes.size() == 4);
  CHECK(s.classes[0].rep == 3);
  CHECK(s.classes[0].mean_auc == 0.97);
  CHECK(s.classes[3].rep == 1);
}

TEST_CASE("summarize: two models average per class") {
  const auto out = summarize({{"a", Scenario::Chinese, scores_from({0.9, 0.1})},
                              {"b", Scenario::Chinese, scores_from({0.7, 0.4})}});
  REQUIRE(out.size() == 1);
  REQUIRE(out[0].classes.size() == 2);
  CHECK(out[0].classes[0].rep == 0);
  CHECK(out[0].classes[0].mean_auc == doctest::Approx((0.9 + 0.7) / 2).epsilon(1e-15));
  CHECK(out[0].classes[1].mean_auc == doctest::Approx((0.1 + 0.4) / 2).epsilon(1e-15));
  CHECK(out[0].classes[1].mean_diff == doctest::Approx((0.9 + 0.6) / 2).epsilon(1e-15));
  CHECK(out[0].classes[0].model_aucs.size() == 2);
}

TEST_CASE("summarize: duplicate run rejected; scenarios separated") {
  CHECK_THROWS_AS(summarize({{"a", Scenario::Hindi, scores_from({0.5})},
                             {"a", Scenario::Hindi, scores_from({0.6})}}),
                  ConfigError);
  const auto out = summarize({{"a", Scenario::Numeric, scores_from({0.5})},
                              {"a", Scenario::Chinese, scores_from({0.6})}});
  REQUIRE(out.size() == 2);
  CHECK(out[0].scenario == Scenario::Chinese);
  CHECK(out[1].scenario == Scenario::Numeric);
}

TEST_CASE("property: summary files independent of run order") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> unit;
  std::vector<ModelScores> runs;
  for (const char* model : {"alexnet", "resnet50", "vgg16", "densenet161", "googlenet"})
    for (Scenario sc : {Scenario::Chinese, Scenario::Latin}) {
      std::vector<RepScore> s;
      for (long k = 0; k < 30; ++k) {
        const double a = std::round(unit(rng) * 8) / 8;  // coarse grid forces ties
        s.push_back({{"fc", k, RepKind::Logit}, a, differentiability(a)});
      }
      runs.push_back({model, sc, s});
    }
  auto render = [](std::vector<ModelScores> r) {
    std::string out;
    for (const auto& s : summarize(std::move(r), 0.95, 5))
      out += summary_csv(s) + plotdata_json(s, std::vector<std::string>{"tench", "goldfish"});
    return out;
  };
  const std::string base = render(runs);
  for (int t = 0; t < 20; ++t) {
    std::shuffle(runs.begin(), runs.end(), rng);
    REQUIRE(render(runs) == base);
  }
}

TEST_CASE("scores CSV round trips and rejects malformed input") {
  const auto s = scores_from({0.123456789012345, 1.0 / 3.0, 0.5, 0.0});
  const std::string text = scores_csv(s);
  CHECK(text.rfind("rep,layer,auc,diff\n0,l,0.123456789012345,0.876543210987655\n", 0) == 0);
  const auto back = parse_scores_csv(text, "mem");
  REQUIRE(back.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(back[k].auc == s[k].auc);
    CHECK(back[k].diff == s[k].diff);
    CHECK(back[k].rep.index == s[k].rep.index);
  }
  CHECK_THROWS_AS(parse_scores_csv("rep,auc\n", "mem"), FormatError);
  CHECK_THROWS_AS(parse_scores_csv("rep,layer,auc,diff\n0,l,0.3\n", "mem"), FormatError);
  CHECK_THROWS_AS(parse_scores_csv("rep,layer,auc,diff\n0,l,0.3,0.6\n", "mem"), FormatError);
  CHECK_THROWS_AS(parse_scores_csv("rep,layer,auc,diff\nx,l,0.3,0.7\n", "mem"), FormatError);
  CHECK_THROWS_AS(parse_scores_csv("rep,layer,auc,diff\n0,l,1.3,1.3\n", "mem"), FormatError);
}

TEST_CASE("rank CSV lists positions in ranking order") {
  const auto s = scores_from_diffs({0.6, 0.9});
  CHECK(rank_csv(s, rank_by_diff(s)) ==
        "position,rep,layer,auc,diff\n0,1,l,0.9,0.9\n1,0,l,0.6,0.6\n");
}
