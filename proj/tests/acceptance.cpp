// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "support.hpp"
#include "wmprobe/activation_store.hpp"
#include "wmprobe/linear_head.hpp"
#include "wmprobe/probe.hpp"
#include "wmprobe/stamper.hpp"
#include "wmprobe/synthetic.hpp"

using namespace wmprobe;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail << "first failure: " << what << "; ";
    pass = pass && ok;
  }
};

int failures = 0;

void report(int n, const char* title, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto t0 = Clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.require(false, std::string("exception: ") + e.what());
  }
  const double t = seconds_since(t0);
  if (!o.pass) ++failures;
  std::printf("%s criterion %d: %s (%s%.2f s)\n", o.pass ? "PASS" : "FAIL", n, title,
              o.detail.str().c_str(), t);
  std::fflush(stdout);
}

// Precondition for the invariance check: f must keep every pair of distinct
// values strictly ordered and equal values equal.
bool order_preserving(std::vector<double> values, const std::function<double(double)>& f) {
  std::sort(values.begin(), values.end());
  for (std::size_t i = 1; i < values.size(); ++i) {
    const double a = f(values[i - 1]), b = f(values[i]);
    if (values[i - 1] < values[i] ? !(a < b) : !(a == b)) return false;
  }
  return true;
}

ActivationMatrix with_ids(RowMatrixXf values, Group g) {
  ActivationMatrix m;
  m.values = std::move(values);
  for (Eigen::Index i = 0; i < m.rows(); ++i) m.image_ids.push_back("r" + std::to_string(i));
  for (Eigen::Index j = 0; j < m.cols(); ++j) m.reps.push_back({"features", static_cast<long>(j), RepKind::Feature});
  m.group = g;
  return m;
}

// Mean softmax cross-entropy in long double, straight loops.
long double oracle_loss(const Eigen::MatrixXd& w, const Eigen::VectorXd& b, const Eigen::MatrixXd& x,
                        const std::vector<int>& y) {
  long double total = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    std::vector<long double> z(static_cast<std::size_t>(w.rows()));
    for (Eigen::Index k = 0; k < w.rows(); ++k) {
      long double s = b(k);
      for (Eigen::Index j = 0; j < x.cols(); ++j) s += static_cast<long double>(w(k, j)) * x(i, j);
      z[k] = s;
    }
    const long double peak = *std::max_element(z.begin(), z.end());
    long double norm = 0;
    for (auto v : z) norm += std::exp(v - peak);
    total += std::log(norm) + peak - z[y[i]];
  }
  return total / x.rows();
}

// floor(alpha * D) with alpha given as an exact decimal num / 1000.
std::size_t floor_size(long num, std::size_t dim) { return static_cast<std::size_t>(num * static_cast<long>(dim) / 1000); }
const std::vector<long> kAlphaMilli = {0, 5, 10, 20, 30, 50, 100, 150, 250, 500};

std::vector<RepScore> dummy_scores(std::size_t dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<RepScore> s(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    s[j].rep = {"features", static_cast<long>(j), RepKind::Feature};
    s[j].auc = u(rng);
    s[j].diff = std::max(s[j].auc, 1 - s[j].auc);
  }
  return s;
}

}  // namespace

int main() {
  std::cout.setf(std::ios::unitbuf);

  report(1, "auc_roc matches the pair-counting oracle on 100 instances, <= 1e-12, < 5 s", [](Outcome& o) {
    std::mt19937_64 rng(101);
    double worst = 0, auc_time = 0;
    const auto t0 = Clock::now();
    for (int k = 0; k < 100; ++k) {
      const auto inst = wmtest::random_instance(rng, 200, k % 2 == 1);
      const auto t = Clock::now();
      const double a = auc_roc(inst.pos, inst.neg);
      auc_time += seconds_since(t);
      worst = std::max(worst, std::abs(a - wmtest::brute_auc(inst.pos, inst.neg)));
    }
    const double total = seconds_since(t0);
    o.detail << "max |err| " << worst << ", auc time " << auc_time << " s; ";
    o.require(worst <= 1e-12, "oracle tolerance");
    o.require(total < 5.0, "runtime");
  });

  report(2, "antisymmetry and monotone invariance exact on 1000 instances", [](Outcome& o) {
    std::mt19937_64 rng(202);
    const std::vector<std::pair<const char*, std::function<double(double)>>> transforms = {
        {"4x-3", [](double v) { return 4 * v - 3; }},
        {"x^3", [](double v) { return v * v * v; }},
        {"exp", [](double v) { return std::exp(v); }},
        {"atan", [](double v) { return std::atan(v); }}};
    std::size_t checked = 0, skipped = 0;
    for (int k = 0; k < 1000; ++k) {
      const auto inst = wmtest::random_instance(rng, 200, k % 2 == 1);
      const double a = auc_roc(inst.pos, inst.neg);
      o.require(a == 1.0 - auc_roc(inst.neg, inst.pos), "antisymmetry");
      std::vector<double> all = inst.pos;
      all.insert(all.end(), inst.neg.begin(), inst.neg.end());
      for (const auto& [name, f] : transforms) {
        if (!order_preserving(all, f)) {
          ++skipped;
          continue;
        }
        std::vector<double> p, n;
        std::transform(inst.pos.begin(), inst.pos.end(), std::back_inserter(p), f);
        std::transform(inst.neg.begin(), inst.neg.end(), std::back_inserter(n), f);
        o.require(auc_roc(p, n) == a, std::string("invariance under ") + name);
        ++checked;
      }
    }
    o.detail << checked << " transformed instances, " << skipped << " skipped (transform merged values); ";
  });

  report(3, "stamper byte-identical reruns and locality on a 50-image fixture, < 30 s", [](Outcome& o) {
    std::mt19937_64 rng(303);
    std::vector<BaselineImage> base;
    for (int i = 0; i < 50; ++i) {
      RgbImage img(kFrameSize, kFrameSize);
      for (auto& v : img.data) v = static_cast<std::uint8_t>(rng() & 0xff);
      char id[16];
      std::snprintf(id, sizeof id, "fx%03d", i);
      base.push_back({id, std::move(img)});
    }
    const WatermarkSpec spec(Scenario::Latin, default_charset(Scenario::Latin), wmtest::kFont, 42);
    wmtest::TempDir a("accept_a"), b("accept_b");
    const auto set_a = build_probe_set(base, spec);
    write_probe_set(set_a, spec, a.path());
    write_probe_set(build_probe_set(base, spec), spec, b.path());
    o.require(wmtest::tree_digest(a.path()) == wmtest::tree_digest(b.path()), "byte-identical PNG sets");

    std::size_t files = 0;
    for (const auto& e : std::filesystem::recursive_directory_iterator(a.path())) {
      if (!e.is_regular_file()) continue;
      ++files;
      const auto rel = std::filesystem::relative(e.path(), a.path());
      o.require(wmtest::read_bytes(e.path()) == wmtest::read_bytes(b.path() / rel), "file " + rel.string());
    }
    o.require(files == 101, "file count");

    std::size_t local = 0;
    for (const auto& p : set_a.pairs) {
      const Box& bx = p.box;
      bool ok = bx.w > 0 && bx.h > 0 && bx.x >= 0 && bx.y >= 0 && bx.x + bx.w <= kFrameSize &&
                bx.y + bx.h <= kFrameSize;
      bool touched = false;
      for (int y = 0; y < kFrameSize; ++y)
        for (int x = 0; x < kFrameSize; ++x) {
          const bool inside = x >= bx.x && x < bx.x + bx.w && y >= bx.y && y < bx.y + bx.h;
          for (int c = 0; c < 3; ++c) {
            const bool same = p.clean.at(x, y, c) == p.stamped.at(x, y, c);
            if (!inside && !same) ok = false;
            if (inside && !same) touched = true;
          }
        }
      // the clean image must be the baseline untouched
      ok = ok && touched && p.clean == base[p.index].pixels;
      local += ok;
    }
    o.detail << files << " files, " << local << "/50 pairs local and in frame; ";
    o.require(local == 50, "locality");
  });

  report(4, "planted columns ranked first with diff > 0.99, no other above 0.6", [](Outcome& o) {
    const auto probe = synthetic::planted_probe({});
    const auto scores = score_all(probe.clean, probe.stamped);
    const auto order = rank_by_diff(scores);
    std::vector<std::size_t> top(order.begin(), order.begin() + 3);
    std::sort(top.begin(), top.end());
    o.require(top == probe.planted, "top three are the planted columns");

    double min_planted = 1, max_other = 0, oracle_err = 0;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      std::vector<double> pos(probe.stamped.values.col(j).begin(), probe.stamped.values.col(j).end());
      std::vector<double> neg(probe.clean.values.col(j).begin(), probe.clean.values.col(j).end());
      const double ref = wmtest::brute_auc(pos, neg);
      oracle_err = std::max(oracle_err, std::abs(ref - scores[j].auc));
      const double d = std::max(ref, 1 - ref);
      if (std::find(probe.planted.begin(), probe.planted.end(), j) != probe.planted.end())
        min_planted = std::min(min_planted, d);
      else
        max_other = std::max(max_other, d);
    }
    o.detail << "min planted diff " << min_planted << ", max other " << max_other << ", oracle err "
             << oracle_err << "; ";
    o.require(min_planted > 0.99, "planted diff");
    o.require(max_other <= 0.6, "unplanted diff");
    o.require(oracle_err <= 1e-12, "oracle agreement");
  });

  // Criterion 6 runs the sweep that criterion 5 inspects, so run it first but
  // print in order.
  const synthetic::PlantedTaskOptions task_options;
  const auto task = synthetic::planted_task(task_options);
  const auto probe_scores = score_all(task.probe.clean, task.probe.stamped);
  TrainingConfig training;
  training.seed = 1;
  std::vector<SweepRecord> sweep;
  double sweep_seconds = 0;
  std::string sweep_error;
  try {
    const auto t0 = Clock::now();
    sweep = alpha_sweep(task.train, task.eval, probe_scores, kDefaultAlphas, training,
                        task.probe.clean, task.probe.stamped, 1);
    sweep_seconds = seconds_since(t0);
  } catch (const std::exception& e) {
    sweep_error = e.what();
  }

  report(5, "mask sizes, zero masked weights, masked-input invariance, FD gradients", [&](Outcome& o) {
    o.require(sweep_error.empty(), "sweep: " + sweep_error);
    std::mt19937_64 rng(505);
    for (std::size_t dim : {std::size_t{64}, std::size_t{2204}}) {
      const auto s = dummy_scores(dim, rng);
      for (std::size_t i = 0; i < kDefaultAlphas.size(); ++i) {
        const auto plan = make_mask(s, kDefaultAlphas[i], dim);
        o.require(plan.masked.size() == floor_size(kAlphaMilli[i], dim),
                  "floor size D=" + std::to_string(dim) + " alpha " + std::to_string(kDefaultAlphas[i]));
        o.require(plan.masked.size() + plan.kept.size() == dim, "partition");
      }
    }
    o.require(sweep.size() == kDefaultAlphas.size(), "one record per alpha");
    std::mt19937_64 noise(506);
    std::normal_distribution<float> big(0.0f, 100.0f);
    for (std::size_t i = 0; i < sweep.size(); ++i) {
      const auto& r = sweep[i];
      const auto& head = r.head;
      o.require(r.n_masked == floor_size(kAlphaMilli[i], 64), "sweep n_masked");
      for (auto j : head.plan.masked)
        o.require((head.weights.col(static_cast<Eigen::Index>(j)).array() == 0.0).all(), "masked column zero");
      RowMatrixXf perturbed = task.eval.embeddings;
      for (auto j : head.plan.masked)
        for (Eigen::Index row = 0; row < perturbed.rows(); ++row) perturbed(row, static_cast<Eigen::Index>(j)) += big(noise);
      const Eigen::MatrixXd z0 = head.logits(task.eval.embeddings), z1 = head.logits(perturbed);
      o.require(z0.cwiseEqual(z1).all(), "masked-input invariance at alpha " + std::to_string(r.alpha));
      o.require(head.predict(task.eval.embeddings) == head.predict(perturbed), "prediction invariance");
    }

    // analytic gradient vs central differences of an independent long-double loss
    const int n = 48, d = 9, c = 4;
    std::normal_distribution<double> g;
    Eigen::MatrixXd w(c, d), x(n, d);
    Eigen::VectorXd b(c);
    for (auto* m : {&w, &x})
      for (Eigen::Index k = 0; k < m->size(); ++k) m->data()[k] = g(rng);
    for (Eigen::Index k = 0; k < c; ++k) b(k) = g(rng);
    std::vector<int> y(n);
    for (int i = 0; i < n; ++i) y[i] = static_cast<int>(rng() % c);
    const auto an = softmax_cross_entropy<double>(w, b, x, y);
    const double h = 1e-6;
    double worst = 0;
    auto rel = [&](double a, double f) { return std::abs(a - f) / std::max(std::abs(f), 1e-6); };
    for (int k = 0; k < c; ++k) {
      for (int j = 0; j < d; ++j) {
        Eigen::MatrixXd wp = w, wm = w;
        wp(k, j) += h;
        wm(k, j) -= h;
        const double fd = static_cast<double>((oracle_loss(wp, b, x, y) - oracle_loss(wm, b, x, y)) / (2 * h));
        worst = std::max(worst, rel(an.grad_weights(k, j), fd));
      }
      Eigen::VectorXd bp = b, bm = b;
      bp(k) += h;
      bm(k) -= h;
      const double fd = static_cast<double>((oracle_loss(w, bp, x, y) - oracle_loss(w, bm, x, y)) / (2 * h));
      worst = std::max(worst, rel(an.grad_bias(k), fd));
    }
    o.require(std::abs(an.loss - static_cast<double>(oracle_loss(w, b, x, y))) < 1e-12, "loss value");
    o.detail << "FD max rel err " << worst << "; ";
    o.require(worst <= 1e-4, "finite differences");
  });

  report(6, "masking the planted coordinates cuts max output diff >= 0.2 with |dacc| < 2 pp, sweep < 60 s",
         [&](Outcome& o) {
           o.require(sweep_error.empty(), "sweep: " + sweep_error);
           o.require(sweep.size() == kDefaultAlphas.size(), "sweep size");
           if (!o.pass) return;
           // first alpha whose mask covers every planted coordinate
           const SweepRecord* covering = nullptr;
           for (const auto& r : sweep) {
             const auto& m = r.head.plan.masked;
             if (std::all_of(task.probe.planted.begin(), task.probe.planted.end(),
                             [&](std::size_t j) { return std::find(m.begin(), m.end(), j) != m.end(); })) {
               covering = &r;
               break;
             }
           }
           o.require(covering != nullptr, "some alpha covers the planted coordinates");
           if (!covering) return;
           const auto& base = sweep.front();
           const double drop = base.max_output_diff - covering->max_output_diff;
           const double dacc = covering->eval_accuracy - base.eval_accuracy;
           o.detail << "alpha " << covering->alpha << ": max diff " << base.max_output_diff << " -> "
                    << covering->max_output_diff << ", acc " << base.eval_accuracy << " -> "
                    << covering->eval_accuracy << ", sweep " << sweep_seconds << " s; ";
           o.require(drop >= 0.2, "output diff drop");
           o.require(std::abs(dacc) < 0.02, "accuracy change");
           o.require(sweep_seconds < 60.0, "sweep runtime");
         });

  report(7, "ACTD round trip bit-exact on 20 matrices; corrupted headers name the byte offset", [](Outcome& o) {
    std::mt19937_64 rng(707);
    wmtest::TempDir dir("accept_actd");
    for (int k = 0; k < 20; ++k) {
      const Eigen::Index r = static_cast<Eigen::Index>(rng() % 40), c = 1 + static_cast<Eigen::Index>(rng() % 40);
      RowMatrixXf v(r, c);
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        float f;
        do {
          const auto bits = static_cast<std::uint32_t>(rng());
          std::memcpy(&f, &bits, sizeof f);
        } while (!std::isfinite(f));
        v.data()[i] = f;
      }
      const auto path = dir / ("m" + std::to_string(k) + ".actd");
      write_dump(with_ids(v, k % 2 ? Group::Stamped : Group::Clean), path);
      const auto back = read_dump(path);
      o.require(back.values.rows() == r && back.values.cols() == c, "shape");
      o.require(v.size() == 0 || std::memcmp(back.values.data(), v.data(), sizeof(float) * v.size()) == 0,
                "payload bits");
    }

    RowMatrixXf v(3, 4);
    v.setConstant(1.5f);
    const auto good = encode_actd(v);
    auto expect_offset = [&](std::vector<std::uint8_t> bytes, std::uint64_t offset, const std::string& what) {
      try {
        decode_actd(bytes, "corrupt.actd");
        o.require(false, what + " accepted");
      } catch (const FormatError& e) {
        o.require(e.offset() == offset, what + " offset");
        o.require(std::string(e.what()).find("@ byte " + std::to_string(offset)) != std::string::npos,
                  what + " message");
      }
    };
    auto flip = [&](std::size_t at) {
      auto b = good;
      b[at] ^= 0x5a;
      return b;
    };
    expect_offset(flip(0), 0, "magic");
    expect_offset(flip(3), 0, "magic tail (field offset)");
    expect_offset(flip(4), 4, "version");
    expect_offset(flip(5), 4, "version high byte (field offset)");
    expect_offset(flip(6), 6, "dtype");
    auto truncated = good;
    truncated.resize(good.size() - 1);
    expect_offset(truncated, truncated.size(), "truncated payload");
    expect_offset({good.begin(), good.begin() + 10}, 10, "truncated header");
    auto extended = good;
    extended.push_back(0);
    expect_offset(extended, good.size(), "trailing bytes");
    o.detail << "20 round trips; ";
  });

  std::printf("%s: %d of 7 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
