#include "wmprobe/commands.hpp"

#include <fstream>
#include <iterator>
#include <algorithm>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "wmprobe/activation_store.hpp"
#include "wmprobe/linear_head.hpp"
#include "wmprobe/probe.hpp"
#include "wmprobe/stamper.hpp"
#include "wmprobe/synthetic.hpp"
#include "wmprobe/text_format.hpp"

namespace wmprobe {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void ensure_output_dir(const AuditConfig& config) {
  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec) throw IoError("cannot create " + config.output_dir.string() + ": " + ec.message());
}

std::string run_name(const std::string& model, Scenario scenario) {
  return model + "_" + std::string(to_string(scenario));
}

// Names go into CSV fields, which are never quoted.
std::vector<std::string> load_class_names(const AuditConfig& config) {
  std::vector<std::string> names;
  if (!config.class_names) return names;
  std::istringstream in(read_text(*config.class_names));
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::replace(line.begin(), line.end(), ',', ';');
    names.push_back(line);
  }
  return names;
}

// Re-raises with a prefix so the failing scenario or run is named.
[[noreturn]] void rethrow_in(const std::string& context, const Error& e) {
  if (const auto* f = dynamic_cast<const FormatError*>(&e)) throw *f;
  throw Error(e.kind(), context + ": " + e.what());
}

ActivationMatrix read_run_dump(const fs::path& path, Group expected_group, Scenario scenario) {
  ActivationMatrix m = read_dump(path);
  if (m.group != expected_group)
    throw ConfigError(path.string() + " is a " + std::string(to_string(m.group)) +
                      " dump, expected " + std::string(to_string(expected_group)));
  if (m.scenario != scenario)
    throw ConfigError(path.string() + " belongs to scenario " +
                      std::string(to_string(m.scenario)) + ", expected " +
                      std::string(to_string(scenario)));
  return m;
}

std::vector<ModelScores> read_all_scores(const AuditConfig& config) {
  std::vector<ModelScores> runs;
  for (const auto& r : config.runs)
    runs.push_back({r.model, r.scenario, read_scores_csv(scores_path(config, r.model, r.scenario))});
  return runs;
}

}  // namespace

void cmd_stamp(const AuditConfig& config, std::ostream& log) {
  validate_for(config, Command::Stamp);
  const auto baseline = load_baseline(*config.baseline_dir);
  if (baseline.empty())
    throw ConfigError("baseline_dir " + config.baseline_dir->string() + " holds no images");
  // every spec and font is checked before anything is written
  std::vector<WatermarkSpec> specs;
  for (const auto& s : config.scenarios) {
    try {
      specs.push_back(make_watermark_spec(s));
      Stamper check(specs.back());
    } catch (const Error& e) {
      rethrow_in("scenario " + std::string(to_string(s.scenario)), e);
    }
  }
  ensure_output_dir(config);
  for (const auto& spec : specs) {
    const std::string name(to_string(spec.scenario()));
    try {
      const ProbePairSet set = build_probe_set(baseline, spec);
      write_probe_set(set, spec, config.output_dir);
      log << "stamp " << name << ": " << set.pairs.size() << " pairs -> "
          << (config.output_dir / name).string() << "\n";
    } catch (const Error& e) {
      rethrow_in("scenario " + name, e);
    }
  }
}

void cmd_validate(const fs::path& dump, std::ostream& log) {
  log << "file: " << dump.string() << "\n";
  try {
    const DumpReport r = validate_dump(dump);
    const DumpManifest& m = r.manifest;
    log << "magic: ACTD\n"
        << "version: " << r.header.version << "\n"
        << "dtype: " << (r.header.dtype == kActdFloat32 ? "float32" : "?") << "\n"
        << "rows: " << r.header.rows << "\n"
        << "cols: " << r.header.cols << "\n"
        << "file_size: " << r.header.file_size << "\n"
        << "manifest: " << manifest_path(dump).string() << "\n";
    if (m.scenario) log << "scenario: " << to_string(*m.scenario) << "\n";
    if (m.group) log << "group: " << to_string(*m.group) << "\n";
    if (m.split) log << "split: " << to_string(*m.split) << "\n";
    if (m.num_classes) log << "num_classes: " << *m.num_classes << "\n";
    std::vector<std::string> warnings = m.warnings;
    if (!(m.scenario && m.group) && !(m.labels && m.split))
      warnings.push_back("manifest has neither scenario/group_label nor labels/split");
    log << "warnings: " << warnings.size() << "\n";
    for (const auto& w : warnings) log << "  warning: " << w << "\n";
    log << "PASS\n";
  } catch (const Error& e) {
    log << "FAIL: " << e.what() << "\n";
    throw;
  }
}

void cmd_score(const AuditConfig& config, std::ostream& log) {
  validate_for(config, Command::Score);
  const auto class_names = load_class_names(config);
  ensure_output_dir(config);
  std::vector<ModelScores> runs;
  for (const auto& r : config.runs) {
    const std::string name = run_name(r.model, r.scenario);
    try {
      const ActivationMatrix clean = read_run_dump(r.clean, Group::Clean, r.scenario);
      const ActivationMatrix stamped = read_run_dump(r.stamped, Group::Stamped, r.scenario);
      auto scores = score_all(clean, stamped, config.threads);
      write_text(scores_path(config, r.model, r.scenario), scores_csv(scores));
      log << "score " << name << ": " << scores.size() << " reps, "
          << count_sensitive(scores, config.threshold) << " with diff > "
          << format_double(config.threshold) << "\n";
      runs.push_back({r.model, r.scenario, std::move(scores)});
    } catch (const Error& e) {
      rethrow_in("run " + name, e);
    }
  }
  for (const auto& summary : summarize(std::move(runs), config.threshold, config.top_k)) {
    const std::string file = "summary_" + std::string(to_string(summary.scenario)) + ".csv";
    write_text(config.output_dir / file, summary_csv(summary, class_names));
    log << "summary " << to_string(summary.scenario) << ": " << summary.models.size()
        << " models -> " << file << "\n";
  }
}

void cmd_rank(const AuditConfig& config, std::ostream& log) {
  validate_for(config, Command::Rank);
  ensure_output_dir(config);
  for (const auto& r : config.runs) {
    const auto scores = read_scores_csv(scores_path(config, r.model, r.scenario));
    const auto order = rank_by_diff(scores);
    const std::string file = "rank_" + run_name(r.model, r.scenario) + ".csv";
    write_text(config.output_dir / file, rank_csv(scores, order));
    log << "rank " << run_name(r.model, r.scenario) << ": top rep "
        << (order.empty() ? std::string("-") : std::to_string(scores[order[0]].rep.index))
        << " -> " << file << "\n";
  }
}

void cmd_sweep(const AuditConfig& config, std::ostream& log) {
  validate_for(config, Command::Sweep);
  const SweepConfig& w = *config.sweep;
  const auto scores = read_scores_csv(w.scores ? *w.scores : scores_path(config, w.model, w.scenario));
  const auto train = read_labeled_set(w.train);
  const auto eval = read_labeled_set(w.eval);
  const auto probe_clean = read_run_dump(w.probe_clean, Group::Clean, w.scenario);
  const auto probe_stamped = read_run_dump(w.probe_stamped, Group::Stamped, w.scenario);
  ensure_output_dir(config);

  const auto records = alpha_sweep(train, eval, scores, w.alphas, w.training, probe_clean,
                                   probe_stamped, config.threads);
  write_text(config.output_dir / "sweep.csv", sweep_csv(records));
  for (const auto& rec : records) {
    write_text(config.output_dir / output_auc_filename(rec.alpha), output_auc_csv(rec));
    log << "sweep alpha=" << format_double(rec.alpha) << " masked=" << rec.n_masked
        << " accuracy=" << format_double(rec.eval_accuracy)
        << " max_output_diff=" << format_double(rec.max_output_diff) << "\n";
  }
}

void cmd_report(const AuditConfig& config, std::ostream& log) {
  validate_for(config, Command::Report);
  const auto class_names = load_class_names(config);
  ensure_output_dir(config);
  for (const auto& summary : summarize(read_all_scores(config), config.threshold, config.top_k)) {
    const std::string file = "plotdata_" + std::string(to_string(summary.scenario)) + ".json";
    write_text(config.output_dir / file, plotdata_json(summary, class_names));
    log << "report " << to_string(summary.scenario) << " -> " << file << "\n";
  }

  const fs::path sweep_file = config.output_dir / "sweep.csv";
  if (!fs::exists(sweep_file)) return;
  const auto rows = parse_csv(read_text(sweep_file));
  if (rows.empty() || rows[0] != std::vector<std::string>{"alpha", "n_masked", "eval_accuracy",
                                                          "max_output_diff"})
    throw FormatError(sweep_file.string(), std::nullopt, "unexpected sweep.csv header");
  ojson j;
  if (config.sweep) {
    j["model"] = config.sweep->model;
    j["scenario"] = to_string(config.sweep->scenario);
  }
  ojson alpha = ojson::array(), masked = ojson::array(), accuracy = ojson::array(),
        max_diff = ojson::array(), distributions = ojson::array();
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != 4)
      throw FormatError(sweep_file.string(), std::nullopt,
                        "line " + std::to_string(i + 1) + " has " + std::to_string(row.size()) +
                            " fields");
    const double a = parse_double(row[0], "alpha");
    alpha.push_back(a);
    masked.push_back(parse_long(row[1], "n_masked"));
    accuracy.push_back(parse_double(row[2], "eval_accuracy"));
    max_diff.push_back(parse_double(row[3], "max_output_diff"));
    const fs::path auc_file = config.output_dir / output_auc_filename(a);
    ojson aucs = ojson::array();
    if (fs::exists(auc_file)) {
      const auto auc_rows = parse_csv(read_text(auc_file));
      for (std::size_t k = 1; k < auc_rows.size(); ++k) {
        if (auc_rows[k].size() != 3)
          throw FormatError(auc_file.string(), std::nullopt,
                            "line " + std::to_string(k + 1) + " is malformed");
        aucs.push_back(parse_double(auc_rows[k][1], "auc"));
      }
    }
    distributions.push_back({{"alpha", a}, {"output_auc", std::move(aucs)}});
  }
  j["alpha"] = std::move(alpha);
  j["n_masked"] = std::move(masked);
  j["eval_accuracy"] = std::move(accuracy);
  j["max_output_diff"] = std::move(max_diff);
  j["output_auc_distributions"] = std::move(distributions);
  write_text(config.output_dir / "plotdata_sweep.json", j.dump(2) + "\n");
  log << "report sweep -> plotdata_sweep.json\n";
}

void cmd_synth(const fs::path& out_dir, std::uint64_t seed, std::ostream& log) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  synthetic::PlantedTaskOptions options;
  options.probe.seed = seed;
  const auto task = synthetic::planted_task(options);
  write_dump(task.probe.clean, out_dir / "probe_clean.actd");
  write_dump(task.probe.stamped, out_dir / "probe_stamped.actd");
  write_labeled_set(task.train, out_dir / "train.actd");
  write_labeled_set(task.eval, out_dir / "eval.actd");

  const std::string scenario(to_string(options.probe.scenario));
  ojson config;
  config["schema_version"] = 1;
  config["output_dir"] = "out";
  config["threads"] = 1;
  config["score"] = {{"threshold", kDefaultSensitiveThreshold},
                     {"top_k", 5},
                     {"runs", ojson::array({{{"model", "synthetic"},
                                             {"scenario", scenario},
                                             {"clean", "probe_clean.actd"},
                                             {"stamped", "probe_stamped.actd"}}})}};
  const TrainingConfig t;
  config["sweep"] = {{"model", "synthetic"},
                     {"scenario", scenario},
                     {"train", "train.actd"},
                     {"eval", "eval.actd"},
                     {"probe_clean", "probe_clean.actd"},
                     {"probe_stamped", "probe_stamped.actd"},
                     {"alphas", kDefaultAlphas},
                     {"training",
                      {{"batch_size", t.batch_size},
                       {"learning_rate", t.learning_rate},
                       {"momentum", t.momentum},
                       {"epochs", t.epochs},
                       {"weight_decay", t.weight_decay},
                       {"seed", seed}}}};
  write_text(out_dir / "config.json", config.dump(2) + "\n");

  log << "synth: planted columns";
  for (auto p : task.probe.planted) log << " " << p;
  log << "; " << task.train.size() << " train / " << task.eval.size() << " eval rows, "
      << task.train.num_classes << " classes -> " << out_dir.string() << "\n";
}

std::string error_json(const Error& error) {
  ojson j;
  j["error"] = to_string(error.kind());
  j["message"] = error.what();
  j["exit_code"] = exit_code(error.kind());
  if (const auto* f = dynamic_cast<const FormatError*>(&error)) {
    j["file"] = f->file();
    if (f->offset()) j["offset"] = *f->offset();
  }
  return j.dump();
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Watermark sensitivity audit for vision model representations", "wmprobe"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "wmprobe 0.1.0");

  std::string config_path;
  std::vector<std::string> overrides;
  int threads = 0;
  std::string output_dir;
  auto add_config_options = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "JSON config file")->required();
    sub->add_option("--set", overrides, "Override a config key: a.b.0.c=value (repeatable)");
    sub->add_option("--threads", threads, "Override config threads")->check(CLI::PositiveNumber);
    sub->add_option("-o,--output-dir", output_dir, "Override config output_dir");
  };

  std::map<std::string, void (*)(const AuditConfig&, std::ostream&)> config_commands = {
      {"stamp", cmd_stamp}, {"score", cmd_score}, {"rank", cmd_rank},
      {"sweep", cmd_sweep}, {"report", cmd_report}};
  const std::map<std::string, std::string> help = {
      {"stamp", "Render the probe datasets for every configured scenario"},
      {"score", "Score every representation of every configured run"},
      {"rank", "Rank representations by differentiability"},
      {"sweep", "Mask top-ranked embedding coordinates and retrain the head"},
      {"report", "Emit plot-ready JSON"}};
  for (const auto& [name, fn] : config_commands) add_config_options(app.add_subcommand(name, help.at(name)));

  std::vector<std::string> dumps;
  auto* validate = app.add_subcommand("validate", "Check ACTD dumps and their manifests");
  validate->add_option("dumps", dumps, "ACTD files")->required();

  std::string synth_dir;
  std::uint64_t synth_seed = 1;
  auto* synth = app.add_subcommand("synth", "Write the planted synthetic task and a config");
  synth->add_option("-o,--out", synth_dir, "Output directory")->required();
  synth->add_option("--seed", synth_seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << error_json(ConfigError(e.what())) << "\n";
    return exit_code(ErrorKind::Config);
  }

  try {
    if (validate->parsed()) {
      int code = 0;
      for (const auto& d : dumps) {
        try {
          cmd_validate(d, out);
        } catch (const Error& e) {
          err << error_json(e) << "\n";
          if (code == 0) code = exit_code(e.kind());
        }
      }
      return code;
    }
    if (synth->parsed()) {
      cmd_synth(synth_dir, synth_seed, out);
      return 0;
    }
    if (threads > 0) overrides.push_back("threads=" + std::to_string(threads));
    if (!output_dir.empty())
      overrides.push_back("output_dir=" + ojson(fs::absolute(output_dir).string()).dump());
    const AuditConfig config = load_config(config_path, overrides);
    for (const auto& [name, fn] : config_commands)
      if (app.got_subcommand(name)) fn(config, out);
    return 0;
  } catch (const Error& e) {
    err << error_json(e) << "\n";
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << error_json(IoError(e.what())) << "\n";
    return exit_code(ErrorKind::Io);
  } catch (const std::exception& e) {
    ojson j = {{"error", "Internal"}, {"message", e.what()}, {"exit_code", 1}};
    err << j.dump() << "\n";
    return 1;
  }
}

}  // namespace wmprobe
