#include "wmprobe/config.hpp"

#include <fstream>
#include <iterator>
#include <regex>
#include <set>

#include <json.hpp>

#include "wmprobe/charset.hpp"
#include "wmprobe/text_format.hpp"

namespace wmprobe {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : j.items())
    if (!ok.count(item.key())) throw ConfigError("unknown key '" + item.key() + "' in " + where);
}

template <typename T>
T get(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + "." + key + " is required");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

template <typename T>
T get_or(const json& j, const char* key, const std::string& where, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return get<T>(j, key, where);
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

Scenario get_scenario(const json& j, const std::string& where) {
  return parse_scenario(get<std::string>(j, "scenario", where));
}

void check_model_name(const std::string& model, const std::string& where) {
  static const std::regex safe("[A-Za-z0-9._-]+");
  if (!std::regex_match(model, safe))
    throw ConfigError(where + ".model '" + model + "' must match [A-Za-z0-9._-]+");
}

Rgba parse_color(const json& j, const std::string& where) {
  if (!j.is_array() || (j.size() != 3 && j.size() != 4))
    throw ConfigError(where + ".color must be [r, g, b] or [r, g, b, a]");
  std::uint8_t c[4] = {255, 255, 255, 255};
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_number_integer() || j[k].get<int>() < 0 || j[k].get<int>() > 255)
      throw ConfigError(where + ".color entries must be integers in [0, 255]");
    c[k] = static_cast<std::uint8_t>(j[k].get<int>());
  }
  return {c[0], c[1], c[2], c[3]};
}

std::uint64_t get_seed(const json& j, const std::string& where) {
  if (!j.contains("seed"))
    throw ConfigError(where + ".seed is required (no implicit seeds)");
  if (!j["seed"].is_number_unsigned()) throw ConfigError(where + ".seed must be a non-negative integer");
  return j["seed"].get<std::uint64_t>();
}

TrainingConfig parse_training(const json& j, const std::string& where) {
  check_keys(j, where, {"batch_size", "learning_rate", "momentum", "epochs", "weight_decay", "seed"});
  TrainingConfig t;
  t.batch_size = get_or<int>(j, "batch_size", where, t.batch_size);
  t.learning_rate = get_or<double>(j, "learning_rate", where, t.learning_rate);
  t.momentum = get_or<double>(j, "momentum", where, t.momentum);
  t.epochs = get_or<int>(j, "epochs", where, t.epochs);
  t.weight_decay = get_or<double>(j, "weight_decay", where, t.weight_decay);
  t.seed = get_seed(j, where);
  if (t.batch_size < 1) throw ConfigError(where + ".batch_size must be >= 1");
  if (t.epochs < 0) throw ConfigError(where + ".epochs must be >= 0");
  if (!(t.learning_rate > 0)) throw ConfigError(where + ".learning_rate must be > 0");
  return t;
}

void apply_override(json& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  std::string pointer;
  std::size_t start = 0;
  while (start <= key.size()) {
    const auto dot = key.find('.', start);
    const auto end = dot == std::string::npos ? key.size() : dot;
    if (end == start) throw ConfigError("override key '" + key + "' has an empty segment");
    pointer += "/" + key.substr(start, end - start);
    start = end + 1;
  }
  try {
    root[json::json_pointer(pointer)] = value;
  } catch (const json::exception& e) {
    throw ConfigError("cannot apply override '" + assignment + "': " + e.what());
  }
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw ConfigError(what + " not found: " + p.string());
}

}  // namespace

AuditConfig parse_config(const std::string& json_text, const fs::path& base_dir,
                         const std::vector<std::string>& overrides) {
  json root = json::parse(json_text, nullptr, false);
  if (root.is_discarded()) throw ConfigError("config is not valid JSON");
  for (const auto& o : overrides) apply_override(root, o);

  check_keys(root, "config", {"schema_version", "output_dir", "threads", "stamp", "score", "sweep"});
  AuditConfig c;
  c.schema_version = get<int>(root, "schema_version", "config");
  if (c.schema_version != 1)
    throw ConfigError("unsupported schema_version " + std::to_string(c.schema_version));
  c.output_dir = resolve(base_dir, get<std::string>(root, "output_dir", "config"));
  const int threads = get_or<int>(root, "threads", "config", 1);
  if (threads < 1) throw ConfigError("config.threads must be >= 1");
  c.threads = static_cast<unsigned>(threads);

  if (root.contains("stamp")) {
    const json& s = root["stamp"];
    check_keys(s, "stamp", {"baseline_dir", "scenarios"});
    c.baseline_dir = resolve(base_dir, get<std::string>(s, "baseline_dir", "stamp"));
    const json& list = s.contains("scenarios") ? s["scenarios"] : json::array();
    if (!list.is_array()) throw ConfigError("stamp.scenarios must be an array");
    std::set<Scenario> seen;
    for (std::size_t i = 0; i < list.size(); ++i) {
      const json& e = list[i];
      std::string where = "stamp.scenarios[" + std::to_string(i) + "]";
      check_keys(e, where, {"scenario", "charset", "font", "color", "seed", "string_length", "font_size"});
      ScenarioConfig sc;
      sc.scenario = get_scenario(e, where);
      where += " (" + std::string(to_string(sc.scenario)) + ")";
      if (!seen.insert(sc.scenario).second)
        throw ConfigError("scenario " + std::string(to_string(sc.scenario)) + " listed twice");
      if (e.contains("charset") && !e["charset"].is_null())
        sc.charset = resolve(base_dir, get<std::string>(e, "charset", where));
      sc.font = resolve(base_dir, get<std::string>(e, "font", where));
      if (e.contains("color")) sc.color = parse_color(e["color"], where);
      sc.seed = get_seed(e, where);
      sc.string_length = get_or<int>(e, "string_length", where, 7);
      sc.font_size = get_or<int>(e, "font_size", where, 30);
      c.scenarios.push_back(std::move(sc));
    }
  }

  if (root.contains("score")) {
    const json& s = root["score"];
    check_keys(s, "score", {"threshold", "top_k", "class_names", "runs"});
    c.threshold = get_or<double>(s, "threshold", "score", kDefaultSensitiveThreshold);
    if (!(c.threshold >= 0.5 && c.threshold < 1.0))
      throw ConfigError("score.threshold must be in [0.5, 1)");
    const int top_k = get_or<int>(s, "top_k", "score", 5);
    if (top_k < 1) throw ConfigError("score.top_k must be >= 1");
    c.top_k = static_cast<std::size_t>(top_k);
    if (s.contains("class_names") && !s["class_names"].is_null())
      c.class_names = resolve(base_dir, get<std::string>(s, "class_names", "score"));
    const json& runs = s.contains("runs") ? s["runs"] : json::array();
    if (!runs.is_array()) throw ConfigError("score.runs must be an array");
    std::set<std::pair<std::string, Scenario>> seen;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const json& e = runs[i];
      const std::string where = "score.runs[" + std::to_string(i) + "]";
      check_keys(e, where, {"model", "scenario", "clean", "stamped"});
      ScoreRun r;
      r.model = get<std::string>(e, "model", where);
      check_model_name(r.model, where);
      r.scenario = get_scenario(e, where);
      if (!seen.emplace(r.model, r.scenario).second)
        throw ConfigError("run " + r.model + "/" + std::string(to_string(r.scenario)) +
                          " listed twice");
      r.clean = resolve(base_dir, get<std::string>(e, "clean", where));
      r.stamped = resolve(base_dir, get<std::string>(e, "stamped", where));
      c.runs.push_back(std::move(r));
    }
  }

  if (root.contains("sweep")) {
    const json& s = root["sweep"];
    const std::string where = "sweep";
    check_keys(s, where, {"model", "scenario", "scores", "train", "eval", "probe_clean",
                          "probe_stamped", "alphas", "training"});
    SweepConfig w;
    w.model = get<std::string>(s, "model", where);
    check_model_name(w.model, where);
    w.scenario = get_scenario(s, where);
    if (s.contains("scores") && !s["scores"].is_null())
      w.scores = resolve(base_dir, get<std::string>(s, "scores", where));
    w.train = resolve(base_dir, get<std::string>(s, "train", where));
    w.eval = resolve(base_dir, get<std::string>(s, "eval", where));
    w.probe_clean = resolve(base_dir, get<std::string>(s, "probe_clean", where));
    w.probe_stamped = resolve(base_dir, get<std::string>(s, "probe_stamped", where));
    w.alphas = get_or<std::vector<double>>(s, "alphas", where, kDefaultAlphas);
    if (w.alphas.empty()) throw ConfigError("sweep.alphas is empty");
    for (std::size_t i = 0; i < w.alphas.size(); ++i) {
      if (!(w.alphas[i] >= 0.0 && w.alphas[i] <= 1.0))
        throw ConfigError("sweep.alphas[" + std::to_string(i) + "] = " +
                          format_double(w.alphas[i]) + " is outside [0, 1]");
      if (i > 0 && w.alphas[i] < w.alphas[i - 1])
        throw ConfigError("sweep.alphas must be sorted ascending");
    }
    if (!s.contains("training")) throw ConfigError("sweep.training is required (it carries the seed)");
    w.training = parse_training(s["training"], "sweep.training");
    c.sweep = std::move(w);
  }
  return c;
}

AuditConfig load_config(const fs::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse_config(text, fs::absolute(path).parent_path(), overrides);
}

void validate_for(const AuditConfig& c, Command command) {
  switch (command) {
    case Command::Stamp:
      if (!c.baseline_dir || c.scenarios.empty())
        throw ConfigError("stamp needs stamp.baseline_dir and at least one scenario");
      if (!fs::is_directory(*c.baseline_dir))
        throw ConfigError("baseline_dir not found: " + c.baseline_dir->string());
      for (const auto& s : c.scenarios) {
        const std::string name(to_string(s.scenario));
        require_file(s.font, "scenario " + name + ": font");
        if (s.charset) require_file(*s.charset, "scenario " + name + ": charset");
      }
      break;
    case Command::Score:
      if (c.runs.empty()) throw ConfigError("score needs at least one score.runs entry");
      for (const auto& r : c.runs) {
        const std::string name = r.model + "/" + std::string(to_string(r.scenario));
        require_file(r.clean, "run " + name + ": clean dump");
        require_file(r.stamped, "run " + name + ": stamped dump");
      }
      if (c.class_names) require_file(*c.class_names, "class_names");
      break;
    case Command::Rank:
    case Command::Report:
      if (c.runs.empty()) throw ConfigError("this command needs score.runs");
      if (c.class_names) require_file(*c.class_names, "class_names");
      break;
    case Command::Sweep: {
      if (!c.sweep) throw ConfigError("sweep needs a sweep section");
      const SweepConfig& w = *c.sweep;
      require_file(w.train, "sweep.train");
      require_file(w.eval, "sweep.eval");
      require_file(w.probe_clean, "sweep.probe_clean");
      require_file(w.probe_stamped, "sweep.probe_stamped");
      require_file(w.scores ? *w.scores : scores_path(c, w.model, w.scenario),
                   "sweep scores (run `score` first)");
      break;
    }
  }
}

WatermarkSpec make_watermark_spec(const ScenarioConfig& s) {
  auto charset = s.charset ? load_charset(*s.charset) : default_charset(s.scenario);
  return WatermarkSpec(s.scenario, std::move(charset), s.font, s.seed,
                       {s.color, s.string_length, s.font_size});
}

fs::path scores_path(const AuditConfig& c, const std::string& model, Scenario scenario) {
  return c.output_dir / ("scores_" + model + "_" + std::string(to_string(scenario)) + ".csv");
}

}  // namespace wmprobe
