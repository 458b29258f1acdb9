#include "wmprobe/types.hpp"

#include <string>

#include "wmprobe/errors.hpp"

namespace wmprobe {

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::Chinese: return "Chinese";
    case Scenario::Latin: return "Latin";
    case Scenario::Hindi: return "Hindi";
    case Scenario::Numeric: return "Numeric";
  }
  return "?";
}

std::string_view to_string(Group g) {
  return g == Group::Clean ? "clean" : "stamped";
}

std::string_view to_string(RepKind k) {
  return k == RepKind::Logit ? "logit" : "feature";
}

Scenario parse_scenario(std::string_view name) {
  for (Scenario s : {Scenario::Chinese, Scenario::Latin, Scenario::Hindi,
                     Scenario::Numeric})
    if (to_string(s) == name) return s;
  throw ConfigError("unknown scenario '" + std::string(name) + "'");
}

Group parse_group(std::string_view name) {
  if (name == "clean") return Group::Clean;
  if (name == "stamped") return Group::Stamped;
  throw ConfigError("unknown group label '" + std::string(name) + "'");
}

RepKind parse_rep_kind(std::string_view name) {
  if (name == "logit") return RepKind::Logit;
  if (name == "feature") return RepKind::Feature;
  throw ConfigError("unknown representation kind '" + std::string(name) + "'");
}

}  // namespace wmprobe
