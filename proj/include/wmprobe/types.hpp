#pragma once

#include <compare>
#include <string>
#include <string_view>

namespace wmprobe {

enum class Scenario { Chinese, Latin, Hindi, Numeric };

enum class Group { Clean, Stamped };

enum class RepKind { Logit, Feature };

std::string_view to_string(Scenario s);
std::string_view to_string(Group g);
std::string_view to_string(RepKind k);

// Parsers throw ConfigError on unknown names. Matching is case-sensitive on
// the canonical names above ("Chinese", "clean", "logit", ...).
Scenario parse_scenario(std::string_view name);
Group parse_group(std::string_view name);
RepKind parse_rep_kind(std::string_view name);

/// One scalar representation: a logit class or a pooled feature channel.
struct RepresentationId {
  std::string layer_name;
  long index = 0;
  RepKind kind = RepKind::Feature;

  auto operator<=>(const RepresentationId&) const = default;
};

}  // namespace wmprobe
