#pragma once

#include <algorithm>
#include <compare>
#include <string>
#include <string_view>
#include <vector>

#include "intentbridge/error.hpp"

namespace intentbridge {

enum class RelationKind { social, event, physical };

inline std::string_view to_string(RelationKind k) {
  switch (k) {
    case RelationKind::social: return "social";
    case RelationKind::event: return "event";
    case RelationKind::physical: return "physical";
  }
  return "unknown";
}

/// A commonsense relation from the ATOMIC-2020 inventory.
struct Relation {
  std::string tag;
  RelationKind kind = RelationKind::social;

  friend bool operator==(const Relation&, const Relation&) = default;
  friend auto operator<=>(const Relation& a, const Relation& b) { return a.tag <=> b.tag; }
};

/// The 23 ATOMIC-2020 relations, tags spelled as the COMeT-2020 checkpoints
/// expect them.
inline const std::vector<Relation>& atomic2020_relations() {
  static const std::vector<Relation> catalog = {
      // social-interaction
      {"xIntent", RelationKind::social},
      {"xNeed", RelationKind::social},
      {"xWant", RelationKind::social},
      {"xAttr", RelationKind::social},
      {"xEffect", RelationKind::social},
      {"xReact", RelationKind::social},
      {"oEffect", RelationKind::social},
      {"oReact", RelationKind::social},
      {"oWant", RelationKind::social},
      // event-centered
      {"isAfter", RelationKind::event},
      {"isBefore", RelationKind::event},
      {"HasSubEvent", RelationKind::event},
      {"HinderedBy", RelationKind::event},
      {"Causes", RelationKind::event},
      {"xReason", RelationKind::event},
      {"isFilledBy", RelationKind::event},
      // physical-entity
      {"ObjectUse", RelationKind::physical},
      {"AtLocation", RelationKind::physical},
      {"MadeUpOf", RelationKind::physical},
      {"HasProperty", RelationKind::physical},
      {"CapableOf", RelationKind::physical},
      {"Desires", RelationKind::physical},
      {"NotDesires", RelationKind::physical},
  };
  return catalog;
}

inline Relation relation_from_tag(std::string_view tag) {
  const auto& cat = atomic2020_relations();
  auto it = std::find_if(cat.begin(), cat.end(), [&](const Relation& r) { return r.tag == tag; });
  if (it == cat.end()) throw Error(Errc::invalid_request, "unknown relation tag '" + std::string(tag) + "'");
  return *it;
}

/// Relations that trigger task-oriented intents, in pipeline order.
inline std::vector<Relation> default_relations() {
  return {relation_from_tag("xIntent"), relation_from_tag("xNeed"), relation_from_tag("xWant"),
          relation_from_tag("isAfter"), relation_from_tag("isBefore")};
}

inline bool is_pipeline_relation(const Relation& r) {
  const auto five = default_relations();
  return std::find(five.begin(), five.end(), r) != five.end();
}

inline void require_pipeline_relation(const Relation& r) {
  if (!is_pipeline_relation(r))
    throw Error(Errc::unsupported_relation,
                "relation '" + r.tag + "' is not one of xIntent, xNeed, xWant, isAfter, isBefore");
}

inline std::vector<Relation> relations_from_tags(const std::vector<std::string>& tags) {
  std::vector<Relation> out;
  out.reserve(tags.size());
  for (const auto& t : tags) out.push_back(relation_from_tag(t));
  return out;
}

}  // namespace intentbridge
