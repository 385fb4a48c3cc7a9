#pragma once

#include <algorithm>
#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "intentbridge/error.hpp"
#include "intentbridge/lm_backend.hpp"
#include "intentbridge/parallel.hpp"
#include "intentbridge/relation.hpp"
#include "intentbridge/text.hpp"

namespace intentbridge {

/// A user's high-level utterance. Whitespace (newlines included) is
/// collapsed on construction; empty text is rejected.
class Utterance {
 public:
  explicit Utterance(std::string_view text, std::string id = {})
      : text_(text::normalize_whitespace(text)), id_(std::move(id)) {
    if (text_.empty()) throw Error(Errc::invalid_request, "utterance must be non-empty");
  }

  const std::string& text() const { return text_; }
  const std::string& id() const { return id_; }

  friend bool operator==(const Utterance&, const Utterance&) = default;

 private:
  std::string text_;
  std::string id_;
};

struct GeneratedIntent {
  Relation relation;
  int rank = 1;  // 1-based beam rank after dedupe
  std::string text;

  friend bool operator==(const GeneratedIntent&, const GeneratedIntent&) = default;
};

struct IntentSet {
  Utterance utterance;
  /// One entry per configured relation, in configuration order.
  std::vector<std::pair<Relation, std::vector<GeneratedIntent>>> intents;

  const std::vector<GeneratedIntent>* find(std::string_view tag) const {
    for (const auto& [rel, list] : intents)
      if (rel.tag == tag) return &list;
    return nullptr;
  }
};

struct IntentConfig {
  int num_beams = 10;
  int k_keep = 2;
  int max_new_tokens = 24;
  double temperature = 1.0;
  double top_p = 1.0;
  std::size_t threads = 1;
};

inline const std::vector<std::string>& scaffolding_tokens() {
  static const std::vector<std::string> tokens = {"[GEN]", "<s>", "</s>"};
  return tokens;
}

/// COMeT-style input: "<s> {utterance} {relation} [GEN] </s>".
inline std::string build_comet_input(const Utterance& utterance, const Relation& relation) {
  return "<s> " + utterance.text() + " " + relation.tag + " [GEN] </s>";
}

/// Cleans one decoded beam: drops scaffolding tokens, collapses whitespace,
/// strips trailing periods. Idempotent.
inline std::string normalize_intent(std::string_view raw) {
  std::string s(raw);
  for (;;) {
    std::string before = s;
    for (const auto& tok : scaffolding_tokens()) text::replace_all(s, tok, " ");
    s = text::normalize_whitespace(s);
    s = text::trim(text::strip_trailing(s, ". \t"));
    if (s == before) return s;
  }
}

/// Keeps the first `k_keep` beams, normalizes them, and drops empties and
/// duplicates; ranks are re-assigned densely from 1.
inline std::vector<GeneratedIntent> intents_from_beams(const Relation& relation,
                                                       const std::vector<std::string>& beams, int k_keep) {
  std::vector<GeneratedIntent> out;
  std::set<std::string> seen;
  const auto n = std::min<std::size_t>(beams.size(), static_cast<std::size_t>(std::max(k_keep, 0)));
  for (std::size_t i = 0; i < n; ++i) {
    auto t = normalize_intent(beams[i]);
    if (t.empty() || !seen.insert(t).second) continue;
    out.push_back({relation, static_cast<int>(out.size()) + 1, std::move(t)});
  }
  return out;
}

inline void validate(const IntentConfig& c) {
  if (c.num_beams < 1) throw Error(Errc::invalid_request, "num_beams must be >= 1");
  if (c.k_keep < 1 || c.k_keep > c.num_beams) throw Error(Errc::invalid_request, "k_keep must be in [1, num_beams]");
}

/// Decodes intents for a single relation. Backend errors are re-thrown
/// tagged with the relation.
inline std::vector<GeneratedIntent> generate_relation_intents(const Utterance& utterance, const Relation& relation,
                                                              const LmBackend& backend, const IntentConfig& config) {
  validate(config);
  GenerationRequest req;
  req.prompt = build_comet_input(utterance, relation);
  req.max_new_tokens = config.max_new_tokens;
  req.temperature = config.temperature;
  req.top_p = config.top_p;
  req.num_beams = config.num_beams;
  req.num_return = config.num_beams;
  try {
    return intents_from_beams(relation, backend.generate(req).texts, config.k_keep);
  } catch (const Error& e) {
    throw e.with_context("relation " + relation.tag);
  }
}

inline IntentSet generate_intents(const Utterance& utterance, const std::vector<Relation>& relations,
                                  const LmBackend& backend, const IntentConfig& config = {}) {
  if (relations.empty()) throw Error(Errc::invalid_request, "at least one relation is required");
  validate(config);
  auto lists = parallel_map(relations.size(), config.threads, [&](std::size_t i) {
    return generate_relation_intents(utterance, relations[i], backend, config);
  });
  IntentSet out{utterance, {}};
  for (std::size_t i = 0; i < relations.size(); ++i) out.intents.emplace_back(relations[i], std::move(lists[i]));
  return out;
}

}  // namespace intentbridge
