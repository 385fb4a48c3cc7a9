#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "intentbridge/app_catalog.hpp"
#include "intentbridge/error.hpp"
#include "intentbridge/intent_generator.hpp"
#include "intentbridge/lm_backend.hpp"
#include "intentbridge/parallel.hpp"
#include "intentbridge/relation.hpp"
#include "intentbridge/text.hpp"

namespace intentbridge {

enum class HintPosition {
  after_app_word,  // "... a popular app in Android phone called"
  appended,        // "... a popular app called in Android phone"
};

inline std::string_view to_string(HintPosition p) {
  return p == HintPosition::after_app_word ? "after_app_word" : "appended";
}

inline HintPosition hint_position_from_string(std::string_view s) {
  if (s == "after_app_word") return HintPosition::after_app_word;
  if (s == "appended") return HintPosition::appended;
  throw Error(Errc::invalid_request, "unknown hint position '" + std::string(s) + "'");
}

struct PromptTemplate {
  std::string app_clause = "by using a popular app called";
  bool android_hint = false;
  std::string android_hint_text = "in Android phone";
  HintPosition hint_position = HintPosition::after_app_word;
};

inline std::string_view social_verb(const Relation& r) {
  if (r.tag == "xIntent") return "intends";
  if (r.tag == "xNeed") return "needs";
  if (r.tag == "xWant") return "wants";
  throw Error(Errc::unsupported_relation, "no prompt verb for relation '" + r.tag + "'");
}

/// Inserts the platform hint into a cloze prompt. `after_app_word` puts it
/// in front of the final word so the prompt still ends on the cloze slot.
inline std::string apply_android_hint(std::string prompt, const PromptTemplate& t) {
  if (!t.android_hint || t.android_hint_text.empty()) return prompt;
  if (t.hint_position == HintPosition::appended) return prompt + " " + t.android_hint_text;
  const auto last_space = prompt.rfind(' ');
  if (last_space == std::string::npos) return t.android_hint_text + " " + prompt;
  prompt.insert(last_space, " " + t.android_hint_text);
  return prompt;
}

inline std::string join_intents(const std::vector<std::string>& intents) {
  for (const auto& i : intents) {
    if (text::trim(i).empty()) throw Error(Errc::invalid_request, "intents must be non-empty strings");
  }
  return text::join(intents, " and ");
}

inline std::string build_recommendation_prompt(const Relation& relation, const std::vector<std::string>& intents,
                                               const PromptTemplate& t = {}) {
  require_pipeline_relation(relation);
  if (intents.empty()) throw Error(Errc::invalid_request, "at least one intent is required");
  const auto joined = join_intents(intents);
  std::string prompt;
  if (relation.kind == RelationKind::social) {
    prompt = "The user " + std::string(social_verb(relation)) + " " + joined + " " + t.app_clause;
  } else {
    prompt = joined + ". The user can solve this " + t.app_clause;
  }
  return apply_android_hint(std::move(prompt), t);
}

namespace detail {

inline bool is_sentence_end(std::string_view s, std::size_t i) {
  const char c = s[i];
  if (c == '\n' || c == '\r') return true;
  if (c != '.' && c != '!' && c != '?') return false;
  return i + 1 == s.size() || text::is_space(s[i + 1]);
}

/// Splits on the standalone word `word` (ASCII case-insensitive).
inline std::vector<std::string_view> split_on_word(std::string_view s, std::string_view word) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i + word.size() <= s.size(); ++i) {
    const bool left_ok = i == 0 || text::is_space(s[i - 1]);
    const bool right_ok = i + word.size() == s.size() || text::is_space(s[i + word.size()]);
    if (left_ok && right_ok && text::to_lower(s.substr(i, word.size())) == word) {
      out.push_back(s.substr(start, i - start));
      start = i + word.size();
      i = start;
    }
  }
  out.push_back(s.substr(start));
  return out;
}

inline std::string_view strip_app_decoration(std::string_view s) {
  static const std::vector<std::string_view> quotes = {"\"", "'", "`", "\xE2\x80\x9C", "\xE2\x80\x9D",
                                                       "\xE2\x80\x98", "\xE2\x80\x99"};
  static const std::string_view trailing_punct = ".,;:!?";
  for (;;) {
    const auto before = s;
    while (!s.empty() && text::is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && text::is_space(s.back())) s.remove_suffix(1);
    while (!s.empty() && trailing_punct.find(s.back()) != std::string_view::npos) s.remove_suffix(1);
    for (auto q : quotes) {
      if (text::starts_with(s, q)) s.remove_prefix(q.size());
      if (text::ends_with(s, q)) s.remove_suffix(q.size());
    }
    if (s == before) return s;
  }
}

/// Drops a trailing description such as "to pick a film" or "for banking".
/// Only lowercase connectives count, so names like "Microsoft To Do" survive.
inline std::string_view cut_description(std::string_view s) {
  static const std::vector<std::string_view> connectives = {"to",  "for", "which", "where", "that", "is",
                                                             "lets", "helps", "can", "will", "("};
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (!text::is_space(s[i - 1])) continue;
    for (auto w : connectives) {
      const auto end = i + w.size();
      if (s.substr(i, w.size()) == w && (w == "(" || end == s.size() || text::is_space(s[end])))
        return s.substr(0, i);
    }
  }
  return s;
}

}  // namespace detail

/// Pulls app names out of an LM continuation. Only the first sentence (or
/// line) is considered. With `allow_multiple`, names are split on commas and
/// the word "and"; otherwise the first comma-delimited name is returned.
/// A trailing description introduced by a lowercase connective is dropped.
inline std::vector<std::string> extract_app_names(std::string_view continuation, bool allow_multiple) {
  std::string_view s = continuation;
  while (!s.empty() && text::is_space(s.front())) s.remove_prefix(1);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (detail::is_sentence_end(s, i)) {
      s = s.substr(0, i);
      break;
    }
  }

  std::vector<std::string_view> pieces;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == ',') {
      auto piece = s.substr(start, i - start);
      if (allow_multiple) {
        for (auto p : detail::split_on_word(piece, "and")) pieces.push_back(p);
      } else {
        pieces.push_back(piece);
      }
      start = i + 1;
    }
  }

  std::vector<std::string> out;
  std::set<std::string> seen;
  for (auto p : pieces) {
    const auto name = detail::strip_app_decoration(detail::cut_description(detail::strip_app_decoration(p)));
    if (name.empty()) continue;
    if (!seen.insert(text::to_lower(name)).second) continue;
    out.emplace_back(name);
    if (!allow_multiple) break;
  }
  if (out.empty()) throw Error(Errc::no_app_found, "no app name in continuation \"" + std::string(continuation) + "\"");
  return out;
}

/// Intent as it appears inside a rationale: a leading "to " is dropped.
inline std::string rationale_clause(std::string_view intent) {
  auto t = text::trim(intent);
  if (text::starts_with(t, "to ")) t.erase(0, 3);
  return t;
}

/// "{app} can help {intent} and {intent}."
inline std::string build_rationale(std::string_view app, const std::vector<std::string>& intents) {
  if (text::trim(app).empty()) throw Error(Errc::invalid_request, "app must be non-empty");
  if (intents.empty()) throw Error(Errc::invalid_request, "at least one intent is required");
  std::vector<std::string> clauses;
  for (const auto& i : intents) {
    if (text::trim(i).empty()) throw Error(Errc::invalid_request, "intents must be non-empty strings");
    clauses.push_back(rationale_clause(i));
  }
  return std::string(app) + " can help " + text::join(clauses, " and ") + ".";
}

struct Recommendation {
  std::string app;
  std::string category;
  std::optional<Relation> relation;  // empty for the one-stage baseline
  std::vector<std::string> supporting_intents;
  std::string rationale;
  std::string source_prompt;
};

/// What happened for one relation branch of a run.
struct RelationTrace {
  std::string relation;
  std::vector<std::string> intents;
  std::string prompt;
  std::vector<std::string> raw_generations;
  std::optional<RelationFailure> failure;
};

struct RecommendationSet {
  Utterance utterance;
  std::string system = "proposed";
  int k_keep = 0;
  std::vector<Recommendation> recommendations;
  std::vector<RelationTrace> trace;
  std::vector<RelationFailure> failures;
};

struct Stage2Config {
  int max_new_tokens = 50;
  double temperature = 0.01;
  double top_p = 0.9;
  int num_return = 1;
};

struct RecommendConfig {
  IntentConfig intents;
  Stage2Config stage2;
  PromptTemplate prompt;
  bool allow_multiple = false;
  std::size_t threads = 1;
};

inline GenerationRequest stage2_request(std::string prompt, const Stage2Config& c) {
  GenerationRequest r;
  r.prompt = std::move(prompt);
  r.max_new_tokens = c.max_new_tokens;
  r.temperature = c.temperature;
  r.top_p = c.top_p;
  r.num_beams = 1;
  r.num_return = c.num_return;
  return r;
}

namespace detail {

struct BranchOutcome {
  RelationTrace trace;
  std::vector<Recommendation> recommendations;
};

template <typename IntentSource>
BranchOutcome run_branch(const Relation& relation, IntentSource& intent_source, const LmBackend& app_backend,
                         const AppCatalog& catalog, const RecommendConfig& config) {
  BranchOutcome out;
  out.trace.relation = relation.tag;
  try {
    const std::vector<GeneratedIntent> generated = intent_source(relation);
    for (const auto& g : generated) out.trace.intents.push_back(g.text);
    if (out.trace.intents.empty())
      throw Error(Errc::pipeline_failure, "relation " + relation.tag + ": no usable intents were generated");

    out.trace.prompt = build_recommendation_prompt(relation, out.trace.intents, config.prompt);
    GenerationResult gen;
    try {
      gen = app_backend.generate(stage2_request(out.trace.prompt, config.stage2));
    } catch (const Error& e) {
      throw e.with_context("relation " + relation.tag);
    }
    out.trace.raw_generations = gen.texts;

    std::set<std::string> seen;
    std::optional<Error> last_error;
    for (const auto& continuation : gen.texts) {
      std::vector<std::string> apps;
      try {
        apps = extract_app_names(continuation, config.allow_multiple);
      } catch (const Error& e) {
        last_error = e.with_context("relation " + relation.tag);
        continue;
      }
      for (auto& app : apps) {
        if (!seen.insert(text::to_lower(app)).second) continue;
        Recommendation rec;
        rec.category = map_category(app, catalog);
        rec.relation = relation;
        rec.supporting_intents = out.trace.intents;
        rec.rationale = build_rationale(app, out.trace.intents);
        rec.source_prompt = out.trace.prompt;
        rec.app = std::move(app);
        out.recommendations.push_back(std::move(rec));
      }
    }
    if (out.recommendations.empty()) {
      if (last_error) throw *last_error;
      throw Error(Errc::no_app_found, "relation " + relation.tag + ": backend returned no continuations");
    }
  } catch (const Error& e) {
    out.recommendations.clear();
    out.trace.failure = RelationFailure{relation.tag, e.code(), e.what()};
  } catch (const std::exception& e) {
    out.recommendations.clear();
    out.trace.failure = RelationFailure{relation.tag, Errc::pipeline_failure, e.what()};
  }
  return out;
}

}  // namespace detail

/// Stage 2 over intents supplied by `intent_source`, a callable
/// (const Relation&) -> std::vector<GeneratedIntent>. Branches run with up
/// to `config.threads` workers; merge order is the relation order.
template <typename IntentSource>
RecommendationSet recommend_with(const Utterance& utterance, const std::vector<Relation>& relations,
                                 IntentSource&& intent_source, const LmBackend& app_backend,
                                 const AppCatalog& catalog, const RecommendConfig& config,
                                 std::string system = "proposed") {
  if (relations.empty()) throw Error(Errc::invalid_request, "at least one relation is required");
  for (const auto& r : relations) require_pipeline_relation(r);

  auto outcomes = parallel_map(relations.size(), config.threads, [&](std::size_t i) {
    return detail::run_branch(relations[i], intent_source, app_backend, catalog, config);
  });

  RecommendationSet out{utterance, std::move(system), config.intents.k_keep, {}, {}, {}};
  std::set<std::pair<std::string, std::string>> seen;
  for (auto& o : outcomes) {
    if (o.trace.failure) out.failures.push_back(*o.trace.failure);
    for (auto& rec : o.recommendations) {
      if (!seen.insert({text::to_lower(rec.app), rec.relation->tag}).second) continue;
      out.recommendations.push_back(std::move(rec));
    }
    out.trace.push_back(std::move(o.trace));
  }
  if (out.failures.size() == relations.size()) throw PipelineError(out.failures);
  return out;
}

/// Full two-stage pipeline: commonsense intents, then app prompting.
inline RecommendationSet recommend(const Utterance& utterance, const std::vector<Relation>& relations,
                                   const LmBackend& intent_backend, const LmBackend& app_backend,
                                   const AppCatalog& catalog, const RecommendConfig& config = {}) {
  validate(config.intents);
  auto source = [&](const Relation& r) {
    return generate_relation_intents(utterance, r, intent_backend, config.intents);
  };
  return recommend_with(utterance, relations, source, app_backend, catalog, config, "proposed");
}

inline nlohmann::json to_json(const RelationFailure& f) {
  return {{"relation", f.relation.empty() ? nlohmann::json(nullptr) : nlohmann::json(f.relation)},
          {"code", to_string(f.code)},
          {"message", f.message}};
}

/// The public recommendation object: exactly app, category, rationale,
/// relation and supporting_intents.
inline nlohmann::json to_json(const Recommendation& r) {
  return {{"app", r.app},
          {"category", r.category},
          {"rationale", r.rationale},
          {"relation", r.relation ? nlohmann::json(r.relation->tag) : nlohmann::json(nullptr)},
          {"supporting_intents", r.supporting_intents}};
}

inline nlohmann::json to_json(const RelationTrace& t) {
  nlohmann::json j = {{"relation", t.relation.empty() ? nlohmann::json(nullptr) : nlohmann::json(t.relation)},
                      {"intents", t.intents},
                      {"prompt", t.prompt},
                      {"raw_generations", t.raw_generations}};
  j["error"] = t.failure ? to_json(*t.failure) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json trace_to_json(const RecommendationSet& s) {
  nlohmann::json branches = nlohmann::json::array();
  for (const auto& t : s.trace) branches.push_back(to_json(t));
  return {{"system", s.system}, {"k_keep", s.k_keep}, {"branches", branches}};
}

/// Complete serialization, including the trace. Keys are emitted in sorted
/// order, so equal sets dump to identical bytes.
inline nlohmann::json to_json(const RecommendationSet& s) {
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : s.recommendations) recs.push_back(to_json(r));
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& f : s.failures) failures.push_back(to_json(f));
  return {{"utterance", s.utterance.text()},
          {"utterance_id", s.utterance.id()},
          {"system", s.system},
          {"recommendations", recs},
          {"failures", failures},
          {"trace", trace_to_json(s)}};
}

}  // namespace intentbridge
