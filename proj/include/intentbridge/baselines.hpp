#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "intentbridge/app_catalog.hpp"
#include "intentbridge/error.hpp"
#include "intentbridge/intent_generator.hpp"
#include "intentbridge/lm_backend.hpp"
#include "intentbridge/recommender.hpp"
#include "intentbridge/relation.hpp"
#include "intentbridge/text.hpp"

namespace intentbridge {

enum class BaselineKind { one_stage, two_stage_nl_prompts };

/// Utterance text with trailing periods removed, for joining with a
/// follow-on clause.
inline std::string utterance_stem(const Utterance& u) {
  return text::trim(text::strip_trailing(u.text(), ". "));
}

/// Direct prompt: "{utterance}, so I can use some popular apps called".
inline std::string one_stage_prompt(const Utterance& utterance, const PromptTemplate& t = {}) {
  return apply_android_hint(utterance_stem(utterance) + ", so I can use some popular apps called", t);
}

inline std::string_view nl_intent_clause(const Relation& relation) {
  if (relation.tag == "xIntent") return "so I intend";
  if (relation.tag == "xNeed") return "so I need";
  if (relation.tag == "xWant") return "so I want";
  if (relation.tag == "isAfter") return "Before, the user needs to";
  if (relation.tag == "isBefore") return "After, the user needs to";
  throw Error(Errc::unsupported_relation,
              "relation '" + relation.tag + "' has no natural-language intent prompt");
}

/// Natural-language counterpart of a commonsense relation, used to elicit
/// intents from a general-purpose LM.
inline std::string nl_intent_prompt(const Utterance& utterance, const Relation& relation) {
  const auto clause = nl_intent_clause(relation);
  if (relation.kind == RelationKind::social) return utterance_stem(utterance) + ", " + std::string(clause);
  return utterance_stem(utterance) + ". " + std::string(clause);
}

/// One prompt straight from the utterance; every extracted app becomes a
/// recommendation without relation or rationale.
inline RecommendationSet recommend_one_stage(const Utterance& utterance, const LmBackend& app_backend,
                                             const AppCatalog& catalog, const RecommendConfig& config = {}) {
  RecommendationSet out{utterance, "one-stage", 0, {}, {}, {}};
  RelationTrace trace;
  trace.prompt = one_stage_prompt(utterance, config.prompt);
  try {
    GenerationResult gen;
    gen = app_backend.generate(stage2_request(trace.prompt, config.stage2));
    trace.raw_generations = gen.texts;
    std::set<std::string> seen;
    for (const auto& continuation : gen.texts) {
      std::vector<std::string> apps;
      try {
        apps = extract_app_names(continuation, true);
      } catch (const Error&) {
        continue;
      }
      for (auto& app : apps) {
        if (!seen.insert(text::to_lower(app)).second) continue;
        Recommendation rec;
        rec.category = map_category(app, catalog);
        rec.source_prompt = trace.prompt;
        rec.app = std::move(app);
        out.recommendations.push_back(std::move(rec));
      }
    }
    if (out.recommendations.empty()) throw Error(Errc::no_app_found, "no app name in any continuation");
  } catch (const Error& e) {
    trace.failure = RelationFailure{"", e.code(), e.what()};
    out.failures.push_back(*trace.failure);
    out.trace.push_back(std::move(trace));
    throw PipelineError(out.failures);
  }
  out.trace.push_back(std::move(trace));
  return out;
}

/// Intents from natural-language prompts, cleaned like stage-1 beams.
inline std::vector<GeneratedIntent> generate_nl_intents(const Utterance& utterance, const Relation& relation,
                                                        const LmBackend& backend, const RecommendConfig& config) {
  auto req = stage2_request(nl_intent_prompt(utterance, relation), config.stage2);
  req.num_return = config.intents.k_keep;
  std::vector<std::string> beams;
  try {
    for (const auto& t : backend.generate(req).texts) beams.push_back(t.substr(0, t.find('\n')));
  } catch (const Error& e) {
    throw e.with_context("relation " + relation.tag);
  }
  return intents_from_beams(relation, beams, config.intents.k_keep);
}

/// Two-stage variant whose first stage is a general LM prompted in natural
/// language; stage 2 is shared with the main pipeline.
inline RecommendationSet recommend_two_stage_nl(const Utterance& utterance, const std::vector<Relation>& relations,
                                                const LmBackend& intent_backend, const LmBackend& app_backend,
                                                const AppCatalog& catalog, const RecommendConfig& config = {}) {
  validate(config.intents);
  auto source = [&](const Relation& r) { return generate_nl_intents(utterance, r, intent_backend, config); };
  return recommend_with(utterance, relations, source, app_backend, catalog, config, "two-stage-nl");
}

}  // namespace intentbridge
