#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "intentbridge/error.hpp"
#include "intentbridge/intent_generator.hpp"
#include "intentbridge/lm_backend.hpp"
#include "intentbridge/parallel.hpp"
#include "intentbridge/relation.hpp"

namespace intentbridge {

// Relation trigger scoring: T(r) = sum over descriptions i and task
// sentences j of the backend's score for s_ij given the COMeT input built
// from (u_i, r).

enum class Aggregation {
  sum_prob,          // sum of exp(total_logprob)
  sum_mean_logprob,  // sum of length-normalized log-probabilities
};

inline std::string_view to_string(Aggregation a) {
  return a == Aggregation::sum_prob ? "sum_prob" : "sum_mean_logprob";
}

inline Aggregation aggregation_from_string(std::string_view s) {
  if (s == "sum_prob") return Aggregation::sum_prob;
  if (s == "sum_mean_logprob") return Aggregation::sum_mean_logprob;
  throw Error(Errc::invalid_request, "unknown aggregation '" + std::string(s) + "'");
}

struct TriggerCorpusEntry {
  std::string description;
  std::vector<std::string> task_sentences;
  std::size_t line = 0;
};

struct TriggerScore {
  Relation relation;
  double value = 0.0;
  Aggregation aggregation = Aggregation::sum_mean_logprob;
  std::size_t pair_count = 0;
};

inline double aggregate_term(const SequenceScore& s, Aggregation a) {
  return a == Aggregation::sum_prob ? std::exp(s.total_logprob) : s.mean_logprob();
}

inline TriggerScore trigger_score(const Relation& relation, const std::vector<TriggerCorpusEntry>& corpus,
                                  const LmBackend& backend, Aggregation aggregation = Aggregation::sum_mean_logprob,
                                  std::size_t threads = 1) {
  if (corpus.empty()) throw Error(Errc::empty_corpus, "trigger corpus is empty");

  struct Pair {
    std::size_t i, j;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus[i].task_sentences.empty())
      throw Error(Errc::empty_task_sentences, "entry " + std::to_string(i) + " has no task sentences",
                  corpus[i].line ? std::optional<std::size_t>(corpus[i].line) : std::nullopt);
    for (std::size_t j = 0; j < corpus[i].task_sentences.size(); ++j) pairs.push_back({i, j});
  }

  auto terms = parallel_map(pairs.size(), threads, [&](std::size_t k) {
    const auto [i, j] = pairs[k];
    try {
      const auto prefix = build_comet_input(Utterance(corpus[i].description), relation);
      return aggregate_term(backend.score(prefix, corpus[i].task_sentences[j]), aggregation);
    } catch (const Error& e) {
      throw e.with_context("relation " + relation.tag + " at (i=" + std::to_string(i) + ", j=" + std::to_string(j) + ")");
    }
  });

  // Summing in value order makes the result independent of corpus order.
  std::sort(terms.begin(), terms.end());
  double sum = 0.0;
  for (double t : terms) sum += t;
  return {relation, sum, aggregation, pairs.size()};
}

/// Highest-scoring relations first; equal values fall back to tag order.
inline std::vector<Relation> select_top_relations(std::vector<TriggerScore> scores, std::size_t n) {
  if (n == 0) throw Error(Errc::invalid_request, "n must be positive");
  for (const auto& s : scores) {
    if (s.aggregation != scores.front().aggregation)
      throw Error(Errc::mixed_aggregation, "scores were computed under different aggregation modes");
  }
  std::sort(scores.begin(), scores.end(), [](const TriggerScore& a, const TriggerScore& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.relation.tag < b.relation.tag;
  });
  std::vector<Relation> out;
  for (std::size_t k = 0; k < std::min(n, scores.size()); ++k) out.push_back(scores[k].relation);
  return out;
}

/// JSON Lines: {"description": str, "task_sentences": [str, ...]} per line.
/// Blank lines are skipped; line numbers are 1-based.
inline std::vector<TriggerCorpusEntry> load_trigger_corpus(std::istream& in) {
  std::vector<TriggerCorpusEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::parse_error, e.what(), lineno);
    }
    TriggerCorpusEntry entry;
    entry.line = lineno;
    if (!j.is_object() || !j.contains("description") || !j["description"].is_string())
      throw Error(Errc::parse_error, "field 'description' must be a string", lineno);
    if (!j.contains("task_sentences") || !j["task_sentences"].is_array())
      throw Error(Errc::parse_error, "field 'task_sentences' must be an array", lineno);
    entry.description = text::normalize_whitespace(j["description"].get<std::string>());
    if (entry.description.empty()) throw Error(Errc::parse_error, "empty description", lineno);
    for (const auto& s : j["task_sentences"]) {
      if (!s.is_string()) throw Error(Errc::parse_error, "task sentences must be strings", lineno);
      auto t = text::normalize_whitespace(s.get<std::string>());
      if (t.empty()) throw Error(Errc::parse_error, "empty task sentence", lineno);
      entry.task_sentences.push_back(std::move(t));
    }
    if (entry.task_sentences.empty()) throw Error(Errc::empty_task_sentences, "task_sentences is empty", lineno);
    out.push_back(std::move(entry));
  }
  return out;
}

inline nlohmann::json to_json(const TriggerScore& s) {
  return {{"relation", s.relation.tag},
          {"kind", to_string(s.relation.kind)},
          {"value", s.value},
          {"aggregation", to_string(s.aggregation)},
          {"pair_count", s.pair_count}};
}

}  // namespace intentbridge
