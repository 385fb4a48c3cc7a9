#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace intentbridge {

enum class Errc {
  invalid_request,
  backend_unavailable,
  fixture_miss,
  empty_corpus,
  mixed_aggregation,
  parse_error,
  empty_task_sentences,
  empty_gold,
  unknown_utterance_id,
  unsupported_relation,
  no_app_found,
  pipeline_failure,
  io_error,
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::invalid_request: return "InvalidRequest";
    case Errc::backend_unavailable: return "BackendUnavailable";
    case Errc::fixture_miss: return "FixtureMiss";
    case Errc::empty_corpus: return "EmptyCorpus";
    case Errc::mixed_aggregation: return "MixedAggregation";
    case Errc::parse_error: return "ParseError";
    case Errc::empty_task_sentences: return "EmptyTaskSentences";
    case Errc::empty_gold: return "EmptyGold";
    case Errc::unknown_utterance_id: return "UnknownUtteranceId";
    case Errc::unsupported_relation: return "UnsupportedRelation";
    case Errc::no_app_found: return "NoAppFound";
    case Errc::pipeline_failure: return "PipelineFailure";
    case Errc::io_error: return "IoError";
  }
  return "Unknown";
}

/// Every failure surfaced by the library. `line()` is set for errors that
/// originate in line-oriented input files (1-based).
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message, std::optional<std::size_t> line = std::nullopt)
      : std::runtime_error(format(code, message, line)), code_(code), detail_(message), line_(line) {}

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }
  std::optional<std::size_t> line() const noexcept { return line_; }

  /// Same error with `context` prepended to the detail.
  Error with_context(std::string_view context) const {
    return Error(code_, std::string(context) + ": " + detail_, line_);
  }

 private:
  static std::string format(Errc code, const std::string& message, std::optional<std::size_t> line) {
    std::string out(to_string(code));
    if (line) out += " (line " + std::to_string(*line) + ")";
    out += ": ";
    out += message;
    return out;
  }

  Errc code_;
  std::string detail_;
  std::optional<std::size_t> line_;
};

struct RelationFailure {
  std::string relation;  // empty when the failing step is not relation-specific
  Errc code;
  std::string message;
};

/// Thrown when every branch of a pipeline run failed.
class PipelineError : public Error {
 public:
  explicit PipelineError(std::vector<RelationFailure> causes)
      : Error(Errc::pipeline_failure, summarize(causes)), causes_(std::move(causes)) {}

  const std::vector<RelationFailure>& causes() const noexcept { return causes_; }

 private:
  static std::string summarize(const std::vector<RelationFailure>& causes) {
    std::string out = "all " + std::to_string(causes.size()) + " branch(es) failed";
    for (const auto& c : causes) {
      out += "; ";
      out += c.relation.empty() ? std::string("-") : c.relation;
      out += ": ";
      out += c.message;
    }
    return out;
  }

  std::vector<RelationFailure> causes_;
};

}  // namespace intentbridge
