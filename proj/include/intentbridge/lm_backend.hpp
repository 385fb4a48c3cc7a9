#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "intentbridge/error.hpp"
#include "intentbridge/text.hpp"

namespace intentbridge {

struct GenerationRequest {
  std::string prompt;
  int max_new_tokens = 50;
  double temperature = 0.01;
  double top_p = 0.9;
  int num_beams = 1;
  int num_return = 1;
  std::vector<std::string> stop_sequences;
};

struct GenerationResult {
  std::vector<std::string> texts;
  std::vector<double> logprobs;  // empty when the backend does not report them
};

/// Natural-log probability of a continuation given a prefix.
struct SequenceScore {
  double total_logprob = 0.0;
  int num_tokens = 1;

  double mean_logprob() const { return total_logprob / static_cast<double>(num_tokens); }
};

inline void validate(const GenerationRequest& r) {
  if (text::trim(r.prompt).empty()) throw Error(Errc::invalid_request, "prompt must be non-empty");
  if (r.max_new_tokens < 1) throw Error(Errc::invalid_request, "max_new_tokens must be >= 1");
  if (!std::isfinite(r.temperature) || r.temperature < 0.0)
    throw Error(Errc::invalid_request, "temperature must be a finite value >= 0");
  if (!(r.top_p > 0.0 && r.top_p <= 1.0)) throw Error(Errc::invalid_request, "top_p must be in (0, 1]");
  if (r.num_beams < 1) throw Error(Errc::invalid_request, "num_beams must be >= 1");
  if (r.num_return < 1) throw Error(Errc::invalid_request, "num_return must be >= 1");
  if (r.num_beams > 1 && r.num_return > r.num_beams)
    throw Error(Errc::invalid_request, "num_return must not exceed num_beams under beam search");
}

inline void validate_score_args(std::string_view prefix, std::string_view continuation) {
  if (text::trim(prefix).empty() || text::trim(continuation).empty())
    throw Error(Errc::invalid_request, "score requires non-empty prefix and continuation");
}

inline void validate(const SequenceScore& s) {
  if (s.num_tokens < 1) throw Error(Errc::backend_unavailable, "score reported num_tokens < 1");
  if (!std::isfinite(s.total_logprob) || s.total_logprob > 0.0)
    throw Error(Errc::backend_unavailable, "score reported a log-probability outside (-inf, 0]");
}

/// Removes a verbatim echo of the prompt at the head of a continuation.
inline std::string strip_prompt_echo(std::string_view prompt, std::string continuation) {
  if (!prompt.empty() && text::starts_with(continuation, prompt)) continuation.erase(0, prompt.size());
  return continuation;
}

/// Text generation and sequence scoring. Implementations must be safe to
/// call concurrently from several threads.
class LmBackend {
 public:
  virtual ~LmBackend() = default;

  virtual GenerationResult generate(const GenerationRequest& request) const = 0;
  virtual SequenceScore score(std::string_view prefix, std::string_view continuation) const = 0;
  /// Short identifier recorded in run metadata.
  virtual std::string identifier() const = 0;
};

/// Exact-match fixtures for the mock backend. Keys are whitespace-normalized
/// on insertion and lookup.
class FixtureTable {
 public:
  void add_generation(std::string_view prompt, std::vector<std::string> continuations) {
    generations_[text::normalize_whitespace(prompt)] = std::move(continuations);
  }

  void add_score(std::string_view prefix, std::string_view continuation, SequenceScore s) {
    validate(s);
    scores_[{text::normalize_whitespace(prefix), text::normalize_whitespace(continuation)}] = s;
  }

  const std::vector<std::string>* find_generation(std::string_view prompt) const {
    auto it = generations_.find(text::normalize_whitespace(prompt));
    return it == generations_.end() ? nullptr : &it->second;
  }

  const SequenceScore* find_score(std::string_view prefix, std::string_view continuation) const {
    auto it = scores_.find({text::normalize_whitespace(prefix), text::normalize_whitespace(continuation)});
    return it == scores_.end() ? nullptr : &it->second;
  }

  std::size_t generation_count() const { return generations_.size(); }
  std::size_t score_count() const { return scores_.size(); }

  /// Merges `other` into this table; entries in `other` win.
  void merge(const FixtureTable& other) {
    for (const auto& [k, v] : other.generations_) generations_[k] = v;
    for (const auto& [k, v] : other.scores_) scores_[k] = v;
  }

  nlohmann::json to_json() const {
    nlohmann::json gen = nlohmann::json::object();
    for (const auto& [k, v] : generations_) gen[k] = v;
    nlohmann::json sc = nlohmann::json::array();
    for (const auto& [k, v] : scores_) {
      sc.push_back({{"prefix", k.first},
                    {"continuation", k.second},
                    {"total_logprob", v.total_logprob},
                    {"num_tokens", v.num_tokens}});
    }
    return {{"generate", gen}, {"score", sc}};
  }

  /// Accepts {"generate": {prompt: [continuations]},
  ///          "score": [{prefix, continuation, total_logprob, num_tokens}]}.
  static FixtureTable from_json(const nlohmann::json& j) {
    FixtureTable t;
    try {
      if (j.contains("generate")) {
        for (const auto& [prompt, texts] : j.at("generate").items())
          t.add_generation(prompt, texts.get<std::vector<std::string>>());
      }
      if (j.contains("score")) {
        for (const auto& e : j.at("score")) {
          t.add_score(e.at("prefix").get<std::string>(), e.at("continuation").get<std::string>(),
                      SequenceScore{e.at("total_logprob").get<double>(), e.at("num_tokens").get<int>()});
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::parse_error, std::string("fixture table: ") + e.what());
    }
    return t;
  }

  static FixtureTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_error, "cannot open fixture file " + path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::parse_error, path + ": " + e.what());
    }
    return from_json(j);
  }

 private:
  std::map<std::string, std::vector<std::string>> generations_;
  std::map<std::pair<std::string, std::string>, SequenceScore> scores_;
};

/// Deterministic backend answering from a FixtureTable. Holds no mutable
/// state, so concurrent calls are safe.
class MockBackend final : public LmBackend {
 public:
  explicit MockBackend(FixtureTable table, std::string name = "mock") : table_(std::move(table)), name_(std::move(name)) {}

  GenerationResult generate(const GenerationRequest& request) const override {
    validate(request);
    const auto* texts = table_.find_generation(request.prompt);
    if (!texts) throw Error(Errc::fixture_miss, "no generation fixture for prompt \"" + request.prompt + "\"");
    GenerationResult out;
    const auto n = std::min<std::size_t>(texts->size(), static_cast<std::size_t>(request.num_return));
    out.texts.assign(texts->begin(), texts->begin() + static_cast<std::ptrdiff_t>(n));
    return out;
  }

  SequenceScore score(std::string_view prefix, std::string_view continuation) const override {
    validate_score_args(prefix, continuation);
    const auto* s = table_.find_score(prefix, continuation);
    if (!s) {
      throw Error(Errc::fixture_miss, "no score fixture for (\"" + std::string(prefix) + "\", \"" +
                                          std::string(continuation) + "\")");
    }
    return *s;
  }

  std::string identifier() const override { return name_; }

  const FixtureTable& table() const { return table_; }

 private:
  FixtureTable table_;
  std::string name_;
};

}  // namespace intentbridge
