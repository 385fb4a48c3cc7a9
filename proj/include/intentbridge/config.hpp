#pragma once

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "intentbridge/baselines.hpp"
#include "intentbridge/error.hpp"
#include "intentbridge/evaluator.hpp"
#include "intentbridge/recommender.hpp"
#include "intentbridge/relation.hpp"
#include "intentbridge/text.hpp"

namespace intentbridge {

enum class SystemKind { proposed, one_stage, two_stage_nl };

inline std::string_view to_string(SystemKind k) {
  switch (k) {
    case SystemKind::proposed: return "proposed";
    case SystemKind::one_stage: return "one-stage";
    case SystemKind::two_stage_nl: return "two-stage-nl";
  }
  return "proposed";
}

inline SystemKind system_kind_from_string(std::string_view s) {
  if (s == "proposed") return SystemKind::proposed;
  if (s == "one-stage") return SystemKind::one_stage;
  if (s == "two-stage-nl") return SystemKind::two_stage_nl;
  throw Error(Errc::invalid_request, "unknown system '" + std::string(s) + "' (proposed|one-stage|two-stage-nl)");
}

struct BackendConfig {
  std::string url;         // shared default for every role
  std::string intent_url;  // stage 1 generator
  std::string app_url;     // stage 2 generator
  std::string score_url;   // trigger scoring
  std::string fixtures;    // fixture file; selects the mock backend when set
  int connect_timeout_ms = 2000;
  int read_timeout_ms = 60000;
  int max_retries = 2;
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string session_log;
};

/// Everything a run needs. Defaults reproduce the published settings:
/// beam size 10 for intent decoding; 50 new tokens, temperature 0.01 and
/// top-p 0.9 for app generation; the Android hint on.
struct PipelineConfig {
  SystemKind system = SystemKind::proposed;
  std::vector<std::string> relations = {"xIntent", "xNeed", "xWant", "isAfter", "isBefore"};
  std::size_t threads = 1;
  IntentConfig stage1;
  Stage2Config stage2;
  bool allow_multiple = false;
  PromptTemplate prompt{.android_hint = true};
  BackendConfig backend;
  std::string catalog;
  AverageMode eval_mode = AverageMode::micro;
  ServiceConfig service;

  std::vector<Relation> relation_list() const { return relations_from_tags(relations); }

  RecommendConfig recommend_config() const {
    RecommendConfig c;
    c.intents = stage1;
    c.intents.threads = 1;
    c.stage2 = stage2;
    c.prompt = prompt;
    c.allow_multiple = allow_multiple;
    c.threads = threads;
    return c;
  }

  nlohmann::json to_json() const {
    return {
        {"system", to_string(system)},
        {"relations", relations},
        {"threads", threads},
        {"stage1",
         {{"num_beams", stage1.num_beams},
          {"k_keep", stage1.k_keep},
          {"max_new_tokens", stage1.max_new_tokens},
          {"temperature", stage1.temperature},
          {"top_p", stage1.top_p}}},
        {"stage2",
         {{"max_new_tokens", stage2.max_new_tokens},
          {"temperature", stage2.temperature},
          {"top_p", stage2.top_p},
          {"num_return", stage2.num_return},
          {"allow_multiple", allow_multiple}}},
        {"template",
         {{"app_clause", prompt.app_clause},
          {"android_hint", prompt.android_hint},
          {"hint_text", prompt.android_hint_text},
          {"hint_position", to_string(prompt.hint_position)}}},
        {"backend",
         {{"url", backend.url},
          {"intent_url", backend.intent_url},
          {"app_url", backend.app_url},
          {"score_url", backend.score_url},
          {"fixtures", backend.fixtures},
          {"connect_timeout_ms", backend.connect_timeout_ms},
          {"read_timeout_ms", backend.read_timeout_ms},
          {"max_retries", backend.max_retries}}},
        {"catalog", catalog},
        {"evaluation", {{"mode", to_string(eval_mode)}}},
        {"service", {{"host", service.host}, {"port", service.port}, {"session_log", service.session_log}}},
    };
  }

  /// Overlays `j` on the defaults. Unknown keys are rejected.
  static PipelineConfig from_json(const nlohmann::json& j) {
    auto merged = PipelineConfig{}.to_json();
    check_known_keys(merged, j, "");
    merged.merge_patch(j);
    PipelineConfig c;
    try {
      c.system = system_kind_from_string(merged["system"].get<std::string>());
      c.relations = merged["relations"].get<std::vector<std::string>>();
      c.threads = merged["threads"].get<std::size_t>();
      const auto& s1 = merged["stage1"];
      c.stage1.num_beams = s1["num_beams"].get<int>();
      c.stage1.k_keep = s1["k_keep"].get<int>();
      c.stage1.max_new_tokens = s1["max_new_tokens"].get<int>();
      c.stage1.temperature = s1["temperature"].get<double>();
      c.stage1.top_p = s1["top_p"].get<double>();
      const auto& s2 = merged["stage2"];
      c.stage2.max_new_tokens = s2["max_new_tokens"].get<int>();
      c.stage2.temperature = s2["temperature"].get<double>();
      c.stage2.top_p = s2["top_p"].get<double>();
      c.stage2.num_return = s2["num_return"].get<int>();
      c.allow_multiple = s2["allow_multiple"].get<bool>();
      const auto& t = merged["template"];
      c.prompt.app_clause = t["app_clause"].get<std::string>();
      c.prompt.android_hint = t["android_hint"].get<bool>();
      c.prompt.android_hint_text = t["hint_text"].get<std::string>();
      c.prompt.hint_position = hint_position_from_string(t["hint_position"].get<std::string>());
      const auto& b = merged["backend"];
      c.backend.url = b["url"].get<std::string>();
      c.backend.intent_url = b["intent_url"].get<std::string>();
      c.backend.app_url = b["app_url"].get<std::string>();
      c.backend.score_url = b["score_url"].get<std::string>();
      c.backend.fixtures = b["fixtures"].get<std::string>();
      c.backend.connect_timeout_ms = b["connect_timeout_ms"].get<int>();
      c.backend.read_timeout_ms = b["read_timeout_ms"].get<int>();
      c.backend.max_retries = b["max_retries"].get<int>();
      c.catalog = merged["catalog"].get<std::string>();
      c.eval_mode = average_mode_from_string(merged["evaluation"]["mode"].get<std::string>());
      const auto& sv = merged["service"];
      c.service.host = sv["host"].get<std::string>();
      c.service.port = sv["port"].get<int>();
      c.service.session_log = sv["session_log"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::invalid_request, std::string("config: ") + e.what());
    }
    c.validate();
    return c;
  }

  void validate() const {
    intentbridge::validate(stage1);
    if (relations.empty()) throw Error(Errc::invalid_request, "config: relations must be non-empty");
    for (const auto& r : relation_list()) require_pipeline_relation(r);
    if (stage2.max_new_tokens < 1 || stage2.num_return < 1)
      throw Error(Errc::invalid_request, "config: stage2 max_new_tokens and num_return must be >= 1");
    if (threads < 1) throw Error(Errc::invalid_request, "config: threads must be >= 1");
  }

  /// Stable 16-hex-digit fingerprint of the effective configuration.
  std::string hash() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(text::fnv1a64(to_json().dump())));
    return buf;
  }

 private:
  static void check_known_keys(const nlohmann::json& known, const nlohmann::json& given, const std::string& path) {
    if (!given.is_object()) throw Error(Errc::invalid_request, "config: '" + path + "' must be an object");
    for (const auto& [k, v] : given.items()) {
      const auto full = path.empty() ? k : path + "." + k;
      if (!known.contains(k)) throw Error(Errc::invalid_request, "config: unknown key '" + full + "'");
      if (known[k].is_object()) check_known_keys(known[k], v, full);
    }
  }
};

/// Sets the leaf at dotted `path` from its textual form; the leaf's current
/// type decides how the text is read. Arrays accept JSON or comma lists.
inline void apply_override(nlohmann::json& j, const std::string& path, const std::string& value) {
  nlohmann::json* node = &j;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    const auto key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(key)) throw Error(Errc::invalid_request, "config: unknown key '" + path + "'");
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  try {
    if (node->is_string()) {
      *node = value;
    } else if (node->is_boolean()) {
      const auto v = text::to_lower(text::trim(value));
      if (v == "1" || v == "true" || v == "yes" || v == "on") *node = true;
      else if (v == "0" || v == "false" || v == "no" || v == "off") *node = false;
      else throw Error(Errc::invalid_request, "config: '" + path + "' expects a boolean");
    } else if (node->is_array()) {
      const auto t = text::trim(value);
      if (!t.empty() && t.front() == '[') {
        *node = nlohmann::json::parse(t);
      } else {
        nlohmann::json arr = nlohmann::json::array();
        std::size_t s = 0;
        for (;;) {
          const auto c = t.find(',', s);
          auto item = text::trim(t.substr(s, c == std::string::npos ? std::string::npos : c - s));
          if (!item.empty()) arr.push_back(item);
          if (c == std::string::npos) break;
          s = c + 1;
        }
        *node = arr;
      }
    } else {
      const auto parsed = nlohmann::json::parse(value);
      if (!parsed.is_number()) throw Error(Errc::invalid_request, "config: '" + path + "' expects a number");
      *node = parsed;
    }
  } catch (const nlohmann::json::exception&) {
    throw Error(Errc::invalid_request, "config: cannot parse value '" + value + "' for '" + path + "'");
  }
}

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

namespace detail {

inline void collect_leaf_paths(const nlohmann::json& j, const std::string& prefix, std::vector<std::string>& out) {
  for (const auto& [k, v] : j.items()) {
    const auto p = prefix.empty() ? k : prefix + "." + k;
    if (v.is_object()) collect_leaf_paths(v, p, out);
    else out.push_back(p);
  }
}

inline std::string env_name_for(const std::string& path) {
  std::string out = "INTENTBRIDGE_";
  for (char c : path) out.push_back(c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return out;
}

}  // namespace detail

/// Precedence: CLI override > environment > file > default. The file comes
/// from `file_path`, or INTENTBRIDGE_CONFIG when that is empty. Every leaf
/// `a.b_c` can be set through INTENTBRIDGE_A_B_C (e.g. INTENTBRIDGE_BACKEND_URL).
inline PipelineConfig load_config(const std::string& file_path, const EnvLookup& env,
                                  const std::vector<std::pair<std::string, std::string>>& cli_overrides = {}) {
  auto j = PipelineConfig{}.to_json();

  std::string path = file_path;
  if (path.empty()) {
    if (auto v = env("INTENTBRIDGE_CONFIG")) path = *v;
  }
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_error, "cannot open config file " + path);
    try {
      const auto file = nlohmann::json::parse(in);
      j = PipelineConfig::from_json(file).to_json();
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::parse_error, path + ": " + e.what());
    } catch (const Error& e) {
      throw e.with_context(path);
    }
  }

  std::vector<std::string> leaves;
  detail::collect_leaf_paths(j, "", leaves);
  for (const auto& leaf : leaves) {
    if (auto v = env(detail::env_name_for(leaf))) apply_override(j, leaf, *v);
  }
  for (const auto& [k, v] : cli_overrides) apply_override(j, k, v);
  return PipelineConfig::from_json(j);
}

}  // namespace intentbridge
