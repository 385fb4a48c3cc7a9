#pragma once

#include <chrono>
#include <string>
#include <string_view>
#include <thread>
#include <utility>

#include <httplib.h>
#include <json.hpp>

#include "intentbridge/error.hpp"
#include "intentbridge/lm_backend.hpp"

namespace intentbridge {

struct HttpBackendOptions {
  std::string base_url;  // e.g. "http://127.0.0.1:8080" or "http://host:8080/prefix"
  int connect_timeout_ms = 2000;
  int read_timeout_ms = 60000;
  int max_retries = 2;
  int retry_backoff_ms = 200;
};

inline nlohmann::json generation_request_to_json(const GenerationRequest& r) {
  return {{"prompt", r.prompt},
          {"max_new_tokens", r.max_new_tokens},
          {"temperature", r.temperature},
          {"top_p", r.top_p},
          {"num_beams", r.num_beams},
          {"num_return", r.num_return},
          {"stop", r.stop_sequences}};
}

inline GenerationRequest generation_request_from_json(const nlohmann::json& j) {
  GenerationRequest r;
  r.prompt = j.at("prompt").get<std::string>();
  r.max_new_tokens = j.value("max_new_tokens", r.max_new_tokens);
  r.temperature = j.value("temperature", r.temperature);
  r.top_p = j.value("top_p", r.top_p);
  r.num_beams = j.value("num_beams", r.num_beams);
  r.num_return = j.value("num_return", r.num_return);
  if (j.contains("stop") && !j.at("stop").is_null()) r.stop_sequences = j.at("stop").get<std::vector<std::string>>();
  return r;
}

/// JSON-over-HTTP client for an external inference server exposing
/// POST /generate and POST /score. A fresh connection is used per call.
class HttpBackend final : public LmBackend {
 public:
  explicit HttpBackend(HttpBackendOptions options) : options_(std::move(options)) {
    const auto scheme = options_.base_url.find("://");
    const auto path_start = options_.base_url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (path_start == std::string::npos) {
      origin_ = options_.base_url;
    } else {
      origin_ = options_.base_url.substr(0, path_start);
      path_prefix_ = options_.base_url.substr(path_start);
      while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    }
    if (origin_.empty()) throw Error(Errc::invalid_request, "backend base URL is empty");
  }

  GenerationResult generate(const GenerationRequest& request) const override {
    validate(request);
    const auto body = post("/generate", generation_request_to_json(request).dump());
    GenerationResult out;
    try {
      for (const auto& t : body.at("texts")) out.texts.push_back(strip_prompt_echo(request.prompt, t.get<std::string>()));
      if (body.contains("logprobs") && body.at("logprobs").is_array())
        out.logprobs = body.at("logprobs").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::backend_unavailable, "malformed /generate response: " + std::string(e.what()));
    }
    const auto limit = static_cast<std::size_t>(request.num_return);
    if (out.texts.size() > limit) out.texts.resize(limit);
    if (out.logprobs.size() > out.texts.size()) out.logprobs.resize(out.texts.size());
    return out;
  }

  SequenceScore score(std::string_view prefix, std::string_view continuation) const override {
    validate_score_args(prefix, continuation);
    const nlohmann::json req = {{"prefix", prefix}, {"continuation", continuation}};
    const auto body = post("/score", req.dump());
    SequenceScore s;
    try {
      s.total_logprob = body.at("total_logprob").get<double>();
      s.num_tokens = body.at("num_tokens").get<int>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::backend_unavailable, "malformed /score response: " + std::string(e.what()));
    }
    validate(s);
    return s;
  }

  std::string identifier() const override { return "http:" + options_.base_url; }

  const HttpBackendOptions& options() const { return options_; }

 private:
  nlohmann::json post(const std::string& endpoint, const std::string& payload) const {
    const std::string path = path_prefix_ + endpoint;
    std::string last_error;
    for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
      if (attempt > 0 && options_.retry_backoff_ms > 0)
        std::this_thread::sleep_for(std::chrono::milliseconds(options_.retry_backoff_ms * attempt));

      httplib::Client client(origin_);
      client.set_connection_timeout(std::chrono::milliseconds(options_.connect_timeout_ms));
      client.set_read_timeout(std::chrono::milliseconds(options_.read_timeout_ms));
      auto res = client.Post(path, payload, "application/json");
      if (!res) {
        last_error = "POST " + origin_ + path + ": " + httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 500) {
        last_error = "POST " + origin_ + path + ": HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status >= 400) {
        throw Error(Errc::invalid_request,
                    "POST " + origin_ + path + ": HTTP " + std::to_string(res->status) + " " + res->body);
      }
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::backend_unavailable, "POST " + origin_ + path + ": response is not JSON");
      }
    }
    throw Error(Errc::backend_unavailable,
                last_error + " (after " + std::to_string(options_.max_retries + 1) + " attempt(s))");
  }

  HttpBackendOptions options_;
  std::string origin_;
  std::string path_prefix_;
};

}  // namespace intentbridge
