#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <utility>

#include <httplib.h>
#include <json.hpp>

#include "intentbridge/app_catalog.hpp"
#include "intentbridge/config.hpp"
#include "intentbridge/error.hpp"
#include "intentbridge/intent_generator.hpp"
#include "intentbridge/pipeline.hpp"
#include "intentbridge/recommender.hpp"
#include "intentbridge/session.hpp"

namespace intentbridge {

struct ServiceResponse {
  int status = 200;
  nlohmann::json body;
};

/// HTTP surface over the pipeline:
///   POST /v1/recommend  {utterance, overrides?, session_id?}   (?trace=1 adds the trace)
///   POST /v1/intents    {utterance, overrides?}
///   POST /v1/feedback   {session_id, turn, app}
///   GET  /v1/health, GET /v1/config
/// Handlers are const and keep per-request state on the stack.
class Service {
 public:
  Service(PipelineConfig config, Backends backends, AppCatalog catalog, std::shared_ptr<SessionLog> sessions = nullptr)
      : config_(std::move(config)),
        backends_(std::move(backends)),
        catalog_(std::move(catalog)),
        sessions_(std::move(sessions)) {}

  ServiceResponse recommend(std::string_view body, bool trace) const {
    return guarded([&] {
      const auto req = parse_object(body);
      const Utterance utterance(require_utterance(req));
      const auto cfg = with_overrides(req);

      std::string session_id;
      if (sessions_) {
        if (req.contains("session_id")) {
          if (!req["session_id"].is_string()) throw Error(Errc::invalid_request, "session_id must be a string");
          session_id = req["session_id"].get<std::string>();
          if (!sessions_->has_session(session_id))
            return ServiceResponse{404, error_body("unknown session '" + session_id + "'")};
        } else {
          session_id = sessions_->new_session();
        }
      }

      const auto result = run_system(cfg.system, utterance, backends_, catalog_, cfg);

      nlohmann::json recs = nlohmann::json::array();
      nlohmann::json rationales = nlohmann::json::array();
      for (const auto& r : result.recommendations) {
        recs.push_back(to_json(r));
        rationales.push_back(r.rationale);
      }
      nlohmann::json failures = nlohmann::json::array();
      for (const auto& f : result.failures) failures.push_back(to_json(f));

      nlohmann::json out = {{"utterance", utterance.text()},
                            {"system", to_string(cfg.system)},
                            {"recommendations", recs},
                            {"rationales", rationales},
                            {"failures", failures}};
      if (trace) out["trace"] = trace_to_json(result);
      if (sessions_) {
        out["session_id"] = session_id;
        out["turn"] = sessions_->append_turn(session_id, std::string(to_string(cfg.system)), utterance.text(),
                                             to_json(result));
      }
      return ServiceResponse{200, out};
    });
  }

  ServiceResponse intents(std::string_view body) const {
    return guarded([&] {
      const auto req = parse_object(body);
      const Utterance utterance(require_utterance(req));
      const auto cfg = with_overrides(req);
      auto ic = cfg.stage1;
      ic.threads = cfg.threads;
      const auto set = generate_intents(utterance, cfg.relation_list(), require_backend(backends_.intent, "intent"), ic);
      nlohmann::json rels = nlohmann::json::array();
      for (const auto& [rel, list] : set.intents) {
        nlohmann::json texts = nlohmann::json::array();
        for (const auto& g : list) texts.push_back(g.text);
        rels.push_back({{"relation", rel.tag},
                        {"kind", to_string(rel.kind)},
                        {"comet_input", build_comet_input(utterance, rel)},
                        {"intents", texts}});
      }
      return ServiceResponse{200, {{"utterance", utterance.text()}, {"k_keep", ic.k_keep}, {"relations", rels}}};
    });
  }

  ServiceResponse feedback(std::string_view body) const {
    return guarded([&] {
      if (!sessions_) return ServiceResponse{404, error_body("session logging is disabled")};
      const auto req = parse_object(body);
      if (!req.contains("session_id") || !req["session_id"].is_string() || !req.contains("turn") ||
          !req["turn"].is_number_unsigned() || !req.contains("app") || !req["app"].is_string())
        throw Error(Errc::invalid_request, "feedback needs session_id (string), turn (unsigned) and app (string)");
      const auto id = req["session_id"].get<std::string>();
      const auto turn = req["turn"].get<std::size_t>();
      const auto app = req["app"].get<std::string>();
      if (!sessions_->has_session(id)) return ServiceResponse{404, error_body("unknown session '" + id + "'")};
      const auto outcome = sessions_->record_feedback(id, turn, app);
      return ServiceResponse{200,
                             {{"session_id", id},
                              {"turn", turn},
                              {"accepted_app", app},
                              {"status", outcome == FeedbackOutcome::recorded ? "recorded" : "already_recorded"}}};
    });
  }

  ServiceResponse health() const {
    return {200, {{"status", "ok"}, {"backends", backends_.identifiers()}, {"catalog_size", catalog_.size()}}};
  }

  ServiceResponse config() const {
    return {200, {{"config", config_.to_json()}, {"config_hash", config_.hash()}}};
  }

  void mount(httplib::Server& server) const {
    auto reply = [](httplib::Response& res, const ServiceResponse& r) {
      res.status = r.status;
      res.set_header("Access-Control-Allow-Origin", "*");
      res.set_content(r.body.dump(), "application/json");
    };
    server.Post("/v1/recommend", [this, reply](const httplib::Request& req, httplib::Response& res) {
      const bool trace = req.has_param("trace") && req.get_param_value("trace") != "0";
      reply(res, recommend(req.body, trace));
    });
    server.Post("/v1/intents", [this, reply](const httplib::Request& req, httplib::Response& res) {
      reply(res, intents(req.body));
    });
    server.Post("/v1/feedback", [this, reply](const httplib::Request& req, httplib::Response& res) {
      reply(res, feedback(req.body));
    });
    server.Get("/v1/health", [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, health()); });
    server.Get("/v1/config", [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, config()); });
    server.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Origin", "*");
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });
  }

  const PipelineConfig& pipeline_config() const { return config_; }

 private:
  static nlohmann::json error_body(const std::string& message) { return {{"error", message}}; }

  static nlohmann::json parse_object(std::string_view body) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception&) {
      throw Error(Errc::invalid_request, "request body is not valid JSON");
    }
    if (!j.is_object()) throw Error(Errc::invalid_request, "request body must be a JSON object");
    return j;
  }

  static std::string require_utterance(const nlohmann::json& req) {
    if (!req.contains("utterance") || !req["utterance"].is_string())
      throw Error(Errc::invalid_request, "field 'utterance' must be a string");
    return req["utterance"].get<std::string>();
  }

  /// Only k_keep, relations and system may be overridden per request.
  PipelineConfig with_overrides(const nlohmann::json& req) const {
    PipelineConfig cfg = config_;
    if (!req.contains("overrides")) return cfg;
    const auto& o = req["overrides"];
    if (!o.is_object()) throw Error(Errc::invalid_request, "overrides must be an object");
    for (const auto& [k, v] : o.items()) {
      if (k == "k_keep") {
        if (!v.is_number_integer()) throw Error(Errc::invalid_request, "overrides.k_keep must be an integer");
        cfg.stage1.k_keep = v.get<int>();
      } else if (k == "relations") {
        if (!v.is_array()) throw Error(Errc::invalid_request, "overrides.relations must be an array of tags");
        cfg.relations.clear();
        for (const auto& t : v) {
          if (!t.is_string()) throw Error(Errc::invalid_request, "overrides.relations must be an array of tags");
          cfg.relations.push_back(t.get<std::string>());
        }
      } else if (k == "system") {
        if (!v.is_string()) throw Error(Errc::invalid_request, "overrides.system must be a string");
        cfg.system = system_kind_from_string(v.get<std::string>());
      } else {
        throw Error(Errc::invalid_request, "override '" + k + "' is not allowed (k_keep, relations, system)");
      }
    }
    try {
      cfg.validate();
    } catch (const Error& e) {
      throw Error(Errc::invalid_request, e.detail());
    }
    return cfg;
  }

  template <typename Fn>
  static ServiceResponse guarded(Fn&& fn) {
    try {
      return fn();
    } catch (const PipelineError& e) {
      nlohmann::json causes = nlohmann::json::array();
      for (const auto& c : e.causes()) causes.push_back(to_json(c));
      return {502, {{"error", "backend failure"}, {"causes", causes}}};
    } catch (const Error& e) {
      switch (e.code()) {
        case Errc::invalid_request:
        case Errc::unsupported_relation:
          return {400, error_body(e.what())};
        case Errc::unknown_utterance_id:
          return {404, error_body(e.what())};
        case Errc::backend_unavailable:
        case Errc::fixture_miss:
          return {502, {{"error", "backend failure"}, {"causes", {{{"relation", nullptr}, {"code", to_string(e.code())}, {"message", e.what()}}}}}};
        default:
          return {500, error_body(e.what())};
      }
    } catch (const std::exception& e) {
      return {500, error_body(e.what())};
    }
  }

  PipelineConfig config_;
  Backends backends_;
  AppCatalog catalog_;
  std::shared_ptr<SessionLog> sessions_;
};

}  // namespace intentbridge
