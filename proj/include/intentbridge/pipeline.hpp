#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "intentbridge/app_catalog.hpp"
#include "intentbridge/baselines.hpp"
#include "intentbridge/config.hpp"
#include "intentbridge/error.hpp"
#include "intentbridge/evaluator.hpp"
#include "intentbridge/http_backend.hpp"
#include "intentbridge/lm_backend.hpp"
#include "intentbridge/parallel.hpp"
#include "intentbridge/recommender.hpp"

namespace intentbridge {

/// Backend per role. Roles may share one instance.
struct Backends {
  std::shared_ptr<const LmBackend> intent;
  std::shared_ptr<const LmBackend> app;
  std::shared_ptr<const LmBackend> scorer;

  static Backends shared(std::shared_ptr<const LmBackend> b) { return {b, b, b}; }

  nlohmann::json identifiers() const {
    auto id = [](const std::shared_ptr<const LmBackend>& b) { return b ? b->identifier() : std::string("none"); };
    return {{"intent", id(intent)}, {"app", id(app)}, {"scorer", id(scorer)}};
  }
};

/// Fixture file -> one shared mock. Otherwise one HTTP client per role, each
/// falling back to backend.url.
inline Backends make_backends(const PipelineConfig& config) {
  const auto& b = config.backend;
  if (!b.fixtures.empty()) return Backends::shared(std::make_shared<MockBackend>(FixtureTable::load(b.fixtures), "mock:" + b.fixtures));

  auto http = [&](const std::string& specific) -> std::shared_ptr<const LmBackend> {
    const auto& url = specific.empty() ? b.url : specific;
    if (url.empty()) return nullptr;
    HttpBackendOptions o;
    o.base_url = url;
    o.connect_timeout_ms = b.connect_timeout_ms;
    o.read_timeout_ms = b.read_timeout_ms;
    o.max_retries = b.max_retries;
    return std::make_shared<HttpBackend>(o);
  };
  Backends out{http(b.intent_url), http(b.app_url), http(b.score_url)};
  if (!out.intent && !out.app && !out.scorer)
    throw Error(Errc::invalid_request, "no backend configured: set backend.fixtures or backend.url (INTENTBRIDGE_BACKEND_URL)");
  return out;
}

inline const LmBackend& require_backend(const std::shared_ptr<const LmBackend>& b, const char* role) {
  if (!b) throw Error(Errc::invalid_request, std::string("no backend configured for role '") + role + "'");
  return *b;
}

/// Runs the selected system on one utterance.
inline RecommendationSet run_system(SystemKind kind, const Utterance& utterance, const Backends& backends,
                                    const AppCatalog& catalog, const PipelineConfig& config) {
  const auto rc = config.recommend_config();
  switch (kind) {
    case SystemKind::one_stage:
      return recommend_one_stage(utterance, require_backend(backends.app, "app"), catalog, rc);
    case SystemKind::two_stage_nl:
      return recommend_two_stage_nl(utterance, config.relation_list(), require_backend(backends.intent, "intent"),
                                    require_backend(backends.app, "app"), catalog, rc);
    case SystemKind::proposed:
      break;
  }
  return recommend(utterance, config.relation_list(), require_backend(backends.intent, "intent"),
                   require_backend(backends.app, "app"), catalog, rc);
}

struct EvaluationRun {
  EvalReport micro;
  EvalReport macro;
  std::vector<RecommendationSet> results;  // empty slot when a run failed entirely
  std::vector<std::pair<std::string, std::string>> failures;  // (example id, message)
};

/// Runs `kind` over every example (examples in parallel, up to
/// config.threads) and scores predicted categories against gold. A run
/// that fails entirely counts as an empty prediction.
inline EvaluationRun run_evaluation(const std::vector<DatasetExample>& dataset, SystemKind kind,
                                    const Backends& backends, const AppCatalog& catalog, PipelineConfig config) {
  if (dataset.empty()) throw Error(Errc::invalid_request, "dataset is empty");
  const std::size_t outer = config.threads;
  config.threads = 1;

  struct Outcome {
    std::optional<RecommendationSet> set;
    std::string error;
  };
  auto outcomes = parallel_map(dataset.size(), outer, [&](std::size_t i) {
    try {
      return Outcome{run_system(kind, dataset[i].utterance, backends, catalog, config), {}};
    } catch (const Error& e) {
      return Outcome{std::nullopt, e.what()};
    }
  });

  CategorySets predicted, gold;
  EvaluationRun run;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& ex = dataset[i];
    gold[ex.id] = ex.gold_categories();
    auto& cats = predicted[ex.id];
    if (outcomes[i].set) {
      for (const auto& r : outcomes[i].set->recommendations) cats.insert(r.category);
      run.results.push_back(std::move(*outcomes[i].set));
    } else {
      run.failures.emplace_back(ex.id, outcomes[i].error);
    }
  }
  run.micro = evaluate(predicted, gold, AverageMode::micro);
  run.macro = evaluate(predicted, gold, AverageMode::macro);
  return run;
}

/// Report document: both averaging blocks, per-example rows and run
/// metadata.
inline nlohmann::json evaluation_report_json(const EvaluationRun& run, SystemKind kind, const PipelineConfig& config,
                                             const Backends& backends) {
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& [id, msg] : run.failures) failures.push_back({{"id", id}, {"error", msg}});
  const auto& headline = config.eval_mode == AverageMode::micro ? run.micro : run.macro;
  return {{"metadata",
           {{"system", to_string(kind)},
            {"config_hash", config.hash()},
            {"backends", backends.identifiers()},
            {"examples", run.micro.per_example.size()},
            {"failed_runs", run.failures.size()}}},
          {"mode", to_string(config.eval_mode)},
          {"precision", headline.precision},
          {"recall", headline.recall},
          {"f1", headline.f1},
          {"micro", to_json(run.micro, false)},
          {"macro", to_json(run.macro, false)},
          {"per_example", to_json(run.micro, true)["per_example"]},
          {"failures", failures}};
}

}  // namespace intentbridge
