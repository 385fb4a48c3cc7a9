// intentbridge command-line entry point.
//
//   intentbridge recommend --utterance "..." [--trace]
//   intentbridge evaluate --system proposed --dataset test.jsonl --catalog apps.json --out report.json
//   intentbridge select-relations --corpus corpus.jsonl --top 5 [--aggregation sum_prob]
//   intentbridge serve [--host 127.0.0.1] [--port 8080] [--session-log sessions.jsonl]
//
// Backends come from --fixtures (mock) or --backend-url / INTENTBRIDGE_BACKEND_URL.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "intentbridge/intentbridge.hpp"

namespace ib = intentbridge;

namespace {

struct CommonOptions {
  std::string config_path;
  std::string fixtures;
  std::string backend_url;
  std::string catalog;
  std::string system;
  std::string relations;
  int k_keep = 0;
  int threads = 0;
  std::vector<std::string> set;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "Configuration file (JSON); default $INTENTBRIDGE_CONFIG");
    app->add_option("--fixtures", fixtures, "Fixture file; answers every backend call from it");
    app->add_option("--backend-url", backend_url, "Base URL of the inference server");
    app->add_option("--catalog", catalog, "App catalog (.json object or two-column .tsv)");
    app->add_option("--system", system, "proposed | one-stage | two-stage-nl");
    app->add_option("--relations", relations, "Comma-separated relation tags");
    app->add_option("--k-keep", k_keep, "Intents kept per relation");
    app->add_option("--threads", threads, "Worker threads");
    app->add_option("--set", set, "Raw override key=value (dotted key, e.g. stage2.temperature=0.01)");
  }

  std::vector<std::pair<std::string, std::string>> overrides() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& kv : set) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ib::Error(ib::Errc::invalid_request, "--set expects key=value, got '" + kv + "'");
      out.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!fixtures.empty()) out.emplace_back("backend.fixtures", fixtures);
    if (!backend_url.empty()) out.emplace_back("backend.url", backend_url);
    if (!catalog.empty()) out.emplace_back("catalog", catalog);
    if (!system.empty()) out.emplace_back("system", system);
    if (!relations.empty()) out.emplace_back("relations", relations);
    if (k_keep > 0) out.emplace_back("stage1.k_keep", std::to_string(k_keep));
    if (threads > 0) out.emplace_back("threads", std::to_string(threads));
    return out;
  }

  ib::PipelineConfig load() const { return ib::load_config(config_path, ib::process_env(), overrides()); }
};

ib::AppCatalog load_catalog(const ib::PipelineConfig& cfg) {
  if (cfg.catalog.empty()) throw ib::Error(ib::Errc::invalid_request, "no app catalog configured (--catalog)");
  return ib::AppCatalog::load(cfg.catalog);
}

std::ifstream open_input(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw ib::Error(ib::Errc::io_error, std::string("cannot open ") + what + " file " + path);
  return in;
}

void write_output(const std::string& path, const nlohmann::json& doc) {
  if (path.empty() || path == "-") {
    std::cout << doc.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw ib::Error(ib::Errc::io_error, "cannot write " + path);
  out << doc.dump(2) << '\n';
}

std::string pct(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << 100.0 * v;
  return os.str();
}

int cmd_recommend(const CommonOptions& common, const std::string& utterance, bool trace) {
  const auto cfg = common.load();
  const auto backends = ib::make_backends(cfg);
  const auto catalog = load_catalog(cfg);
  const auto result = ib::run_system(cfg.system, ib::Utterance(utterance), backends, catalog, cfg);
  auto doc = ib::to_json(result);
  if (!trace) doc.erase("trace");
  std::cout << doc.dump(2) << '\n';
  return 0;
}

int cmd_evaluate(const CommonOptions& common, const std::string& dataset_path, const std::string& out_path,
                 const std::string& mode) {
  auto overrides = common.overrides();
  if (!mode.empty()) overrides.emplace_back("evaluation.mode", mode);
  const auto cfg = ib::load_config(common.config_path, ib::process_env(), overrides);
  const auto catalog = load_catalog(cfg);
  auto in = open_input(dataset_path, "dataset");
  const auto dataset = ib::load_dataset(in);
  const auto backends = ib::make_backends(cfg);

  const auto run = ib::run_evaluation(dataset, cfg.system, backends, catalog, cfg);
  write_output(out_path, ib::evaluation_report_json(run, cfg.system, cfg, backends));

  std::ostream& table = (out_path.empty() || out_path == "-") ? std::cerr : std::cout;
  table << "system: " << ib::to_string(cfg.system) << "  examples: " << dataset.size()
        << "  failed runs: " << run.failures.size() << '\n';
  table << std::left << std::setw(8) << "mode" << std::setw(11) << "precision" << std::setw(8) << "recall"
        << "f1\n";
  for (const auto* r : {&run.micro, &run.macro}) {
    table << std::left << std::setw(8) << ib::to_string(r->mode) << std::setw(11) << pct(r->precision)
          << std::setw(8) << pct(r->recall) << pct(r->f1) << '\n';
  }
  return 0;
}

int cmd_select_relations(const CommonOptions& common, const std::string& corpus_path, std::size_t top,
                         const std::string& aggregation, const std::string& candidates, const std::string& out_path) {
  const auto cfg = common.load();
  auto in = open_input(corpus_path, "corpus");
  const auto corpus = ib::load_trigger_corpus(in);
  const auto agg = ib::aggregation_from_string(aggregation);
  const auto backends = ib::make_backends(cfg);
  const auto& scorer = ib::require_backend(backends.scorer, "scorer");

  std::vector<ib::Relation> relations;
  if (candidates.empty()) {
    relations = ib::atomic2020_relations();
  } else {
    std::stringstream ss(candidates);
    for (std::string tag; std::getline(ss, tag, ',');) {
      tag = ib::text::trim(tag);
      if (!tag.empty()) relations.push_back(ib::relation_from_tag(tag));
    }
  }

  std::vector<ib::TriggerScore> scores;
  for (const auto& r : relations) scores.push_back(ib::trigger_score(r, corpus, scorer, agg, cfg.threads));
  const auto selected = ib::select_top_relations(scores, top);

  nlohmann::json table = nlohmann::json::array();
  for (const auto& s : scores) table.push_back(ib::to_json(s));
  nlohmann::json chosen = nlohmann::json::array();
  for (const auto& r : selected) chosen.push_back(r.tag);
  const nlohmann::json doc = {{"aggregation", ib::to_string(agg)},
                              {"corpus_entries", corpus.size()},
                              {"scores", table},
                              {"selected", chosen}};
  write_output(out_path, doc);
  return 0;
}

httplib::Server* g_server = nullptr;

void stop_server(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const CommonOptions& common, const std::string& host, int port, const std::string& session_log) {
  auto overrides = common.overrides();
  if (!host.empty()) overrides.emplace_back("service.host", host);
  if (port > 0) overrides.emplace_back("service.port", std::to_string(port));
  if (!session_log.empty()) overrides.emplace_back("service.session_log", session_log);
  const auto cfg = ib::load_config(common.config_path, ib::process_env(), overrides);

  auto sessions = std::make_shared<ib::SessionLog>(cfg.service.session_log);
  const ib::Service service(cfg, ib::make_backends(cfg), load_catalog(cfg), sessions);
  httplib::Server server;
  service.mount(server);
  g_server = &server;
  std::signal(SIGINT, stop_server);
  std::signal(SIGTERM, stop_server);
  std::cerr << "listening on " << cfg.service.host << ":" << cfg.service.port << '\n';
  if (!server.listen(cfg.service.host, cfg.service.port)) {
    std::cerr << "error: cannot listen on " << cfg.service.host << ":" << cfg.service.port << '\n';
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-shot task-oriented bot recommendation from high-level utterances"};
  app.require_subcommand(1);

  CommonOptions common;

  auto* recommend = app.add_subcommand("recommend", "Recommend apps for one utterance");
  std::string utterance;
  bool trace = false;
  common.attach(recommend);
  recommend->add_option("-u,--utterance,utterance", utterance, "High-level user utterance")->required();
  recommend->add_flag("--trace", trace, "Include per-relation intermediate artifacts");

  auto* evaluate = app.add_subcommand("evaluate", "Category-level precision/recall/F1 over a dataset");
  std::string dataset, out, mode;
  common.attach(evaluate);
  evaluate->add_option("--dataset", dataset, "Labeled dataset (JSON Lines)")->required();
  evaluate->add_option("--out", out, "Report path (default: stdout)");
  evaluate->add_option("--mode", mode, "Headline averaging: micro | macro");

  auto* select = app.add_subcommand("select-relations", "Rank commonsense relations by trigger score");
  std::string corpus, aggregation = "sum_mean_logprob", candidates, select_out;
  std::size_t top = 5;
  common.attach(select);
  select->add_option("--corpus", corpus, "Trigger corpus (JSON Lines)")->required();
  select->add_option("--top", top, "Number of relations to select");
  select->add_option("--aggregation", aggregation, "sum_mean_logprob | sum_prob");
  select->add_option("--candidates", candidates, "Comma-separated candidate tags (default: all 23)");
  select->add_option("--out", select_out, "Report path (default: stdout)");

  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  std::string host, session_log;
  int port = 0;
  common.attach(serve);
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port");
  serve->add_option("--session-log", session_log, "Append-only session log (JSON Lines)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*recommend) return cmd_recommend(common, utterance, trace);
    if (*evaluate) return cmd_evaluate(common, dataset, out, mode);
    if (*select) return cmd_select_relations(common, corpus, top, aggregation, candidates, select_out);
    if (*serve) return cmd_serve(common, host, port, session_log);
  } catch (const ib::PipelineError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
