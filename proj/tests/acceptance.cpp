// Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and exits
// non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "intentbridge/intentbridge.hpp"
#include "support/metric_oracle.hpp"
#include "support/sample_fixtures.hpp"
#include "support/test_server.hpp"

namespace ib = intentbridge;

namespace {

struct Outcome {
  enum class Status { pass, fail, skip } status = Status::pass;
  std::string detail;
};

Outcome pass(std::string d = {}) { return {Outcome::Status::pass, std::move(d)}; }
Outcome fail(std::string d) { return {Outcome::Status::fail, std::move(d)}; }
Outcome skip(std::string d) { return {Outcome::Status::skip, std::move(d)}; }

struct Criterion {
  std::string name;
  double budget_seconds;  // <= 0 means no runtime bound
  std::function<Outcome()> run;
};

// -- 1. metric oracle ------------------------------------------------------

Outcome metric_oracle_equivalence() {
  static const std::vector<std::string> pool = {"Communication", "Finance", "Shopping", "Productivity",
                                                "Entertainment", "Tools"};
  std::mt19937 rng(20230601);
  std::uniform_int_distribution<int> n_examples(1, 10), n_pred(0, 6), n_gold(1, 6);
  std::uniform_int_distribution<std::size_t> cat(0, pool.size() - 1);

  for (int instance = 0; instance < 200; ++instance) {
    std::vector<ib::testing::OracleExample> xs(static_cast<std::size_t>(n_examples(rng)));
    ib::CategorySets pred, gold;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      for (int k = n_pred(rng); k > 0; --k) xs[i].predicted.push_back(pool[cat(rng)]);
      for (int k = n_gold(rng); k > 0; --k) xs[i].gold.push_back(pool[cat(rng)]);
      const auto id = "u" + std::to_string(i);
      pred[id] = {xs[i].predicted.begin(), xs[i].predicted.end()};
      gold[id] = {xs[i].gold.begin(), xs[i].gold.end()};
    }
    const auto micro = ib::evaluate(pred, gold, ib::AverageMode::micro);
    const auto macro = ib::evaluate(pred, gold, ib::AverageMode::macro);
    const auto om = ib::testing::oracle_micro(xs);
    const auto oM = ib::testing::oracle_macro(xs);
    if (micro.precision != om.precision || micro.recall != om.recall || micro.f1 != om.f1 ||
        macro.precision != oM.precision || macro.recall != oM.recall || macro.f1 != oM.f1) {
      return fail("instance " + std::to_string(instance) + " differs from the oracle");
    }
  }
  return pass("200 instances, micro and macro exact");
}

// -- 2. golden prompts -----------------------------------------------------

Outcome golden_prompts() {
  std::vector<std::pair<std::string, std::string>> checks = {
      {ib::build_comet_input(ib::Utterance("We want to celebrate a birthday at a restaurant."),
                             ib::relation_from_tag("xNeed")),
       "<s> We want to celebrate a birthday at a restaurant. xNeed [GEN] </s>"},
      {ib::build_recommendation_prompt(ib::relation_from_tag("xNeed"),
                                       {"to go to the restaurant", "make the reservation"}),
       "The user needs to go to the restaurant and make the reservation by using a popular app called"},
      {ib::one_stage_prompt(ib::Utterance("I want to relax")), "I want to relax, so I can use some popular apps called"},
      {ib::nl_intent_prompt(ib::Utterance("I am looking for a job."), ib::relation_from_tag("xIntent")),
       "I am looking for a job, so I intend"},
      {ib::nl_intent_prompt(ib::Utterance("I am late."), ib::relation_from_tag("isAfter")),
       "I am late. Before, the user needs to"},
  };
  for (const auto& [got, want] : checks) {
    if (got != want) return fail("got \"" + got + "\", want \"" + want + "\"");
  }
  const auto one_stage = ib::one_stage_prompt(ib::Utterance("I want to relax"));
  if (!ib::text::ends_with(one_stage, "so I can use some popular apps called")) return fail("one-stage suffix");
  return pass(std::to_string(checks.size()) + " strings byte-exact");
}

// -- 3. trigger-score selection --------------------------------------------

Outcome trigger_selection() {
  const std::vector<ib::TriggerCorpusEntry> corpus = {
      {"plan a trip to Tokyo", {"book a flight", "reserve a hotel room"}, 1},
      {"throw a birthday party", {"order a cake"}, 2},
      {"I am moving to a new city", {"rent a truck for the weekend"}, 3},
  };
  // Continuation token counts per (i, j) pair, in corpus order.
  const std::vector<int> tokens = {2, 4, 1, 5};
  // Total log-probs per relation for the same four pairs.
  const std::vector<std::pair<std::string, std::vector<double>>> table = {
      {"xIntent", {-2.0, -4.0, -1.0, -5.0}},      // means -1, -1, -1, -1
      {"xNeed", {-1.0, -2.0, -0.5, -2.5}},        // -0.5 each
      {"xWant", {-1.0, -4.0, -0.75, -5.0}},       // -0.5, -1, -0.75, -1
      {"isAfter", {-3.0, -2.0, -1.0, -2.5}},      // -1.5, -0.5, -1, -0.5
      {"isBefore", {-2.0, -4.0, -1.25, -5.0}},    // -1, -1, -1.25, -1
      {"oEffect", {-4.0, -8.0, -3.0, -10.0}},     // -2, -2, -3, -2
      {"xAttr", {-6.0, -6.0, -2.0, -15.0}},       // -3, -1.5, -2, -3
      {"HasSubEvent", {-3.0, -6.0, -1.5, -7.5}},  // -1.5 each
  };
  // Hand sums of the means above.
  const std::map<std::string, double> expected_mean = {
      {"xIntent", -4.0}, {"xNeed", -2.0},  {"xWant", -3.25}, {"isAfter", -3.5},
      {"isBefore", -4.25}, {"oEffect", -9.0}, {"xAttr", -9.5}, {"HasSubEvent", -6.0},
  };
  // exp(-1) + exp(-2) + exp(-0.5) + exp(-2.5), and the HasSubEvent analogue.
  const std::map<std::string, double> expected_prob = {
      {"xNeed", 1.191830382744587},
      {"HasSubEvent", 0.27594906506310796},
  };

  ib::FixtureTable fixtures;
  for (const auto& [tag, totals] : table) {
    std::size_t k = 0;
    for (const auto& e : corpus) {
      for (const auto& s : e.task_sentences) {
        fixtures.add_score(ib::build_comet_input(ib::Utterance(e.description), ib::relation_from_tag(tag)), s,
                           {totals[k], tokens[k]});
        ++k;
      }
    }
  }
  const ib::MockBackend scorer(fixtures);

  std::vector<ib::TriggerScore> scores;
  std::ostringstream detail;
  for (const auto& [tag, totals] : table) {
    const auto s = ib::trigger_score(ib::relation_from_tag(tag), corpus, scorer, ib::Aggregation::sum_mean_logprob, 4);
    if (std::abs(s.value - expected_mean.at(tag)) > 1e-9 || s.pair_count != 4)
      return fail(tag + ": T(r)=" + std::to_string(s.value) + " pairs=" + std::to_string(s.pair_count));
    scores.push_back(s);
  }
  for (const auto& [tag, want] : expected_prob) {
    const auto s = ib::trigger_score(ib::relation_from_tag(tag), corpus, scorer, ib::Aggregation::sum_prob);
    if (std::abs(s.value - want) > 1e-9) return fail(tag + " (sum_prob): " + std::to_string(s.value));
  }

  const std::vector<std::string> want = {"xNeed", "xWant", "isAfter", "xIntent", "isBefore"};
  const auto top = ib::select_top_relations(scores, 5);
  std::vector<std::string> got;
  for (const auto& r : top) got.push_back(r.tag);
  if (got != want) return fail("selection " + ib::text::join(got, ","));
  return pass("8 relations x 4 pairs within 1e-9; top five = " + ib::text::join(got, ","));
}

// -- 4. end-to-end determinism ---------------------------------------------

struct DeterminismWorld {
  std::vector<ib::Utterance> utterances;
  ib::FixtureTable fixtures;
  ib::AppCatalog catalog;
};

DeterminismWorld determinism_world(const ib::PipelineConfig& cfg) {
  static const std::vector<std::string> apps = {"WhatsApp", "OpenTable", "Amazon",  "Uber",     "Netflix",
                                                "Paypal",   "Mint",      "Shopee",  "Calendar", "Google Maps"};
  static const std::vector<std::string> cats = {"Communication", "Food & Drink",  "Shopping", "Maps & Navigation",
                                                "Entertainment", "Finance",       "Tools",    "Shopping",
                                                "Productivity",  "Maps & Navigation"};
  static const std::vector<std::string> topics = {
      "celebrate my friend's birthday at a restaurant", "get a new notebook",      "watch a movie tonight",
      "check if my friend sent the money",              "plan a trip to Tokyo",    "cook dinner for my parents",
      "move to a new apartment",                        "find a part-time job",    "learn to play guitar",
      "organize a team meeting",                        "go to the gym more often", "pay my phone bill",
      "prepare for a job interview",                    "visit my grandmother",    "buy a gift for my sister",
      "fix my bike",                                    "get to the airport early", "save money for a car",
      "host a board game night",                        "adopt a puppy"};

  DeterminismWorld w;
  for (std::size_t i = 0; i < apps.size(); ++i) w.catalog.add(apps[i], cats[i]);
  const auto rc = cfg.recommend_config();
  for (std::size_t u = 0; u < topics.size(); ++u) {
    w.utterances.emplace_back("I want to " + topics[u] + ".", "u" + std::to_string(u));
    std::size_t r = 0;
    for (const auto& rel : cfg.relation_list()) {
      const std::vector<std::string> beams = {"to step " + std::to_string(u) + "-" + std::to_string(r) + " one.",
                                              "to step " + std::to_string(u) + "-" + std::to_string(r) + " one",
                                              "to step " + std::to_string(u) + "-" + std::to_string(r) + " two",
                                              "[GEN]"};
      w.fixtures.add_generation(ib::build_comet_input(w.utterances.back(), rel), beams);
      const auto intents = ib::intents_from_beams(rel, beams, rc.intents.k_keep);
      std::vector<std::string> texts;
      for (const auto& g : intents) texts.push_back(g.text);
      const auto& a = apps[(u * 7 + r * 3) % apps.size()];
      const auto& b = apps[(u * 5 + r + 1) % apps.size()];
      const std::string continuation =
          (u + r) % 4 == 0 ? " NotInCatalog" : " " + a + (r % 2 ? ", " + b + " and " + a : "") + ". Try it.";
      w.fixtures.add_generation(ib::build_recommendation_prompt(rel, texts, rc.prompt), {continuation});
      ++r;
    }
  }
  return w;
}

Outcome end_to_end_determinism() {
  ib::PipelineConfig cfg;
  cfg.allow_multiple = true;
  const auto world = determinism_world(cfg);
  const ib::MockBackend backend(world.fixtures);

  auto run_all = [&](std::size_t threads) {
    auto c = cfg.recommend_config();
    c.threads = threads;
    std::string out;
    for (const auto& u : world.utterances) {
      out += ib::to_json(ib::recommend(u, cfg.relation_list(), backend, backend, world.catalog, c)).dump();
      out += '\n';
    }
    return out;
  };

  const auto reference = run_all(1);
  std::size_t recs = 0;
  for (const auto& u : world.utterances)
    recs += ib::recommend(u, cfg.relation_list(), backend, backend, world.catalog, cfg.recommend_config())
                .recommendations.size();
  for (int run = 0; run < 5; ++run) {
    if (run_all(1) != reference) return fail("serial run " + std::to_string(run) + " differs");
    if (run_all(8) != reference) return fail("8-thread run " + std::to_string(run) + " differs");
  }

  // Evaluation fan-out across examples is order-independent as well.
  std::vector<ib::DatasetExample> dataset;
  for (const auto& u : world.utterances) dataset.push_back({u.id(), u, {{"WhatsApp", "Communication"}}});
  const auto backends = ib::Backends::shared(std::make_shared<ib::MockBackend>(world.fixtures));
  auto cfg1 = cfg;
  cfg1.threads = 1;
  auto cfg8 = cfg;
  cfg8.threads = 8;
  const auto e1 = ib::to_json(ib::run_evaluation(dataset, ib::SystemKind::proposed, backends, world.catalog, cfg1).micro);
  const auto e8 = ib::to_json(ib::run_evaluation(dataset, ib::SystemKind::proposed, backends, world.catalog, cfg8).micro);
  if (e1.dump() != e8.dump()) return fail("evaluation differs between 1 and 8 threads");

  return pass("20 utterances, " + std::to_string(recs) + " recommendations, 5 runs x {1, 8} threads identical");
}

// -- 5. rationale fidelity -------------------------------------------------

Outcome rationale_fidelity() {
  const ib::MockBackend mock(ib::testing::birthday_fixtures());
  const auto set = ib::recommend(ib::Utterance(ib::testing::kBirthdayUtterance), {ib::relation_from_tag("xNeed")}, mock,
                                 mock, ib::testing::sample_catalog());
  if (set.recommendations.size() != 1) return fail("expected one recommendation");
  const auto& r = set.recommendations[0];
  if (r.app != "OpenTable" || r.category != "Food & Drink") return fail(r.app + " / " + r.category);
  if (r.rationale != ib::testing::kBirthdayRationale) return fail("rationale \"" + r.rationale + "\"");
  return pass("\"" + r.rationale + "\"");
}

// -- 6. service contract ---------------------------------------------------

std::string check_recommend_schema(const nlohmann::json& body) {
  for (const auto* key : {"utterance", "system", "recommendations", "rationales", "failures"}) {
    if (!body.contains(key)) return std::string("missing field ") + key;
  }
  if (!body["recommendations"].is_array() || body["recommendations"].empty()) return "recommendations empty";
  for (const auto& rec : body["recommendations"]) {
    if (!rec.is_object() || rec.size() != 5) return "recommendation object must have exactly 5 fields";
    if (!rec["app"].is_string() || rec["app"].get<std::string>().empty()) return "app";
    if (!rec["category"].is_string()) return "category";
    if (!rec["rationale"].is_string()) return "rationale";
    if (!(rec["relation"].is_string() || rec["relation"].is_null())) return "relation";
    if (!rec["supporting_intents"].is_array()) return "supporting_intents";
    for (const auto& s : rec["supporting_intents"])
      if (!s.is_string()) return "supporting_intents item";
    if (rec["rationale"].get<std::string>().find(rec["app"].get<std::string>()) == std::string::npos)
      return "rationale omits app";
  }
  if (body["rationales"].size() != body["recommendations"].size()) return "rationales length";
  return {};
}

Outcome service_contract() {
  ib::PipelineConfig cfg;
  cfg.relations = {"xNeed"};
  cfg.prompt.android_hint = false;
  const ib::Service ok_service(cfg, ib::Backends::shared(std::make_shared<ib::MockBackend>(ib::testing::birthday_fixtures())),
                               ib::testing::sample_catalog());

  ib::HttpBackendOptions dead{"http://127.0.0.1:1"};
  dead.max_retries = 0;
  dead.connect_timeout_ms = 200;
  const ib::Service down_service(ib::PipelineConfig{}, ib::Backends::shared(std::make_shared<ib::HttpBackend>(dead)),
                                 ib::testing::sample_catalog());

  ib::testing::TestServer ok_server([&](httplib::Server& s) { ok_service.mount(s); });
  ib::testing::TestServer down_server([&](httplib::Server& s) { down_service.mount(s); });

  httplib::Client ok(ok_server.url());
  const nlohmann::json req = {{"utterance", ib::testing::kBirthdayUtterance}};
  auto res = ok.Post("/v1/recommend", req.dump(), "application/json");
  if (!res || res->status != 200) return fail("valid request did not return 200");
  const auto body = nlohmann::json::parse(res->body);
  if (auto err = check_recommend_schema(body); !err.empty()) return fail("schema: " + err);

  for (const auto* bad : {R"({"utterance":""})", R"({"utterance":"  "})", R"({})", "garbage"}) {
    res = ok.Post("/v1/recommend", bad, "application/json");
    if (!res || res->status != 400) return fail(std::string("expected 400 for ") + bad);
  }

  httplib::Client down(down_server.url());
  res = down.Post("/v1/recommend", R"({"utterance":"I am late."})", "application/json");
  if (!res || res->status != 502) return fail("all-backend failure did not return 502");
  const auto failure = nlohmann::json::parse(res->body);
  const std::vector<std::string> relations = {"xIntent", "xNeed", "xWant", "isAfter", "isBefore"};
  if (!failure.contains("causes") || failure["causes"].size() != relations.size()) return fail("502 causes");
  for (std::size_t i = 0; i < relations.size(); ++i) {
    if (failure["causes"][i]["relation"] != relations[i]) return fail("502 cause order");
  }
  return pass("200 schema-valid, 4 invalid bodies -> 400, backend down -> 502 with 5 causes");
}

// -- 7. directional reproduction (optional) --------------------------------

Outcome directional_reproduction() {
  const char* url = std::getenv("INTENTBRIDGE_BACKEND_URL");
  const char* dataset_path = std::getenv("INTENTBRIDGE_TEST_SET");
  const char* catalog_path = std::getenv("INTENTBRIDGE_CATALOG");
  if (!url || !dataset_path || !catalog_path)
    return skip("needs INTENTBRIDGE_BACKEND_URL, INTENTBRIDGE_TEST_SET and INTENTBRIDGE_CATALOG (real models + test set)");

  ib::PipelineConfig cfg = ib::load_config("", ib::process_env());
  std::ifstream in(dataset_path);
  if (!in) return fail(std::string("cannot open ") + dataset_path);
  const auto dataset = ib::load_dataset(in);
  const auto catalog = ib::AppCatalog::load(catalog_path);
  const auto backends = ib::make_backends(cfg);

  auto one_cfg = cfg;
  one_cfg.allow_multiple = true;
  const auto proposed = ib::run_evaluation(dataset, ib::SystemKind::proposed, backends, catalog, cfg);
  const auto baseline = ib::run_evaluation(dataset, ib::SystemKind::one_stage, backends, catalog, one_cfg);
  std::ostringstream d;
  d << std::fixed << std::setprecision(1) << "proposed F1 " << 100 * proposed.micro.f1 << " vs one-stage F1 "
    << 100 * baseline.micro.f1;
  return proposed.micro.f1 > baseline.micro.f1 ? pass(d.str()) : fail(d.str());
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"Metric oracle equivalence", 1.0, metric_oracle_equivalence},
      {"Golden prompts", 1.0, golden_prompts},
      {"Trigger-score relation selection", 1.0, trigger_selection},
      {"End-to-end determinism", 5.0, end_to_end_determinism},
      {"Rationale fidelity", 0.0, rationale_fidelity},
      {"Service contract", 0.0, service_contract},
      {"Directional reproduction (optional)", 0.0, directional_reproduction},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& c = criteria[i];
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (o.status == Outcome::Status::pass && c.budget_seconds > 0 && secs >= c.budget_seconds) {
      o = fail("took " + std::to_string(secs) + " s, budget " + std::to_string(c.budget_seconds) + " s");
    }
    const char* tag = o.status == Outcome::Status::pass ? "PASS" : o.status == Outcome::Status::fail ? "FAIL" : "SKIP";
    if (o.status == Outcome::Status::fail) ++failures;
    std::cout << tag << "  [" << (i + 1) << "] " << c.name << "  (" << std::fixed << std::setprecision(3) << secs
              << " s)  " << o.detail << '\n';
  }
  std::cout << (failures ? "acceptance: FAILED" : "acceptance: OK") << '\n';
  return failures ? 1 : 0;
}
