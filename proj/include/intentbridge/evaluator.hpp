#pragma once

#include <algorithm>
#include <cstddef>
#include <istream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "intentbridge/error.hpp"
#include "intentbridge/intent_generator.hpp"
#include "intentbridge/text.hpp"

namespace intentbridge {

struct GoldApp {
  std::string name;
  std::string category;
};

struct DatasetExample {
  std::string id;
  Utterance utterance;
  std::vector<GoldApp> gold_apps;

  std::set<std::string> gold_categories() const {
    std::set<std::string> out;
    for (const auto& g : gold_apps) out.insert(g.category);
    return out;
  }
};

enum class AverageMode { micro, macro };

inline std::string_view to_string(AverageMode m) { return m == AverageMode::micro ? "micro" : "macro"; }

inline AverageMode average_mode_from_string(std::string_view s) {
  if (s == "micro") return AverageMode::micro;
  if (s == "macro") return AverageMode::macro;
  throw Error(Errc::invalid_request, "unknown averaging mode '" + std::string(s) + "'");
}

using CategorySets = std::map<std::string, std::set<std::string>>;

struct ExampleScore {
  std::string id;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::set<std::string> predicted;
  std::set<std::string> gold;
};

struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  AverageMode mode = AverageMode::micro;
  std::vector<ExampleScore> per_example;
};

inline double harmonic_f1(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

/// Category-level precision/recall/F1. Gold ids without a prediction count
/// as empty predictions; an empty prediction has precision 0.
inline EvalReport evaluate(const CategorySets& predictions, const CategorySets& gold,
                           AverageMode mode = AverageMode::micro) {
  if (gold.empty()) throw Error(Errc::invalid_request, "gold set has no examples");
  for (const auto& [id, cats] : predictions) {
    if (!gold.count(id)) throw Error(Errc::unknown_utterance_id, "prediction for unknown utterance id '" + id + "'");
  }

  EvalReport report;
  report.mode = mode;
  std::size_t hits = 0, predicted_total = 0, gold_total = 0;
  double sum_p = 0.0, sum_r = 0.0, sum_f = 0.0;
  static const std::set<std::string> kEmpty;

  for (const auto& [id, gold_cats] : gold) {
    if (gold_cats.empty()) throw Error(Errc::empty_gold, "utterance '" + id + "' has no gold categories");
    const auto it = predictions.find(id);
    const auto& pred = it == predictions.end() ? kEmpty : it->second;

    std::size_t inter = 0;
    for (const auto& c : pred) inter += gold_cats.count(c);

    ExampleScore ex{id, 0.0, 0.0, 0.0, pred, gold_cats};
    ex.precision = pred.empty() ? 0.0 : static_cast<double>(inter) / static_cast<double>(pred.size());
    ex.recall = static_cast<double>(inter) / static_cast<double>(gold_cats.size());
    ex.f1 = harmonic_f1(ex.precision, ex.recall);

    hits += inter;
    predicted_total += pred.size();
    gold_total += gold_cats.size();
    sum_p += ex.precision;
    sum_r += ex.recall;
    sum_f += ex.f1;
    report.per_example.push_back(std::move(ex));
  }

  if (mode == AverageMode::micro) {
    report.precision = predicted_total ? static_cast<double>(hits) / static_cast<double>(predicted_total) : 0.0;
    report.recall = static_cast<double>(hits) / static_cast<double>(gold_total);
    report.f1 = harmonic_f1(report.precision, report.recall);
  } else {
    const auto n = static_cast<double>(report.per_example.size());
    report.precision = sum_p / n;
    report.recall = sum_r / n;
    report.f1 = sum_f / n;
  }
  return report;
}

/// JSON Lines: {"utterance": str, "gold_apps": [{"name", "category"}], "id"?}.
/// Without an explicit id the 1-based line number is used.
inline std::vector<DatasetExample> load_dataset(std::istream& in) {
  std::vector<DatasetExample> out;
  std::set<std::string> ids;
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
    if (!j.is_object() || !j.contains("utterance") || !j["utterance"].is_string())
      throw Error(Errc::parse_error, "field 'utterance' must be a string", lineno);
    if (!j.contains("gold_apps") || !j["gold_apps"].is_array())
      throw Error(Errc::parse_error, "field 'gold_apps' must be an array", lineno);

    std::string id = std::to_string(lineno);
    if (j.contains("id")) {
      if (j["id"].is_string()) id = j["id"].get<std::string>();
      else if (j["id"].is_number_integer()) id = std::to_string(j["id"].get<long long>());
      else throw Error(Errc::parse_error, "field 'id' must be a string or integer", lineno);
    }
    if (!ids.insert(id).second) throw Error(Errc::parse_error, "duplicate id '" + id + "'", lineno);

    std::vector<GoldApp> gold;
    for (const auto& g : j["gold_apps"]) {
      if (!g.is_object() || !g.contains("name") || !g["name"].is_string() || !g.contains("category") ||
          !g["category"].is_string())
        throw Error(Errc::parse_error, "gold app needs string fields 'name' and 'category'", lineno);
      GoldApp app{text::normalize_whitespace(g["name"].get<std::string>()),
                  text::normalize_whitespace(g["category"].get<std::string>())};
      if (app.category.empty()) throw Error(Errc::parse_error, "gold app category is empty", lineno);
      gold.push_back(std::move(app));
    }
    if (gold.empty()) throw Error(Errc::empty_gold, "gold_apps is empty", lineno);

    try {
      out.push_back({id, Utterance(j["utterance"].get<std::string>(), id), std::move(gold)});
    } catch (const Error& e) {
      throw Error(Errc::parse_error, e.detail(), lineno);
    }
  }
  return out;
}

inline nlohmann::json to_json(const EvalReport& r, bool include_examples = true) {
  nlohmann::json j = {{"mode", to_string(r.mode)}, {"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1}};
  if (include_examples) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& e : r.per_example) {
      rows.push_back({{"id", e.id},
                      {"precision", e.precision},
                      {"recall", e.recall},
                      {"f1", e.f1},
                      {"predicted", e.predicted},
                      {"gold", e.gold}});
    }
    j["per_example"] = rows;
  }
  return j;
}

}  // namespace intentbridge
