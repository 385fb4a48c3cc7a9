#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "intentbridge/error.hpp"
#include "intentbridge/text.hpp"

namespace intentbridge {

inline constexpr std::string_view kUnknownCategory = "Unknown";

/// App name -> store category. Names are matched case-insensitively with
/// whitespace normalized.
class AppCatalog {
 public:
  AppCatalog() = default;

  void add(std::string_view app, std::string_view category) {
    auto key = text::fold_key(app);
    auto cat = text::normalize_whitespace(category);
    if (key.empty()) throw Error(Errc::invalid_request, "catalog app name is empty");
    if (cat.empty()) throw Error(Errc::invalid_request, "catalog category is empty for '" + std::string(app) + "'");
    entries_[std::move(key)] = std::move(cat);
  }

  std::string category_of(std::string_view app) const {
    auto it = entries_.find(text::fold_key(app));
    return it == entries_.end() ? std::string(kUnknownCategory) : it->second;
  }

  bool contains(std::string_view app) const { return entries_.count(text::fold_key(app)) != 0; }
  std::size_t size() const { return entries_.size(); }

  static AppCatalog from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(Errc::parse_error, "catalog JSON must be an object {app: category}");
    AppCatalog c;
    for (const auto& [app, cat] : j.items()) {
      if (!cat.is_string()) throw Error(Errc::parse_error, "category for '" + app + "' must be a string");
      c.add(app, cat.get<std::string>());
    }
    return c;
  }

  /// Two tab-separated columns: app name, category. Blank lines and lines
  /// starting with '#' are ignored.
  static AppCatalog from_tsv(std::istream& in) {
    AppCatalog c;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (text::trim(line).empty() || line.front() == '#') continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos) throw Error(Errc::parse_error, "expected two tab-separated columns", lineno);
      try {
        c.add(line.substr(0, tab), line.substr(tab + 1));
      } catch (const Error& e) {
        throw Error(Errc::parse_error, e.detail(), lineno);
      }
    }
    return c;
  }

  /// Format is chosen by extension: ".tsv" is TSV, anything else JSON.
  static AppCatalog load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_error, "cannot open catalog file " + path);
    if (text::ends_with(text::to_lower(path), ".tsv")) return from_tsv(in);
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::parse_error, path + ": " + e.what());
    }
  }

 private:
  std::map<std::string, std::string> entries_;
};

inline std::string map_category(std::string_view app, const AppCatalog& catalog) {
  if (text::trim(app).empty()) throw Error(Errc::invalid_request, "app name must be non-empty");
  return catalog.category_of(app);
}

/// De-duplicated category set; unmapped apps contribute "Unknown".
inline std::set<std::string> categorize(const std::vector<std::string>& apps, const AppCatalog& catalog) {
  std::set<std::string> out;
  for (const auto& a : apps) out.insert(map_category(a, catalog));
  return out;
}

}  // namespace intentbridge
