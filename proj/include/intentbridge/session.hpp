#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "intentbridge/error.hpp"
#include "intentbridge/text.hpp"

namespace intentbridge {

struct SessionTurn {
  std::size_t index = 0;
  std::string timestamp;
  std::string system;
  std::string utterance;
  nlohmann::json result;  // serialized RecommendationSet
  std::optional<std::string> accepted_app;
};

struct SessionRecord {
  std::string id;
  std::vector<SessionTurn> turns;
};

enum class FeedbackOutcome { recorded, already_recorded };

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Append-only JSON Lines log of sessions. All writes go through one mutex,
/// so a single instance may be shared by concurrent request handlers. An
/// empty path keeps the log in memory only.
class SessionLog {
 public:
  explicit SessionLog(std::string path = {}) : path_(std::move(path)), rng_(std::random_device{}()) {
    if (path_.empty()) return;
    std::ifstream in(path_);
    if (!in) return;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (text::trim(line).empty()) continue;
      try {
        replay_line(nlohmann::json::parse(line));
      } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::parse_error, path_ + ": " + e.what(), lineno);
      }
    }
  }

  std::string new_session() {
    std::lock_guard lock(mu_);
    std::string id;
    do {
      char buf[17];
      std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng_()));
      id = buf;
    } while (sessions_.count(id));
    sessions_[id].id = id;
    return id;
  }

  bool has_session(const std::string& id) const {
    std::lock_guard lock(mu_);
    return sessions_.count(id) != 0;
  }

  /// Returns the new turn's index.
  std::size_t append_turn(const std::string& session_id, const std::string& system, const std::string& utterance,
                          const nlohmann::json& result) {
    std::lock_guard lock(mu_);
    auto& s = find_locked(session_id);
    SessionTurn turn{s.turns.size(), utc_timestamp(), system, utterance, result, std::nullopt};
    write_locked({{"type", "turn"},
                  {"session_id", session_id},
                  {"turn", turn.index},
                  {"timestamp", turn.timestamp},
                  {"system", system},
                  {"utterance", utterance},
                  {"result", result}});
    s.turns.push_back(std::move(turn));
    return s.turns.back().index;
  }

  /// Marks `app` as accepted for a turn. Repeating the same acceptance is a
  /// no-op; accepting a different app for the same turn is rejected.
  FeedbackOutcome record_feedback(const std::string& session_id, std::size_t turn, const std::string& app) {
    std::lock_guard lock(mu_);
    auto& s = find_locked(session_id);
    if (turn >= s.turns.size()) throw Error(Errc::unknown_utterance_id, "session " + session_id + " has no turn " + std::to_string(turn));
    auto& t = s.turns[turn];
    bool offered = false;
    if (t.result.contains("recommendations")) {
      for (const auto& r : t.result["recommendations"]) offered = offered || r.value("app", "") == app;
    }
    if (!offered) throw Error(Errc::invalid_request, "app '" + app + "' was not recommended in this turn");
    if (t.accepted_app) {
      if (*t.accepted_app == app) return FeedbackOutcome::already_recorded;
      throw Error(Errc::invalid_request, "turn already has accepted app '" + *t.accepted_app + "'");
    }
    write_locked({{"type", "feedback"},
                  {"session_id", session_id},
                  {"turn", turn},
                  {"timestamp", utc_timestamp()},
                  {"app", app}});
    t.accepted_app = app;
    return FeedbackOutcome::recorded;
  }

  std::optional<SessionRecord> session(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) return std::nullopt;
    return it->second;
  }

  std::vector<SessionRecord> sessions() const {
    std::lock_guard lock(mu_);
    std::vector<SessionRecord> out;
    for (const auto& [id, s] : sessions_) out.push_back(s);
    return out;
  }

  const std::string& path() const { return path_; }

 private:
  SessionRecord& find_locked(const std::string& id) {
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(Errc::unknown_utterance_id, "unknown session '" + id + "'");
    return it->second;
  }

  void write_locked(const nlohmann::json& record) {
    if (path_.empty()) return;
    std::ofstream out(path_, std::ios::app);
    if (!out) throw Error(Errc::io_error, "cannot append to session log " + path_);
    out << record.dump() << '\n';
    out.flush();
    if (!out) throw Error(Errc::io_error, "write to session log " + path_ + " failed");
  }

  void replay_line(const nlohmann::json& j) {
    const auto type = j.at("type").get<std::string>();
    const auto id = j.at("session_id").get<std::string>();
    auto& s = sessions_[id];
    s.id = id;
    if (type == "turn") {
      s.turns.push_back({j.at("turn").get<std::size_t>(), j.value("timestamp", ""), j.value("system", ""),
                         j.at("utterance").get<std::string>(), j.at("result"), std::nullopt});
    } else if (type == "feedback") {
      const auto turn = j.at("turn").get<std::size_t>();
      if (turn < s.turns.size()) s.turns[turn].accepted_app = j.at("app").get<std::string>();
    }
  }

  std::string path_;
  mutable std::mutex mu_;
  std::map<std::string, SessionRecord> sessions_;
  std::mt19937_64 rng_;
};

/// Re-runs every logged turn through `rerun(system, utterance)` and returns
/// the indices of turns whose serialized result differs from the log.
inline std::vector<std::size_t> replay_session(
    const SessionRecord& session, const std::function<nlohmann::json(const std::string&, const std::string&)>& rerun) {
  std::vector<std::size_t> mismatches;
  for (const auto& t : session.turns) {
    if (rerun(t.system, t.utterance).dump() != t.result.dump()) mismatches.push_back(t.index);
  }
  return mismatches;
}

}  // namespace intentbridge
