// Copyright 2026 The intentloop Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "intentloop/presets.hpp"
#include "intentloop/refine.hpp"

namespace intentloop {

struct SessionRecord {
  std::string session_id;
  std::string created_at;  // ISO-8601 UTC
  std::string preset;
  SessionState state;
  SessionTrace trace;
  int max_iterations = 3;

  TraceStatus status() const { return trace.status; }
  bool terminal() const { return trace.status != TraceStatus::active; }
};

inline void to_json(nlohmann::json& j, const SessionRecord& r) {
  j = nlohmann::json{{"session_id", r.session_id},
                     {"created_at", r.created_at},
                     {"preset", r.preset},
                     {"seed", r.state.seed},
                     {"status", r.trace.status},
                     {"canonical_prompt", r.state.prompt},
                     {"k", r.state.k},
                     {"max_iterations", r.max_iterations},
                     {"report", r.state.report},
                     {"state", r.state},
                     {"trace", r.trace}};
}
inline void from_json(const nlohmann::json& j, SessionRecord& r) {
  r.session_id = j.at("session_id").get<std::string>();
  r.created_at = j.at("created_at").get<std::string>();
  r.preset = j.at("preset").get<std::string>();
  r.max_iterations = j.at("max_iterations").get<int>();
  r.state = j.at("state").get<SessionState>();
  r.trace = j.at("trace").get<SessionTrace>();
}

/// One JSON file per session under `root`, replaced atomically on write.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
  }

  const std::filesystem::path& root() const { return root_; }

  std::filesystem::path path_for(const std::string& id) const { return root_ / (id + ".json"); }

  void save(const SessionRecord& r) const {
    const auto final_path = path_for(r.session_id);
    auto tmp = final_path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw Error(ErrorCode::InvalidConfig, "cannot write " + tmp.string());
      out << nlohmann::json(r).dump();
      out.flush();
      if (!out) throw Error(ErrorCode::InvalidConfig, "short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, final_path);
  }

  std::optional<SessionRecord> load(const std::string& id) const {
    std::ifstream in(path_for(id), std::ios::binary);
    if (!in) return std::nullopt;
    return nlohmann::json::parse(in).get<SessionRecord>();
  }

  bool remove(const std::string& id) const { return std::filesystem::remove(path_for(id)); }

  /// Sorted session ids; leftover temporary files are ignored.
  std::vector<std::string> list() const {
    std::vector<std::string> ids;
    for (const auto& entry : std::filesystem::directory_iterator(root_)) {
      if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
      ids.push_back(entry.path().stem().string());
    }
    std::sort(ids.begin(), ids.end());
    return ids;
  }

 private:
  std::filesystem::path root_;
};

/// Body of POST /api/sessions/{id}/iterate.
struct IterateRequest {
  std::vector<std::string> accepted_item_ids;
  std::vector<UpdateSignal> manual_updates;
  std::optional<PromptEdit> prompt_edit;
};

/// prompt_edit is either replacement text or {prompt?, additions?}.
inline IterateRequest parse_iterate_request(const nlohmann::json& body) {
  IterateRequest req;
  if (body.is_null()) return req;
  if (!body.is_object()) throw Error(ErrorCode::InvalidUpdate, "iterate body must be a JSON object");
  try {
    if (body.contains("accepted_item_ids"))
      req.accepted_item_ids = body["accepted_item_ids"].get<std::vector<std::string>>();
    if (body.contains("manual_updates"))
      for (const auto& u : body["manual_updates"]) {
        auto s = u.get<UpdateSignal>();
        s.origin = UpdateOrigin::human;
        req.manual_updates.push_back(std::move(s));
      }
    if (body.contains("prompt_edit") && !body["prompt_edit"].is_null()) {
      const auto& p = body["prompt_edit"];
      PromptEdit edit;
      if (p.is_string()) {
        edit.prompt = p.get<std::string>();
      } else {
        if (p.contains("prompt") && !p["prompt"].is_null()) edit.prompt = p["prompt"].get<std::string>();
        if (p.contains("additions")) edit.additions = p["additions"].get<SpecAdditions>();
      }
      req.prompt_edit = std::move(edit);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidUpdate, std::string("malformed iterate body: ") + e.what());
  }
  return req;
}

/// Session lifecycle over a store. Mutations of one session are
/// serialized; reads share the lock.
class SessionService {
 public:
  SessionService(Presets presets, std::filesystem::path store_root, std::uint64_t seed = 0,
                 const Vocabulary& vocab = Vocabulary::builtin())
      : presets_(std::move(presets)), store_(std::move(store_root)), vocab_(vocab), seeds_(seed) {
    for (const auto& id : store_.list())
      if (auto r = store_.load(id)) sessions_[id] = std::make_shared<Slot>(std::move(*r));
  }

  const Presets& presets() const { return presets_; }
  const SessionStore& store() const { return store_; }

  RefinementConfig config_for(const std::string& preset) const {
    RefinementConfig cfg;
    cfg.generator = presets_.generator(preset);
    cfg.detector = presets_.detector(preset);
    cfg.max_iterations = presets_.max_iterations;
    cfg.knowledge = DefaultsTable::builtin();
    return cfg;
  }

  SessionRecord create(const std::string& prompt, const std::string& preset, std::optional<std::uint64_t> seed) {
    const RefinementConfig cfg = config_for(preset);
    SessionRecord r;
    r.preset = preset;
    r.max_iterations = cfg.max_iterations;
    r.created_at = now_iso8601();
    {
      std::lock_guard lock(mu_);
      if (!seed) seed = seeds_.next();
      do r.session_id = new_id();
      while (sessions_.count(r.session_id));
    }
    r.state = initial_state(prompt, cfg, *seed, vocab_);
    r.trace.prompt = prompt;
    r.trace.config_digest = config_digest(cfg);
    r.trace.iterations.push_back(make_record(r.state, {}));
    finish_trace(r.trace, r.state, r.state.k >= cfg.max_iterations);
    store_.save(r);
    std::lock_guard lock(mu_);
    sessions_[r.session_id] = std::make_shared<Slot>(r);
    return r;
  }

  SessionRecord get(const std::string& id) const {
    auto slot = find(id);
    std::shared_lock lock(slot->mu);
    return slot->record;
  }

  SessionRecord iterate(const std::string& id, const IterateRequest& req) {
    auto slot = find(id);
    std::unique_lock lock(slot->mu);
    SessionRecord& r = slot->record;
    if (r.terminal())
      throw Error(ErrorCode::Conflict, "session " + id + " is " + nlohmann::json(r.trace.status).get<std::string>());
    const RefinementConfig cfg = config_for(r.preset);
    std::vector<const FeedbackItem*> accepted;
    for (const auto& item_id : req.accepted_item_ids) {
      const auto* item = r.state.report.find(item_id);
      if (!item) throw Error(ErrorCode::InvalidTarget, "no feedback item " + item_id + " in the current report");
      accepted.push_back(item);
    }
    std::vector<UpdateSignal> updates;
    if (req.prompt_edit) updates.push_back({*req.prompt_edit, UpdateOrigin::human});
    updates.insert(updates.end(), req.manual_updates.begin(), req.manual_updates.end());
    for (auto& s : signals_for_items(accepted, cfg.policy, UpdateOrigin::human)) updates.push_back(std::move(s));
    SessionRecord next = r;
    next.state = iterate_once(r.state, cfg, updates, vocab_);
    next.trace.iterations.push_back(make_record(next.state, updates));
    finish_trace(next.trace, next.state, next.state.k >= cfg.max_iterations);
    store_.save(next);
    r = std::move(next);
    return r;
  }

  std::string render(const std::string& id, int k) const {
    auto slot = find(id);
    std::shared_lock lock(slot->mu);
    const auto& its = slot->record.trace.iterations;
    if (k < 0 || static_cast<std::size_t>(k) >= its.size())
      throw Error(ErrorCode::NotFound, "session " + id + " has no iteration " + std::to_string(k));
    return render_svg(its[static_cast<std::size_t>(k)].scene);
  }

  SessionTrace trace(const std::string& id) const { return get(id).trace; }

  void remove(const std::string& id) {
    auto slot = find(id);
    std::unique_lock lock(slot->mu);
    store_.remove(id);
    std::lock_guard g(mu_);
    sessions_.erase(id);
  }

  std::vector<std::string> list() const {
    std::lock_guard lock(mu_);
    std::vector<std::string> ids;
    for (const auto& [id, slot] : sessions_) ids.push_back(id);
    return ids;
  }

 private:
  struct Slot {
    explicit Slot(SessionRecord r) : record(std::move(r)) {}
    mutable std::shared_mutex mu;
    SessionRecord record;
  };

  std::shared_ptr<Slot> find(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::NotFound, "no session " + id);
    return it->second;
  }

  std::string new_id() {
    static thread_local std::random_device rd;
    std::uniform_int_distribution<std::uint64_t> dist;
    std::ostringstream out;
    char buf[17];
    for (int i = 0; i < 2; ++i) {
      const std::uint64_t v = (static_cast<std::uint64_t>(rd()) << 32) ^ rd() ^ dist(entropy_);
      std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
      out << buf;
    }
    return out.str();
  }

  static std::string now_iso8601() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

  Presets presets_;
  SessionStore store_;
  const Vocabulary& vocab_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
  Rng seeds_;
  std::mt19937_64 entropy_{std::random_device{}()};
};

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound: return 404;
    case ErrorCode::Conflict: return 409;
    default: return 400;
  }
}

/// Routes:
///   GET    /api/presets
///   POST   /api/sessions                               {prompt, preset?, seed?}
///   GET    /api/sessions/{id}
///   POST   /api/sessions/{id}/iterate                  {accepted_item_ids?, manual_updates?, prompt_edit?}
///   GET    /api/sessions/{id}/iterations/{k}/render.svg
///   GET    /api/sessions/{id}/trace
///   DELETE /api/sessions/{id}
/// plus static files from `static_dir` under "/". Errors are {code, message, detail?}.
inline void install_routes(httplib::Server& server, SessionService& service, const std::string& static_dir = {}) {
  using httplib::Request;
  using httplib::Response;
  auto send_json = [](Response& res, const nlohmann::json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };
  auto guarded = [send_json](auto handler) {
    return [handler, send_json](const Request& req, Response& res) {
      try {
        handler(req, res);
      } catch (const Error& e) {
        send_json(res, e.to_json(), http_status(e.code()));
      } catch (const nlohmann::json::exception& e) {
        send_json(res, Error(ErrorCode::InvalidUpdate, std::string("malformed JSON: ") + e.what()).to_json(), 400);
      }
    };
  };
  auto body_json = [](const Request& req) {
    return req.body.empty() ? nlohmann::json(nullptr) : nlohmann::json::parse(req.body);
  };
  const std::string id = "([0-9a-f]{32})";

  server.Get("/api/presets", guarded([&service, send_json](const Request&, Response& res) {
               nlohmann::json names = nlohmann::json::array();
               for (const auto& [name, cfg] : service.presets().generators) names.push_back(name);
               send_json(res, {{"presets", names}, {"max_iterations", service.presets().max_iterations}});
             }));

  server.Post("/api/sessions", guarded([&service, send_json, body_json](const Request& req, Response& res) {
                const auto body = body_json(req);
                if (!body.is_object() || !body.contains("prompt") || !body["prompt"].is_string())
                  throw Error(ErrorCode::InvalidUpdate, "body must be {prompt, preset?, seed?}");
                std::optional<std::uint64_t> seed;
                if (body.contains("seed") && !body["seed"].is_null()) seed = body["seed"].get<std::uint64_t>();
                const auto r = service.create(body["prompt"].get<std::string>(),
                                              body.value("preset", std::string("refined")), seed);
                send_json(res, r, 201);
              }));

  server.Get("/api/sessions/" + id, guarded([&service, send_json](const Request& req, Response& res) {
               send_json(res, service.get(req.matches[1]));
             }));

  server.Post("/api/sessions/" + id + "/iterate",
              guarded([&service, send_json, body_json](const Request& req, Response& res) {
                send_json(res, service.iterate(req.matches[1], parse_iterate_request(body_json(req))));
              }));

  server.Get("/api/sessions/" + id + "/iterations/([0-9]+)/render.svg",
             guarded([&service](const Request& req, Response& res) {
               const auto k = std::stoll(req.matches[2]);
               if (k > 1'000'000) throw Error(ErrorCode::NotFound, "no such iteration");
               res.set_content(service.render(req.matches[1], static_cast<int>(k)), "image/svg+xml");
             }));

  server.Get("/api/sessions/" + id + "/trace", guarded([&service, send_json](const Request& req, Response& res) {
               send_json(res, service.trace(req.matches[1]));
             }));

  server.Delete("/api/sessions/" + id, guarded([&service](const Request& req, Response& res) {
                  service.remove(req.matches[1]);
                  res.status = 204;
                }));

  // Unknown API paths answer in the JSON error shape rather than falling
  // through to static files.
  server.set_error_handler([send_json](const Request& req, Response& res) {
    if (res.status == 404 && req.path.rfind("/api/", 0) == 0 && res.body.empty())
      send_json(res, Error(ErrorCode::NotFound, "no route " + req.method + " " + req.path).to_json(), 404);
  });

  if (!static_dir.empty() && std::filesystem::is_directory(static_dir)) server.set_mount_point("/", static_dir);
}

}  // namespace intentloop
