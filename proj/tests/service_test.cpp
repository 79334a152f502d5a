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

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <gtest/gtest.h>

#include "intentloop/service.hpp"

namespace intentloop {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

/// Error-free arms plus "dupdog", which duplicates every unpinned instance.
Presets test_presets() {
  Presets p = Presets::zero();
  ErrorModelConfig dup;
  dup.p_dup = 1.0;
  p.generators["dupdog"] = dup;
  p.max_iterations = 3;
  return p;
}

fs::path fresh_dir(const std::string& name) {
  static std::atomic<int> counter{0};
  auto dir = fs::temp_directory_path() /
             ("intentloop_" + name + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fresh_dir("service");
    fs::create_directories(root_ / "web");
    std::ofstream(root_ / "web" / "index.html") << "<!doctype html><title>intentloop</title>\n";
    start();
  }

  void TearDown() override {
    stop();
    fs::remove_all(root_);
  }

  void start() {
    service_ = std::make_unique<SessionService>(test_presets(), root_ / "sessions", 5);
    server_ = std::make_unique<httplib::Server>();
    install_routes(*server_, *service_, (root_ / "web").string());
    port_ = server_->bind_to_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }

  void stop() {
    client_.reset();
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
    server_.reset();
    service_.reset();
  }

  httplib::Result post(const std::string& path, const json& body) {
    return client_->Post(path, body.is_null() ? std::string() : body.dump(), "application/json");
  }

  json create(const std::string& prompt, const std::string& preset = "refined", std::optional<int> seed = 11) {
    json body{{"prompt", prompt}, {"preset", preset}};
    if (seed) body["seed"] = *seed;
    auto res = post("/api/sessions", body);
    EXPECT_TRUE(res);
    EXPECT_EQ(res->status, 201) << res->body;
    return json::parse(res->body);
  }

  fs::path root_;
  std::unique_ptr<SessionService> service_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::unique_ptr<httplib::Client> client_;
  int port_ = 0;
};

TEST_F(ServiceTest, CreateGetRenderTraceDelete) {
  const auto s = create("two red apples");
  const std::string id = s["session_id"];
  EXPECT_EQ(id.size(), 32u);
  EXPECT_EQ(s["status"], "satisfied");
  EXPECT_EQ(s["canonical_prompt"], "two red apples");
  EXPECT_EQ(s["k"], 0);
  EXPECT_EQ(s["seed"], 11);
  EXPECT_EQ(s["preset"], "refined");

  auto got = client_->Get("/api/sessions/" + id);
  ASSERT_TRUE(got);
  EXPECT_EQ(got->status, 200);
  EXPECT_EQ(json::parse(got->body), s);

  auto svg = client_->Get("/api/sessions/" + id + "/iterations/0/render.svg");
  ASSERT_TRUE(svg);
  EXPECT_EQ(svg->status, 200);
  EXPECT_EQ(svg->get_header_value("Content-Type"), "image/svg+xml");
  EXPECT_NE(svg->body.find("apple#1"), std::string::npos);
  EXPECT_EQ(client_->Get("/api/sessions/" + id + "/iterations/1/render.svg")->status, 404);

  auto trace = client_->Get("/api/sessions/" + id + "/trace");
  ASSERT_TRUE(trace);
  const auto t = json::parse(trace->body);
  EXPECT_EQ(t["schema"], "trace_v1");
  EXPECT_EQ(t["iterations"].size(), 1u);
  EXPECT_NO_THROW(t.get<SessionTrace>());

  EXPECT_TRUE(fs::exists(root_ / "sessions" / (id + ".json")));
  EXPECT_EQ(client_->Delete("/api/sessions/" + id)->status, 204);
  EXPECT_FALSE(fs::exists(root_ / "sessions" / (id + ".json")));
  auto gone = client_->Get("/api/sessions/" + id);
  EXPECT_EQ(gone->status, 404);
  EXPECT_EQ(json::parse(gone->body)["code"], "NotFound");
}

TEST_F(ServiceTest, ParseErrorsAreBadRequests) {
  auto res = post("/api/sessions", {{"prompt", "a dog and"}});
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  const auto body = json::parse(res->body);
  EXPECT_EQ(body["code"], "GrammarError");
  EXPECT_TRUE(body["detail"].contains("position"));

  res = post("/api/sessions", {{"prompt", "a purple dog"}});
  EXPECT_EQ(json::parse(res->body)["code"], "UnknownAttribute");
  EXPECT_EQ(json::parse(res->body)["detail"]["position"], 1);

  EXPECT_EQ(post("/api/sessions", {{"nothing", 1}})->status, 400);
  EXPECT_EQ(client_->Post("/api/sessions", "{not json", "application/json")->status, 400);
  EXPECT_EQ(post("/api/sessions", {{"prompt", "a dog"}, {"preset", "nope"}})->status, 404);
}

TEST_F(ServiceTest, AcceptingTheNumeracyItemRemovesTheDuplicate) {
  const auto s = create("a dog", "dupdog");
  const std::string id = s["session_id"];
  EXPECT_EQ(s["status"], "active");
  const auto& items = s["report"]["items"];
  ASSERT_EQ(items.size(), 1u);
  EXPECT_EQ(items[0]["kind"], "numeracy");
  EXPECT_EQ(items[0]["observed"], "2");

  auto res = post("/api/sessions/" + id + "/iterate", {{"accepted_item_ids", {items[0]["item_id"]}}});
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200) << res->body;
  const auto next = json::parse(res->body);
  EXPECT_EQ(next["k"], 1);
  EXPECT_EQ(next["status"], "satisfied");
  const auto& updates = next["trace"]["iterations"][1]["updates"];
  ASSERT_FALSE(updates.empty());
  for (const auto& u : updates) EXPECT_EQ(u["origin"], "human");

  res = post("/api/sessions/" + id + "/iterate", json(nullptr));
  EXPECT_EQ(res->status, 409);
  EXPECT_EQ(json::parse(res->body)["code"], "Conflict");
}

TEST_F(ServiceTest, UnknownItemIsRejected) {
  const std::string id = create("a dog", "dupdog")["session_id"];
  auto res = post("/api/sessions/" + id + "/iterate", {{"accepted_item_ids", {"item-9"}}});
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(json::parse(res->body)["code"], "InvalidTarget");
  EXPECT_EQ(json::parse(client_->Get("/api/sessions/" + id)->body)["k"], 0);
}

TEST_F(ServiceTest, EmptyBodyRerollsUntilBudgetRunsOut) {
  const std::string id = create("a dog", "dupdog")["session_id"];
  json last;
  for (int k = 1; k <= 3; ++k) {
    auto res = post("/api/sessions/" + id + "/iterate", json(nullptr));
    ASSERT_EQ(res->status, 200) << res->body;
    last = json::parse(res->body);
    EXPECT_EQ(last["k"], k);
  }
  EXPECT_EQ(last["status"], "budget_exhausted");
  EXPECT_EQ(last["trace"]["iterations"].size(), 4u);
  EXPECT_EQ(post("/api/sessions/" + id + "/iterate", json(nullptr))->status, 409);
}

TEST_F(ServiceTest, PromptEditAndManualUpdates) {
  const std::string id = create("a dog", "dupdog")["session_id"];
  json body{{"prompt_edit", "a brown dog"},
            {"manual_updates", {{{"type", "LayoutPin"}, {"instance_id", "dog#0"}}}}};
  auto res = post("/api/sessions/" + id + "/iterate", body);
  ASSERT_EQ(res->status, 200) << res->body;
  const auto next = json::parse(res->body);
  EXPECT_EQ(next["canonical_prompt"], "a brown dog");
  EXPECT_EQ(next["status"], "satisfied");

  const std::string other = create("a dog", "dupdog")["session_id"];
  res = post("/api/sessions/" + other + "/iterate", {{"manual_updates", {{{"type", "Bogus"}}}}});
  EXPECT_EQ(res->status, 400);
}

TEST_F(ServiceTest, StoreReloadReproducesSessions) {
  const auto a = create("a girl and a dog");
  const std::string id = create("a dog", "dupdog")["session_id"];
  const auto b = json::parse(post("/api/sessions/" + id + "/iterate", json(nullptr))->body);
  stop();
  start();
  EXPECT_EQ(json::parse(client_->Get("/api/sessions/" + std::string(a["session_id"]))->body), a);
  EXPECT_EQ(json::parse(client_->Get("/api/sessions/" + id)->body), b);
  auto res = post("/api/sessions/" + id + "/iterate", json(nullptr));
  EXPECT_EQ(json::parse(res->body)["k"], 2);
}

TEST_F(ServiceTest, SameSeedSameSession) {
  auto strip = [](json j) {
    j.erase("session_id");
    j.erase("created_at");
    return j;
  };
  EXPECT_EQ(strip(create("three cats left_of a dog", "dupdog", 3)), strip(create("three cats left_of a dog", "dupdog", 3)));
}

TEST_F(ServiceTest, ConcurrentCreates) {
  std::vector<std::thread> threads;
  std::vector<std::string> ids(100);
  std::atomic<int> failures{0};
  for (int i = 0; i < 100; ++i)
    threads.emplace_back([&, i] {
      httplib::Client c("127.0.0.1", port_);
      auto res = c.Post("/api/sessions", json{{"prompt", "a cat and a dog"}}.dump(), "application/json");
      if (!res || res->status != 201) {
        ++failures;
        std::cerr << (res ? std::to_string(res->status) + " " + res->body : httplib::to_string(res.error())) << "\n";
        return;
      }
      ids[i] = json::parse(res->body)["session_id"];
    });
  for (auto& t : threads) t.join();
  EXPECT_EQ(failures.load(), 0);
  EXPECT_EQ(std::set<std::string>(ids.begin(), ids.end()).size(), 100u);
  EXPECT_EQ(service_->list().size(), 100u);
  EXPECT_EQ(service_->store().list().size(), 100u);
}

TEST_F(ServiceTest, PresetsAndStaticFiles) {
  auto res = client_->Get("/api/presets");
  ASSERT_TRUE(res);
  const auto body = json::parse(res->body);
  EXPECT_EQ(body["presets"], (json{"conditioned", "dupdog", "refined", "unconditioned"}));
  EXPECT_EQ(body["max_iterations"], 3);

  res = client_->Get("/");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_NE(res->body.find("intentloop"), std::string::npos);

  res = client_->Get("/api/unknown");
  EXPECT_EQ(res->status, 404);
  EXPECT_EQ(json::parse(res->body)["code"], "NotFound");
  EXPECT_EQ(client_->Get("/api/sessions/not-an-id")->status, 404);
}

TEST(SessionStore, IgnoresForeignFiles) {
  const auto dir = fresh_dir("store");
  SessionStore store(dir);
  std::ofstream(dir / "notes.txt") << "x";
  EXPECT_TRUE(store.list().empty());
  EXPECT_FALSE(store.load("0123").has_value());
  fs::remove_all(dir);
}

TEST(HttpStatus, Mapping) {
  EXPECT_EQ(http_status(ErrorCode::NotFound), 404);
  EXPECT_EQ(http_status(ErrorCode::Conflict), 409);
  EXPECT_EQ(http_status(ErrorCode::GrammarError), 400);
  EXPECT_EQ(http_status(ErrorCode::InvalidUpdate), 400);
}

}  // namespace
}  // namespace intentloop
