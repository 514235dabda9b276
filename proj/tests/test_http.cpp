#include <gtest/gtest.h>

#include <httplib.h>

#include <thread>

#include "designbridge/gateway.hpp"
#include "support.hpp"

using namespace dbt;

namespace {

/// Gateway plus HTTP server on an ephemeral loopback port.
class LiveServer {
 public:
  explicit LiveServer(GatewayConfig config) : gateway_(std::move(config)), server_(gateway_) {
    port_ = server_.bind_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    for (int i = 0; i < 200; ++i) {
      if (auto r = client_->Get("/health"); r && r->status == 200) break;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  }
  ~LiveServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Client& client() { return *client_; }
  int port() const { return port_; }

 private:
  Gateway gateway_;
  HttpServer server_;
  int port_ = -1;
  std::thread thread_;
  std::unique_ptr<httplib::Client> client_;
};

struct Reply {
  int status = 0;
  nlohmann::json body;
};

Reply send(httplib::Client& c, const std::string& method, const std::string& path,
           const nlohmann::json& body = nlohmann::json::object()) {
  httplib::Result r = method == "GET"     ? c.Get(path)
                      : method == "PATCH" ? c.Patch(path, body.dump(), "application/json")
                                          : c.Post(path, body.dump(), "application/json");
  if (!r) return {};
  return {r->status, r->body.empty() ? nlohmann::json() : nlohmann::json::parse(r->body, nullptr, false)};
}

}  // namespace

TEST(Http, ScriptedHappyPathIsAll2xx) {
  GatewayConfig config;
  config.training = TrainingConfig{20};
  LiveServer s(config);
  ASSERT_GT(s.port(), 0);
  auto& c = s.client();
  auto ok = [&](const std::string& method, const std::string& path, const nlohmann::json& body = nlohmann::json::object()) {
    auto r = send(c, method, path, body);
    EXPECT_GE(r.status, 200) << method << " " << path << " " << r.body.dump();
    EXPECT_LT(r.status, 300) << method << " " << path << " " << r.body.dump();
    return r.body;
  };

  EXPECT_EQ(ok("GET", "/design-space")["dimensions"].size(), 9u);
  const auto pid = ok("POST", "/projects", {{"name", "http"}, {"seed", 9}, {"max_rounds", 2}})["project_id"].get<std::string>();
  ok("POST", "/projects/" + pid + "/framing",
     {{"type", "Coat"}, {"scene", "frozen winter"}, {"principle", ""}, {"strictness", 0.8}});
  const auto lib = ok("POST", "/projects/" + pid + "/library/generate", {{"n", 24}, {"seed", 2}});
  ASSERT_EQ(lib["items"].size(), 24u);
  ok("PATCH", "/projects/" + pid + "/library", {{"ops", {{{"op", "remove"}, {"item_id", lib["items"][5]["item_id"]}}}}});
  EXPECT_EQ(ok("GET", "/projects/" + pid + "/library")["items"].size(), 23u);

  const auto opened = ok("POST", "/projects/" + pid + "/sessions", {{"user_id", "alice"}, {"gender", "F"},
                                                                   {"height_cm", 168}, {"weight_kg", 58}});
  const auto sid = opened["session_id"].get<std::string>();
  auto round = ok("GET", "/sessions/" + sid + "/round")["round"];
  const auto first = round["items"][0];
  const auto attr = DesignSpace::key({kCollarShape, first["design_vector"][kCollarShape].get<int>()});
  const nlohmann::json region = {{"x_min", 230}, {"y_min", 0}, {"x_max", 538}, {"y_max", 154},
                                 {"image_w", 768}, {"image_h", 768}};
  EXPECT_FALSE(ok("POST", "/sessions/" + sid + "/hypothesis", {{"item_id", first["item_id"]}, {"region", region}})
                   ["hypothesis"]
                       .empty());
  ok("POST", "/sessions/" + sid + "/interactions",
     {{"kind", "Brush"}, {"item_id", first["item_id"]}, {"polarity", "Like"}, {"region", region},
      {"confirmed_dimensions", {"Collar Shape"}}, {"comment", "clean line"}});
  ok("POST", "/sessions/" + sid + "/tryon", {{"item_id", first["item_id"]}});
  while (!round.is_null()) {
    nlohmann::json next;
    for (const auto& item : round["items"]) {
      const auto r = ok("POST", "/sessions/" + sid + "/votes", {{"item_id", item["item_id"]}, {"polarity", "Like"}});
      if (r.value("round_complete", false)) next = r.value("next_round", nlohmann::json());
    }
    round = next;
  }
  EXPECT_TRUE(ok("GET", "/sessions/" + sid + "/round")["session_closed"].get<bool>());

  EXPECT_EQ(ok("GET", "/projects/" + pid + "/consensus")["n"], 1);
  EXPECT_EQ(ok("GET", "/projects/" + pid + "/palette")["columns"].size(), 9u);
  const auto tree = ok("GET", "/projects/" + pid + "/tree/" + attr);
  EXPECT_EQ(ok("POST", "/projects/" + pid + "/manifest/" + attr)["status"], "ok");
  ok("POST", "/projects/" + pid + "/tree/" + attr + "/prune",
     {{"target", {{"kind", "garment"}, {"id", first["item_id"]}}}});
  ok("POST", "/projects/" + pid + "/tree/" + attr + "/prune",
     {{"target", {{"kind", "garment"}, {"id", first["item_id"]}}}, {"undo", true}});
  const auto informed = ok("POST", "/projects/" + pid + "/informed",
                           {{"selection", {{"Type", "Coat"}, {"Sleeve Length", "Long"}, {"Collar Shape", "Lapel"},
                                           {"Wearing Style", "Zipper"}, {"Pattern Style", "Grid"},
                                           {"Pattern Arrangement", "Repeat"}, {"Material", "Woolen"},
                                           {"Color Category", "Dual-tone"}, {"Specific Colors", "Gray"}}},
                            {"detail", {{"Collar Shape", "wide notched lapel"}}},
                            {"n", 1}});
  const auto new_id = informed["items"][0]["item"]["item_id"].get<std::string>();
  EXPECT_FALSE(informed["items"][0]["attribution"].is_null());
  ok("GET", "/projects/" + pid + "/items/" + new_id + "/attribution");
  ok("POST", "/projects/" + pid + "/items/" + new_id + "/save");
  EXPECT_EQ(ok("GET", "/projects/" + pid)["library_size"], 24);
  EXPECT_EQ(ok("GET", "/projects/" + pid + "/state-hash")["state_hash"].get<std::string>().size(), 64u);

  const auto blob = first["image_ref"].get<std::string>();
  auto png = c.Get("/blobs/" + blob);
  ASSERT_TRUE(png);
  EXPECT_EQ(png->status, 200);
  EXPECT_EQ(png->body.substr(1, 3), "PNG");
}

TEST(Http, ErrorsUseTheStructuredBody) {
  LiveServer s(GatewayConfig{});
  auto& c = s.client();
  const auto r = send(c, "GET", "/projects/proj-4242/library");
  EXPECT_EQ(r.status, 404);
  EXPECT_EQ(r.body["code"], "UNKNOWN_PROJECT");
  EXPECT_TRUE(r.body.contains("message"));
  EXPECT_TRUE(r.body["details"].is_object());

  const auto bad = c.Post("/projects", "{oops", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  EXPECT_EQ(send(c, "GET", "/nowhere").body["code"], "NOT_FOUND");

  const auto pid = send(c, "POST", "/projects", {{"name", "x"}}).body["project_id"].get<std::string>();
  send(c, "POST", "/projects/" + pid + "/library/generate", {{"n", 3}});
  const auto stale = send(c, "PATCH", "/projects/" + pid + "/library",
                          {{"op", "remove"}, {"item_id", "item-000001"}, {"expected_offset", 1}});
  EXPECT_EQ(stale.status, 409);
  EXPECT_EQ(stale.body["code"], "STALE_SNAPSHOT");
}

TEST(Http, BearerTokenIsEnforced) {
  GatewayConfig config;
  config.token = "s3cret";
  LiveServer s(config);
  auto& c = s.client();
  EXPECT_EQ(send(c, "GET", "/health").status, 200);
  const auto denied = send(c, "GET", "/projects");
  EXPECT_EQ(denied.status, 401);
  EXPECT_EQ(denied.body["code"], "UNAUTHORIZED");
  c.set_bearer_token_auth("s3cret");
  EXPECT_EQ(send(c, "GET", "/projects").status, 200);
}
