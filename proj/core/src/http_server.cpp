#include <httplib.h>

#include "designbridge/error.hpp"
#include "designbridge/gateway.hpp"

namespace designbridge {

struct HttpServer::Impl {
  Gateway* gateway;
  httplib::Server server;
};

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e) { send_json(res, http_status(e.code()), e.to_json()); }

nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  auto doc = nlohmann::json::parse(req.body, nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::InvalidArgument, "request body is not valid JSON");
  return doc;
}

template <typename Fn>
httplib::Server::Handler wrap(Fn fn, int ok_status = 200) {
  return [fn, ok_status](const httplib::Request& req, httplib::Response& res) {
    try {
      send_json(res, ok_status, fn(req));
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const nlohmann::json::exception& e) {
      send_error(res, Error(ErrorCode::InvalidArgument, std::string("malformed request: ") + e.what()));
    } catch (const std::exception& e) {
      send_json(res, 500, {{"code", "INTERNAL"}, {"message", e.what()}, {"details", nlohmann::json::object()}});
    }
  };
}

}  // namespace

HttpServer::HttpServer(Gateway& gateway) : impl_(std::make_unique<Impl>()) {
  impl_->gateway = &gateway;
  auto& g = gateway;
  auto& s = impl_->server;

  s.set_pre_routing_handler([&g](const httplib::Request& req, httplib::Response& res) {
    const auto& token = g.config().token;
    if (!token || req.path == "/health") return httplib::Server::HandlerResponse::Unhandled;
    if (req.get_header_value("Authorization") != "Bearer " + *token) {
      send_error(res, Error(ErrorCode::Unauthorized, "missing or wrong bearer token"));
      return httplib::Server::HandlerResponse::Handled;
    }
    return httplib::Server::HandlerResponse::Unhandled;
  });

  s.Get("/health", wrap([](const httplib::Request&) { return nlohmann::json{{"status", "ok"}}; }));
  s.Get("/design-space", wrap([&g](const httplib::Request&) { return g.space().to_json(); }));

  s.Post("/projects", wrap([&g](const httplib::Request& r) { return g.create_project(parse_body(r)); }, 201));
  s.Get("/projects", wrap([&g](const httplib::Request&) { return g.list_projects(); }));
  s.Get(R"(/projects/([^/]+))", wrap([&g](const httplib::Request& r) { return g.project_summary(r.matches[1]); }));
  s.Post(R"(/projects/([^/]+)/framing)",
         wrap([&g](const httplib::Request& r) { return g.framing(r.matches[1], parse_body(r)); }));
  s.Post(R"(/projects/([^/]+)/library/generate)",
         wrap([&g](const httplib::Request& r) { return g.generate_library(r.matches[1], parse_body(r)); }));
  s.Patch(R"(/projects/([^/]+)/library)",
          wrap([&g](const httplib::Request& r) { return g.curate(r.matches[1], parse_body(r)); }));
  s.Get(R"(/projects/([^/]+)/library)", wrap([&g](const httplib::Request& r) { return g.library(r.matches[1]); }));
  s.Post(R"(/projects/([^/]+)/sessions)",
         wrap([&g](const httplib::Request& r) { return g.open_session(r.matches[1], parse_body(r)); }, 201));
  s.Get(R"(/projects/([^/]+)/consensus)", wrap([&g](const httplib::Request& r) { return g.consensus(r.matches[1]); }));
  s.Get(R"(/projects/([^/]+)/palette)", wrap([&g](const httplib::Request& r) { return g.palette(r.matches[1]); }));
  s.Get(R"(/projects/([^/]+)/tree/([^/]+))",
        wrap([&g](const httplib::Request& r) { return g.tree(r.matches[1], r.matches[2]); }));
  s.Post(R"(/projects/([^/]+)/tree/([^/]+)/prune)",
         wrap([&g](const httplib::Request& r) { return g.prune(r.matches[1], r.matches[2], parse_body(r)); }));
  s.Post(R"(/projects/([^/]+)/manifest/([^/]+))", wrap([&g](const httplib::Request& r) {
           return g.export_manifest(r.matches[1], r.matches[2], parse_body(r));
         }));
  s.Post(R"(/projects/([^/]+)/informed)",
         wrap([&g](const httplib::Request& r) { return g.informed(r.matches[1], parse_body(r)); }));
  s.Post(R"(/projects/([^/]+)/items/([^/]+)/save)",
         wrap([&g](const httplib::Request& r) { return g.save_item(r.matches[1], r.matches[2], parse_body(r)); }));
  s.Get(R"(/projects/([^/]+)/items/([^/]+)/attribution)",
        wrap([&g](const httplib::Request& r) { return g.attribution(r.matches[1], r.matches[2]); }));
  s.Get(R"(/projects/([^/]+)/state-hash)", wrap([&g](const httplib::Request& r) {
          return nlohmann::json{{"state_hash", g.state_hash(r.matches[1])}};
        }));

  s.Get(R"(/sessions/([^/]+)/round)", wrap([&g](const httplib::Request& r) { return g.current_round(r.matches[1]); }));
  s.Post(R"(/sessions/([^/]+)/hypothesis)",
         wrap([&g](const httplib::Request& r) { return g.hypothesize(r.matches[1], parse_body(r)); }));
  s.Post(R"(/sessions/([^/]+)/interactions)",
         wrap([&g](const httplib::Request& r) { return g.submit_interaction(r.matches[1], parse_body(r)); }));
  s.Post(R"(/sessions/([^/]+)/votes)",
         wrap([&g](const httplib::Request& r) { return g.submit_vote(r.matches[1], parse_body(r)); }));
  s.Post(R"(/sessions/([^/]+)/tryon)",
         wrap([&g](const httplib::Request& r) { return g.tryon(r.matches[1], parse_body(r)); }));

  s.Get(R"(/blobs/([0-9a-f]{64}))", [&g](const httplib::Request& r, httplib::Response& res) {
    auto bytes = g.blobs().get(r.matches[1]);
    if (!bytes) {
      send_error(res, Error(ErrorCode::NotFound, "no such blob", {{"blob_id", std::string(r.matches[1])}}));
      return;
    }
    res.set_content(std::string(bytes->begin(), bytes->end()), "image/png");
  });

  s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (res.status == 404 && res.body.empty()) {
      send_error(res, Error(ErrorCode::NotFound, "no route for " + req.method + " " + req.path));
    }
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }

bool HttpServer::bind(const std::string& host, int port) { return impl_->server.bind_to_port(host, port); }

bool HttpServer::listen_after_bind() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace designbridge
