// Eigen-based headers must come before httplib: <resolv.h> defines a _res macro.
#include "salesopt/http_api.hpp"

#include "httplib.h"

#include <fmt/format.h>

#include "salesopt/errors.hpp"

namespace salesopt {

namespace {

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  send_json(res, status, Json{{"error", code}, {"message", message}});
}

int status_for(const Error& e) {
  if (e.code() == "not_found") return 404;
  if (e.code() == "invalid_argument" || e.code() == "config_error") return 400;
  if (e.code() == "infeasible" || e.code() == "insufficient_data") return 409;
  return 500;
}

template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_error(res, status_for(e), e.code(), e.what());
    } catch (const Json::exception& e) {
      send_error(res, 400, "invalid_argument", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  };
}

}  // namespace

HttpApi::HttpApi(Service& service) : service_(service), server_(std::make_unique<httplib::Server>()) {
  auto& s = *server_;
  s.Get(R"(/reps/([^/]+)/recommendations)", guarded([this](const httplib::Request& req, httplib::Response& res) {
          const std::string rep = req.matches[1];
          Json recs = Json::array();
          for (const auto& r : service_.recommendations_for(rep)) recs.push_back(to_json(r));
          send_json(res, 200, Json{{"rep_id", rep}, {"recommendations", std::move(recs)}});
        }));
  s.Post("/feedback", guarded([this](const httplib::Request& req, httplib::Response& res) {
           const Json body = Json::parse(req.body);
           send_json(res, 202, to_json(service_.ingest_feedback(body.get<FeedbackEvent>())));
         }));
  s.Post("/runs", guarded([this](const httplib::Request&, httplib::Response& res) {
           send_json(res, 201, to_json(service_.run_day()));
         }));
  s.Get(R"(/runs/(\d+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
          send_json(res, 200, to_json(service_.run(std::stoi(req.matches[1]))));
        }));
  s.Get("/metrics", guarded([this](const httplib::Request&, httplib::Response& res) {
          send_json(res, 200, to_json(service_.metrics()));
        }));
  s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (res.body.empty())
      send_error(res, res.status, res.status == 404 ? "not_found" : "http_error",
                 fmt::format("{} {}", req.method, req.path));
  });
}

HttpApi::~HttpApi() { stop(); }

int HttpApi::start(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error("io_error", fmt::format("cannot bind {}:{}", host, port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void HttpApi::listen(const std::string& host, int port) {
  if (!server_->listen(host, port)) throw Error("io_error", fmt::format("cannot listen on {}:{}", host, port));
}

void HttpApi::stop() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace salesopt
