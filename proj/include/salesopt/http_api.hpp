#pragma once

#include <memory>
#include <string>
#include <thread>

#include "salesopt/service.hpp"

namespace httplib {
class Server;
}

namespace salesopt {

/// JSON routes over a Service:
///   GET  /reps/{id}/recommendations
///   POST /feedback
///   POST /runs
///   GET  /runs/{id}
///   GET  /metrics
/// Errors come back as {"error": code, "message": text}.
class HttpApi {
 public:
  explicit HttpApi(Service& service);
  ~HttpApi();
  HttpApi(const HttpApi&) = delete;
  HttpApi& operator=(const HttpApi&) = delete;

  /// Binds and serves on a background thread. Port 0 picks a free port.
  /// Returns the bound port.
  int start(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

 private:
  Service& service_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace salesopt
