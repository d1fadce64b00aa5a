// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <thread>

#include "twin/server/service.hpp"

namespace httplib {
class Server;
}

namespace twin::server {

// Routes the v1 API (docs/api.md) onto a TwinService.
class HttpServer {
 public:
  explicit HttpServer(TwinService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Port 0 picks a free port. Returns the bound port. Throws Error("BindError").
  int bind(const std::string& host, int port);
  // Serves on a background thread until stop().
  void start();
  // Publishes frames up to system time every `period` on a background
  // thread. Not used while a replay drives the stream.
  void start_ticker(Duration period = Duration{100});
  void stop();

  int port() const { return port_; }

 private:
  void routes();

  TwinService& service_;
  std::unique_ptr<httplib::Server> http_;
  std::thread listener_;
  std::thread ticker_;
  std::atomic<bool> stopping_{false};
  int port_ = 0;
};

}  // namespace twin::server
