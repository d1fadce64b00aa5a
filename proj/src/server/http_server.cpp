// SPDX-License-Identifier: Apache-2.0

#include "twin/server/http_server.hpp"

#include <httplib.h>

namespace twin::server {

namespace {

Query query_of(const httplib::Request& req) {
  Query q;
  for (const auto& [k, v] : req.params) q[k] = v;
  return q;
}

template <typename F>
void respond(httplib::Response& res, F&& body) {
  try {
    res.set_content(body(), "application/json");
    res.status = 200;
  } catch (const Error& e) {
    res.status = http_status(e);
    res.set_content(error_json(e), "application/json");
  } catch (const std::exception& e) {
    Error wrapped("InternalError", e.what());
    res.status = 500;
    res.set_content(error_json(wrapped), "application/json");
  }
}

}  // namespace

HttpServer::HttpServer(TwinService& service) : service_(service), http_(std::make_unique<httplib::Server>()) {
  http_->new_task_queue = [] { return new httplib::ThreadPool(32); };
  // The library default adds SO_REUSEPORT, which lets a second server share
  // the port silently instead of failing to bind.
  http_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof yes);
  });
  routes();
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::routes() {
  auto& s = *http_;
  s.Post("/api/v1/ingest", [this](const httplib::Request& req, httplib::Response& res) {
    respond(res, [&] {
      return service_.ingest(req.get_header_value("Authorization"), req.get_header_value("Content-Type"), req.body);
    });
  });
  s.Get("/api/v1/historic", [this](const httplib::Request& req, httplib::Response& res) {
    respond(res, [&] { return service_.historic(query_of(req)); });
  });
  s.Get("/api/v1/forecast", [this](const httplib::Request& req, httplib::Response& res) {
    respond(res, [&] { return service_.forecast(query_of(req)); });
  });
  s.Get("/api/v1/time", [this](const httplib::Request&, httplib::Response& res) {
    respond(res, [&] { return service_.time_get(); });
  });
  s.Put("/api/v1/time", [this](const httplib::Request& req, httplib::Response& res) {
    respond(res, [&] { return service_.time_put(req.body); });
  });
  s.Get("/api/v1/windfield", [this](const httplib::Request& req, httplib::Response& res) {
    respond(res, [&] { return service_.windfield(query_of(req)); });
  });
  s.Get("/api/v1/catalog", [this](const httplib::Request&, httplib::Response& res) {
    respond(res, [&] { return service_.catalog(); });
  });
  s.Get("/api/v1/stream", [this](const httplib::Request& req, httplib::Response& res) {
    std::shared_ptr<Subscription> sub;
    try {
      sub = service_.hub().subscribe(service_.stream_parameters(query_of(req)));
    } catch (const Error& e) {
      res.status = http_status(e);
      res.set_content(error_json(e), "application/json");
      return;
    }
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream",
        [this, sub](std::size_t, httplib::DataSink& sink) {
          StreamFrame frame;
          int idle = 0;
          while (!stopping_) {
            auto st = sub->next(frame, Duration{200});
            if (st == Subscription::Status::frame) {
              std::string msg = "id: " + std::to_string(frame.sequence) + "\nevent: frame\ndata: " +
                                TwinService::frame_json(frame) + "\n\n";
              return sink.write(msg.data(), msg.size());
            }
            if (st == Subscription::Status::closed) {
              Error cause(sub->close_reason().rfind("SubscriberOverflow", 0) == 0 ? "SubscriberOverflow" : "Closed",
                          sub->close_reason());
              std::string msg = "event: error\ndata: " + error_json(cause) + "\n\n";
              sink.write(msg.data(), msg.size());
              sink.done();
              return true;
            }
            if (++idle == 25) {
              // Comment line every ~5 s so dead peers are noticed.
              static const std::string keepalive = ": keepalive\n\n";
              return sink.write(keepalive.data(), keepalive.size());
            }
          }
          sink.done();
          return true;
        },
        [this, sub](bool) { service_.hub().unsubscribe(sub); });
  });
}

int HttpServer::bind(const std::string& host, int port) {
  int bound = port == 0 ? http_->bind_to_any_port(host) : (http_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error("BindError", "cannot bind " + host + ":" + std::to_string(port));
  port_ = bound;
  return bound;
}

void HttpServer::start() {
  listener_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
}

void HttpServer::start_ticker(Duration period) {
  ticker_ = std::thread([this, period] {
    while (!stopping_) {
      service_.tick();
      std::this_thread::sleep_for(period);
    }
  });
}

void HttpServer::stop() {
  if (stopping_.exchange(true)) return;
  service_.hub().close_all("server shutting down");
  http_->stop();
  if (listener_.joinable()) listener_.join();
  if (ticker_.joinable()) ticker_.join();
}

}  // namespace twin::server
