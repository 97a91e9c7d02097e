#include <atomic>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "stereofov/errors.hpp"
#include "stereofov/service.hpp"

namespace stereofov::service {
namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

template <class F>
httplib::Server::Handler guarded(F&& f) {
  return [f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const NotFoundError& e) {
      send_error(res, 404, e.what());
    } catch (const ConflictError& e) {
      send_error(res, 409, e.what());
    } catch (const DomainError& e) {
      send_error(res, 400, e.what());
    } catch (const RangeError& e) {
      send_error(res, 400, e.what());
    } catch (const nlohmann::json::exception& e) {
      send_error(res, 400, std::string("malformed JSON: ") + e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  };
}

}  // namespace

struct HttpServer::Impl {
  SessionService& service;
  httplib::Server server;
  std::atomic<bool> running{false};

  explicit Impl(SessionService& s) : service(s) { routes(); }

  void routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
      res.status = 204;
    });

    server.Get("/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"sessions", service.session_ids()}});
    }));

    server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = nlohmann::json::parse(req.body);
      if (!body.is_object() || !body.contains("condition")) {
        throw DomainError("request needs a \"condition\" object");
      }
      const auto condition = condition_from_json(body.at("condition"));
      std::optional<staircase::PestConfig> pest;
      if (body.contains("pest") && !body.at("pest").is_null()) {
        pest = body.at("pest").get<staircase::PestConfig>();
      }
      std::optional<std::uint64_t> seed;
      if (body.contains("seed") && !body.at("seed").is_null()) {
        seed = body.at("seed").get<std::uint64_t>();
      }
      const auto id =
          service.create_session(condition, body.value("participant", std::string{}), pest, seed);
      send_json(res, 201, {{"id", id}, {"session", service.view(id)}});
    }));

    server.Get(R"(/sessions/([0-9a-zA-Z_-]+))",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 send_json(res, 200, service.view(req.matches[1]));
               }));

    server.Get(R"(/sessions/([0-9a-zA-Z_-]+)/next)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 send_json(res, 200, service.next_trial(req.matches[1]));
               }));

    server.Post(R"(/sessions/([0-9a-zA-Z_-]+)/responses)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto body = nlohmann::json::parse(req.body);
                  const int index = body.at("trial_index").get<int>();
                  const auto label = body.at("response").get<std::string>();
                  const auto choice = parse_choice(label);
                  if (!choice) throw DomainError("unknown response '" + label + "'");
                  std::optional<double> measured;
                  if (body.contains("measured_presentation_ms") &&
                      !body.at("measured_presentation_ms").is_null()) {
                    measured = body.at("measured_presentation_ms").get<double>();
                  }
                  const auto r =
                      service.submit_response(req.matches[1], index, *choice, measured);
                  send_json(res, 200, {{"correct", r.correct}, {"done", r.done}});
                }));

    server.Get(R"(/sessions/([0-9a-zA-Z_-]+)/export)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const std::string format =
                     req.has_param("format") ? req.get_param_value("format") : "csv";
                 if (format == "csv") {
                   res.set_content(service.export_session(req.matches[1], ExportFormat::csv),
                                   "text/csv");
                 } else if (format == "json") {
                   res.set_content(service.export_session(req.matches[1], ExportFormat::json),
                                   "application/json");
                 } else {
                   throw DomainError("format must be csv or json");
                 }
               }));

    server.Get(R"(/stimuli/([0-9a-zA-Z_-]+)\.png)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const auto png = service.stimulus_png(req.matches[1]);
                 if (!png) throw NotFoundError("unknown stimulus");
                 res.set_content(reinterpret_cast<const char*>(png->data()), png->size(),
                                 "image/png");
               }));
  }
};

HttpServer::HttpServer(SessionService& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind_any_port(const std::string& host) {
  const int port = impl_->server.bind_to_any_port(host);
  return port < 0 ? 0 : port;
}

bool HttpServer::bind(const std::string& host, int port) {
  return impl_->server.bind_to_port(host, port);
}

bool HttpServer::listen() {
  impl_->running = true;
  const bool ok = impl_->server.listen_after_bind();
  impl_->running = false;
  return ok;
}

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

bool HttpServer::running() const { return impl_->server.is_running(); }

}  // namespace stereofov::service
