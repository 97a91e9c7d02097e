#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stereofov/display.hpp"
#include "stereofov/staircase.hpp"
#include "stereofov/validation.hpp"

namespace stereofov::service {

struct RingCondition {
  double theta = 0.0;
  double sigma = 0.0;
  bool operator==(const RingCondition&) const = default;
};

using SessionCondition = std::variant<RingCondition, validation::ValidationCondition>;

enum class Status { active, complete, aborted };
std::string_view to_string(Status s) noexcept;

struct ServiceConfig {
  display::DisplayModel display;
  staircase::PestConfig pest;
  staircase::PestConfig validation_pest{.grid_min = 0.1, .grid_max = 20.0};
  validation::HarnessConfig validation;
  std::filesystem::path data_dir = "stereofov-data";
  std::string host = "127.0.0.1";
  int port = 8080;
  bool render_stimuli = true;
};

/// Reads a JSON config file (any subset of keys), then applies the
/// STEREOFOV_PORT and STEREOFOV_DATA_DIR environment overrides.
ServiceConfig load_service_config(const std::optional<std::filesystem::path>& path);
void from_json(const nlohmann::json& j, ServiceConfig& c);

struct TrialDescriptor {
  std::string session_id;
  int trial_index = 0;
  double intensity = 0.0;
  std::string left_url;
  std::string right_url;
  int presentation_ms = 1500;
  std::vector<std::string> response_options;
  int trial_count = 0;
  int max_trials = 0;
};

struct SubmitResult {
  bool correct = false;
  bool done = false;
};

struct SessionView {
  std::string id;
  std::string participant;
  SessionCondition condition;
  Status status = Status::active;
  int trial_count = 0;
  int max_trials = 0;
  std::uint64_t seed = 0;
  std::int64_t created_ms = 0;
  std::int64_t updated_ms = 0;
};

enum class ExportFormat { csv, json };

void to_json(nlohmann::json& j, const TrialDescriptor& t);
void to_json(nlohmann::json& j, const SessionView& v);
void to_json(nlohmann::json& j, const SessionCondition& c);
SessionCondition condition_from_json(const nlohmann::json& j);

/// Staircase sessions persisted as a manifest plus an append-only JSON-lines
/// trial log per session. PEST state is rebuilt by replaying the log.
///
/// Thread-safe: calls on different sessions run concurrently, calls on one
/// session are serialized.
class SessionService {
 public:
  explicit SessionService(ServiceConfig cfg);
  ~SessionService();

  SessionService(const SessionService&) = delete;
  SessionService& operator=(const SessionService&) = delete;

  /// Throws DomainError for a ring condition outside the measured grid or an
  /// unknown scene.
  std::string create_session(const SessionCondition& condition, const std::string& participant,
                             std::optional<staircase::PestConfig> pest = std::nullopt,
                             std::optional<std::uint64_t> seed = std::nullopt);

  /// Descriptor of the pending trial; repeated calls return the same trial.
  /// Throws ConflictError once the session is complete.
  TrialDescriptor next_trial(const std::string& id);

  /// Throws ConflictError unless trial_index is the pending trial of an active
  /// session, DomainError when the response is not an option of the task.
  /// `measured_presentation_ms` is the client's measured display time; it is
  /// kept in the trial log and JSON export for auditing only.
  SubmitResult submit_response(const std::string& id, int trial_index, Choice response,
                               std::optional<double> measured_presentation_ms = std::nullopt);

  std::string export_session(const std::string& id, ExportFormat format);
  SessionView view(const std::string& id);
  staircase::PestState pest_state(const std::string& id);
  std::vector<staircase::TrialRecord> trials(const std::string& id);
  std::vector<std::string> session_ids();

  /// PNG bytes of a stimulus image previously referenced by next_trial.
  std::optional<std::vector<std::uint8_t>> stimulus_png(const std::string& hash);

  const ServiceConfig& config() const noexcept { return cfg_; }

 private:
  struct Session;
  std::shared_ptr<Session> find(const std::string& id);
  void load_existing();
  void persist_manifest(const Session& s);
  void render_trial(Session& s, int index, TrialDescriptor& desc);

  ServiceConfig cfg_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::mutex stim_mu_;
  std::map<std::string, std::vector<std::uint8_t>> stimuli_;
};

/// HTTP front end:
///   POST /sessions                       create
///   GET  /sessions/{id}                  session view
///   GET  /sessions/{id}/next             pending trial descriptor
///   POST /sessions/{id}/responses        {"trial_index", "response",
///                                         "measured_presentation_ms"?}
///   GET  /sessions/{id}/export?format=   csv | json
///   GET  /stimuli/{hash}.png
class HttpServer {
 public:
  explicit HttpServer(SessionService& service);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds to an ephemeral port and returns it (0 on failure).
  int bind_any_port(const std::string& host);
  bool bind(const std::string& host, int port);
  /// Blocks until stop() is called.
  bool listen();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace stereofov::service
