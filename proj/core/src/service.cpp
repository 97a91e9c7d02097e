#include "stereofov/service.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "stereofov/errors.hpp"
#include "stereofov/foveation.hpp"
#include "stereofov/image_io.hpp"
#include "stereofov/stimulus.hpp"

namespace stereofov::service {
namespace fs = std::filesystem;

namespace {

std::int64_t now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return s;
}

std::uint64_t fnv1a(std::string_view text, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t random_u64() {
  static std::mutex mu;
  static std::mt19937_64 rng{[] {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd() ^
           static_cast<std::uint64_t>(now_ms());
  }()};
  std::lock_guard lock(mu);
  return rng();
}

staircase::Task task_of(const SessionCondition& c) {
  return std::holds_alternative<RingCondition>(c) ? staircase::Task::corrugation
                                                  : staircase::Task::half_split;
}

std::vector<std::string> options_of(staircase::Task task) {
  if (task == staircase::Task::corrugation) return {"peaks", "troughs"};
  return {"left", "right"};
}

bool is_option(staircase::Task task, Choice c) {
  return task == staircase::Task::corrugation ? (c == Choice::peaks || c == Choice::troughs)
                                              : (c == Choice::left || c == Choice::right);
}

Status parse_status(const std::string& s) {
  if (s == "active") return Status::active;
  if (s == "complete") return Status::complete;
  if (s == "aborted") return Status::aborted;
  throw DomainError("unknown session status '" + s + "'");
}

void write_atomically(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

bool valid_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') return false;
  }
  return true;
}

}  // namespace

std::string_view to_string(Status s) noexcept {
  switch (s) {
    case Status::active: return "active";
    case Status::complete: return "complete";
    case Status::aborted: return "aborted";
  }
  return "active";
}

void from_json(const nlohmann::json& j, ServiceConfig& c) {
  if (j.contains("display")) c.display = j.at("display").get<display::DisplayModel>();
  if (j.contains("pest")) c.pest = j.at("pest").get<staircase::PestConfig>();
  if (j.contains("validation_pest")) {
    c.validation_pest = j.at("validation_pest").get<staircase::PestConfig>();
  }
  if (j.contains("validation_display")) {
    c.validation.display = j.at("validation_display").get<display::DisplayModel>();
  }
  if (j.contains("model")) c.validation.model = j.at("model").get<model::SurfaceModel>();
  if (j.contains("data_dir")) c.data_dir = j.at("data_dir").get<std::string>();
  if (j.contains("host")) c.host = j.at("host").get<std::string>();
  if (j.contains("port")) c.port = j.at("port").get<int>();
  if (j.contains("render_stimuli")) c.render_stimuli = j.at("render_stimuli").get<bool>();
  c.display.validate();
  c.validation.display.validate();
}

ServiceConfig load_service_config(const std::optional<fs::path>& path) {
  ServiceConfig cfg;
  if (path) {
    try {
      from_json(nlohmann::json::parse(io::read_text(*path)), cfg);
    } catch (const nlohmann::json::exception& e) {
      throw DomainError("invalid config " + path->string() + ": " + e.what());
    }
  }
  if (const char* port = std::getenv("STEREOFOV_PORT"); port && *port) {
    try {
      cfg.port = std::stoi(port);
    } catch (const std::exception&) {
      throw DomainError(std::string("STEREOFOV_PORT is not a number: ") + port);
    }
  }
  if (const char* dir = std::getenv("STEREOFOV_DATA_DIR"); dir && *dir) cfg.data_dir = dir;
  return cfg;
}

void to_json(nlohmann::json& j, const SessionCondition& c) {
  if (const auto* ring = std::get_if<RingCondition>(&c)) {
    j = nlohmann::json{{"theta", ring->theta}, {"sigma", ring->sigma}};
  } else {
    j = std::get<validation::ValidationCondition>(c);
  }
}

SessionCondition condition_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DomainError("condition must be an object");
  try {
    if (j.contains("scene")) return j.get<validation::ValidationCondition>();
    if (j.contains("theta") && j.contains("sigma")) {
      return RingCondition{j.at("theta").get<double>(), j.at("sigma").get<double>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("invalid condition: ") + e.what());
  }
  throw DomainError("condition needs {theta, sigma} or {scene, style}");
}

void to_json(nlohmann::json& j, const TrialDescriptor& t) {
  j = nlohmann::json{{"session_id", t.session_id},
                     {"trial_index", t.trial_index},
                     {"intensity", t.intensity},
                     {"left_url", t.left_url},
                     {"right_url", t.right_url},
                     {"presentation_ms", t.presentation_ms},
                     {"response_options", t.response_options},
                     {"trial_count", t.trial_count},
                     {"max_trials", t.max_trials}};
}

void to_json(nlohmann::json& j, const SessionView& v) {
  j = nlohmann::json{{"id", v.id},
                     {"participant", v.participant},
                     {"condition", v.condition},
                     {"status", std::string(to_string(v.status))},
                     {"trial_count", v.trial_count},
                     {"max_trials", v.max_trials},
                     {"seed", v.seed},
                     {"created_ms", v.created_ms},
                     {"updated_ms", v.updated_ms}};
}

struct SessionService::Session {
  std::mutex mu;
  std::string id;
  std::string participant;
  SessionCondition condition;
  Status status = Status::active;
  staircase::PestConfig pest;
  std::uint64_t seed = 0;
  std::int64_t created_ms = 0;
  std::int64_t updated_ms = 0;
  staircase::PestState state;
  std::vector<staircase::TrialRecord> trials;
  std::vector<std::optional<double>> measured_ms;
  std::optional<TrialDescriptor> pending;
  std::optional<stimulus::SceneGeometry> geometry;
  fs::path dir;

  SessionView view() const {
    return {id,     participant, condition,  status,    static_cast<int>(trials.size()),
            pest.max_trials, seed, created_ms, updated_ms};
  }

  nlohmann::json manifest() const {
    nlohmann::json j = view();
    j.erase("trial_count");
    j["pest"] = pest;
    return j;
  }
};

SessionService::SessionService(ServiceConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.display.validate();
  fs::create_directories(cfg_.data_dir / "sessions");
  fs::create_directories(cfg_.data_dir / "stimuli");
  load_existing();
}

SessionService::~SessionService() = default;

void SessionService::load_existing() {
  for (const auto& entry : fs::directory_iterator(cfg_.data_dir / "sessions")) {
    if (!entry.is_directory()) continue;
    const fs::path manifest_path = entry.path() / "manifest.json";
    if (!fs::exists(manifest_path)) continue;
    auto s = std::make_shared<Session>();
    const auto m = nlohmann::json::parse(io::read_text(manifest_path));
    s->id = m.at("id").get<std::string>();
    s->participant = m.value("participant", "");
    s->condition = condition_from_json(m.at("condition"));
    s->status = parse_status(m.at("status").get<std::string>());
    s->pest = m.at("pest").get<staircase::PestConfig>();
    s->seed = m.at("seed").get<std::uint64_t>();
    s->created_ms = m.value("created_ms", std::int64_t{0});
    s->updated_ms = m.value("updated_ms", s->created_ms);
    s->dir = entry.path();

    const fs::path log_path = entry.path() / "trials.jsonl";
    if (fs::exists(log_path)) {
      std::istringstream in(io::read_text(log_path));
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
          const auto j = nlohmann::json::parse(line);
          const auto t = j.get<staircase::TrialRecord>();
          if (t.index != static_cast<int>(s->trials.size())) break;
          s->trials.push_back(t);
          std::optional<double> measured;
          if (j.contains("measured_presentation_ms")) {
            measured = j.at("measured_presentation_ms").get<double>();
          }
          s->measured_ms.push_back(measured);
        } catch (const nlohmann::json::exception&) {
          break;  // torn final write
        }
      }
    }
    s->state = staircase::pest_replay(s->pest, s->trials);
    if (s->status == Status::active && staircase::pest_is_done(s->state)) {
      s->status = Status::complete;
      persist_manifest(*s);
    }
    sessions_[s->id] = s;
  }
}

void SessionService::persist_manifest(const Session& s) {
  write_atomically(s.dir / "manifest.json", s.manifest().dump(2) + "\n");
}

std::string SessionService::create_session(const SessionCondition& condition,
                                           const std::string& participant,
                                           std::optional<staircase::PestConfig> pest,
                                           std::optional<std::uint64_t> seed) {
  if (const auto* ring = std::get_if<RingCondition>(&condition)) {
    if (!stimulus::in_condition_grid(Eccentricity{ring->theta}, BlurSigma{ring->sigma})) {
      std::ostringstream msg;
      msg << "condition (theta=" << ring->theta << ", sigma=" << ring->sigma
          << ") is not one of the measured conditions";
      throw DomainError(msg.str());
    }
  } else {
    validation::validate_scene_id(std::get<validation::ValidationCondition>(condition).scene);
  }
  auto s = std::make_shared<Session>();
  s->participant = participant;
  s->condition = condition;
  s->pest = pest ? *pest
                 : (std::holds_alternative<RingCondition>(condition) ? cfg_.pest
                                                                     : cfg_.validation_pest);
  s->state = staircase::pest_init(s->pest);
  s->seed = seed ? *seed : random_u64();
  s->created_ms = now_ms();
  s->updated_ms = s->created_ms;

  std::lock_guard lock(mu_);
  do {
    s->id = hex64(random_u64());
  } while (sessions_.contains(s->id));
  s->dir = cfg_.data_dir / "sessions" / s->id;
  fs::create_directories(s->dir);
  persist_manifest(*s);
  sessions_[s->id] = s;
  return s->id;
}

std::shared_ptr<SessionService::Session> SessionService::find(const std::string& id) {
  std::lock_guard lock(mu_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
  return it->second;
}

void SessionService::render_trial(Session& s, int index, TrialDescriptor& desc) {
  if (!cfg_.render_stimuli) return;
  const auto task = task_of(s.condition);
  const auto layout = staircase::trial_layout_for(s.seed, index, task);

  std::ostringstream key;
  key.precision(17);
  const display::DisplayModel* dm = &cfg_.display;
  if (const auto* ring = std::get_if<RingCondition>(&s.condition)) {
    key << "ring|" << ring->theta << '|' << ring->sigma << '|' << layout.phase_index << '|'
        << to_string(layout.target) << '|' << s.seed << '|' << index;
  } else {
    const auto& vc = std::get<validation::ValidationCondition>(s.condition);
    dm = &cfg_.validation.display;
    key << "scene|" << vc.scene << '|' << validation::to_string(vc.style) << '|'
        << to_string(layout.target);
  }
  key << '|' << desc.intensity << '|' << dm->width_px << 'x' << dm->height_px << '@' << dm->ppd;
  const std::string base = key.str();
  const std::string left_hash = hex64(fnv1a(base + "|L"));
  const std::string right_hash = hex64(fnv1a(base + "|R"));
  desc.left_url = "/stimuli/" + left_hash + ".png";
  desc.right_url = "/stimuli/" + right_hash + ".png";

  {
    std::lock_guard lock(stim_mu_);
    if (stimuli_.contains(left_hash) && stimuli_.contains(right_hash)) return;
  }
  const fs::path dir = cfg_.data_dir / "stimuli";
  if (fs::exists(dir / (left_hash + ".png")) && fs::exists(dir / (right_hash + ".png"))) return;

  GrayImage left, right;
  if (const auto* ring = std::get_if<RingCondition>(&s.condition)) {
    const auto spec = stimulus::make_ring_spec(Eccentricity{ring->theta}, BlurSigma{ring->sigma},
                                               layout.phase_index, layout.target,
                                               s.seed ^ static_cast<std::uint64_t>(index));
    auto stim = stimulus::render_stimulus(spec, Disparity{desc.intensity}, cfg_.display);
    left = std::move(stim.left);
    right = std::move(stim.right);
  } else {
    const auto& vc = std::get<validation::ValidationCondition>(s.condition);
    if (!s.geometry) s.geometry = validation::scene_geometry(vc.scene, cfg_.validation);
    auto scene = stimulus::make_validation_scene(*s.geometry, desc.intensity, layout.target,
                                                 cfg_.validation.display);
    left = std::move(scene.stimulus.left);
    right = std::move(scene.stimulus.right);
    if (vc.style == validation::Style::fov) {
      const auto budget = foveation::BudgetCurve::from_model(cfg_.validation.model);
      const auto& levels = cfg_.validation.pyramid_levels;
      left = foveation::foveate(foveation::build_pyramid(left, levels, *dm), s.geometry->gaze,
                                budget, *dm);
      right = foveation::foveate(foveation::build_pyramid(right, levels, *dm), s.geometry->gaze,
                                 budget, *dm);
    }
  }
  auto left_png = io::encode_png(left);
  auto right_png = io::encode_png(right);
  io::write_file(dir / (left_hash + ".png"), left_png);
  io::write_file(dir / (right_hash + ".png"), right_png);
  std::lock_guard lock(stim_mu_);
  stimuli_[left_hash] = std::move(left_png);
  stimuli_[right_hash] = std::move(right_png);
}

TrialDescriptor SessionService::next_trial(const std::string& id) {
  const auto s = find(id);
  std::lock_guard lock(s->mu);
  if (s->status != Status::active) throw ConflictError("session " + id + " is not active");
  if (s->pending) return *s->pending;
  TrialDescriptor d;
  d.session_id = s->id;
  d.trial_index = static_cast<int>(s->trials.size());
  d.intensity = staircase::pest_next_intensity(s->state);
  d.response_options = options_of(task_of(s->condition));
  d.trial_count = static_cast<int>(s->trials.size());
  d.max_trials = s->pest.max_trials;
  render_trial(*s, d.trial_index, d);
  s->pending = d;
  return d;
}

SubmitResult SessionService::submit_response(const std::string& id, int trial_index,
                                             Choice response,
                                             std::optional<double> measured_presentation_ms) {
  const auto s = find(id);
  std::lock_guard lock(s->mu);
  if (s->status != Status::active) throw ConflictError("session " + id + " is not active");
  const int expected = static_cast<int>(s->trials.size());
  if (trial_index != expected) {
    throw ConflictError("trial " + std::to_string(trial_index) + " is not pending (expected " +
                        std::to_string(expected) + ")");
  }
  const auto task = task_of(s->condition);
  if (!is_option(task, response)) {
    throw DomainError("response '" + std::string(to_string(response)) +
                      "' is not an option of this task");
  }
  const auto layout = staircase::trial_layout_for(s->seed, trial_index, task);
  staircase::TrialRecord t;
  t.index = trial_index;
  t.intensity = staircase::pest_next_intensity(s->state);
  t.target = layout.target;
  t.phase_index = layout.phase_index;
  t.response = response;
  t.correct = response == layout.target;
  t.timestamp_ms = now_ms();

  {
    std::ofstream out(s->dir / "trials.jsonl", std::ios::binary | std::ios::app);
    if (!out) throw IoError("cannot append to trial log of session " + id);
    nlohmann::json line = t;
    if (measured_presentation_ms) line["measured_presentation_ms"] = *measured_presentation_ms;
    out << line.dump() << '\n';
    out.flush();
    if (!out) throw IoError("trial log write failed for session " + id);
  }
  s->trials.push_back(t);
  s->measured_ms.push_back(measured_presentation_ms);
  s->state = staircase::pest_update(std::move(s->state), t.intensity, t.correct);
  s->pending.reset();
  s->updated_ms = t.timestamp_ms;
  const bool done = staircase::pest_is_done(s->state);
  if (done) s->status = Status::complete;
  persist_manifest(*s);
  return {t.correct, done};
}

std::string SessionService::export_session(const std::string& id, ExportFormat format) {
  const auto s = find(id);
  std::lock_guard lock(s->mu);
  if (format == ExportFormat::csv) return staircase::trial_log_csv(s->trials);
  nlohmann::json j;
  j["session"] = s->view();
  j["pest"] = s->pest;
  j["trials"] = nlohmann::json::array();
  for (std::size_t i = 0; i < s->trials.size(); ++i) {
    nlohmann::json t = s->trials[i];
    if (s->measured_ms[i]) t["measured_presentation_ms"] = *s->measured_ms[i];
    j["trials"].push_back(std::move(t));
  }
  return j.dump(2) + "\n";
}

SessionView SessionService::view(const std::string& id) {
  const auto s = find(id);
  std::lock_guard lock(s->mu);
  return s->view();
}

staircase::PestState SessionService::pest_state(const std::string& id) {
  const auto s = find(id);
  std::lock_guard lock(s->mu);
  return s->state;
}

std::vector<staircase::TrialRecord> SessionService::trials(const std::string& id) {
  const auto s = find(id);
  std::lock_guard lock(s->mu);
  return s->trials;
}

std::vector<std::string> SessionService::session_ids() {
  std::lock_guard lock(mu_);
  std::vector<std::string> ids;
  for (const auto& [id, s] : sessions_) ids.push_back(id);
  return ids;
}

std::optional<std::vector<std::uint8_t>> SessionService::stimulus_png(const std::string& hash) {
  if (!valid_id(hash)) return std::nullopt;
  {
    std::lock_guard lock(stim_mu_);
    const auto it = stimuli_.find(hash);
    if (it != stimuli_.end()) return it->second;
  }
  const fs::path path = cfg_.data_dir / "stimuli" / (hash + ".png");
  if (!fs::exists(path)) return std::nullopt;
  auto bytes = io::read_file(path);
  std::lock_guard lock(stim_mu_);
  stimuli_[hash] = bytes;
  return bytes;
}

}  // namespace stereofov::service
