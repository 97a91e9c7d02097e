#include "stereofov/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "stereofov/errors.hpp"
#include "stereofov/image_io.hpp"

namespace stereofov::model {
namespace {

void check_range(const char* what, double v, const Interval& r, bool extrapolate) {
  if (!std::isfinite(v)) throw DomainError(std::string(what) + " must be finite");
  if (v < 0.0) throw DomainError(std::string(what) + " must be non-negative");
  if (!extrapolate && !r.contains(v)) {
    std::ostringstream msg;
    msg << what << " = " << v << " outside the model range [" << r.lo << ", " << r.hi
        << "]; enable extrapolation to evaluate";
    throw RangeError(msg.str());
  }
}

}  // namespace

double ExpCurve::operator()(double theta) const noexcept { return a * std::exp(b * theta) + c; }

SurfaceModel default_paper_model() {
  SurfaceModel m;
  m.p1 = {2.07e-11, 0.87, 0.003};
  m.p2 = {8.85, 0.04, -7.5};
  m.p3 = {0.04, 0.15, 0.12};
  m.p1_constant = 0.0034;
  m.theta_range = {0.0, 20.0};
  m.sigma_range = {0.0, 15.0};
  return m;
}

Disparity eval_threshold(const SurfaceModel& m, Eccentricity theta, BlurSigma sigma,
                         EvalOptions opts) {
  check_range("theta", theta.value, m.theta_range, opts.extrapolate);
  check_range("sigma", sigma.value, m.sigma_range, opts.extrapolate);
  const double curvature = opts.p1_mode == P1Mode::constant ? m.p1_constant : m.p1(theta.value);
  const double offset = sigma.value - m.p2(theta.value);
  return Disparity{curvature * offset * offset + m.p3(theta.value)};
}

BlurSigma optimal_blur(const SurfaceModel& m, Eccentricity theta, bool extrapolate) {
  check_range("theta", theta.value, m.theta_range, extrapolate);
  return BlurSigma{std::max(0.0, m.p2(theta.value))};
}

BlurSigma sigma_from_cutoff(double cycles_per_degree) {
  if (!(cycles_per_degree > 0.0)) throw DomainError("cutoff frequency must be positive");
  return BlurSigma{kArcminPerDegree * 3.0 / (2.0 * kPi * cycles_per_degree)};
}

ScalarField blur_budget_map(const SurfaceModel& m, const display::DisplayModel& d, Pixel gaze) {
  d.validate();
  ScalarField out(d.width_px, d.height_px);
  for (int y = 0; y < d.height_px; ++y) {
    auto row = out.row(y);
    for (int x = 0; x < d.width_px; ++x) {
      const double theta =
          display::eccentricity_of(d, gaze, {static_cast<double>(x), static_cast<double>(y)})
              .value;
      row[static_cast<std::size_t>(x)] =
          optimal_blur(m, Eccentricity{m.theta_range.clamp(theta)}).value;
    }
  }
  return out;
}

nlohmann::json budget_map_sidecar(const ScalarField& map, Pixel gaze, BudgetMapEncoding enc) {
  return {{"width", map.width()},
          {"height", map.height()},
          {"encoding", "uint16le"},
          {"units", "arcmin"},
          {"scale", enc.scale},
          {"gaze", {gaze.x, gaze.y}}};
}

void to_json(nlohmann::json& j, const ExpCurve& c) {
  j = nlohmann::json{{"a", c.a}, {"b", c.b}, {"c", c.c}};
}

void from_json(const nlohmann::json& j, ExpCurve& c) {
  c.a = j.at("a").get<double>();
  c.b = j.at("b").get<double>();
  c.c = j.at("c").get<double>();
}

void to_json(nlohmann::json& j, const SurfaceModel& m) {
  j = nlohmann::json{{"p1", m.p1},
                     {"p2", m.p2},
                     {"p3", m.p3},
                     {"p1_constant", m.p1_constant},
                     {"theta_range", {m.theta_range.lo, m.theta_range.hi}},
                     {"sigma_range", {m.sigma_range.lo, m.sigma_range.hi}}};
}

void from_json(const nlohmann::json& j, SurfaceModel& m) {
  SurfaceModel out;
  out.p1 = j.at("p1").get<ExpCurve>();
  out.p2 = j.at("p2").get<ExpCurve>();
  out.p3 = j.at("p3").get<ExpCurve>();
  out.p1_constant = j.value("p1_constant", out.p1_constant);
  if (j.contains("theta_range")) {
    out.theta_range = {j["theta_range"].at(0).get<double>(), j["theta_range"].at(1).get<double>()};
  }
  if (j.contains("sigma_range")) {
    out.sigma_range = {j["sigma_range"].at(0).get<double>(), j["sigma_range"].at(1).get<double>()};
  }
  for (const auto* c : {&out.p1, &out.p2, &out.p3}) {
    if (!std::isfinite(c->a) || !std::isfinite(c->b) || !std::isfinite(c->c)) {
      throw DomainError("model coefficients must be finite");
    }
  }
  m = out;
}

SurfaceModel load_model(const std::string& path) {
  return nlohmann::json::parse(io::read_text(path)).get<SurfaceModel>();
}

void save_model(const std::string& path, const SurfaceModel& m) {
  io::write_text(path, nlohmann::json(m).dump(2) + "\n");
}

}  // namespace stereofov::model
