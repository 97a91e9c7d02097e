#include "stereofov/surfacefit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "stereofov/errors.hpp"

namespace stereofov::surfacefit {
namespace {

using LD = long double;

double estimate_weight(const psychofit::ThresholdEstimate& e) {
  if (e.weight > 0.0 && std::isfinite(e.weight)) return e.weight;
  return psychofit::weight_from_u(e.u);
}

// Solves the symmetric 3x3 system by Gaussian elimination with pivoting.
std::array<LD, 3> solve3(std::array<std::array<LD, 4>, 3> m) {
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 3; ++r) {
      if (std::fabs(m[r][col]) > std::fabs(m[pivot][col])) pivot = r;
    }
    std::swap(m[col], m[pivot]);
    if (m[col][col] == 0.0L) throw FitError("singular normal equations");
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const LD f = m[r][col] / m[col][col];
      for (int c = col; c < 4; ++c) m[r][c] -= f * m[col][c];
    }
  }
  return {m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]};
}

bool is_measured_triplet(std::span<const ThetaValue> pts) {
  if (pts.size() != 3) return false;
  std::array<double, 3> t = {pts[0].theta, pts[1].theta, pts[2].theta};
  std::ranges::sort(t);
  return t[0] == 0.0 && t[1] == 10.0 && t[2] == 20.0;
}

ExpFit constant_fallback(std::span<const ThetaValue> pts, std::string why) {
  LD sum = 0.0L;
  for (const auto& p : pts) sum += p.value;
  ExpFit f;
  f.curve = {0.0, 0.0, static_cast<double>(sum / pts.size())};
  f.degenerate = true;
  f.warning = std::move(why);
  return f;
}

// Least squares a e^{b t} + c for fixed b; returns the residual sum of squares.
LD linear_part(std::span<const ThetaValue> pts, LD b, LD& a, LD& c) {
  LD se = 0, see = 0, sy = 0, sey = 0;
  const LD n = static_cast<LD>(pts.size());
  for (const auto& p : pts) {
    const LD e = std::exp(b * p.theta);
    se += e;
    see += e * e;
    sy += p.value;
    sey += e * p.value;
  }
  const LD det = n * see - se * se;
  if (std::fabs(det) < 1e-300L) {
    a = 0;
    c = sy / n;
  } else {
    a = (n * sey - se * sy) / det;
    c = (sy - a * se) / n;
  }
  LD rss = 0;
  for (const auto& p : pts) {
    const LD r = p.value - (a * std::exp(b * p.theta) + c);
    rss += r * r;
  }
  return rss;
}

ExpFit least_squares_exponential(std::span<const ThetaValue> pts) {
  LD span_t = 0;
  for (const auto& p : pts) span_t = std::max<LD>(span_t, std::fabs(p.theta));
  if (span_t == 0) return constant_fallback(pts, "all points share one eccentricity");
  const LD b_max = 40.0L / span_t;
  constexpr int kSteps = 800;
  LD best_b = 0, best_rss = std::numeric_limits<LD>::infinity();
  LD a = 0, c = 0;
  for (int i = 0; i <= kSteps; ++i) {
    LD b = -b_max + 2 * b_max * i / kSteps;
    if (std::fabs(b) < 1e-9L) continue;
    const LD rss = linear_part(pts, b, a, c);
    if (rss < best_rss) {
      best_rss = rss;
      best_b = b;
    }
  }
  // Golden-section refinement around the best grid point.
  LD lo = best_b - 2 * b_max / kSteps;
  LD hi = best_b + 2 * b_max / kSteps;
  const LD g = (std::sqrt(5.0L) - 1) / 2;
  LD x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  LD f1 = linear_part(pts, x1, a, c), f2 = linear_part(pts, x2, a, c);
  for (int it = 0; it < 200 && hi - lo > 1e-15L * (1 + std::fabs(best_b)); ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = linear_part(pts, x1, a, c);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = linear_part(pts, x2, a, c);
    }
  }
  const LD b = (lo + hi) / 2;
  linear_part(pts, b, a, c);
  ExpFit f;
  f.curve = {static_cast<double>(a), static_cast<double>(b), static_cast<double>(c)};
  if (!std::isfinite(f.curve.a) || !std::isfinite(f.curve.c)) {
    return constant_fallback(pts, "least-squares exponential diverged");
  }
  return f;
}

void parabola_json(nlohmann::json& j, const ParabolaParams& p) {
  j = nlohmann::json{{"theta", p.theta},     {"p1", p.p1},           {"p2", p.p2},
                     {"p3", p.p3},           {"convex", p.convex},   {"warning", p.warning},
                     {"n_used", p.n_used},   {"n_excluded", p.n_excluded},
                     {"residuals", p.residuals}};
}

}  // namespace

ParabolaParams fit_parabola(std::span<const psychofit::ThresholdEstimate> estimates) {
  ParabolaParams out;
  std::vector<const psychofit::ThresholdEstimate*> used;
  for (const auto& e : estimates) {
    if (e.outlier) {
      ++out.n_excluded;
      continue;
    }
    used.push_back(&e);
  }
  std::vector<double> distinct;
  for (const auto* e : used) distinct.push_back(e->sigma);
  std::ranges::sort(distinct);
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 3) {
    throw FitError("parabola fit needs at least three usable estimates with distinct sigma");
  }
  out.theta = used.front()->theta;
  out.n_used = static_cast<int>(used.size());

  // Centered and scaled abscissa keeps the normal equations well conditioned.
  LD wsum = 0, wx = 0;
  for (const auto* e : used) {
    const LD w = estimate_weight(*e);
    wsum += w;
    wx += w * e->sigma;
  }
  const LD center = wx / wsum;
  LD scale = 0;
  for (const auto* e : used) scale = std::max<LD>(scale, std::fabs(e->sigma - center));
  if (scale == 0) scale = 1;

  std::array<std::array<LD, 4>, 3> m{};
  for (const auto* e : used) {
    const LD w = estimate_weight(*e) / wsum;
    const LD s = (e->sigma - center) / scale;
    const std::array<LD, 3> basis = {s * s, s, 1.0L};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) m[r][c] += w * basis[r] * basis[c];
      m[r][3] += w * basis[r] * e->T;
    }
  }
  const auto [alpha, beta, gamma] = solve3(m);

  if (alpha > 0) {
    const LD vs = -beta / (2 * alpha);
    out.p1 = static_cast<double>(alpha / (scale * scale));
    out.p2 = static_cast<double>(center + scale * vs);
    out.p3 = static_cast<double>(gamma - beta * beta / (4 * alpha));
  } else {
    out.convex = false;
    out.p1 = static_cast<double>(alpha / (scale * scale));
    if (alpha < 0) {
      const LD vs = -beta / (2 * alpha);
      out.p2 = static_cast<double>(center + scale * vs);
      out.p3 = static_cast<double>(gamma - beta * beta / (4 * alpha));
    } else {
      out.p2 = static_cast<double>(center);
      out.p3 = static_cast<double>(gamma);
    }
    std::ostringstream msg;
    msg << "non-convex parabola at theta=" << out.theta << " (curvature " << out.p1 << ")";
    out.warning = msg.str();
  }
  for (const auto* e : used) {
    const LD s = (e->sigma - center) / scale;
    out.residuals.push_back(static_cast<double>(e->T - (alpha * s * s + beta * s + gamma)));
  }
  return out;
}

ExpFit fit_exponential(std::span<const ThetaValue> points, bool exact_3pt) {
  if (points.size() < 3) throw FitError("exponential fit needs at least three points");
  if (!exact_3pt) return least_squares_exponential(points);
  if (!is_measured_triplet(points)) {
    throw FitError("exact exponential interpolation needs theta = 0, 10, 20");
  }
  std::array<ThetaValue, 3> p = {points[0], points[1], points[2]};
  std::ranges::sort(p, {}, &ThetaValue::theta);
  const LD y0 = p[0].value, y1 = p[1].value, y2 = p[2].value;
  if (y1 == y0) return constant_fallback(points, "degenerate geometry: y(10) == y(0)");
  const LD r = (y2 - y1) / (y1 - y0);
  if (!(r > 0)) return constant_fallback(points, "degenerate geometry: values are not monotone");
  if (r == 1) {
    constexpr LD kB = 1e-9L;
    const LD slope = (y2 - y0) / 20;
    ExpFit f;
    f.curve = {static_cast<double>(slope / kB), static_cast<double>(kB),
               static_cast<double>(y0 - slope / kB)};
    f.degenerate = true;
    f.warning = "degenerate geometry: values are linear in theta";
    return f;
  }
  const LD b = std::log(r) / 10;
  const LD a = (y1 - y0) / (r - 1);
  ExpFit f;
  f.curve = {static_cast<double>(a), static_cast<double>(b), static_cast<double>(y0 - a)};
  return f;
}

model::SurfaceModel assemble_surface(std::span<const ParabolaParams> parabolas, P1Mode p1_mode) {
  if (parabolas.size() < 3) throw FitError("surface assembly needs three eccentricities");
  std::vector<ThetaValue> v1, v2, v3;
  for (const auto& p : parabolas) {
    for (const auto& q : v1) {
      if (q.theta == p.theta) throw FitError("surface assembly needs distinct eccentricities");
    }
    v1.push_back({p.theta, p.p1});
    v2.push_back({p.theta, p.p2});
    v3.push_back({p.theta, p.p3});
  }
  const bool exact = is_measured_triplet(v1);
  model::SurfaceModel m;
  LD mean_p1 = 0;
  for (const auto& q : v1) mean_p1 += q.value;
  mean_p1 /= v1.size();
  m.p1_constant = static_cast<double>(mean_p1);
  if (p1_mode == P1Mode::constant) {
    m.p1 = {0.0, 0.0, m.p1_constant};
  } else {
    m.p1 = fit_exponential(v1, exact).curve;
  }
  m.p2 = fit_exponential(v2, exact).curve;
  m.p3 = fit_exponential(v3, exact).curve;
  double lo = v1.front().theta, hi = lo;
  for (const auto& q : v1) {
    lo = std::min(lo, q.theta);
    hi = std::max(hi, q.theta);
  }
  m.theta_range = {lo, hi};
  return m;
}

SurfaceFitReport fit_surface(std::span<const psychofit::ThresholdEstimate> estimates,
                             P1Mode p1_mode, std::span<const double> required_thetas) {
  std::map<double, std::vector<psychofit::ThresholdEstimate>> groups;
  SurfaceFitReport report;
  for (const auto& e : estimates) {
    groups[e.theta].push_back(e);
    if (e.outlier) report.excluded.push_back(e);
  }
  for (double t : required_thetas) {
    if (!groups.contains(t)) {
      std::ostringstream msg;
      msg << "no threshold estimates at theta=" << t;
      throw FitError(msg.str());
    }
  }
  for (const auto& [theta, group] : groups) report.parabolas.push_back(fit_parabola(group));
  report.model = assemble_surface(report.parabolas, p1_mode);

  std::vector<ThetaValue> v1, v2, v3;
  for (const auto& p : report.parabolas) {
    v1.push_back({p.theta, p.p1});
    v2.push_back({p.theta, p.p2});
    v3.push_back({p.theta, p.p3});
  }
  const bool exact = is_measured_triplet(v1);
  if (p1_mode == P1Mode::constant) {
    ExpFit c;
    c.curve = report.model.p1;
    report.curve_fits.push_back(c);
  } else {
    report.curve_fits.push_back(fit_exponential(v1, exact));
  }
  report.curve_fits.push_back(fit_exponential(v2, exact));
  report.curve_fits.push_back(fit_exponential(v3, exact));
  return report;
}

nlohmann::json report_json(const SurfaceFitReport& r) {
  nlohmann::json j;
  j["model"] = r.model;
  j["parabolas"] = nlohmann::json::array();
  for (const auto& p : r.parabolas) {
    nlohmann::json pj;
    parabola_json(pj, p);
    j["parabolas"].push_back(pj);
  }
  static const std::array<const char*, 3> names = {"p1", "p2", "p3"};
  j["curves"] = nlohmann::json::array();
  for (std::size_t i = 0; i < r.curve_fits.size() && i < names.size(); ++i) {
    const auto& f = r.curve_fits[i];
    j["curves"].push_back({{"name", names[i]},
                           {"a", f.curve.a},
                           {"b", f.curve.b},
                           {"c", f.curve.c},
                           {"degenerate", f.degenerate},
                           {"warning", f.warning}});
  }
  j["excluded"] = r.excluded;
  return j;
}

std::string report_text(const SurfaceFitReport& r) {
  std::ostringstream out;
  out << std::setprecision(6);
  out << "Per-eccentricity parabolas  T = p1 (sigma - p2)^2 + p3\n";
  for (const auto& p : r.parabolas) {
    out << "  theta=" << p.theta << "  p1=" << p.p1 << "  p2=" << p.p2 << "  p3=" << p.p3
        << "  used=" << p.n_used << "  excluded=" << p.n_excluded << '\n';
    double rms = 0.0;
    for (double e : p.residuals) rms += e * e;
    if (!p.residuals.empty()) rms = std::sqrt(rms / p.residuals.size());
    out << "    residual rms=" << rms << '\n';
    if (!p.warning.empty()) out << "    warning: " << p.warning << '\n';
  }
  out << "Parameter curves  p(theta) = a e^(b theta) + c\n";
  static const std::array<const char*, 3> names = {"p1", "p2", "p3"};
  for (std::size_t i = 0; i < r.curve_fits.size() && i < names.size(); ++i) {
    const auto& f = r.curve_fits[i];
    out << "  " << names[i] << ": a=" << f.curve.a << "  b=" << f.curve.b << "  c=" << f.curve.c
        << '\n';
    if (!f.warning.empty()) out << "    warning: " << f.warning << '\n';
  }
  out << "p1 constant (mean curvature): " << r.model.p1_constant << '\n';
  out << "Excluded outliers: " << r.excluded.size() << '\n';
  for (const auto& e : r.excluded) {
    out << "  theta=" << e.theta << " sigma=" << e.sigma << " T=" << e.T << " u=" << e.u << '\n';
  }
  return out.str();
}

}  // namespace stereofov::surfacefit
