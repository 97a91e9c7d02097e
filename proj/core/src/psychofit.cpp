#include "stereofov/psychofit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "stereofov/errors.hpp"

namespace stereofov::psychofit {
namespace {

constexpr double kMinSlope = 0.05;
constexpr double kMaxSlope = 50.0;
constexpr int kMaxIterations = 300;
constexpr std::size_t kRefinedStarts = 4;

struct Bounds {
  double a_lo, a_hi, b_lo, b_hi;
};

struct Point {
  double log_x;  // -inf for x == 0
  double p;
  double w;
  bool zero;
};

struct Problem {
  std::vector<Point> points;
  Bounds bounds;
};

Problem make_problem(const PsychometricDataset& data) {
  Problem prob;
  double x_min = 0.0;
  double x_max = 0.0;
  for (const auto& r : data.rows) {
    prob.points.push_back(
        {r.intensity > 0.0 ? std::log(r.intensity) : 0.0, r.proportion(), double(r.n),
         r.intensity <= 0.0});
    if (r.intensity > 0.0) {
      x_min = x_min == 0.0 ? r.intensity : std::min(x_min, r.intensity);
      x_max = std::max(x_max, r.intensity);
    }
  }
  if (x_max <= 0.0) throw FitError("psychometric fit needs a positive intensity");
  prob.bounds = {std::log(x_min / 100.0), std::log(x_max * 100.0), std::log(kMinSlope),
                 std::log(kMaxSlope)};
  return prob;
}

struct Eval {
  double sse = 0.0;
  // J^T J and J^T r with r = sqrt(w) (p - F), J = sqrt(w) dF/d(a, b).
  double h00 = 0.0, h01 = 0.0, h11 = 0.0;
  double g0 = 0.0, g1 = 0.0;
};

Eval evaluate(const Problem& prob, double a, double b, bool with_jacobian) {
  Eval e;
  const double k = std::exp(b);
  for (const auto& pt : prob.points) {
    double f = 0.5;
    double da = 0.0;
    double db = 0.0;
    if (!pt.zero) {
      const double t = pt.log_x - a;
      const double z = std::exp(k * t);
      const double ez = 0.5 * std::exp(-z);
      f = 1.0 - ez;
      if (with_jacobian) {
        da = -ez * k * z;
        db = ez * k * z * t;
      }
    }
    const double r = pt.p - f;
    e.sse += pt.w * r * r;
    if (with_jacobian) {
      e.h00 += pt.w * da * da;
      e.h01 += pt.w * da * db;
      e.h11 += pt.w * db * db;
      e.g0 += pt.w * da * r;
      e.g1 += pt.w * db * r;
    }
  }
  return e;
}

struct Solution {
  double a, b, sse, gradient_norm;
  bool at_bound;
};

Solution levenberg_marquardt(const Problem& prob, double a, double b) {
  const Bounds& B = prob.bounds;
  a = std::clamp(a, B.a_lo, B.a_hi);
  b = std::clamp(b, B.b_lo, B.b_hi);
  Eval cur = evaluate(prob, a, b, true);
  double mu = 1e-3 * std::max({cur.h00, cur.h11, 1e-12});
  for (int it = 0; it < kMaxIterations; ++it) {
    if (std::hypot(cur.g0, cur.g1) < 1e-14) break;
    bool accepted = false;
    for (int tries = 0; tries < 40; ++tries) {
      const double m00 = cur.h00 + mu * (1.0 + cur.h00);
      const double m11 = cur.h11 + mu * (1.0 + cur.h11);
      const double det = m00 * m11 - cur.h01 * cur.h01;
      if (!(det > 0.0) || !std::isfinite(det)) {
        mu *= 10.0;
        continue;
      }
      const double sa = (m11 * cur.g0 - cur.h01 * cur.g1) / det;
      const double sb = (m00 * cur.g1 - cur.h01 * cur.g0) / det;
      const double na = std::clamp(a + sa, B.a_lo, B.a_hi);
      const double nb = std::clamp(b + sb, B.b_lo, B.b_hi);
      const Eval next = evaluate(prob, na, nb, true);
      if (next.sse <= cur.sse) {
        const double moved = std::abs(na - a) + std::abs(nb - b);
        a = na;
        b = nb;
        const bool stalled = moved < 1e-15 * (1.0 + std::abs(a) + std::abs(b)) ||
                             cur.sse - next.sse <= 1e-30;
        cur = next;
        mu = std::max(mu * 0.3, 1e-15);
        accepted = true;
        if (stalled && moved < 1e-13) it = kMaxIterations;
        break;
      }
      mu *= 10.0;
    }
    if (!accepted) break;
  }
  const bool at_bound = a <= B.a_lo || a >= B.a_hi || b <= B.b_lo || b >= B.b_hi;
  return {a, b, cur.sse, std::hypot(cur.g0, cur.g1), at_bound};
}

void check_fittable(const PsychometricDataset& data) {
  data.validate();
  if (data.rows.size() < 2) throw FitError("psychometric fit needs at least two intensities");
  const double p0 = data.rows.front().proportion();
  const bool flat = std::ranges::all_of(data.rows, [&](const DataRow& r) {
    return r.proportion() == p0;
  });
  if (flat) throw FitError("psychometric fit needs differing proportions");
}

FitResult fit_impl(const PsychometricDataset& data, std::optional<WeibullParams> warm) {
  check_fittable(data);
  const Problem prob = make_problem(data);
  const Bounds& B = prob.bounds;

  std::vector<std::pair<double, std::pair<double, double>>> starts;
  constexpr std::array<double, 5> kSlopes = {0.5, 1.0, 2.0, 4.0, 8.0};
  const double a_mid_lo = B.a_lo + std::log(100.0);
  const double a_mid_hi = B.a_hi - std::log(100.0);
  for (int i = 0; i < 5; ++i) {
    const double a = a_mid_lo + (a_mid_hi - a_mid_lo) * i / 4.0;
    for (double k : kSlopes) {
      const double b = std::log(k);
      starts.push_back({evaluate(prob, a, b, false).sse, {a, b}});
    }
  }
  std::ranges::stable_sort(starts, {}, &decltype(starts)::value_type::first);
  starts.resize(kRefinedStarts);
  if (warm) {
    starts.insert(starts.begin(), {0.0, {std::log(warm->lambda), std::log(warm->k)}});
  }

  std::optional<Solution> best;
  for (const auto& [sse0, ab] : starts) {
    const Solution s = levenberg_marquardt(prob, ab.first, ab.second);
    if (!best || s.sse < best->sse) best = s;
  }
  FitResult out;
  out.params = {std::exp(best->a), std::exp(best->b)};
  out.sse = best->sse;
  out.gradient_norm = best->gradient_norm;
  out.at_bound = best->at_bound;
  if (!std::isfinite(out.sse)) throw FitError("psychometric fit diverged");
  return out;
}

std::uint64_t replicate_seed(std::uint64_t seed, int i) {
  std::uint64_t x = seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(i) + 1;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

PsychometricDataset resample_rows(const PsychometricDataset& data, std::mt19937_64& rng) {
  PsychometricDataset out = data;
  for (auto& r : out.rows) {
    std::binomial_distribution<int> draw(r.n, r.proportion());
    r.c = draw(rng);
  }
  return out;
}

PsychometricDataset resample_trials(const PsychometricDataset& data, std::mt19937_64& rng) {
  std::vector<std::pair<double, bool>> trials;
  for (const auto& r : data.rows) {
    for (int i = 0; i < r.n; ++i) trials.emplace_back(r.intensity, i < r.c);
  }
  std::uniform_int_distribution<std::size_t> pick(0, trials.size() - 1);
  std::map<double, DataRow> rows;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& [x, ok] = trials[pick(rng)];
    auto& row = rows[x];
    row.intensity = x;
    ++row.n;
    row.c += ok ? 1 : 0;
  }
  PsychometricDataset out;
  for (auto& [x, row] : rows) out.rows.push_back(row);
  return out;
}

std::string fmt(double v) { return staircase::format_double(v); }

}  // namespace

void PsychometricDataset::validate() const {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.n < 1 || r.c < 0 || r.c > r.n) throw DomainError("dataset row needs 0 <= c <= n, n >= 1");
    if (!(r.intensity >= 0.0) || !std::isfinite(r.intensity)) {
      throw DomainError("dataset intensities must be finite and >= 0");
    }
    if (i > 0 && !(rows[i - 1].intensity < r.intensity)) {
      throw DomainError("dataset intensities must be strictly increasing");
    }
  }
}

int PsychometricDataset::total_trials() const noexcept {
  int total = 0;
  for (const auto& r : rows) total += r.n;
  return total;
}

PsychometricDataset tally(std::span<const staircase::TrialRecord> trials) {
  if (trials.empty()) throw DomainError("cannot tally an empty trial log");
  std::map<double, DataRow> rows;
  for (const auto& t : trials) {
    auto& row = rows[t.intensity];
    row.intensity = t.intensity;
    ++row.n;
    row.c += t.correct ? 1 : 0;
  }
  PsychometricDataset out;
  for (auto& [x, row] : rows) out.rows.push_back(row);
  return out;
}

FitResult fit_weibull_detailed(const PsychometricDataset& data) {
  return fit_impl(data, std::nullopt);
}

WeibullParams fit_weibull(const PsychometricDataset& data) {
  return fit_weibull_detailed(data).params;
}

double weight_from_u(double u) noexcept {
  if (!(u > 0.0)) return kMaxWeight;
  return std::min(1.0 / (u * u), kMaxWeight);
}

ThresholdEstimate bootstrap_threshold(const PsychometricDataset& data,
                                      const BootstrapOptions& opts) {
  if (opts.n_boot < 2) throw DomainError("bootstrap needs at least two replicates");
  const FitResult base = fit_weibull_detailed(data);
  ThresholdEstimate est;
  est.T = threshold_from_fit(base.params);

  std::vector<double> thresholds;
  thresholds.reserve(static_cast<std::size_t>(opts.n_boot));
  for (int i = 0; i < opts.n_boot; ++i) {
    std::mt19937_64 rng(replicate_seed(opts.seed, i));
    const PsychometricDataset replica = opts.scheme == BootstrapScheme::parametric_rows
                                            ? resample_rows(data, rng)
                                            : resample_trials(data, rng);
    try {
      const FitResult r = fit_impl(replica, base.params);
      const double t = threshold_from_fit(r.params);
      if (std::isfinite(t)) thresholds.push_back(t);
    } catch (const FitError&) {
    }
  }
  est.n_boot_ok = static_cast<int>(thresholds.size());
  if (2 * est.n_boot_ok < opts.n_boot || est.n_boot_ok < 2) {
    throw FitError("unstable estimate: " + std::to_string(opts.n_boot - est.n_boot_ok) + " of " +
                   std::to_string(opts.n_boot) + " bootstrap refits failed");
  }
  double mean = 0.0;
  for (double t : thresholds) mean += t;
  mean /= static_cast<double>(thresholds.size());
  double var = 0.0;
  for (double t : thresholds) var += (t - mean) * (t - mean);
  var /= static_cast<double>(thresholds.size() - 1);
  est.T_sigma = std::sqrt(var);
  est.u = est.T > 0.0 ? est.T_sigma / est.T : std::numeric_limits<double>::infinity();
  est.outlier = est.u > kOutlierU;
  est.weight = weight_from_u(est.u);
  return est;
}

std::string estimates_csv(std::span<const ThresholdEstimate> estimates) {
  std::string out = kEstimateCsvHeader;
  out += '\n';
  for (const auto& e : estimates) {
    out += fmt(e.theta) + ',' + fmt(e.sigma) + ',' + fmt(e.T) + ',' + fmt(e.T_sigma) + ',' +
           fmt(e.u) + ',' + fmt(e.weight) + ',' + (e.outlier ? "1" : "0") + '\n';
  }
  return out;
}

std::vector<ThresholdEstimate> parse_estimates_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DomainError("estimate table is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kEstimateCsvHeader) throw DomainError("unexpected estimate header: " + line);
  std::vector<ThresholdEstimate> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream fields(line);
    std::string cell;
    while (std::getline(fields, cell, ',')) f.push_back(cell);
    if (f.size() != 7) {
      throw DomainError("estimate line " + std::to_string(line_no) + ": expected 7 fields");
    }
    try {
      ThresholdEstimate e;
      e.theta = std::stod(f[0]);
      e.sigma = std::stod(f[1]);
      e.T = std::stod(f[2]);
      e.T_sigma = std::stod(f[3]);
      e.u = std::stod(f[4]);
      e.weight = std::stod(f[5]);
      if (f[6] == "1" || f[6] == "true") {
        e.outlier = true;
      } else if (f[6] == "0" || f[6] == "false") {
        e.outlier = false;
      } else {
        throw DomainError("outlier must be 0 or 1");
      }
      out.push_back(e);
    } catch (const std::logic_error& e) {
      throw DomainError("estimate line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void to_json(nlohmann::json& j, const ThresholdEstimate& e) {
  j = nlohmann::json{{"theta", e.theta}, {"sigma", e.sigma},   {"T", e.T},
                     {"T_sigma", e.T_sigma}, {"u", e.u},       {"weight", e.weight},
                     {"outlier", e.outlier}, {"n_boot_ok", e.n_boot_ok}};
}

void from_json(const nlohmann::json& j, ThresholdEstimate& e) {
  e.theta = j.at("theta").get<double>();
  e.sigma = j.at("sigma").get<double>();
  e.T = j.at("T").get<double>();
  e.T_sigma = j.value("T_sigma", 0.0);
  e.u = j.value("u", 0.0);
  e.weight = j.value("weight", weight_from_u(e.u));
  e.outlier = j.value("outlier", e.u > kOutlierU);
  e.n_boot_ok = j.value("n_boot_ok", 0);
}

}  // namespace stereofov::psychofit
