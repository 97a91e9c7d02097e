#include "stereofov/stimulus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "stereofov/errors.hpp"

namespace stereofov::stimulus {
namespace {

constexpr std::array<double, 3> kMeasuredThetas = {0.0, 10.0, 20.0};
constexpr std::array<double, 3> kCsfPeaks = {4.1, 1.8, 1.3};
constexpr std::array<double, 3> kCorrugationPeaks = {0.3, 0.133, 0.073};
constexpr std::array<double, 3> kRingWidths = {6.7, 3.8, 5.0};
constexpr std::array<int, 3> kCorrugationCycles = {2, 8, 9};
constexpr double kPhaseStep = 0.4 * kPi;
constexpr int kPhaseMaps = 5;
constexpr int kDotsAcrossRing = 13;

// Highlight ticks sit this far outside the ring's outer edge (degrees).
constexpr double kTickStart = 0.3;
constexpr double kTickEnd = 0.8;
constexpr double kCanvasMargin = 1.0;

int measured_index(double theta) {
  for (std::size_t i = 0; i < kMeasuredThetas.size(); ++i) {
    if (theta == kMeasuredThetas[i]) return static_cast<int>(i);
  }
  return -1;
}

double log_interp(const std::array<double, 3>& values, double theta) {
  if (theta >= kMeasuredThetas.back()) return values.back();
  const std::size_t i = theta < kMeasuredThetas[1] ? 0 : 1;
  const double t = (theta - kMeasuredThetas[i]) / (kMeasuredThetas[i + 1] - kMeasuredThetas[i]);
  return std::exp((1.0 - t) * std::log(values[i]) + t * std::log(values[i + 1]));
}

double tabulated(const std::array<double, 3>& values, double theta, bool interpolate,
                 const char* what) {
  if (!(theta >= 0.0)) throw DomainError(std::string(what) + ": eccentricity must be >= 0");
  const int idx = measured_index(theta);
  if (idx >= 0) return values[static_cast<std::size_t>(idx)];
  if (!interpolate) {
    throw DomainError(std::string(what) + ": only 0, 10 and 20 degrees are tabulated");
  }
  return log_interp(values, theta);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double hash_unit(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
  std::uint64_t h = splitmix64(a);
  h = splitmix64(h ^ b);
  h = splitmix64(h ^ c);
  h = splitmix64(h ^ d);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Dot grid anchored at the canvas center; one bright bit and one border-toggle
// bit per dot, drawn in row-major order from the spec's seed.
struct DotLayout {
  int size = 0;
  double center = 0.0;
  double dot_px = 0.0;
  int first = 0;  // dot index of pixel 0 (same on both axes)
  int count = 0;
  std::vector<std::uint8_t> bright;
  std::vector<std::uint8_t> member;

  int dot_index(int px) const {
    return static_cast<int>(std::floor((px - center) / dot_px)) - first;
  }
  std::size_t flat(int ix, int iy) const {
    return static_cast<std::size_t>(iy) * static_cast<std::size_t>(count) +
           static_cast<std::size_t>(ix);
  }
};

DotLayout make_layout(const RingSpec& spec, const display::DisplayModel& d) {
  d.validate();
  DotLayout L;
  L.dot_px = spec.dot_size_deg() * d.ppd;
  if (L.dot_px < 1.0) {
    std::ostringstream msg;
    msg << "dot size " << L.dot_px << " px is below one pixel at " << d.ppd << " ppd";
    throw ResolutionError(msg.str());
  }
  L.size = canvas_size_px(spec, d);
  L.center = 0.5 * (L.size - 1);
  L.first = static_cast<int>(std::floor((0.0 - L.center) / L.dot_px));
  const int last = static_cast<int>(std::floor((L.size - 1 - L.center) / L.dot_px));
  L.count = last - L.first + 1;
  L.bright.assign(static_cast<std::size_t>(L.count) * static_cast<std::size_t>(L.count), 0);
  L.member.assign(L.bright.size(), 0);

  const double r_in = spec.inner_radius_deg();
  const double r_out = spec.outer_radius_deg();
  const double half_dot = 0.5 * spec.dot_size_deg();

  std::mt19937_64 rng(spec.seed);
  for (int iy = 0; iy < L.count; ++iy) {
    for (int ix = 0; ix < L.count; ++ix) {
      const std::uint64_t bits = rng();
      const bool bright = (bits >> 63) != 0;
      const bool toggle = ((bits >> 62) & 1u) != 0;
      const double cx = (L.first + ix + 0.5) * L.dot_px;
      const double cy = (L.first + iy + 0.5) * L.dot_px;
      const double r = std::hypot(cx, cy) / d.ppd;

      bool in_band = std::abs(r - r_out) < half_dot;
      if (r_in > 0.0) in_band = in_band || std::abs(r - r_in) < half_dot;
      const bool inside = r >= r_in && r <= r_out;
      const bool member = in_band ? toggle : inside;

      L.bright[L.flat(ix, iy)] = bright ? 1 : 0;
      L.member[L.flat(ix, iy)] = member ? 1 : 0;
    }
  }
  return L;
}

template <class F>
void for_each_dot_pixel(const DotLayout& L, F&& f) {
  std::vector<int> idx(static_cast<std::size_t>(L.size));
  for (int p = 0; p < L.size; ++p) idx[static_cast<std::size_t>(p)] = L.dot_index(p);
  for (int y = 0; y < L.size; ++y) {
    const int iy = idx[static_cast<std::size_t>(y)];
    for (int x = 0; x < L.size; ++x) {
      f(x, y, L.flat(idx[static_cast<std::size_t>(x)], iy));
    }
  }
}

void draw_segment(GrayImage& img, Pixel a, Pixel b, double half_width, double value) {
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - half_width)));
  const int x1 = std::min(img.width() - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + half_width)));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - half_width)));
  const int y1 = std::min(img.height() - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + half_width)));
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      double t = len2 > 0.0 ? ((x - a.x) * dx + (y - a.y) * dy) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const double ex = a.x + t * dx - x;
      const double ey = a.y + t * dy - y;
      if (ex * ex + ey * ey <= half_width * half_width) img.at(x, y) = value;
    }
  }
}

std::string orientation_name(Orientation o) {
  return o == Orientation::horizontal ? "horizontal" : "radial";
}

}  // namespace

double RingSpec::inner_radius_deg() const noexcept {
  return std::max(0.0, theta.value - 0.5 * width_deg);
}

double RingSpec::outer_radius_deg() const noexcept {
  return theta.value == 0.0 ? 0.5 * width_deg : theta.value + 0.5 * width_deg;
}

double RingSpec::phase() const noexcept {
  const int k = ((phase_index % kPhaseMaps) + kPhaseMaps) % kPhaseMaps;
  return k * kPhaseStep;
}

double csf_peak(Eccentricity theta, bool interpolate) {
  return tabulated(kCsfPeaks, theta.value, interpolate, "csf_peak");
}

double corrugation_peak(Eccentricity theta, bool interpolate) {
  return tabulated(kCorrugationPeaks, theta.value, interpolate, "corrugation_peak");
}

RingSpec make_ring_spec(Eccentricity theta, BlurSigma sigma, int phase_index, Choice highlight,
                        std::uint64_t seed, bool free_theta) {
  if (sigma.value < 0.0) throw DomainError("blur sigma must be >= 0");
  if (highlight != Choice::peaks && highlight != Choice::troughs) {
    throw DomainError("highlight target must be peaks or troughs");
  }
  const int idx = measured_index(theta.value);
  if (idx < 0 && !free_theta) {
    throw DomainError("ring stimuli exist for 0, 10 and 20 degrees only");
  }

  RingSpec s;
  s.theta = theta;
  s.sigma = sigma;
  s.phase_index = ((phase_index % kPhaseMaps) + kPhaseMaps) % kPhaseMaps;
  s.highlight_target = highlight;
  s.seed = seed;
  s.dot_frequency = csf_peak(theta, true);
  s.corrugation_frequency = corrugation_peak(theta, true);

  if (idx >= 0) {
    s.width_deg = kRingWidths[static_cast<std::size_t>(idx)];
    s.corrugation_cycles = kCorrugationCycles[static_cast<std::size_t>(idx)];
  } else {
    s.width_deg = kDotsAcrossRing * 0.5 / s.dot_frequency;
    s.corrugation_cycles = std::max(
        1, static_cast<int>(std::lround(2.0 * kPi * theta.value * s.corrugation_frequency)));
  }
  if (theta.value == 0.0) {
    s.orientation = Orientation::horizontal;
    s.width_deg = kRingWidths[0];
    s.corrugation_cycles = kCorrugationCycles[0];
  } else {
    s.orientation = Orientation::radial;
  }
  return s;
}

int canvas_size_px(const RingSpec& spec, const display::DisplayModel& d) {
  const double half = (spec.outer_radius_deg() + kCanvasMargin) * d.ppd;
  return 2 * static_cast<int>(std::ceil(half)) + 1;
}

GrayImage render_dot_texture(const RingSpec& spec, const display::DisplayModel& d) {
  const DotLayout L = make_layout(spec, d);
  GrayImage img(L.size, L.size, 0.5);
  for_each_dot_pixel(L, [&](int x, int y, std::size_t dot) {
    if (L.member[dot]) img.at(x, y) = L.bright[dot] ? 1.0 : 0.0;
  });
  return img;
}

Mask ring_mask(const RingSpec& spec, const display::DisplayModel& d) {
  const DotLayout L = make_layout(spec, d);
  Mask m(L.size, L.size, 0);
  for_each_dot_pixel(L, [&](int x, int y, std::size_t dot) { m.at(x, y) = L.member[dot]; });
  return m;
}

DepthMap make_depth_map(const RingSpec& spec, const display::DisplayModel& d) {
  d.validate();
  const int size = canvas_size_px(spec, d);
  const double c = 0.5 * (size - 1);
  const double phase = spec.phase();

  DepthMap map;
  map.orientation = spec.orientation;
  map.cycles = spec.corrugation_cycles;
  map.values = ScalarField(size, size);
  if (spec.orientation == Orientation::horizontal) {
    const double k = 2.0 * kPi * spec.corrugation_frequency / d.ppd;
    for (int y = 0; y < size; ++y) {
      const double v = 0.5 + 0.5 * std::cos(k * (y - c) + phase);
      for (double& px : map.values.row(y)) px = v;
    }
  } else {
    const double w = spec.corrugation_cycles;
    for (int y = 0; y < size; ++y) {
      auto row = map.values.row(y);
      for (int x = 0; x < size; ++x) {
        const double angle = std::atan2(y - c, x - c);
        row[static_cast<std::size_t>(x)] = 0.5 + 0.5 * std::cos(w * angle + phase);
      }
    }
  }
  std::ostringstream id;
  id << "theta" << spec.theta.value << "_w" << spec.corrugation_cycles << "_"
     << orientation_name(spec.orientation) << "_p"
     << ((spec.phase_index % kPhaseMaps) + kPhaseMaps) % kPhaseMaps;
  map.id = id.str();
  return map;
}

StereoStimulus apply_disparity(const GrayImage& left, const DepthMap& depth, Disparity d_req,
                               const display::DisplayModel& dm, Interpolation interp) {
  if (!left.same_shape(depth.values)) throw DomainError("depth map shape differs from image");
  const double shift = display::arcmin_to_px(dm, d_req.value);
  if (!std::isfinite(shift) || std::abs(shift) >= left.width()) {
    throw RangeError("requested disparity shifts by the full image width or more");
  }
  const int w = left.width();
  GrayImage right(w, left.height());
  for (int y = 0; y < left.height(); ++y) {
    const auto src = left.row(y);
    const auto dep = depth.values.row(y);
    auto dst = right.row(y);
    for (int x = 0; x < w; ++x) {
      const double xs = x + shift * dep[static_cast<std::size_t>(x)];
      if (interp == Interpolation::nearest) {
        const int xi = std::clamp(static_cast<int>(std::lround(xs)), 0, w - 1);
        dst[static_cast<std::size_t>(x)] = src[static_cast<std::size_t>(xi)];
        continue;
      }
      const double fx = std::floor(xs);
      const double t = xs - fx;
      const int x0 = std::clamp(static_cast<int>(fx), 0, w - 1);
      const int x1 = std::clamp(static_cast<int>(fx) + 1, 0, w - 1);
      dst[static_cast<std::size_t>(x)] =
          t == 0.0 ? src[static_cast<std::size_t>(x0)]
                   : (1.0 - t) * src[static_cast<std::size_t>(x0)] +
                         t * src[static_cast<std::size_t>(x1)];
    }
  }
  StereoStimulus out;
  out.left = left;
  out.right = std::move(right);
  out.requested_disparity = d_req;
  out.depth_map_id = depth.id;
  return out;
}

StereoStimulus render_highlights(const StereoStimulus& stim, const display::DisplayModel& d) {
  if (!stim.spec) throw DomainError("render_highlights needs the ring spec");
  const RingSpec& spec = *stim.spec;
  StereoStimulus out = stim;
  out.markers.clear();

  const double c = 0.5 * (out.left.width() - 1);
  const double r0 = (spec.outer_radius_deg() + kTickStart) * d.ppd;
  const double r1 = (spec.outer_radius_deg() + kTickEnd) * d.ppd;
  const double half_width = std::max(0.75, 0.04 * d.ppd);
  const bool troughs = spec.highlight_target == Choice::troughs;
  const double phase = spec.phase();

  auto tick = [&](Pixel a, Pixel b) {
    draw_segment(out.left, a, b, half_width, 1.0);
    draw_segment(out.right, a, b, half_width, 1.0);
    out.markers.push_back({0.5 * (a.x + b.x), 0.5 * (a.y + b.y)});
  };

  if (spec.orientation == Orientation::radial) {
    const double w = spec.corrugation_cycles;
    for (int j = 0; j < spec.corrugation_cycles; ++j) {
      const double angle = (2.0 * kPi * j + (troughs ? kPi : 0.0) - phase) / w;
      const double ux = std::cos(angle);
      const double uy = std::sin(angle);
      tick({c + r0 * ux, c + r0 * uy}, {c + r1 * ux, c + r1 * uy});
    }
  } else {
    // Rows where cos(2 pi f y + phase) is +1 (peaks) or -1 (troughs).
    const double period_px = d.ppd / spec.corrugation_frequency;
    const double offset = (troughs ? 0.5 : 0.0) - phase / (2.0 * kPi);
    const double extent = spec.outer_radius_deg() * d.ppd;
    const int jmin = static_cast<int>(std::floor(-extent / period_px - offset)) - 1;
    const int jmax = static_cast<int>(std::ceil(extent / period_px - offset)) + 1;
    for (int j = jmin; j <= jmax; ++j) {
      const double dy = (j + offset) * period_px;
      if (std::abs(dy) > extent) continue;
      tick({c - r1, c + dy}, {c - r0, c + dy});
      tick({c + r0, c + dy}, {c + r1, c + dy});
    }
  }
  return out;
}

StereoStimulus render_stimulus(const RingSpec& spec, Disparity d_req,
                               const display::DisplayModel& d, Interpolation interp) {
  const GrayImage texture = render_dot_texture(spec, d);
  Mask ring = ring_mask(spec, d);
  const GrayImage blurred = preblur(texture, spec.sigma, d, &ring);
  const DepthMap depth = make_depth_map(spec, d);
  StereoStimulus stim = apply_disparity(blurred, depth, d_req, d, interp);
  stim.spec = spec;
  stim.ring = std::move(ring);
  return render_highlights(stim, d);
}

std::vector<std::pair<Eccentricity, BlurSigma>> condition_grid() {
  static const std::array<std::vector<double>, 3> sigmas = {
      std::vector<double>{0.0, 3.0, 6.0, 9.0, 12.0, 15.0},
      std::vector<double>{0.0, 2.9, 5.8, 8.7, 11.6, 14.6},
      std::vector<double>{0.0, 2.6, 5.3, 8.0, 10.6, 13.3, 26.6}};
  std::vector<std::pair<Eccentricity, BlurSigma>> grid;
  for (std::size_t i = 0; i < kMeasuredThetas.size(); ++i) {
    for (double s : sigmas[i]) grid.emplace_back(Eccentricity{kMeasuredThetas[i]}, BlurSigma{s});
  }
  return grid;
}

bool in_condition_grid(Eccentricity theta, BlurSigma sigma) {
  for (const auto& [t, s] : condition_grid()) {
    if (std::abs(t.value - theta.value) < 1e-9 && std::abs(s.value - sigma.value) < 1e-9) {
      return true;
    }
  }
  return false;
}

// -- validation scenes --------------------------------------------------------

SceneGeometry make_scene_geometry(std::uint64_t scene_seed, const display::DisplayModel& dm,
                                  const SceneConfig& cfg) {
  dm.validate();
  if (!(cfg.near_m > 0.0) || !(cfg.far_m > cfg.near_m)) {
    throw DomainError("scene depth range must satisfy 0 < near < far");
  }
  const double dot_px = cfg.dot_deg * dm.ppd;
  if (dot_px < 1.0) throw ResolutionError("scene texture dots are below one pixel");

  SceneGeometry g;
  g.config = cfg;
  g.gaze = dm.center();
  g.texture = GrayImage(dm.width_px, dm.height_px);
  g.depth_m = ScalarField(dm.width_px, dm.height_px, cfg.far_m);

  std::vector<int> layer(g.texture.size(), 0);  // 0 = background plane

  struct Disc {
    double x, y, r, z;
  };
  std::mt19937_64 rng(scene_seed);
  std::uniform_real_distribution<double> ux(0.0, dm.width_px - 1.0);
  std::uniform_real_distribution<double> uy(0.0, dm.height_px - 1.0);
  std::uniform_real_distribution<double> ud(cfg.min_object_deg, cfg.max_object_deg);
  std::uniform_real_distribution<double> uz(cfg.near_m, cfg.far_m);
  std::vector<Disc> discs;
  for (int i = 0; i < cfg.objects; ++i) {
    Disc disc{ux(rng), uy(rng), 0.5 * ud(rng) * dm.ppd, uz(rng)};
    discs.push_back(disc);
  }
  // Painter's order: far discs first.
  std::vector<int> order(discs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::ranges::sort(order, [&](int a, int b) { return discs[static_cast<std::size_t>(a)].z > discs[static_cast<std::size_t>(b)].z; });
  for (int id : order) {
    const Disc& disc = discs[static_cast<std::size_t>(id)];
    const int x0 = std::max(0, static_cast<int>(disc.x - disc.r));
    const int x1 = std::min(dm.width_px - 1, static_cast<int>(disc.x + disc.r) + 1);
    const int y0 = std::max(0, static_cast<int>(disc.y - disc.r));
    const int y1 = std::min(dm.height_px - 1, static_cast<int>(disc.y + disc.r) + 1);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (std::hypot(x - disc.x, y - disc.y) > disc.r) continue;
        g.depth_m.at(x, y) = disc.z;
        layer[static_cast<std::size_t>(y) * dm.width_px + x] = id + 1;
      }
    }
  }

  for (int y = 0; y < dm.height_px; ++y) {
    for (int x = 0; x < dm.width_px; ++x) {
      const int id = layer[static_cast<std::size_t>(y) * dm.width_px + x];
      // Each layer carries its own dot texture; values stay in [0.1, 1] so
      // that 0 marks the blacked-out center only.
      const auto ix = static_cast<std::int64_t>(std::floor(x / dot_px));
      const auto iy = static_cast<std::int64_t>(std::floor(y / dot_px));
      const double u = hash_unit(scene_seed, static_cast<std::uint64_t>(id),
                                 static_cast<std::uint64_t>(ix), static_cast<std::uint64_t>(iy));
      g.texture.at(x, y) = 0.1 + 0.9 * u;
    }
  }
  return g;
}

double vergence_arcmin(double ipd_mm, double depth_m) {
  if (!(depth_m > 0.0)) throw DomainError("depth must be positive");
  const double rad = 2.0 * std::atan((ipd_mm / 1000.0) / (2.0 * depth_m));
  return rad * 180.0 / kPi * kArcminPerDegree;
}

double relative_disparity_arcmin(double ipd_mm, double depth_m, double reference_depth_m) {
  return vergence_arcmin(ipd_mm, depth_m) - vergence_arcmin(ipd_mm, reference_depth_m);
}

namespace {

bool on_side(int x, int width, Choice side) {
  const bool left_half = 2 * x < width;
  return side == Choice::left ? left_half : !left_half;
}

}  // namespace

ValidationScene make_validation_scene(const SceneGeometry& g, double ipd_mm,
                                      Choice side_with_disparity,
                                      const display::DisplayModel& dm) {
  if (!(ipd_mm >= 0.0) || ipd_mm > 20.0) throw DomainError("ipd must lie in [0, 20] mm");
  if (side_with_disparity != Choice::left && side_with_disparity != Choice::right) {
    throw DomainError("side must be left or right");
  }
  const int w = g.texture.width();
  const int h = g.texture.height();

  ValidationScene scene;
  scene.ipd_mm = ipd_mm;
  scene.side_with_disparity = side_with_disparity;
  scene.visible = Mask(w, h, 0);
  scene.disparity_arcmin = ScalarField(w, h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double ecc =
          display::eccentricity_of(dm, g.gaze, {static_cast<double>(x), static_cast<double>(y)})
              .value;
      const bool visible = ecc >= g.config.blackout_deg;
      scene.visible.at(x, y) = visible ? 1 : 0;
      if (visible && ipd_mm > 0.0 && on_side(x, w, side_with_disparity)) {
        scene.disparity_arcmin.at(x, y) =
            relative_disparity_arcmin(ipd_mm, g.depth_m.at(x, y), g.config.far_m);
      }
    }
  }

  GrayImage left = g.texture;
  GrayImage right(w, h);
  for (int y = 0; y < h; ++y) {
    const auto src = g.texture.row(y);
    for (int x = 0; x < w; ++x) {
      double v = src[static_cast<std::size_t>(x)];
      const double dpx = display::arcmin_to_px(dm, scene.disparity_arcmin.at(x, y));
      if (dpx != 0.0) {
        const double xs = x + dpx;
        const double fx = std::floor(xs);
        const double t = xs - fx;
        const int x0 = std::clamp(static_cast<int>(fx), 0, w - 1);
        const int x1 = std::clamp(static_cast<int>(fx) + 1, 0, w - 1);
        v = (1.0 - t) * src[static_cast<std::size_t>(x0)] + t * src[static_cast<std::size_t>(x1)];
      }
      right.at(x, y) = v;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (scene.visible.at(x, y)) continue;
      left.at(x, y) = 0.0;
      right.at(x, y) = 0.0;
    }
  }
  scene.stimulus.left = std::move(left);
  scene.stimulus.right = std::move(right);
  std::ostringstream id;
  id << "scene_ipd" << ipd_mm << "_" << to_string(side_with_disparity);
  scene.stimulus.depth_map_id = id.str();
  return scene;
}

ValidationScene make_validation_scene(double ipd_mm, Choice side_with_disparity,
                                      std::uint64_t scene_seed, const display::DisplayModel& dm,
                                      const SceneConfig& cfg) {
  return make_validation_scene(make_scene_geometry(scene_seed, dm, cfg), ipd_mm,
                               side_with_disparity, dm);
}

DepthHistogram visible_depth_histogram(const SceneGeometry& g, Choice side,
                                       const display::DisplayModel& dm) {
  if (side != Choice::left && side != Choice::right) {
    throw DomainError("side must be left or right");
  }
  std::vector<double> depths;
  const int w = g.depth_m.width();
  for (int y = 0; y < g.depth_m.height(); ++y) {
    for (int x = 0; x < w; ++x) {
      if (!on_side(x, w, side)) continue;
      const double ecc =
          display::eccentricity_of(dm, g.gaze, {static_cast<double>(x), static_cast<double>(y)})
              .value;
      if (ecc < g.config.blackout_deg) continue;
      depths.push_back(g.depth_m.at(x, y));
    }
  }
  std::ranges::sort(depths);
  DepthHistogram hist;
  hist.total = static_cast<long>(depths.size());
  hist.reference_depth_m = g.config.far_m;
  for (double z : depths) {
    if (hist.bins.empty() || hist.bins.back().first != z) hist.bins.emplace_back(z, 0);
    ++hist.bins.back().second;
  }
  return hist;
}

double effective_disparity_arcmin(const DepthHistogram& hist, double ipd_mm) {
  if (hist.total == 0 || ipd_mm <= 0.0) return 0.0;
  double acc = 0.0;
  for (const auto& [z, count] : hist.bins) {
    acc += static_cast<double>(count) *
           std::abs(relative_disparity_arcmin(ipd_mm, z, hist.reference_depth_m));
  }
  return acc / static_cast<double>(hist.total);
}

double effective_disparity_arcmin(const SceneGeometry& g, double ipd_mm, Choice side,
                                  const display::DisplayModel& dm) {
  return effective_disparity_arcmin(visible_depth_histogram(g, side, dm), ipd_mm);
}

void to_json(nlohmann::json& j, const RingSpec& s) {
  j = nlohmann::json{{"theta", s.theta.value},
                     {"width_deg", s.width_deg},
                     {"dot_frequency", s.dot_frequency},
                     {"sigma", s.sigma.value},
                     {"corrugation_cycles", s.corrugation_cycles},
                     {"corrugation_frequency", s.corrugation_frequency},
                     {"orientation", orientation_name(s.orientation)},
                     {"phase_index", s.phase_index},
                     {"highlight_target", std::string(to_string(s.highlight_target))},
                     {"seed", s.seed}};
}

nlohmann::json stimulus_sidecar(const StereoStimulus& stim) {
  nlohmann::json j;
  j["spec"] = stim.spec ? nlohmann::json(*stim.spec) : nlohmann::json(nullptr);
  j["requested_disparity"] = stim.requested_disparity.value;
  j["seed"] = stim.spec ? nlohmann::json(stim.spec->seed) : nlohmann::json(nullptr);
  j["depth_map_id"] = stim.depth_map_id;
  j["width"] = stim.left.width();
  j["height"] = stim.left.height();
  nlohmann::json markers = nlohmann::json::array();
  for (const auto& m : stim.markers) markers.push_back({m.x, m.y});
  j["markers"] = markers;
  return j;
}

}  // namespace stereofov::stimulus
