#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stereofov/choice.hpp"
#include "stereofov/display.hpp"
#include "stereofov/image.hpp"
#include "stereofov/units.hpp"

namespace stereofov::stimulus {

enum class Orientation { horizontal, radial };

/// Parameters of one ring stimulus. The ring is centered on the fixation point
/// (the canvas center) with its mid-radius at `theta`.
struct RingSpec {
  Eccentricity theta;
  double width_deg = 0.0;
  double dot_frequency = 0.0;          // cycles per degree; two dots per cycle
  BlurSigma sigma;
  int corrugation_cycles = 1;          // periods per revolution (radial maps)
  double corrugation_frequency = 0.0;  // cycles per degree (horizontal maps)
  Orientation orientation = Orientation::radial;
  int phase_index = 0;                 // phase = phase_index * 0.4 pi
  Choice highlight_target = Choice::peaks;
  std::uint64_t seed = 0;

  double inner_radius_deg() const noexcept;
  double outer_radius_deg() const noexcept;
  double dot_size_deg() const noexcept { return 0.5 / dot_frequency; }
  double phase() const noexcept;
};

/// Texture scale (peak of the contrast sensitivity function): 4.1 / 1.8 / 1.3
/// cpd at 0 / 10 / 20 degrees. Other eccentricities need `interpolate`
/// (log-linear in frequency, constant beyond 20 degrees).
double csf_peak(Eccentricity theta, bool interpolate = false);

/// Corrugation frequency of peak depth sensitivity: 0.3 / 0.133 / 0.073 cpd.
double corrugation_peak(Eccentricity theta, bool interpolate = false);

/// Builds the ring parameters for one of the measured eccentricities. With
/// `free_theta`, other eccentricities use the 13-dot width rule, interpolated
/// peaks and the circumference rule for the corrugation count.
RingSpec make_ring_spec(Eccentricity theta, BlurSigma sigma, int phase_index, Choice highlight,
                        std::uint64_t seed, bool free_theta = false);

/// Square canvas side (pixels) that holds the ring plus highlight margin.
int canvas_size_px(const RingSpec& spec, const display::DisplayModel& d);

/// Random binary dot texture (0 = dark, 1 = bright, 0.5 background) confined
/// to the ring, with a dithered one-dot border band.
GrayImage render_dot_texture(const RingSpec& spec, const display::DisplayModel& d);

/// Pixels covered by ring dots in render_dot_texture (same seed, same layout).
Mask ring_mask(const RingSpec& spec, const display::DisplayModel& d);

struct PreblurOptions {
  bool recover_contrast = true;
  double radius_in_sigmas = 5.0;  // kernel half-width
};

/// Separable Gaussian convolution, mirror-reflected edges. sigma_px == 0 copies.
GrayImage gaussian_blur(const GrayImage& img, double sigma_px, double radius_in_sigmas = 5.0);

/// Gaussian pre-blur at `sigma` visual angle, then a linear stretch restoring
/// the pre-blur min/max inside `contrast_region` (the whole image when null).
GrayImage preblur(const GrayImage& img, BlurSigma sigma, const display::DisplayModel& d,
                  const Mask* contrast_region = nullptr, PreblurOptions opts = {});

struct DepthMap {
  ScalarField values;  // in [0, 1]
  Orientation orientation = Orientation::radial;
  int cycles = 1;
  std::string id;
};

DepthMap make_depth_map(const RingSpec& spec, const display::DisplayModel& d);

enum class Interpolation { bilinear, nearest };

struct StereoStimulus {
  GrayImage left;
  GrayImage right;
  std::optional<RingSpec> spec;
  Disparity requested_disparity;
  std::string depth_map_id;
  Mask ring;                     // empty when unknown
  std::vector<Pixel> markers;    // highlight tick centers
};

/// Right eye image by horizontal resampling of the left image:
///   right(u, v) = left(u + s * depth(u, v), v),  s = disparity in pixels.
/// Throws RangeError when |s| is not smaller than the image width.
StereoStimulus apply_disparity(const GrayImage& left, const DepthMap& depth, Disparity d_req,
                               const display::DisplayModel& dm,
                               Interpolation interp = Interpolation::bilinear);

/// Draws zero-disparity tick marks just outside the ring at the corrugation
/// extrema selected by the spec's highlight target.
StereoStimulus render_highlights(const StereoStimulus& stim, const display::DisplayModel& d);

/// Full pipeline: texture, pre-blur, depth map, warp, highlights.
StereoStimulus render_stimulus(const RingSpec& spec, Disparity d_req,
                               const display::DisplayModel& d,
                               Interpolation interp = Interpolation::bilinear);

/// The 19 measured (theta, sigma) pairs.
std::vector<std::pair<Eccentricity, BlurSigma>> condition_grid();
bool in_condition_grid(Eccentricity theta, BlurSigma sigma);

// -- half-split validation scenes ------------------------------------------

/// Procedural layered scene: textured background plane plus random textured
/// discs at depths in [near_m, far_m).
struct SceneConfig {
  double near_m = 0.6;
  double far_m = 4.0;
  int objects = 60;
  double min_object_deg = 1.5;
  double max_object_deg = 5.0;
  double dot_deg = 0.2;
  double blackout_deg = 15.0;
};

struct SceneGeometry {
  GrayImage texture;      // values in [0.1, 1]
  ScalarField depth_m;
  Pixel gaze;
  SceneConfig config;
};

SceneGeometry make_scene_geometry(std::uint64_t scene_seed, const display::DisplayModel& dm,
                                  const SceneConfig& cfg = {});

/// Vergence angle 2 atan(ipd / (2 z)) in arcminutes.
double vergence_arcmin(double ipd_mm, double depth_m);

/// Per-pixel disparity relative to the background plane, in arcminutes.
double relative_disparity_arcmin(double ipd_mm, double depth_m, double reference_depth_m);

struct ValidationScene {
  StereoStimulus stimulus;
  ScalarField disparity_arcmin;  // zero on the zero-IPD half and in the blackout
  Mask visible;                  // outside the blacked-out center
  Choice side_with_disparity = Choice::left;
  double ipd_mm = 0.0;
};

/// Half-split stereo pair: one half at 0 mm IPD, the other at `ipd_mm`; the
/// central disk up to cfg.blackout_deg is black in both eyes.
ValidationScene make_validation_scene(double ipd_mm, Choice side_with_disparity,
                                      std::uint64_t scene_seed, const display::DisplayModel& dm,
                                      const SceneConfig& cfg = {});
ValidationScene make_validation_scene(const SceneGeometry& geometry, double ipd_mm,
                                      Choice side_with_disparity,
                                      const display::DisplayModel& dm);

/// Counts of the distinct depths seen on one half outside the blackout.
struct DepthHistogram {
  std::vector<std::pair<double, long>> bins;  // (depth_m, pixel count), ascending depth
  long total = 0;
  double reference_depth_m = 1.0;
};

DepthHistogram visible_depth_histogram(const SceneGeometry& geometry, Choice side,
                                       const display::DisplayModel& dm);

/// Mean absolute relative disparity (arcmin) over the visible pixels of one half.
double effective_disparity_arcmin(const DepthHistogram& histogram, double ipd_mm);
double effective_disparity_arcmin(const SceneGeometry& geometry, double ipd_mm, Choice side,
                                  const display::DisplayModel& dm);

nlohmann::json stimulus_sidecar(const StereoStimulus& stim);
void to_json(nlohmann::json& j, const RingSpec& s);

}  // namespace stereofov::stimulus
