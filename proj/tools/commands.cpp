#include "commands.hpp"

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "stereofov/errors.hpp"
#include "stereofov/foveation.hpp"
#include "stereofov/image_io.hpp"
#include "stereofov/model.hpp"
#include "stereofov/service.hpp"
#include "stereofov/simobserver.hpp"
#include "stereofov/stimulus.hpp"
#include "stereofov/surfacefit.hpp"
#include "stereofov/validation.hpp"

namespace stereofov::cli {
namespace fs = std::filesystem;

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a * 0x9E3779B97F4A7C15ull ^ (b + 0x632BE59BD9B4E019ull);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

model::SurfaceModel model_or_default(const std::string& path) {
  return path.empty() ? model::default_paper_model() : model::load_model(path);
}

std::string g6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void write_or_print(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    ensure_parent(path);
    io::write_text(path, text);
  }
}

}  // namespace

void add_gen_stimulus(CLI::App& app) {
  struct Opts {
    double theta = 0, sigma = 0, disparity = 0, ppd = 30;
    std::uint64_t seed = 0;
    int phase = 0;
    std::string highlight = "peaks", out_dir = ".", prefix = "stimulus", interp = "bilinear";
    bool free_theta = false;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("gen-stimulus", "Render one ring stimulus as PNGs plus sidecar");
  cmd->add_option("--theta", o->theta, "Ring eccentricity (deg)")->required();
  cmd->add_option("--sigma", o->sigma, "Pre-blur sigma (arcmin)")->required();
  cmd->add_option("--disparity", o->disparity, "Peak disparity (arcmin)")->required();
  cmd->add_option("--seed", o->seed, "Dot texture seed");
  cmd->add_option("--phase", o->phase, "Depth-map phase index 0..4")->check(CLI::Range(0, 4));
  cmd->add_option("--highlight", o->highlight, "peaks or troughs")
      ->check(CLI::IsMember({"peaks", "troughs"}));
  cmd->add_option("--ppd", o->ppd, "Display pixels per degree")->check(CLI::PositiveNumber);
  cmd->add_option("--interp", o->interp, "Warp interpolation")
      ->check(CLI::IsMember({"bilinear", "nearest"}));
  cmd->add_option("--out-dir", o->out_dir, "Output directory");
  cmd->add_option("--prefix", o->prefix, "Output file prefix");
  cmd->add_flag("--free-theta", o->free_theta, "Allow eccentricities outside the measured set");
  cmd->callback([o] {
    if (!o->free_theta && !stimulus::in_condition_grid(Eccentricity{o->theta}, BlurSigma{o->sigma})) {
      std::ostringstream msg;
      msg << "(theta=" << o->theta << ", sigma=" << o->sigma
          << ") is not a measured condition; pass --free-theta to render it anyway";
      throw DomainError(msg.str());
    }
    display::DisplayModel d;
    d.ppd = o->ppd;
    const auto spec =
        stimulus::make_ring_spec(Eccentricity{o->theta}, BlurSigma{o->sigma}, o->phase,
                                 *parse_choice(o->highlight), o->seed, o->free_theta);
    const auto interp = o->interp == "nearest" ? stimulus::Interpolation::nearest
                                               : stimulus::Interpolation::bilinear;
    const auto stim = stimulus::render_stimulus(spec, Disparity{o->disparity}, d, interp);
    const fs::path dir = o->out_dir;
    fs::create_directories(dir);
    io::write_png(dir / (o->prefix + "_left.png"), stim.left);
    io::write_png(dir / (o->prefix + "_right.png"), stim.right);
    io::write_png(dir / (o->prefix + "_sbs.png"), side_by_side(stim.left, stim.right));
    io::write_text(dir / (o->prefix + ".json"), stimulus::stimulus_sidecar(stim).dump(2) + "\n");
    std::cout << (dir / (o->prefix + "_left.png")).string() << '\n'
              << (dir / (o->prefix + "_right.png")).string() << '\n'
              << (dir / (o->prefix + "_sbs.png")).string() << '\n'
              << (dir / (o->prefix + ".json")).string() << '\n';
  });
}

void add_run_sim(CLI::App& app) {
  struct Opts {
    std::string model, out;
    int observers = 11, trials = 60, n_boot = 100;
    double slope = 1.5, lapse = 0.0;
    std::uint64_t seed = 1;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("run-sim", "Simulate staircase sessions for every condition");
  cmd->add_option("--model", o->model, "Ground-truth model JSON (default: published model)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--observers", o->observers, "Simulated observers per condition")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--trials", o->trials, "Trials per session")->check(CLI::PositiveNumber);
  cmd->add_option("--n-boot", o->n_boot, "Bootstrap replicates")->check(CLI::Range(2, 100000));
  cmd->add_option("--slope", o->slope, "Observer Weibull slope")->check(CLI::PositiveNumber);
  cmd->add_option("--lapse", o->lapse, "Observer lapse rate")->check(CLI::Range(0.0, 0.1));
  cmd->add_option("--seed", o->seed, "Master seed");
  cmd->add_option("--out", o->out, "Estimates CSV (default: stdout)");
  cmd->callback([o] {
    const auto truth = model_or_default(o->model);
    const auto grid = stimulus::condition_grid();
    std::vector<psychofit::ThresholdEstimate> rows;
    int failed = 0;
    for (std::size_t c = 0; c < grid.size(); ++c) {
      for (int k = 0; k < o->observers; ++k) {
        const std::uint64_t seed = mix(mix(o->seed, c), static_cast<std::uint64_t>(k));
        const auto obs = sim::observer_from_model(truth, grid[c].first, grid[c].second,
                                                  o->slope, o->lapse, seed);
        sim::SimulationOptions opts;
        opts.pest.max_trials = o->trials;
        opts.bootstrap.n_boot = o->n_boot;
        opts.bootstrap.seed = mix(seed, 2);
        const auto r = sim::run_simulated_session(obs, grid[c].first, grid[c].second, opts);
        if (r.fit_ok) {
          rows.push_back(r.estimate);
        } else {
          ++failed;
        }
      }
    }
    write_or_print(o->out, psychofit::estimates_csv(rows));
    std::size_t outliers = 0;
    for (const auto& e : rows) outliers += e.outlier ? 1 : 0;
    std::cerr << "sessions: " << grid.size() * static_cast<std::size_t>(o->observers)
              << "  estimates: " << rows.size() << "  fit failures: " << failed
              << "  outliers: " << outliers << " ("
              << g6(rows.empty() ? 0.0 : 100.0 * outliers / rows.size()) << "%)\n";
  });
}

void add_fit_surface(CLI::App& app) {
  struct Opts {
    std::string in, out, report, report_json, p1_mode = "fit";
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("fit-surface", "Fit the threshold surface to estimates");
  cmd->add_option("--in", o->in, "Estimates CSV")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", o->out, "Model JSON (default: stdout)");
  cmd->add_option("--report", o->report, "Text fit report (default: stderr)");
  cmd->add_option("--report-json", o->report_json, "JSON fit report");
  cmd->add_option("--p1-mode", o->p1_mode, "fit or constant")
      ->check(CLI::IsMember({"fit", "constant"}));
  cmd->callback([o] {
    const auto estimates = psychofit::parse_estimates_csv(io::read_text(o->in));
    const std::vector<double> required = {0.0, 10.0, 20.0};
    const auto report = surfacefit::fit_surface(
        estimates, o->p1_mode == "constant" ? surfacefit::P1Mode::constant : surfacefit::P1Mode::fit,
        required);
    write_or_print(o->out, nlohmann::json(report.model).dump(2) + "\n");
    if (o->report.empty()) {
      std::cerr << surfacefit::report_text(report);
    } else {
      write_or_print(o->report, surfacefit::report_text(report));
    }
    if (!o->report_json.empty()) {
      write_or_print(o->report_json, surfacefit::report_json(report).dump(2) + "\n");
    }
  });
}

void add_eval(CLI::App& app) {
  struct Opts {
    std::string model, p1_mode = "printed";
    std::vector<double> thetas, sigmas;
    bool extrapolate = false;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("eval", "Print predicted thresholds as CSV");
  cmd->add_option("--model", o->model, "Model JSON (default: published model)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--theta", o->thetas, "Eccentricities (deg)")->required();
  cmd->add_option("--sigma", o->sigmas, "Blur sigmas (arcmin)")->required();
  cmd->add_option("--p1-mode", o->p1_mode, "printed or constant")
      ->check(CLI::IsMember({"printed", "constant"}));
  cmd->add_flag("--extrapolate", o->extrapolate, "Allow inputs outside the fitted range");
  cmd->callback([o] {
    const auto m = model_or_default(o->model);
    model::EvalOptions opts;
    opts.p1_mode = o->p1_mode == "constant" ? model::P1Mode::constant : model::P1Mode::printed;
    opts.extrapolate = o->extrapolate;
    std::string out = "theta,sigma,threshold\n";
    for (double t : o->thetas) {
      for (double s : o->sigmas) {
        const double v = model::eval_threshold(m, Eccentricity{t}, BlurSigma{s}, opts).value;
        out += g6(t) + ',' + g6(s) + ',' + g6(v) + '\n';
      }
    }
    std::cout << out;
  });
}

void add_budget_map(CLI::App& app) {
  struct Opts {
    std::string model, out = "budget";
    int width = 1024, height = 1024;
    double ppd = 30, scale = 100;
    std::optional<double> gx, gy;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("budget-map", "Write the per-pixel optimal blur for a gaze point");
  cmd->add_option("--model", o->model, "Model JSON (default: published model)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--width", o->width, "Display width (px)")->check(CLI::PositiveNumber);
  cmd->add_option("--height", o->height, "Display height (px)")->check(CLI::PositiveNumber);
  cmd->add_option("--ppd", o->ppd, "Pixels per degree")->check(CLI::PositiveNumber);
  cmd->add_option("--gaze-x", o->gx, "Gaze x (px, default: center)");
  cmd->add_option("--gaze-y", o->gy, "Gaze y (px, default: center)");
  cmd->add_option("--scale", o->scale, "Stored value = arcmin * scale")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--out", o->out, "Output prefix (writes <prefix>.raw and <prefix>.json)");
  cmd->callback([o] {
    const auto m = model_or_default(o->model);
    display::DisplayModel d;
    d.width_px = o->width;
    d.height_px = o->height;
    d.ppd = o->ppd;
    d.validate();
    const Pixel gaze{o->gx.value_or(d.center().x), o->gy.value_or(d.center().y)};
    if (!d.contains(gaze)) throw DomainError("gaze lies outside the display");
    const auto map = model::blur_budget_map(m, d, gaze);
    ensure_parent(o->out + ".raw");
    io::write_file(o->out + ".raw", io::encode_u16le(map, o->scale));
    io::write_text(o->out + ".json",
                   model::budget_map_sidecar(map, gaze, {o->scale}).dump(2) + "\n");
    std::cout << o->out << ".raw\n" << o->out << ".json\n";
  });
}

void add_foveate(CLI::App& app) {
  struct Opts {
    std::string in, out, model, budget;
    double ppd = 30;
    std::optional<double> gx, gy;
    std::vector<double> levels = foveation::kDefaultLevels;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("foveate", "Foveate a grayscale PNG around a gaze point");
  cmd->add_option("--in", o->in, "Input PNG")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", o->out, "Output PNG")->required();
  cmd->add_option("--model", o->model, "Model JSON for the optimal-blur budget")
      ->check(CLI::ExistingFile);
  cmd->add_option("--budget", o->budget, "Budget table JSON {\"budget\": [[theta, sigma], ...]}")
      ->check(CLI::ExistingFile);
  cmd->add_option("--ppd", o->ppd, "Pixels per degree")->check(CLI::PositiveNumber);
  cmd->add_option("--gaze-x", o->gx, "Gaze x (px, default: center)");
  cmd->add_option("--gaze-y", o->gy, "Gaze y (px, default: center)");
  cmd->add_option("--levels", o->levels, "Pyramid sigmas (arcmin), starting at 0");
  cmd->callback([o] {
    if (!o->model.empty() && !o->budget.empty()) {
      throw DomainError("pass either --model or --budget, not both");
    }
    const auto img = io::read_png(o->in);
    display::DisplayModel d;
    d.width_px = img.width();
    d.height_px = img.height();
    d.ppd = o->ppd;
    const Pixel gaze{o->gx.value_or(d.center().x), o->gy.value_or(d.center().y)};
    const auto budget =
        o->budget.empty()
            ? foveation::BudgetCurve::from_model(model_or_default(o->model))
            : foveation::budget_from_json(nlohmann::json::parse(io::read_text(o->budget)));
    const auto out = foveation::foveate(foveation::build_pyramid(img, o->levels, d), gaze, budget, d);
    ensure_parent(o->out);
    io::write_png(o->out, out);
  });
}

void add_validate(CLI::App& app) {
  struct Opts {
    validation::ExperimentConfig exp;
    std::string model, out_csv, out_json;
    int n_boot = 100;
    double ppd = 10;
    int size = 512;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("validate", "Run the ORG/FOV validation with simulated observers");
  cmd->add_option("--observers", o->exp.participants, "Simulated participants")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--scenes", o->exp.scenes, "Scene ids");
  cmd->add_option("--seed", o->exp.seed, "Master seed");
  cmd->add_option("--threshold", o->exp.median_threshold_arcmin,
                  "Median observer threshold (arcmin)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--fov-gain", o->exp.fov_gain, "Sensitivity gain in FOV trials (1 = none)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--n-boot", o->n_boot, "Bootstrap replicates")->check(CLI::Range(2, 100000));
  cmd->add_option("--ppd", o->ppd, "Scene pixels per degree")->check(CLI::PositiveNumber);
  cmd->add_option("--size", o->size, "Scene width and height (px)")->check(CLI::PositiveNumber);
  cmd->add_option("--model", o->model, "Model JSON for the FOV budget")->check(CLI::ExistingFile);
  cmd->add_option("--out", o->out_csv, "Results CSV (default: stdout)");
  cmd->add_option("--report", o->out_json, "JSON report");
  cmd->callback([o] {
    validation::HarnessConfig cfg;
    cfg.n_boot = o->n_boot;
    cfg.display.ppd = o->ppd;
    cfg.display.width_px = o->size;
    cfg.display.height_px = o->size;
    cfg.model = model_or_default(o->model);
    const auto estimates = validation::run_validation_experiment(o->exp, cfg);
    const auto summary = validation::summarize(estimates);
    write_or_print(o->out_csv, validation::results_csv(summary));
    if (!o->out_json.empty()) {
      write_or_print(o->out_json, validation::report_json(summary).dump(2) + "\n");
    }
    for (const auto& w : summary.warnings) std::cerr << "warning: " << w << '\n';
    std::cerr << "mean log change rate: " << g6(summary.mean_change) << '\n';
  });
}

namespace {
service::HttpServer* g_server = nullptr;
extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}
}  // namespace

void add_serve(CLI::App& app) {
  struct Opts {
    std::string config, host, data_dir;
    std::optional<int> port;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("serve", "Run the HTTP session service");
  cmd->add_option("--config", o->config, "Service config JSON")->check(CLI::ExistingFile);
  cmd->add_option("--host", o->host, "Bind address");
  cmd->add_option("--port", o->port, "Port (0 picks a free port)")->check(CLI::Range(0, 65535));
  cmd->add_option("--data-dir", o->data_dir, "Session storage directory");
  cmd->callback([o] {
    auto cfg = service::load_service_config(
        o->config.empty() ? std::nullopt : std::optional<fs::path>(o->config));
    if (!o->host.empty()) cfg.host = o->host;
    if (o->port) cfg.port = *o->port;
    if (!o->data_dir.empty()) cfg.data_dir = o->data_dir;
    service::SessionService svc(cfg);
    service::HttpServer server(svc);
    int port = cfg.port;
    if (port == 0) {
      port = server.bind_any_port(cfg.host);
      if (port == 0) throw IoError("cannot bind " + cfg.host);
    } else if (!server.bind(cfg.host, port)) {
      throw IoError("cannot bind " + cfg.host + ":" + std::to_string(port));
    }
    std::cout << "listening on http://" << cfg.host << ':' << port << std::endl;
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    server.listen();
    g_server = nullptr;
  });
}

}  // namespace stereofov::cli
