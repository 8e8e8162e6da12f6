#include "pskf/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pskf/bench.hpp"
#include "pskf/estimators.hpp"
#include "pskf/frames.hpp"
#include "pskf/simulation.hpp"

namespace pskf::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct SimFlags {
  Index side = 32;
  Index frames = 100;
  double snr_db = 11.0;
  bool no_noise = false;
  double switch_prob = 0.05;
  std::vector<double> velocities{0.01, 0.94};
  Index blobs = SimConfig{}.blobs_per_region;
  double blob_sigma = SimConfig{}.blob_sigma;

  SimConfig to_config(std::uint64_t seed) const {
    SimConfig c;
    c.side = side;
    c.frames = frames;
    c.snr_db = no_noise ? std::numeric_limits<double>::infinity() : snr_db;
    c.switch_prob = switch_prob;
    c.velocities = velocities;
    c.blobs_per_region = blobs;
    c.blob_sigma = blob_sigma;
    c.seed = seed;
    return c;
  }
};

struct FilterFlags {
  std::string estimator = "wskf";
  Index window = 8;
  Index r = 3;
  Index alpha = 2;
  double p_stay = 0.95;
  std::string covariance;  // empty: the subcommand's default
  std::string truth;
  std::string measurements;
  std::string meta;
  double noise_var = -1.0;
};

struct Common {
  std::string out = ".";
  std::uint64_t seed = 1;
  unsigned jobs = 1;
  std::string config;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--out", c.out, "Output directory");
  app->add_option("--seed", c.seed, "Random seed");
  app->add_option("--jobs", c.jobs, "Parallel workers")->check(CLI::PositiveNumber);
  app->add_option("--config", c.config, "JSON file with option values (flags win)");
}

void add_sim(CLI::App* app, SimFlags& s) {
  app->add_option("--side", s.side, "Image side in pixels");
  app->add_option("--frames", s.frames, "Number of frames");
  app->add_option("--snr-db", s.snr_db, "Target SNR in dB (inf disables noise)");
  app->add_flag("--no-noise", s.no_noise, "Disable measurement noise");
  app->add_option("--switch-prob", s.switch_prob, "Per-frame, per-region mode switch probability");
  app->add_option("--velocities", s.velocities, "Mode velocities slow,fast (pixels/frame)")
      ->delimiter(',');
  app->add_option("--blobs", s.blobs, "Blobs per region");
  app->add_option("--blob-sigma", s.blob_sigma, "Blob width (pixels)");
}

void add_geometry(CLI::App* app, FilterFlags& f) {
  app->add_option("--window", f.window, "wSKF window side");
  app->add_option("--r", f.r, "swSKF locality radius");
  app->add_option("--alpha", f.alpha, "swSKF center side");
  app->add_option("--p-stay", f.p_stay, "Mode self-transition probability");
  app->add_option("--covariance", f.covariance,
                  "Posterior covariance form: joseph|symmetric|standard");
}

// Fill options that were not given on the command line from a JSON object.
void apply_config(CLI::App* app, const std::string& path) {
  if (path.empty()) return;
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read config file " + path);
  json cfg;
  try {
    cfg = json::parse(is);
  } catch (const json::exception& e) {
    throw std::runtime_error("config file " + path + ": " + e.what());
  }
  if (!cfg.is_object()) throw std::runtime_error("config file must hold a JSON object");

  auto scalar = [](const json& v) -> std::string {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  };
  for (const auto& [key, value] : cfg.items()) {
    if (key == "config") continue;
    CLI::Option* opt = app->get_option_no_throw("--" + key);
    if (opt == nullptr) throw std::runtime_error("unknown config key '" + key + "'");
    if (opt->count() > 0) continue;
    if (value.is_array()) {
      for (const auto& v : value) opt->add_result(scalar(v));
    } else {
      opt->add_result(scalar(value));
    }
    opt->run_callback();
  }
}

json read_meta(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  return json::parse(is);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc | std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

int cmd_simulate(const SimFlags& s, const Common& c, std::ostream& out) {
  const SimConfig config = s.to_config(c.seed);
  config.validate();
  const SimOutput sim = generate(config);
  const std::vector<double> q = fit_mode_variances(config);

  const fs::path dir(c.out);
  fs::create_directories(dir);
  write_frames(dir / "truth.f32", sim.truth);
  write_frames(dir / "measurements.f32", sim.measurements);

  std::ostringstream modes;
  modes << "frame,region,mode\n";
  for (std::size_t n = 0; n < sim.true_modes.size(); ++n) {
    for (std::size_t k = 0; k < sim.true_modes[n].size(); ++k) {
      modes << n << ',' << k << ',' << sim.true_modes[n][k] << '\n';
    }
  }
  write_text(dir / "modes.csv", modes.str());

  json meta;
  meta["side"] = config.side;
  meta["frames"] = config.frames;
  meta["region_grid"] = config.region_grid;
  meta["velocities"] = config.velocities;
  meta["switch_prob"] = config.switch_prob;
  meta["snr_db"] = std::isfinite(config.snr_db) ? json(config.snr_db) : json(nullptr);
  meta["seed"] = config.seed;
  meta["blobs_per_region"] = config.blobs_per_region;
  meta["blob_sigma"] = config.blob_sigma;
  meta["noise_variance"] = sim.noise_variance;
  meta["signal_power"] = sim.signal_power;
  meta["mode_variances"] = q;
  write_text(dir / "meta.json", meta.dump(2) + "\n");

  out << "wrote " << config.frames << " frames of " << config.side << "x" << config.side
      << " to " << dir.string() << " (realized SNR " << sim.realized_snr_db() << " dB)\n";
  return 0;
}

int cmd_filter(const FilterFlags& f, const SimFlags& s, const Common& c, std::ostream& out) {
  if (f.measurements.empty()) throw std::invalid_argument("--measurements is required");
  const FrameSequence measurements = read_frames(f.measurements);
  if (measurements.dims.height != measurements.dims.width) {
    throw std::invalid_argument("only square images are supported by the filter command");
  }
  const Index d = measurements.dims.pixel_count();

  std::string meta_path = f.meta;
  if (meta_path.empty()) {
    const fs::path guess = fs::path(f.measurements).parent_path() / "meta.json";
    if (fs::exists(guess)) meta_path = guess.string();
  }
  json meta = meta_path.empty() ? json::object() : read_meta(meta_path);

  SimConfig sim = s.to_config(c.seed);
  sim.side = measurements.dims.height;
  if (meta.contains("region_grid")) sim.region_grid = meta["region_grid"].get<Index>();
  if (meta.contains("velocities")) sim.velocities = meta["velocities"].get<std::vector<double>>();

  std::vector<double> q;
  if (meta.contains("mode_variances")) {
    q = meta["mode_variances"].get<std::vector<double>>();
  } else {
    q = fit_mode_variances(sim);
  }
  double noise_var = f.noise_var;
  if (noise_var < 0.0) {
    if (!meta.contains("noise_variance")) {
      throw std::invalid_argument("noise variance unknown: pass --noise-var or --meta");
    }
    noise_var = meta["noise_variance"].get<double>();
    if (noise_var <= 0.0) {
      const double power = meta.value("signal_power", 1.0);
      noise_var = std::max(1e-10 * power, 1e-12);
    }
  }

  std::vector<LinearEvolution> evolutions;
  for (double v : q) evolutions.push_back(LinearEvolution::random_walk(d, v));
  ModeLibrary library(std::move(evolutions));
  const Index l = library.mode_count();
  EstimatorConfig config(parse_estimator_kind(f.estimator), std::move(library),
                         ModeTransition::sticky(l, f.p_stay),
                         MeasurementModel::identity(d, noise_var));
  config.window_side = f.window;
  config.radius = f.r;
  config.alpha = f.alpha;
  if (!f.covariance.empty()) config.covariance_form = parse_covariance_form(f.covariance);
  if (config.kind == EstimatorKind::perfect) config.regions = region_pixels(sim);

  const EstimationResult result = run_estimator(measurements, config);

  const fs::path dir(c.out);
  fs::create_directories(dir);
  write_frames(dir / "estimates.f32", result.estimates);

  std::ostringstream modes;
  modes << "frame,patch,map_mode";
  for (Index j = 0; j < l; ++j) modes << ",w" << j;
  modes << '\n';
  for (std::size_t n = 0; n < result.mode_posteriors.size(); ++n) {
    for (std::size_t i = 0; i < result.mode_posteriors[n].size(); ++i) {
      modes << n << ',' << i << ',' << result.map_modes[n][i];
      for (Index j = 0; j < result.mode_posteriors[n][i].size(); ++j) {
        modes << ',' << format_double(result.mode_posteriors[n][i](j));
      }
      modes << '\n';
    }
  }
  write_text(dir / "mode_posteriors.csv", modes.str());

  std::ostringstream timing;
  timing << "frame,seconds,log_likelihood\n";
  for (std::size_t n = 0; n < result.frame_seconds.size(); ++n) {
    timing << n << ',' << format_double(result.frame_seconds[n]) << ','
           << format_double(result.log_likelihood[n]) << '\n';
  }
  write_text(dir / "timing.csv", timing.str());

  out << "filtered " << measurements.size() << " frames with " << f.estimator << " in "
      << result.total_seconds() << " s\n";

  if (!f.truth.empty()) {
    const FrameSequence truth = read_frames(f.truth);
    const std::vector<double> errors = mse(result.estimates, truth);
    std::ostringstream os;
    os << "estimator,realization,frame,mse\n";
    double total = 0.0;
    for (std::size_t n = 0; n < errors.size(); ++n) {
      os << f.estimator << ",0," << n << ',' << format_double(errors[n]) << '\n';
      total += errors[n];
    }
    write_text(dir / "mse.csv", os.str());
    out << "mean MSE " << total / static_cast<double>(errors.size()) << '\n';
  }
  return 0;
}

std::vector<EstimatorKind> parse_estimator_list(const std::vector<std::string>& names) {
  std::vector<EstimatorKind> out;
  for (const auto& n : names) out.push_back(parse_estimator_kind(n));
  return out;
}

int cmd_bench(const FilterFlags& f, const SimFlags& s, const Common& c, Index realizations,
              const std::vector<std::string>& estimators, bool check, std::ostream& out,
              std::ostream& err) {
  ExperimentSpec spec;
  spec.sim = s.to_config(c.seed);
  spec.estimators = parse_estimator_list(estimators);
  spec.window_side = f.window;
  spec.radius = f.r;
  spec.alpha = f.alpha;
  spec.p_stay = f.p_stay;
  if (!f.covariance.empty()) spec.covariance_form = parse_covariance_form(f.covariance);
  spec.realizations = realizations;
  spec.jobs = c.jobs;
  spec.validate();

  const MetricsTable table =
      run_experiment(spec, [&err](const std::string& msg) { err << msg << '\n'; });
  const fs::path dir(c.out);
  write_metrics(table, dir);
  const std::vector<CheckResult> checks = benchmark_checks(table);
  const std::string report = render_report(table, check ? checks : std::vector<CheckResult>{});
  write_text(dir / "report.txt", report);
  out << report;

  if (!table.failures.empty()) return 1;
  if (check) {
    for (const auto& ch : checks) {
      if (!ch.pass) return 2;
    }
  }
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Patch-based switching Kalman filtering for image sequences"};
  app.require_subcommand(1);

  Common common;
  SimFlags sim_flags;
  FilterFlags filter_flags;
  Index realizations = 20;
  bool check = false;
  std::vector<std::string> estimators{"full", "wskf", "swskf"};

  CLI::App* simulate = app.add_subcommand("simulate", "Generate a synthetic sequence");
  add_common(simulate, common);
  add_sim(simulate, sim_flags);

  CLI::App* filter = app.add_subcommand("filter", "Run one estimator on a frame file");
  add_common(filter, common);
  add_sim(filter, sim_flags);
  add_geometry(filter, filter_flags);
  filter->add_option("--estimator", filter_flags.estimator, "full|perfect|wskf|swskf");
  filter->add_option("--measurements", filter_flags.measurements, "Measurement frame file");
  filter->add_option("--truth", filter_flags.truth, "Ground-truth frame file (for MSE)");
  filter->add_option("--meta", filter_flags.meta, "Simulation metadata (default: next to input)");
  filter->add_option("--noise-var", filter_flags.noise_var, "Measurement noise variance");

  CLI::App* bench = app.add_subcommand("bench", "Run the multi-realization benchmark");
  add_common(bench, common);
  add_sim(bench, sim_flags);
  add_geometry(bench, filter_flags);
  bench->add_option("--realizations", realizations, "Number of realizations");
  bench->add_option("--estimators", estimators, "Estimators to compare")->delimiter(',');
  bench->add_flag("--check", check, "Exit with code 2 unless the benchmark checks pass");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    CLI::App* active = app.get_subcommands().front();
    apply_config(active, common.config);
    if (active == simulate) {
      if (sim_flags.frames < 1) throw std::invalid_argument("--frames must be at least 1");
      return cmd_simulate(sim_flags, common, out);
    }
    if (active == filter) return cmd_filter(filter_flags, sim_flags, common, out);
    return cmd_bench(filter_flags, sim_flags, common, realizations, estimators, check, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace pskf::cli
