#include "pskf/bench.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace pskf {

void ExperimentSpec::validate() const {
  sim.validate();
  if (realizations < 1) throw std::invalid_argument("realization count must be at least 1");
  if (estimators.empty()) throw std::invalid_argument("estimator list is empty");
  if (jobs < 1) throw std::invalid_argument("--jobs must be at least 1");
  if (!(p_stay >= 0.0 && p_stay <= 1.0)) throw std::invalid_argument("p_stay must be in [0, 1]");
  if (window_side < 1 || window_side > sim.side) {
    throw std::invalid_argument("window side must lie in [1, image side]");
  }
  if (radius < 1 || alpha < 1 || alpha + 2 * radius > sim.side) {
    throw std::invalid_argument("sliding window needs r >= 1, alpha >= 1 and alpha + 2r <= image side");
  }
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.count = static_cast<Index>(values.size());
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    const double var = ss / static_cast<double>(values.size() - 1);
    s.stderr_ = std::sqrt(var / static_cast<double>(values.size()));
  }
  return s;
}

std::vector<std::string> MetricsTable::estimators() const {
  std::vector<std::string> out;
  auto add = [&](const std::string& e) {
    if (std::find(out.begin(), out.end(), e) == out.end()) out.push_back(e);
  };
  for (const auto& r : timing) add(r.estimator);
  for (const auto& r : mse) add(r.estimator);
  return out;
}

Summary MetricsTable::mse_at_frame(const std::string& estimator, Index frame) const {
  std::vector<double> v;
  for (const auto& r : mse) {
    if (r.estimator == estimator && r.frame == frame) v.push_back(r.mse);
  }
  return summarize(v);
}

Summary MetricsTable::mean_mse(const std::string& estimator) const {
  // Average per realization first so the standard error is across realizations.
  std::map<Index, std::pair<double, Index>> per;
  for (const auto& r : mse) {
    if (r.estimator != estimator) continue;
    auto& acc = per[r.realization];
    acc.first += r.mse;
    acc.second += 1;
  }
  std::vector<double> v;
  for (const auto& [k, acc] : per) v.push_back(acc.first / static_cast<double>(acc.second));
  return summarize(v);
}

Summary MetricsTable::seconds(const std::string& estimator) const {
  std::vector<double> v;
  for (const auto& r : timing) {
    if (r.estimator == estimator) v.push_back(r.seconds);
  }
  return summarize(v);
}

Summary MetricsTable::mode_accuracy(const std::string& estimator) const {
  std::vector<double> v;
  for (const auto& r : modes) {
    if (r.estimator == estimator) v.push_back(r.accuracy);
  }
  return summarize(v);
}

Index MetricsTable::frame_count(const std::string& estimator) const {
  Index n = 0;
  for (const auto& r : mse) {
    if (r.estimator == estimator) n = std::max(n, r.frame + 1);
  }
  return n;
}

double mode_detection_accuracy(const EstimationResult& result, const PatchLayout& layout,
                               const std::vector<std::vector<Index>>& true_modes,
                               const SimConfig& sim, Index burn_in) {
  const Index rs = sim.region_side();
  const ImageDims dims = layout.dims();
  std::vector<Index> patch_region;
  for (const Patch& p : layout.patches()) {
    const Index px = p.centers.front();
    const Index row = px / dims.width, col = px % dims.width;
    patch_region.push_back((row / rs) * sim.region_grid + col / rs);
  }
  double hits = 0.0, total = 0.0;
  for (std::size_t n = static_cast<std::size_t>(std::max<Index>(burn_in, 0));
       n < result.map_modes.size(); ++n) {
    for (std::size_t i = 0; i < patch_region.size(); ++i) {
      const Index truth = true_modes[n][static_cast<std::size_t>(patch_region[i])];
      hits += result.map_modes[n][i] == truth ? 1.0 : 0.0;
      total += 1.0;
    }
  }
  return total > 0.0 ? hits / total : 0.0;
}

namespace {

struct RealizationOutcome {
  std::vector<MseRow> mse;
  std::vector<TimingRow> timing;
  std::vector<ModeRow> modes;
  std::vector<FailureRow> failures;
};

RealizationOutcome run_realization(const ExperimentSpec& spec, const ModeLibrary& library,
                                   const ModeTransition& transition, Index k) {
  RealizationOutcome out;
  SimConfig sim_config = spec.sim;
  sim_config.seed = spec.sim.seed + static_cast<std::uint64_t>(k);
  const SimOutput sim = generate(sim_config);
  const Index d = sim_config.side * sim_config.side;
  // With noise disabled R would be singular; keep a negligible floor.
  const double r_var =
      std::max({sim.noise_variance, 1e-10 * sim.signal_power, 1e-12});
  const MeasurementModel measurement = MeasurementModel::identity(d, r_var);
  const auto regions = region_pixels(sim_config);

  for (EstimatorKind kind : spec.estimators) {
    const std::string name(to_string(kind));
    try {
      EstimatorConfig config(kind, library, transition, measurement);
      config.window_side = spec.window_side;
      config.radius = spec.radius;
      config.alpha = spec.alpha;
      config.covariance_form = spec.covariance_form;
      config.regions = regions;
      const EstimationResult result = run_estimator(sim.measurements, config);

      const std::vector<double> errors = mse(result.estimates, sim.truth);
      for (std::size_t n = 0; n < errors.size(); ++n) {
        out.mse.push_back({name, k, static_cast<Index>(n), errors[n]});
      }
      out.timing.push_back({name, k, result.total_seconds()});

      if (kind == EstimatorKind::wskf || kind == EstimatorKind::swskf) {
        const PatchLayout layout =
            kind == EstimatorKind::wskf
                ? partition_windows(sim_config.dims(), spec.window_side)
                : sliding_layout(sim_config.dims(), spec.radius, spec.alpha);
        out.modes.push_back({name, k,
                             mode_detection_accuracy(result, layout, sim.true_modes, sim_config,
                                                     spec.burn_in)});
      } else if (kind == EstimatorKind::perfect) {
        double hits = 0.0, total = 0.0;
        for (std::size_t n = static_cast<std::size_t>(spec.burn_in); n < result.map_modes.size();
             ++n) {
          for (std::size_t r = 0; r < result.map_modes[n].size(); ++r) {
            hits += result.map_modes[n][r] == sim.true_modes[n][r] ? 1.0 : 0.0;
            total += 1.0;
          }
        }
        out.modes.push_back({name, k, total > 0.0 ? hits / total : 0.0});
      }
    } catch (const std::exception& e) {
      out.failures.push_back({name, k, e.what()});
    }
  }
  return out;
}

}  // namespace

MetricsTable run_experiment(const ExperimentSpec& spec, const ProgressFn& progress) {
  spec.validate();
  const std::vector<double> q = fit_mode_variances(spec.sim);
  const Index d = spec.sim.side * spec.sim.side;
  std::vector<LinearEvolution> evolutions;
  for (double v : q) evolutions.push_back(LinearEvolution::random_walk(d, v));
  const ModeLibrary library(std::move(evolutions));
  const ModeTransition transition = ModeTransition::sticky(library.mode_count(), spec.p_stay);

  std::vector<RealizationOutcome> outcomes(static_cast<std::size_t>(spec.realizations));
  std::atomic<Index> next{0};
  std::mutex progress_mutex;
  auto worker = [&] {
    for (Index k = next++; k < spec.realizations; k = next++) {
      outcomes[static_cast<std::size_t>(k)] = run_realization(spec, library, transition, k);
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress("realization " + std::to_string(k + 1) + "/" +
                 std::to_string(spec.realizations) + " done");
      }
    }
  };
  const unsigned threads =
      std::min<unsigned>(spec.jobs, static_cast<unsigned>(spec.realizations));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  MetricsTable table;
  for (auto& o : outcomes) {
    table.mse.insert(table.mse.end(), o.mse.begin(), o.mse.end());
    table.timing.insert(table.timing.end(), o.timing.begin(), o.timing.end());
    table.modes.insert(table.modes.end(), o.modes.begin(), o.modes.end());
    table.failures.insert(table.failures.end(), o.failures.begin(), o.failures.end());
  }
  return table;
}

// ---------------------------------------------------------------------------

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error("bad number in CSV: '" + s + "'");
  }
  return v;
}

std::vector<std::string> split(const std::string& line, std::size_t max_fields) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (out.size() + 1 < max_fields) {
    const auto pos = line.find(',', start);
    if (pos == std::string::npos) break;
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  out.push_back(line.substr(start));
  return out;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& p,
                                               const std::string& header, std::size_t fields) {
  std::ifstream is(p);
  if (!is) throw std::runtime_error("cannot read " + p.string());
  std::string line;
  if (!std::getline(is, line) || line != header) {
    throw std::runtime_error(p.string() + ": unexpected header");
  }
  std::vector<std::vector<std::string>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto f = split(line, fields);
    if (f.size() != fields) throw std::runtime_error(p.string() + ": malformed row '" + line + "'");
    rows.push_back(std::move(f));
  }
  return rows;
}

std::string sanitize(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

void write_metrics(const MetricsTable& table, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    auto os = open_out(dir / "mse.csv");
    os << "estimator,realization,frame,mse\n";
    for (const auto& r : table.mse) {
      os << r.estimator << ',' << r.realization << ',' << r.frame << ',' << format_double(r.mse)
         << '\n';
    }
  }
  {
    auto os = open_out(dir / "timing.csv");
    os << "estimator,realization,seconds\n";
    for (const auto& r : table.timing) {
      os << r.estimator << ',' << r.realization << ',' << format_double(r.seconds) << '\n';
    }
  }
  {
    auto os = open_out(dir / "modes.csv");
    os << "estimator,realization,accuracy\n";
    for (const auto& r : table.modes) {
      os << r.estimator << ',' << r.realization << ',' << format_double(r.accuracy) << '\n';
    }
  }
  {
    auto os = open_out(dir / "failures.csv");
    os << "estimator,realization,message\n";
    for (const auto& r : table.failures) {
      os << r.estimator << ',' << r.realization << ',' << sanitize(r.message) << '\n';
    }
  }
  {
    auto os = open_out(dir / "aggregate.csv");
    os << "estimator,frame,mean_mse,stderr_mse\n";
    for (const auto& e : table.estimators()) {
      for (Index n = 0; n < table.frame_count(e); ++n) {
        const Summary s = table.mse_at_frame(e, n);
        os << e << ',' << n << ',' << format_double(s.mean) << ',' << format_double(s.stderr_)
           << '\n';
      }
    }
  }
}

MetricsTable read_metrics(const std::filesystem::path& dir) {
  MetricsTable t;
  for (auto& f : read_csv(dir / "mse.csv", "estimator,realization,frame,mse", 4)) {
    t.mse.push_back({f[0], std::stol(f[1]), std::stol(f[2]), parse_double(f[3])});
  }
  for (auto& f : read_csv(dir / "timing.csv", "estimator,realization,seconds", 3)) {
    t.timing.push_back({f[0], std::stol(f[1]), parse_double(f[2])});
  }
  for (auto& f : read_csv(dir / "modes.csv", "estimator,realization,accuracy", 3)) {
    t.modes.push_back({f[0], std::stol(f[1]), parse_double(f[2])});
  }
  if (std::filesystem::exists(dir / "failures.csv")) {
    for (auto& f : read_csv(dir / "failures.csv", "estimator,realization,message", 3)) {
      t.failures.push_back({f[0], std::stol(f[1]), f[2]});
    }
  }
  return t;
}

// ---------------------------------------------------------------------------

std::vector<CheckResult> benchmark_checks(const MetricsTable& table) {
  std::vector<CheckResult> checks;
  const auto names = table.estimators();
  auto has = [&](const char* e) { return std::find(names.begin(), names.end(), e) != names.end(); };
  auto fmt = [](double v) {
    std::ostringstream os;
    os.precision(5);
    os << v;
    return os.str();
  };

  if (!table.failures.empty()) {
    checks.push_back({"no estimator failures", false,
                      std::to_string(table.failures.size()) + " failed cells"});
  }

  if (has("full") && has("wskf")) {
    const double full = table.mean_mse("full").mean, w = table.mean_mse("wskf").mean;
    checks.push_back({"accuracy: MSE(wskf) < 0.7 * MSE(full)", w < 0.7 * full,
                      "wskf " + fmt(w) + " vs 0.7*full " + fmt(0.7 * full)});
  }
  if (has("wskf") && has("swskf")) {
    const double w = table.mean_mse("wskf").mean, sw = table.mean_mse("swskf").mean;
    checks.push_back({"accuracy: MSE(swskf) <= MSE(wskf)", sw <= w,
                      "swskf " + fmt(sw) + " vs wskf " + fmt(w)});
  }
  if (has("full")) {
    const Index frames = table.frame_count("full");
    if (frames >= 10) {
      const double early = table.mse_at_frame("full", 9).mean;
      const double late = table.mse_at_frame("full", frames - 1).mean;
      checks.push_back({"divergence: MSE(full) at last frame > at frame 10", late > early,
                        "frame " + std::to_string(frames) + " " + fmt(late) + " vs frame 10 " +
                            fmt(early)});
    }
  }
  if (has("full") && has("wskf") && has("swskf")) {
    const double tf = table.seconds("full").mean, tw = table.seconds("wskf").mean,
                 ts = table.seconds("swskf").mean;
    checks.push_back({"runtime: t(wskf) < t(swskf) < t(full)", tw < ts && ts < tf,
                      "wskf " + fmt(tw) + "s, swskf " + fmt(ts) + "s, full " + fmt(tf) + "s"});
    checks.push_back({"runtime: t(full) / t(wskf) >= 10", tf >= 10.0 * tw,
                      "ratio " + fmt(tf / tw)});
  }
  if (has("wskf")) {
    const double acc = table.mode_accuracy("wskf").mean;
    checks.push_back({"mode detection: wskf accuracy >= 0.8", acc >= 0.8, "accuracy " + fmt(acc)});
  }
  return checks;
}

std::string render_report(const MetricsTable& table, const std::vector<CheckResult>& checks) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  const auto names = table.estimators();

  os << "Run time per realization (seconds, per-frame loop only)\n";
  os << "  estimator      mean      stderr\n";
  for (const auto& e : names) {
    const Summary s = table.seconds(e);
    os << "  " << e << std::string(e.size() < 10 ? 10 - e.size() : 1, ' ');
    os.precision(4);
    os << s.mean << "  " << s.stderr_ << '\n';
  }

  os << "\nMean MSE over frames and realizations\n";
  for (const auto& e : names) {
    const Summary s = table.mean_mse(e);
    os.precision(6);
    os << "  " << e << std::string(e.size() < 10 ? 10 - e.size() : 1, ' ') << s.mean << " +- "
       << s.stderr_ << " (n=" << s.count << ")\n";
  }

  os << "\nMSE vs frame (mean over realizations)\n  frame";
  for (const auto& e : names) os << "  " << e;
  os << '\n';
  Index frames = 0;
  for (const auto& e : names) frames = std::max(frames, table.frame_count(e));
  const Index stride = frames > 20 ? 10 : 1;
  for (Index n = 0; n < frames; n += stride) {
    os << "  " << (n + 1);
    for (const auto& e : names) {
      os.precision(6);
      os << "  " << table.mse_at_frame(e, n).mean;
    }
    os << '\n';
  }
  if (frames > 0 && (frames - 1) % stride != 0) {
    os << "  " << frames;
    for (const auto& e : names) os << "  " << table.mse_at_frame(e, frames - 1).mean;
    os << '\n';
  }

  if (!table.modes.empty()) {
    os << "\nMode detection accuracy\n";
    for (const auto& e : names) {
      const Summary s = table.mode_accuracy(e);
      if (s.count == 0) continue;
      os.precision(4);
      os << "  " << e << "  " << s.mean << '\n';
    }
  }
  if (!table.failures.empty()) {
    os << "\nFailures\n";
    for (const auto& f : table.failures) {
      os << "  " << f.estimator << " realization " << f.realization << ": " << f.message << '\n';
    }
  }
  if (!checks.empty()) {
    os << "\nChecks\n";
    for (const auto& c : checks) {
      os << "  [" << (c.pass ? "PASS" : "FAIL") << "] " << c.name << " (" << c.detail << ")\n";
    }
  }
  return os.str();
}

}  // namespace pskf
