#pragma once

// Multi-realization benchmark: simulate, run every estimator on the same
// seeded data, and tabulate per-frame MSE, wall-clock time and mode-detection
// accuracy.

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "pskf/estimators.hpp"
#include "pskf/simulation.hpp"

namespace pskf {

struct ExperimentSpec {
  SimConfig sim;
  std::vector<EstimatorKind> estimators{EstimatorKind::full, EstimatorKind::wskf,
                                        EstimatorKind::swskf};
  Index window_side = 8;
  Index radius = 3;
  Index alpha = 2;
  double p_stay = 0.95;
  /// Applied to every estimator. Symmetric keeps the 1024-pixel full SKF
  /// within the benchmark time budget.
  CovarianceForm covariance_form = CovarianceForm::symmetric;
  Index realizations = 20;
  unsigned jobs = 1;
  /// Frames skipped before mode-detection accuracy is counted.
  Index burn_in = 5;

  void validate() const;
};

struct MseRow {
  std::string estimator;
  Index realization = 0;
  Index frame = 0;
  double mse = 0.0;
};

struct TimingRow {
  std::string estimator;
  Index realization = 0;
  double seconds = 0.0;
};

struct ModeRow {
  std::string estimator;
  Index realization = 0;
  double accuracy = 0.0;  // fraction of (frame, patch) pairs whose MAP mode is the true one
};

struct FailureRow {
  std::string estimator;
  Index realization = 0;
  std::string message;
};

struct Summary {
  double mean = 0.0;
  double stderr_ = 0.0;
  Index count = 0;
};

Summary summarize(const std::vector<double>& values);

struct MetricsTable {
  std::vector<MseRow> mse;
  std::vector<TimingRow> timing;
  std::vector<ModeRow> modes;
  std::vector<FailureRow> failures;

  std::vector<std::string> estimators() const;
  /// Mean over realizations of the MSE at `frame` (0-based).
  Summary mse_at_frame(const std::string& estimator, Index frame) const;
  /// Mean over realizations and frames.
  Summary mean_mse(const std::string& estimator) const;
  Summary seconds(const std::string& estimator) const;
  Summary mode_accuracy(const std::string& estimator) const;
  Index frame_count(const std::string& estimator) const;
};

using ProgressFn = std::function<void(const std::string& message)>;

/// Realization k uses seed spec.sim.seed + k. Mode covariances are fitted once
/// from spec.sim. Estimator failures are recorded and do not stop the run.
MetricsTable run_experiment(const ExperimentSpec& spec, const ProgressFn& progress = {});

/// Fraction of (frame ≥ burn_in, patch) pairs whose MAP mode equals the true
/// mode of the region owning the patch's first center pixel.
double mode_detection_accuracy(const EstimationResult& result, const PatchLayout& layout,
                               const std::vector<std::vector<Index>>& true_modes,
                               const SimConfig& sim, Index burn_in);

// CSV files: mse.csv (estimator,realization,frame,mse), timing.csv
// (estimator,realization,seconds), modes.csv (estimator,realization,accuracy),
// failures.csv, aggregate.csv (estimator,frame,mean_mse,stderr_mse).
void write_metrics(const MetricsTable& table, const std::filesystem::path& dir);
MetricsTable read_metrics(const std::filesystem::path& dir);

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Accuracy ordering, runtime ordering and mode-detection checks.
std::vector<CheckResult> benchmark_checks(const MetricsTable& table);

std::string render_report(const MetricsTable& table, const std::vector<CheckResult>& checks);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace pskf
