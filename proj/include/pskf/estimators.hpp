#pragma once

// The image-sequence estimators: a single global SKF ("full"), a global SKF
// that knows which regions switch together ("perfect"), and the patch-based
// windowed (wSKF) and sliding-window (swSKF) filters.

#include <string_view>
#include <vector>

#include "pskf/frames.hpp"
#include "pskf/patching.hpp"
#include "pskf/skf.hpp"

namespace pskf {

enum class EstimatorKind { full, perfect, wskf, swskf };

std::string_view to_string(EstimatorKind kind);
/// Accepts "full", "perfect", "wskf", "swskf".
EstimatorKind parse_estimator_kind(std::string_view name);

std::string_view to_string(CovarianceForm form);
/// Accepts "joseph", "standard", "symmetric".
CovarianceForm parse_covariance_form(std::string_view name);

struct EstimatorConfig {
  EstimatorConfig(EstimatorKind kind, ModeLibrary library, ModeTransition transition,
                  MeasurementModel measurement);

  EstimatorKind kind;
  Index window_side = 8;  // wskf
  Index radius = 3;       // swskf: locality radius r
  Index alpha = 2;        // swskf: center side
  ModeLibrary library;    // full-image evolution models, one per mode
  ModeTransition transition;
  MeasurementModel measurement;
  double prior_mean = 0.0;
  double prior_variance = kDefaultPriorVariance;
  /// Added to the diagonal of every patch-local Q, absorbing neighbor-estimate error.
  double q_inflation = 0.0;
  /// Compute neighbor inputs with each mode's own coupling blocks instead of mode 0's.
  bool per_mode_input = false;
  CovarianceForm covariance_form = CovarianceForm::joseph;
  /// perfect only: pixel sets that switch together; must partition the image.
  std::vector<std::vector<Index>> regions;
};

struct EstimationResult {
  FrameSequence estimates;
  /// [frame][patch] mode weights. One entry per window for wskf/swskf, one per
  /// region (marginal) for perfect, a single entry for full.
  std::vector<std::vector<Vector>> mode_posteriors;
  std::vector<std::vector<Index>> map_modes;
  std::vector<double> frame_seconds;
  /// log p(y_n | y_1..y_{n-1}) per frame, summed over patches.
  std::vector<double> log_likelihood;

  double total_seconds() const;
};

EstimationResult run_full_skf(const FrameSequence& measurements, const EstimatorConfig& config);

/// Throws std::invalid_argument when the joint mode count l^K exceeds 256.
EstimationResult run_perfect_skf(const FrameSequence& measurements, const EstimatorConfig& config,
                                 const std::vector<std::vector<Index>>& regions);

EstimationResult run_wskf(const FrameSequence& measurements, const EstimatorConfig& config);
EstimationResult run_swskf(const FrameSequence& measurements, const EstimatorConfig& config);

/// Patch pipeline over an arbitrary layout; run_wskf and run_swskf call this
/// with partition_windows and sliding_layout respectively.
EstimationResult run_patch_skf(const FrameSequence& measurements, const EstimatorConfig& config,
                               const PatchLayout& layout);

/// Dispatches on config.kind (perfect uses config.regions).
EstimationResult run_estimator(const FrameSequence& measurements, const EstimatorConfig& config);

/// Dominant per-frame cost term:
///   perfect  l^K · d³
///   full     l · d³
///   wskf     K · l · r_w³
///   swskf    K' · l · r_w³
/// where r_w is the number of pixels in a window.
double flop_estimate(EstimatorKind kind, double d, double K, double l, double r_w,
                     double K_prime);

constexpr Index kMaxJointModes = 256;

}  // namespace pskf
