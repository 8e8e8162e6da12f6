#pragma once

// Synthetic cloud-like sequences: Gaussian blobs that random-walk inside
// square regions, each region switching between a slow and a fast velocity as
// an independent two-state Markov chain, observed directly with white noise.

#include <cstdint>
#include <limits>
#include <vector>

#include "pskf/frames.hpp"
#include "pskf/skf.hpp"

namespace pskf {

struct SimConfig {
  Index side = 32;
  Index frames = 100;
  Index region_grid = 2;                     // regions per axis; 2 gives quarters
  std::vector<double> velocities{0.01, 0.94};  // pixels per frame, one per mode
  double switch_prob = 0.05;                 // per frame per region
  Index initial_mode = 0;
  Index blobs_per_region = 12;
  double blob_sigma = 1.0;                   // pixels
  double snr_db = 11.0;                      // +infinity disables noise
  std::uint64_t seed = 1;

  Index region_count() const { return region_grid * region_grid; }
  Index region_side() const { return side / region_grid; }
  ImageDims dims() const { return {side, side}; }
  /// Throws std::invalid_argument describing the first violated constraint.
  void validate() const;
};

struct SimOutput {
  FrameSequence truth;
  FrameSequence measurements;
  std::vector<std::vector<Index>> true_modes;  // [frame][region]
  double noise_variance = 0.0;
  double signal_power = 0.0;  // mean squared truth intensity

  double realized_snr_db() const;
};

SimOutput generate(const SimConfig& config);

/// Row-major pixel sets of the config's regions, in region order.
std::vector<std::vector<Index>> region_pixels(const SimConfig& config);

/// Per-frame mean squared error over pixels.
std::vector<double> mse(const FrameSequence& estimates, const FrameSequence& truth);

/// One random-walk model per velocity: A = I, Q = q·I with q the pooled
/// one-step increment variance of noise-free runs held in that mode.
ModeLibrary fit_mode_covariances(const SimConfig& config);

/// The fitted q values themselves, one per mode.
std::vector<double> fit_mode_variances(const SimConfig& config);

inline constexpr Index kFitTransitions = 500;

}  // namespace pskf
