#pragma once

// Switching Kalman filter with first-order generalized pseudo-Bayesian (GPB1)
// collapsing: every step branches the single collapsed Gaussian into one
// hypothesis per mode, scores each branch by its innovation likelihood, and
// moment-matches the mixture back to one Gaussian.

#include <span>
#include <vector>

#include "pskf/lds.hpp"

namespace pskf {

/// The evolution operators and process-noise covariances the hidden mode
/// selects between. All entries share one state dimension.
class ModeLibrary {
 public:
  explicit ModeLibrary(std::vector<LinearEvolution> evolutions);

  Index mode_count() const { return static_cast<Index>(evolutions_.size()); }
  Index state_dim() const { return evolutions_.front().dim(); }
  const LinearEvolution& operator[](Index mode) const {
    return evolutions_[static_cast<std::size_t>(mode)];
  }
  const std::vector<LinearEvolution>& evolutions() const { return evolutions_; }

 private:
  std::vector<LinearEvolution> evolutions_;
};

/// Row-stochastic mode transition matrix, entry (i, j) = P(s_n = j | s_{n-1} = i).
class ModeTransition {
 public:
  explicit ModeTransition(Matrix probabilities);

  /// Self-transition `p_stay`, remaining mass spread evenly over other modes.
  static ModeTransition sticky(Index modes, double p_stay = 0.95);

  const Matrix& matrix() const { return p_; }
  Index mode_count() const { return p_.rows(); }

 private:
  Matrix p_;
};

struct SwitchingBelief {
  Vector weights;
  GaussianBelief belief;
  Index last_mode_map = 0;
  /// log p(y_n | y_1..y_{n-1}) of the step that produced this belief.
  double last_log_likelihood = 0.0;

  static SwitchingBelief initial(GaussianBelief prior, Index modes);
};

/// w'_j ∝ (Tᵀ w)_j · exp(λ_j), normalized with log-sum-exp. Throws
/// DegenerateLikelihoodError if no mode has positive posterior mass.
Vector mode_posterior(const Vector& weights, const ModeTransition& transition,
                      const Vector& log_likelihoods);

/// Moment-matched single Gaussian of a weighted mixture.
GaussianBelief collapse(std::span<const GaussianBelief> components, const Vector& weights);

/// One SKF step. `inputs` is the exogenous additive term on the predicted
/// mean: empty (none), a single vector shared by every mode, or one per mode.
SwitchingBelief skf_step(const SwitchingBelief& state, const ModeLibrary& library,
                         const ModeTransition& transition, const MeasurementModel& measurement,
                         const Vector& y, std::span<const Vector> inputs = {},
                         CovarianceForm form = CovarianceForm::joseph);

}  // namespace pskf
