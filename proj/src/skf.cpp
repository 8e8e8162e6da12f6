#include "pskf/skf.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace pskf {

ModeLibrary::ModeLibrary(std::vector<LinearEvolution> evolutions)
    : evolutions_(std::move(evolutions)) {
  if (evolutions_.empty()) throw std::invalid_argument("mode library needs at least one mode");
  const Index d = evolutions_.front().dim();
  for (const auto& e : evolutions_) {
    if (e.dim() != d) throw DimensionError("evolutions", "modes disagree on state dimension");
  }
}

ModeTransition::ModeTransition(Matrix probabilities) : p_(std::move(probabilities)) {
  if (p_.rows() == 0 || p_.rows() != p_.cols()) {
    throw DimensionError("transition", "must be a non-empty square matrix");
  }
  if ((p_.array() < 0.0).any() || (p_.array() > 1.0).any()) {
    throw std::invalid_argument("transition probabilities must lie in [0, 1]");
  }
  for (Index i = 0; i < p_.rows(); ++i) {
    if (std::abs(p_.row(i).sum() - 1.0) > 1e-12) {
      throw std::invalid_argument("transition row " + std::to_string(i) + " does not sum to 1");
    }
  }
}

ModeTransition ModeTransition::sticky(Index modes, double p_stay) {
  if (modes < 1) throw std::invalid_argument("mode count must be positive");
  if (!(p_stay >= 0.0 && p_stay <= 1.0)) throw std::invalid_argument("p_stay must be in [0, 1]");
  if (modes == 1) return ModeTransition(Matrix::Ones(1, 1));
  const double off = (1.0 - p_stay) / static_cast<double>(modes - 1);
  Matrix p = Matrix::Constant(modes, modes, off);
  p.diagonal().setConstant(p_stay);
  return ModeTransition(std::move(p));
}

SwitchingBelief SwitchingBelief::initial(GaussianBelief prior, Index modes) {
  SwitchingBelief s;
  s.weights = Vector::Constant(modes, 1.0 / static_cast<double>(modes));
  s.belief = std::move(prior);
  return s;
}

Vector mode_posterior(const Vector& weights, const ModeTransition& transition,
                      const Vector& log_likelihoods) {
  const Index l = transition.mode_count();
  if (weights.size() != l) throw DimensionError("weights", "length vs mode count");
  if (log_likelihoods.size() != l) throw DimensionError("log_likelihoods", "length vs mode count");

  const Vector prior = transition.matrix().transpose() * weights;
  Vector log_post(l);
  double peak = -std::numeric_limits<double>::infinity();
  for (Index j = 0; j < l; ++j) {
    const double lp = prior(j) > 0.0 ? std::log(prior(j)) : -std::numeric_limits<double>::infinity();
    log_post(j) = lp + log_likelihoods(j);
    if (std::isnan(log_post(j))) log_post(j) = -std::numeric_limits<double>::infinity();
    peak = std::max(peak, log_post(j));
  }
  if (!std::isfinite(peak)) {
    throw DegenerateLikelihoodError("all mode hypotheses have zero posterior likelihood");
  }
  Vector out = (log_post.array() - peak).exp();
  out /= out.sum();
  return out;
}

GaussianBelief collapse(std::span<const GaussianBelief> components, const Vector& weights) {
  if (components.empty()) throw DimensionError("components", "empty mixture");
  if (weights.size() != static_cast<Index>(components.size())) {
    throw DimensionError("weights", "one weight per component required");
  }
  const Index n = components.front().dim();

  GaussianBelief out;
  out.mean = Vector::Zero(n);
  for (std::size_t j = 0; j < components.size(); ++j) {
    if (components[j].dim() != n) throw DimensionError("components", "mixed dimensions");
    out.mean.noalias() += weights(static_cast<Index>(j)) * components[j].mean;
  }
  out.cov = Matrix::Zero(n, n);
  for (std::size_t j = 0; j < components.size(); ++j) {
    const double w = weights(static_cast<Index>(j));
    if (w == 0.0) continue;
    out.cov.noalias() += w * components[j].cov;
    const Vector spread = components[j].mean - out.mean;
    out.cov.selfadjointView<Eigen::Lower>().rankUpdate(spread, w);
  }
  // Component covariances are symmetric; the rank updates only touched the lower half.
  symmetrize_from_lower(out.cov);
  return out;
}

SwitchingBelief skf_step(const SwitchingBelief& state, const ModeLibrary& library,
                         const ModeTransition& transition, const MeasurementModel& measurement,
                         const Vector& y, std::span<const Vector> inputs,
                         CovarianceForm form) {
  const Index l = library.mode_count();
  if (transition.mode_count() != l) throw DimensionError("transition", "mode count vs library");
  if (state.weights.size() != l) throw DimensionError("state.weights", "mode count vs library");
  if (!inputs.empty() && inputs.size() != 1 && static_cast<Index>(inputs.size()) != l) {
    throw DimensionError("inputs", "expected none, one shared, or one per mode");
  }
  for (const auto& u : inputs) {
    if (u.size() != library.state_dim()) throw DimensionError("inputs", "length vs state");
  }

  std::vector<GaussianBelief> posteriors;
  posteriors.reserve(static_cast<std::size_t>(l));
  Vector log_lik(l);
  for (Index j = 0; j < l; ++j) {
    GaussianBelief predicted = time_update(state.belief, library[j]);
    if (!inputs.empty()) {
      predicted.mean += inputs.size() == 1 ? inputs.front() : inputs[static_cast<std::size_t>(j)];
    }
    UpdateResult r = measurement_update(predicted, measurement, y, form);
    log_lik(j) = r.log_likelihood;
    posteriors.push_back(std::move(r.belief));
  }

  SwitchingBelief next;
  next.weights = mode_posterior(state.weights, transition, log_lik);

  // log p(y_n | past) = log Σ_j prior_j exp(λ_j)
  const Vector prior = transition.matrix().transpose() * state.weights;
  double peak = -std::numeric_limits<double>::infinity();
  for (Index j = 0; j < l; ++j) {
    if (prior(j) > 0.0) peak = std::max(peak, log_lik(j));
  }
  double acc = 0.0;
  for (Index j = 0; j < l; ++j) {
    if (prior(j) > 0.0) acc += prior(j) * std::exp(log_lik(j) - peak);
  }
  next.last_log_likelihood = peak + std::log(acc);

  next.weights.maxCoeff(&next.last_mode_map);
  if (l == 1) {
    next.belief = std::move(posteriors.front());
  } else {
    next.belief = collapse(posteriors, next.weights);
  }
  return next;
}

}  // namespace pskf
