#include "pskf/estimators.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace pskf {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void check_measurements(const FrameSequence& measurements, const EstimatorConfig& config) {
  const Index d = measurements.dims.pixel_count();
  if (config.library.state_dim() != d) {
    throw DimensionError("config.library", "state dimension " +
                                               std::to_string(config.library.state_dim()) +
                                               " vs image pixels " + std::to_string(d));
  }
  if (config.measurement.state_dim() != d || config.measurement.measurement_dim() != d) {
    throw DimensionError("config.measurement", "expected a " + std::to_string(d) + "x" +
                                                   std::to_string(d) + " measurement operator");
  }
  for (const auto& f : measurements.frames) {
    if (f.size() != d) throw DimensionError("measurements", "frame length vs dims");
  }
}

EstimationResult empty_result(const FrameSequence& measurements) {
  EstimationResult r;
  r.estimates.dims = measurements.dims;
  const std::size_t T = measurements.size();
  r.estimates.frames.reserve(T);
  r.mode_posteriors.reserve(T);
  r.map_modes.reserve(T);
  r.frame_seconds.reserve(T);
  r.log_likelihood.reserve(T);
  return r;
}

EstimationResult run_global(const FrameSequence& measurements, const ModeLibrary& library,
                            const ModeTransition& transition, const EstimatorConfig& config) {
  const Index d = measurements.dims.pixel_count();
  EstimationResult result = empty_result(measurements);
  SwitchingBelief state = SwitchingBelief::initial(
      GaussianBelief::isotropic(d, config.prior_variance, config.prior_mean),
      library.mode_count());

  for (std::size_t n = 0; n < measurements.size(); ++n) {
    const auto start = Clock::now();
    try {
      state = skf_step(state, library, transition, config.measurement, measurements.frames[n], {},
                       config.covariance_form);
    } catch (FilterError& e) {
      e.set_frame(static_cast<long>(n));
      throw;
    }
    result.estimates.frames.push_back(state.belief.mean);
    result.frame_seconds.push_back(seconds_since(start));
    result.mode_posteriors.push_back({state.weights});
    result.map_modes.push_back({state.last_mode_map});
    result.log_likelihood.push_back(state.last_log_likelihood);
  }
  return result;
}

struct PatchModel {
  Localizer localizer;
  MeasurementModel measurement;
  ModeLibrary library;
  std::vector<Index> sources;
  std::vector<Matrix> coupling;  // per mode A[patch, sources]; empty when all zero
};

}  // namespace

std::string_view to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::full: return "full";
    case EstimatorKind::perfect: return "perfect";
    case EstimatorKind::wskf: return "wskf";
    case EstimatorKind::swskf: return "swskf";
  }
  return "unknown";
}

EstimatorKind parse_estimator_kind(std::string_view name) {
  if (name == "full") return EstimatorKind::full;
  if (name == "perfect") return EstimatorKind::perfect;
  if (name == "wskf") return EstimatorKind::wskf;
  if (name == "swskf") return EstimatorKind::swskf;
  throw std::invalid_argument("unknown estimator '" + std::string(name) +
                              "' (expected full|perfect|wskf|swskf)");
}

std::string_view to_string(CovarianceForm form) {
  switch (form) {
    case CovarianceForm::joseph: return "joseph";
    case CovarianceForm::standard: return "standard";
    case CovarianceForm::symmetric: return "symmetric";
  }
  return "unknown";
}

CovarianceForm parse_covariance_form(std::string_view name) {
  if (name == "joseph") return CovarianceForm::joseph;
  if (name == "standard") return CovarianceForm::standard;
  if (name == "symmetric") return CovarianceForm::symmetric;
  throw std::invalid_argument("unknown covariance form '" + std::string(name) +
                              "' (expected joseph|standard|symmetric)");
}

EstimatorConfig::EstimatorConfig(EstimatorKind kind_, ModeLibrary library_,
                                 ModeTransition transition_, MeasurementModel measurement_)
    : kind(kind_),
      library(std::move(library_)),
      transition(std::move(transition_)),
      measurement(std::move(measurement_)) {
  if (transition.mode_count() != library.mode_count()) {
    throw DimensionError("transition", "mode count vs library");
  }
}

double EstimationResult::total_seconds() const {
  return std::accumulate(frame_seconds.begin(), frame_seconds.end(), 0.0);
}

EstimationResult run_full_skf(const FrameSequence& measurements, const EstimatorConfig& config) {
  check_measurements(measurements, config);
  return run_global(measurements, config.library, config.transition, config);
}

EstimationResult run_perfect_skf(const FrameSequence& measurements, const EstimatorConfig& config,
                                 const std::vector<std::vector<Index>>& regions) {
  check_measurements(measurements, config);
  const Index d = measurements.dims.pixel_count();
  const Index l = config.library.mode_count();
  const auto K = static_cast<Index>(regions.size());
  if (K < 1) throw std::invalid_argument("perfect SKF needs at least one region");

  std::vector<Index> region_of(static_cast<std::size_t>(d), -1);
  for (Index k = 0; k < K; ++k) {
    for (Index px : regions[static_cast<std::size_t>(k)]) {
      if (px < 0 || px >= d) throw std::invalid_argument("region pixel out of range");
      if (region_of[static_cast<std::size_t>(px)] != -1) {
        throw std::invalid_argument("regions overlap at pixel " + std::to_string(px));
      }
      region_of[static_cast<std::size_t>(px)] = k;
    }
  }
  for (Index px = 0; px < d; ++px) {
    if (region_of[static_cast<std::size_t>(px)] == -1) {
      throw std::invalid_argument("regions do not cover pixel " + std::to_string(px));
    }
  }

  double joint_count = std::pow(static_cast<double>(l), static_cast<double>(K));
  if (joint_count > static_cast<double>(kMaxJointModes)) {
    throw std::invalid_argument("perfect-knowledge SKF would need " +
                                std::to_string(static_cast<long long>(joint_count)) +
                                " joint modes (limit " + std::to_string(kMaxJointModes) +
                                "); use the windowed SKF (wskf) instead");
  }
  const auto joint = static_cast<Index>(joint_count);

  // Joint hypothesis h assigns mode (h / l^k) % l to region k.
  auto mode_of = [&](Index h, Index k) {
    for (Index i = 0; i < k; ++i) h /= l;
    return h % l;
  };

  std::vector<LinearEvolution> evolutions;
  evolutions.reserve(static_cast<std::size_t>(joint));
  for (Index h = 0; h < joint; ++h) {
    Matrix A(d, d);
    Matrix Q = Matrix::Zero(d, d);
    for (Index i = 0; i < d; ++i) {
      const Index k = region_of[static_cast<std::size_t>(i)];
      const LinearEvolution& e = config.library[mode_of(h, k)];
      A.row(i) = e.A().row(i);
    }
    for (Index j = 0; j < d; ++j) {
      const Index kj = region_of[static_cast<std::size_t>(j)];
      const Matrix& Qm = config.library[mode_of(h, kj)].Q();
      for (Index i = 0; i < d; ++i) {
        if (region_of[static_cast<std::size_t>(i)] == kj) Q(i, j) = Qm(i, j);
      }
    }
    evolutions.emplace_back(std::move(A), std::move(Q));
  }

  Matrix T(joint, joint);
  const Matrix& base = config.transition.matrix();
  for (Index a = 0; a < joint; ++a) {
    for (Index b = 0; b < joint; ++b) {
      double p = 1.0;
      for (Index k = 0; k < K; ++k) p *= base(mode_of(a, k), mode_of(b, k));
      T(a, b) = p;
    }
  }
  // Products of stochastic rows can drift by an ulp; renormalize for the 1e-12 row check.
  for (Index a = 0; a < joint; ++a) T.row(a) /= T.row(a).sum();

  EstimationResult result =
      run_global(measurements, ModeLibrary(std::move(evolutions)), ModeTransition(T), config);

  // Report per-region marginals rather than joint weights.
  for (std::size_t n = 0; n < result.mode_posteriors.size(); ++n) {
    const Vector jointw = result.mode_posteriors[n].front();
    std::vector<Vector> marginals(static_cast<std::size_t>(K), Vector::Zero(l));
    for (Index h = 0; h < joint; ++h) {
      for (Index k = 0; k < K; ++k) marginals[static_cast<std::size_t>(k)](mode_of(h, k)) += jointw(h);
    }
    std::vector<Index> maps(static_cast<std::size_t>(K));
    for (Index k = 0; k < K; ++k) marginals[static_cast<std::size_t>(k)].maxCoeff(&maps[static_cast<std::size_t>(k)]);
    result.mode_posteriors[n] = std::move(marginals);
    result.map_modes[n] = std::move(maps);
  }
  return result;
}

EstimationResult run_patch_skf(const FrameSequence& measurements, const EstimatorConfig& config,
                               const PatchLayout& layout) {
  check_measurements(measurements, config);
  if (!(layout.dims() == measurements.dims)) {
    throw DimensionError("layout", "image dims vs measurements");
  }
  const Index d = measurements.dims.pixel_count();
  const Index l = config.library.mode_count();
  const LocalizationBasis basis(config.measurement);

  std::vector<PatchModel> models;
  std::vector<SwitchingBelief> states;
  models.reserve(layout.size());
  states.reserve(layout.size());
  for (const Patch& patch : layout.patches()) {
    const auto size = static_cast<Index>(patch.pixels.size());
    Localizer loc = build_localizer(basis, patch);
    MeasurementModel local_measurement(loc.theta, loc.noise_cov);

    std::vector<LinearEvolution> local;
    local.reserve(static_cast<std::size_t>(l));
    for (Index j = 0; j < l; ++j) {
      const LinearEvolution& e = config.library[j];
      Matrix Q = e.Q()(patch.pixels, patch.pixels);
      if (config.q_inflation != 0.0) Q.diagonal().array() += config.q_inflation;
      local.emplace_back(e.A()(patch.pixels, patch.pixels), std::move(Q));
    }

    std::vector<Index> sources = coupling_sources(patch, layout);
    std::vector<Matrix> coupling;
    if (!sources.empty()) {
      bool any = false;
      for (Index j = 0; j < l; ++j) {
        coupling.push_back(config.library[j].A()(patch.pixels, sources));
        any = any || !coupling.back().isZero(0.0);
      }
      if (!any) coupling.clear();
    }

    models.push_back(PatchModel{std::move(loc), std::move(local_measurement),
                                ModeLibrary(std::move(local)), std::move(sources),
                                std::move(coupling)});
    states.push_back(SwitchingBelief::initial(
        GaussianBelief::isotropic(size, config.prior_variance, config.prior_mean), l));
  }

  EstimationResult result = empty_result(measurements);
  Vector previous = Vector::Constant(d, config.prior_mean);
  std::vector<Vector> patch_estimates(layout.size());
  std::vector<Vector> inputs;

  for (std::size_t n = 0; n < measurements.size(); ++n) {
    const auto start = Clock::now();
    const Vector& y = measurements.frames[n];
    std::vector<Vector> weights(layout.size());
    std::vector<Index> maps(layout.size());
    double loglik = 0.0;

    for (std::size_t i = 0; i < layout.size(); ++i) {
      const Patch& patch = layout[i];
      PatchModel& model = models[i];
      const Vector local_y =
          basis.identity() ? Vector(y(patch.pixels)) : Vector(model.localizer.gamma * y);

      // Neighbor terms come from the previous merged frame, so patch order is irrelevant.
      inputs.clear();
      if (!model.coupling.empty()) {
        const Vector src = previous(model.sources);
        if (config.per_mode_input) {
          for (const auto& c : model.coupling) inputs.push_back(c * src);
        } else {
          inputs.push_back(model.coupling.front() * src);
        }
      }

      try {
        states[i] = skf_step(states[i], model.library, config.transition, model.measurement,
                             local_y, inputs, config.covariance_form);
      } catch (FilterError& e) {
        e.set_frame(static_cast<long>(n));
        throw;
      }
      patch_estimates[i] = states[i].belief.mean;
      weights[i] = states[i].weights;
      maps[i] = states[i].last_mode_map;
      loglik += states[i].last_log_likelihood;
    }

    previous = merge_estimates(patch_estimates, layout);
    result.frame_seconds.push_back(seconds_since(start));
    result.estimates.frames.push_back(previous);
    result.mode_posteriors.push_back(std::move(weights));
    result.map_modes.push_back(std::move(maps));
    result.log_likelihood.push_back(loglik);
  }
  return result;
}

EstimationResult run_wskf(const FrameSequence& measurements, const EstimatorConfig& config) {
  return run_patch_skf(measurements, config,
                       partition_windows(measurements.dims, config.window_side));
}

EstimationResult run_swskf(const FrameSequence& measurements, const EstimatorConfig& config) {
  return run_patch_skf(measurements, config,
                       sliding_layout(measurements.dims, config.radius, config.alpha));
}

EstimationResult run_estimator(const FrameSequence& measurements, const EstimatorConfig& config) {
  switch (config.kind) {
    case EstimatorKind::full: return run_full_skf(measurements, config);
    case EstimatorKind::perfect: return run_perfect_skf(measurements, config, config.regions);
    case EstimatorKind::wskf: return run_wskf(measurements, config);
    case EstimatorKind::swskf: return run_swskf(measurements, config);
  }
  throw std::invalid_argument("unknown estimator kind");
}

double flop_estimate(EstimatorKind kind, double d, double K, double l, double r_w,
                     double K_prime) {
  for (double v : {d, K, l, r_w, K_prime}) {
    if (!(v > 0.0)) throw std::invalid_argument("flop_estimate arguments must be positive");
  }
  switch (kind) {
    case EstimatorKind::perfect: return std::pow(l, K) * d * d * d;
    case EstimatorKind::full: return l * d * d * d;
    case EstimatorKind::wskf: return K * l * r_w * r_w * r_w;
    case EstimatorKind::swskf: return K_prime * l * r_w * r_w * r_w;
  }
  throw std::invalid_argument("unknown estimator kind");
}

}  // namespace pskf
