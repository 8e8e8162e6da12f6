#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pskf/estimators.hpp"
#include "pskf/simulation.hpp"
#include "test_support.hpp"

namespace pskf {
namespace {

using testing::random_spd;
using testing::random_stable;
using testing::random_vector;
using testing::relative_error;

FrameSequence random_frames(std::mt19937_64& rng, ImageDims dims, Index T, double scale = 1.0) {
  FrameSequence seq{dims, {}};
  for (Index t = 0; t < T; ++t) seq.frames.push_back(scale * random_vector(rng, dims.pixel_count()));
  return seq;
}

EstimatorConfig two_mode_config(EstimatorKind kind, Index d, double q0 = 1e-3, double q1 = 0.5,
                                double r = 0.1) {
  return EstimatorConfig(kind,
                         ModeLibrary({LinearEvolution::random_walk(d, q0),
                                      LinearEvolution::random_walk(d, q1)}),
                         ModeTransition::sticky(2, 0.95), MeasurementModel::identity(d, r));
}

void expect_frames_near(const FrameSequence& a, const FrameSequence& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t t = 0; t < a.size(); ++t) {
    EXPECT_LT(relative_error(a.frames[t], b.frames[t]), tol) << "frame " << t;
  }
}

/// Block-diagonal model on a 16×16 image: each 8×8 block evolves on its own.
struct BlockSystem {
  ImageDims dims{16, 16};
  Matrix A, Q, R;

  explicit BlockSystem(std::mt19937_64& rng) {
    const Index d = dims.pixel_count();
    A = Matrix::Zero(d, d);
    Q = Matrix::Zero(d, d);
    R = Matrix::Zero(d, d);
    const PatchLayout blocks = partition_windows(dims, 8);
    for (const Patch& p : blocks.patches()) {
      const Matrix a = random_stable(rng, 64, 0.9);
      const Matrix q = random_spd(rng, 64, 0.05);
      for (Index i = 0; i < 64; ++i) {
        for (Index j = 0; j < 64; ++j) {
          A(p.pixels[static_cast<std::size_t>(i)], p.pixels[static_cast<std::size_t>(j)]) = a(i, j);
          Q(p.pixels[static_cast<std::size_t>(i)], p.pixels[static_cast<std::size_t>(j)]) = q(i, j);
        }
      }
    }
    for (Index i = 0; i < d; ++i) R(i, i) = 0.05 + 0.1 * std::abs(random_vector(rng, 1)(0));
  }

  FrameSequence measurements(std::mt19937_64& rng, Index T) const {
    const auto ys = testing::sample_measurements(rng, Vector::Zero(dims.pixel_count()), A, Q,
                                                 Matrix::Identity(dims.pixel_count(), dims.pixel_count()), R, T);
    return FrameSequence{dims, ys};
  }

  EstimatorConfig config(EstimatorKind kind) const {
    return EstimatorConfig(kind, ModeLibrary({LinearEvolution(A, Q)}), ModeTransition::sticky(1),
                           MeasurementModel(Matrix::Identity(A.rows(), A.rows()), R));
  }
};

std::vector<Vector> plain_kf(const FrameSequence& ys, const LinearEvolution& evo,
                             const MeasurementModel& meas, double prior_var) {
  GaussianBelief b = GaussianBelief::isotropic(evo.dim(), prior_var);
  std::vector<Vector> out;
  for (const Vector& y : ys.frames) {
    b = kf_step(b, evo, meas, y).belief;
    out.push_back(b.mean);
  }
  return out;
}

TEST(FullSkf, SingleModeEqualsKalmanFilter) {
  std::mt19937_64 rng(41);
  const ImageDims dims{5, 5};
  const FrameSequence ys = random_frames(rng, dims, 12);
  const LinearEvolution evo = LinearEvolution::random_walk(25, 0.2);
  const MeasurementModel meas = MeasurementModel::identity(25, 0.3);
  EstimatorConfig cfg(EstimatorKind::full, ModeLibrary({evo}), ModeTransition::sticky(1), meas);
  const EstimationResult r = run_full_skf(ys, cfg);
  const auto kf = plain_kf(ys, evo, meas, cfg.prior_variance);
  for (std::size_t t = 0; t < ys.size(); ++t) EXPECT_LT(relative_error(r.estimates.frames[t], kf[t]), 1e-12);
}

TEST(FullSkf, MatchesHandAssembledSkf) {
  std::mt19937_64 rng(42);
  const ImageDims dims{4, 4};
  const FrameSequence ys = random_frames(rng, dims, 5);
  const EstimatorConfig cfg = two_mode_config(EstimatorKind::full, 16);
  const EstimationResult r = run_full_skf(ys, cfg);

  SwitchingBelief s = SwitchingBelief::initial(GaussianBelief::isotropic(16, kDefaultPriorVariance), 2);
  double loglik = 0.0;
  for (std::size_t t = 0; t < ys.size(); ++t) {
    s = skf_step(s, cfg.library, cfg.transition, cfg.measurement, ys.frames[t]);
    loglik += s.last_log_likelihood;
    EXPECT_LT(relative_error(r.estimates.frames[t], s.belief.mean), 1e-12);
    ASSERT_EQ(r.mode_posteriors[t].size(), 1u);
    EXPECT_LT((r.mode_posteriors[t][0] - s.weights).norm(), 1e-12);
    EXPECT_EQ(r.map_modes[t][0], s.last_mode_map);
    EXPECT_NEAR(r.log_likelihood[t], s.last_log_likelihood, 1e-9);
  }
}

TEST(FullSkf, ZeroDataZeroPriorGivesZero) {
  const FrameSequence ys{{3, 3}, std::vector<Vector>(4, Vector::Zero(9))};
  const EstimationResult r = run_full_skf(ys, two_mode_config(EstimatorKind::full, 9));
  for (const Vector& f : r.estimates.frames) EXPECT_TRUE(f.isZero(0.0));
}

TEST(FullSkf, ResultShapesAndTiming) {
  std::mt19937_64 rng(43);
  const FrameSequence ys = random_frames(rng, {4, 6}, 7);
  const EstimationResult r = run_full_skf(ys, two_mode_config(EstimatorKind::full, 24));
  EXPECT_EQ(r.estimates.size(), 7u);
  EXPECT_EQ(r.estimates.dims, ys.dims);
  EXPECT_EQ(r.frame_seconds.size(), 7u);
  EXPECT_EQ(r.log_likelihood.size(), 7u);
  for (double s : r.frame_seconds) EXPECT_GE(s, 0.0);
  EXPECT_GE(r.total_seconds(), 0.0);
}

TEST(FullSkf, SymmetricFormTracksJoseph) {
  std::mt19937_64 rng(44);
  const FrameSequence ys = random_frames(rng, {6, 6}, 15);
  EstimatorConfig joseph = two_mode_config(EstimatorKind::full, 36);
  EstimatorConfig sym = joseph;
  sym.covariance_form = CovarianceForm::symmetric;
  expect_frames_near(run_full_skf(ys, sym).estimates, run_full_skf(ys, joseph).estimates, 1e-10);
}

TEST(FullSkf, RejectsMismatchedMeasurements) {
  std::mt19937_64 rng(45);
  const FrameSequence ys = random_frames(rng, {4, 4}, 2);
  EXPECT_THROW(run_full_skf(ys, two_mode_config(EstimatorKind::full, 9)), DimensionError);
}

TEST(FullSkf, NumericalFailureReportsFrame) {
  std::mt19937_64 rng(46);
  FrameSequence ys = random_frames(rng, {2, 2}, 3);
  EstimatorConfig cfg(EstimatorKind::full, ModeLibrary({LinearEvolution::random_walk(4, 0.1)}),
                      ModeTransition::sticky(1), MeasurementModel::identity(4, 1.0));
  cfg.prior_variance = std::numeric_limits<double>::infinity();
  try {
    run_full_skf(ys, cfg);
    FAIL() << "expected FilterError";
  } catch (const FilterError& e) {
    ASSERT_TRUE(e.frame().has_value());
    EXPECT_EQ(*e.frame(), 0);
    EXPECT_NE(std::string(e.what()).find("frame 0"), std::string::npos);
  }
}

TEST(PerfectSkf, SingleRegionEqualsFull) {
  std::mt19937_64 rng(47);
  const FrameSequence ys = random_frames(rng, {4, 4}, 6);
  const EstimatorConfig cfg = two_mode_config(EstimatorKind::perfect, 16);
  std::vector<Index> all(16);
  for (Index i = 0; i < 16; ++i) all[static_cast<std::size_t>(i)] = i;
  const EstimationResult perfect = run_perfect_skf(ys, cfg, {all});
  const EstimationResult full = run_full_skf(ys, cfg);
  expect_frames_near(perfect.estimates, full.estimates, 1e-12);
  for (std::size_t t = 0; t < ys.size(); ++t) {
    EXPECT_LT((perfect.mode_posteriors[t][0] - full.mode_posteriors[t][0]).norm(), 1e-12);
  }
}

TEST(PerfectSkf, EnumeratesJointModesAndReportsMarginals) {
  std::mt19937_64 rng(48);
  const FrameSequence ys = random_frames(rng, {2, 4}, 4);
  const EstimatorConfig cfg = two_mode_config(EstimatorKind::perfect, 8);
  const std::vector<std::vector<Index>> halves{{0, 1, 4, 5}, {2, 3, 6, 7}};
  const EstimationResult r = run_perfect_skf(ys, cfg, halves);
  for (const auto& per_frame : r.mode_posteriors) {
    ASSERT_EQ(per_frame.size(), 2u);
    for (const Vector& w : per_frame) {
      EXPECT_EQ(w.size(), 2);
      EXPECT_NEAR(w.sum(), 1.0, 1e-10);
    }
  }
  EXPECT_EQ(flop_estimate(EstimatorKind::perfect, 8, 2, 2, 1, 1), 4.0 * 512.0);
}

TEST(PerfectSkf, GuardsJointModeCount) {
  std::mt19937_64 rng(49);
  const FrameSequence ys = random_frames(rng, {3, 3}, 1);
  const EstimatorConfig cfg = two_mode_config(EstimatorKind::perfect, 9);
  std::vector<std::vector<Index>> singletons;
  for (Index i = 0; i < 9; ++i) singletons.push_back({i});  // 2^9 = 512 > 256
  try {
    run_perfect_skf(ys, cfg, singletons);
    FAIL() << "expected guard";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("wskf"), std::string::npos);
  }
  EXPECT_THROW(run_perfect_skf(ys, cfg, {{0, 1, 2}}), std::invalid_argument);
  EXPECT_THROW(run_perfect_skf(ys, cfg, {{0, 1, 2, 3, 4, 5, 6, 7, 8}, {0}}), std::invalid_argument);
}

// Windows equal to the switching regions, block-diagonal Q and a product-form
// joint transition make the joint-mode filter factor into independent window
// filters, so the two must agree to roundoff.
TEST(PerfectSkf, EqualsWskfWhenWindowsMatchRegions) {
  SimConfig sim;
  sim.side = 8;
  sim.frames = 10;
  sim.blobs_per_region = 2;
  const std::vector<double> q = fit_mode_variances(sim);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    sim.seed = seed;
    const SimOutput out = generate(sim);
    const ModeLibrary lib({LinearEvolution::random_walk(64, q[0]), LinearEvolution::random_walk(64, q[1])});
    EstimatorConfig cfg(EstimatorKind::perfect, lib, ModeTransition::sticky(2, 0.95),
                        MeasurementModel::identity(64, out.noise_variance));
    cfg.window_side = 4;
    const EstimationResult p = run_perfect_skf(out.measurements, cfg, region_pixels(sim));
    const EstimationResult w = run_wskf(out.measurements, cfg);
    for (std::size_t t = 0; t < out.truth.size(); ++t) {
      EXPECT_LT(relative_error(p.estimates.frames[t], w.estimates.frames[t]), 1e-9)
          << "seed " << seed << " frame " << t;
    }
  }
}

TEST(Wskf, WholeImageWindowEqualsFull) {
  std::mt19937_64 rng(50);
  const FrameSequence ys = random_frames(rng, {6, 6}, 8);
  EstimatorConfig cfg = two_mode_config(EstimatorKind::wskf, 36);
  cfg.window_side = 6;
  const EstimationResult w = run_wskf(ys, cfg);
  const EstimationResult f = run_full_skf(ys, cfg);
  expect_frames_near(w.estimates, f.estimates, 1e-12);
  for (std::size_t t = 0; t < ys.size(); ++t) {
    EXPECT_LT((w.mode_posteriors[t][0] - f.mode_posteriors[t][0]).norm(), 1e-12);
  }
}

TEST(Swskf, SingleWindowEqualsFull) {
  std::mt19937_64 rng(51);
  const FrameSequence ys = random_frames(rng, {6, 6}, 8);
  const EstimatorConfig cfg = two_mode_config(EstimatorKind::swskf, 36);
  const EstimationResult s =
      run_patch_skf(ys, cfg, single_window_layout(ys.dims, LayoutMode::sliding));
  expect_frames_near(s.estimates, run_full_skf(ys, cfg).estimates, 1e-12);
}

TEST(Wskf, PaperGeometryAdvancesSixteenFilters) {
  std::mt19937_64 rng(52);
  const FrameSequence ys = random_frames(rng, {32, 32}, 2);
  const EstimationResult r = run_wskf(ys, two_mode_config(EstimatorKind::wskf, 1024));
  ASSERT_EQ(r.mode_posteriors.size(), 2u);
  EXPECT_EQ(r.mode_posteriors[0].size(), 16u);
  EXPECT_EQ(r.map_modes[1].size(), 16u);
  EstimatorConfig sw = two_mode_config(EstimatorKind::swskf, 1024);
  EXPECT_EQ(run_swskf(ys, sw).mode_posteriors[0].size(), 256u);
}

TEST(Decoupling, WskfEqualsFullKfOnBlockDiagonalTruth) {
  std::mt19937_64 rng(53);
  const BlockSystem sys(rng);
  const FrameSequence ys = sys.measurements(rng, 20);
  EstimatorConfig cfg = sys.config(EstimatorKind::wskf);
  cfg.window_side = 8;
  const EstimationResult w = run_wskf(ys, cfg);
  const auto kf = plain_kf(ys, cfg.library[0], cfg.measurement, cfg.prior_variance);
  for (std::size_t t = 0; t < ys.size(); ++t) EXPECT_LT(relative_error(w.estimates.frames[t], kf[t]), 1e-8);
}

TEST(Decoupling, SwskfWithAlignedCentersEqualsFullKf) {
  std::mt19937_64 rng(54);
  const BlockSystem sys(rng);
  const FrameSequence ys = sys.measurements(rng, 20);
  EstimatorConfig cfg = sys.config(EstimatorKind::swskf);
  cfg.alpha = 8;
  cfg.radius = 1;
  const EstimationResult s = run_swskf(ys, cfg);
  const auto kf = plain_kf(ys, cfg.library[0], cfg.measurement, cfg.prior_variance);
  for (std::size_t t = 0; t < ys.size(); ++t) EXPECT_LT(relative_error(s.estimates.frames[t], kf[t]), 1e-8);
}

TEST(Coupling, PatchPipelineMatchesManualComposition) {
  std::mt19937_64 rng(55);
  const ImageDims dims{4, 4};
  const Index d = 16;
  Matrix A = 0.6 * Matrix::Identity(d, d);
  for (Index r = 0; r < 4; ++r)
    for (Index c = 0; c + 1 < 4; ++c) A(dims.flat(r, c), dims.flat(r, c + 1)) = 0.3;
  const ModeLibrary lib({LinearEvolution(A, 0.1 * Matrix::Identity(d, d)),
                         LinearEvolution(0.9 * A, 0.4 * Matrix::Identity(d, d))});
  EstimatorConfig cfg(EstimatorKind::wskf, lib, ModeTransition::sticky(2, 0.9),
                      MeasurementModel::identity(d, 0.2));
  cfg.window_side = 2;
  cfg.prior_mean = 0.25;
  cfg.per_mode_input = true;
  const FrameSequence ys = random_frames(rng, dims, 6);
  const EstimationResult r = run_wskf(ys, cfg);

  const PatchLayout layout = partition_windows(dims, 2);
  std::vector<SwitchingBelief> states;
  std::vector<ModeLibrary> local;
  for (const Patch& p : layout.patches()) {
    states.push_back(SwitchingBelief::initial(
        GaussianBelief::isotropic(4, cfg.prior_variance, cfg.prior_mean), 2));
    local.push_back(ModeLibrary({LinearEvolution(lib[0].A()(p.pixels, p.pixels), lib[0].Q()(p.pixels, p.pixels)),
                                 LinearEvolution(lib[1].A()(p.pixels, p.pixels), lib[1].Q()(p.pixels, p.pixels))}));
  }
  Vector prev = Vector::Constant(d, cfg.prior_mean);
  bool coupled = false;
  for (std::size_t t = 0; t < ys.size(); ++t) {
    std::vector<Vector> parts;
    for (std::size_t i = 0; i < layout.size(); ++i) {
      const Patch& p = layout[i];
      const std::vector<Vector> inputs{neighbor_input(prev, p, layout, lib[0].A()),
                                       neighbor_input(prev, p, layout, lib[1].A())};
      coupled = coupled || !inputs[0].isZero(0.0);
      states[i] = skf_step(states[i], local[i], cfg.transition, MeasurementModel::identity(4, 0.2),
                           extract_patch(ys.frames[t], p), inputs);
      parts.push_back(states[i].belief.mean);
    }
    prev = merge_estimates(parts, layout);
    EXPECT_LT(relative_error(r.estimates.frames[t], prev), 1e-12);
  }
  EXPECT_TRUE(coupled);
}

TEST(Estimators, RepeatedRunsAreBitIdentical) {
  std::mt19937_64 rng(56);
  const FrameSequence ys = random_frames(rng, {8, 8}, 6);
  for (EstimatorKind kind : {EstimatorKind::full, EstimatorKind::wskf, EstimatorKind::swskf}) {
    EstimatorConfig cfg = two_mode_config(kind, 64);
    cfg.window_side = 4;
    cfg.radius = 1;
    const EstimationResult a = run_estimator(ys, cfg);
    const EstimationResult b = run_estimator(ys, cfg);
    for (std::size_t t = 0; t < ys.size(); ++t) EXPECT_EQ(a.estimates.frames[t], b.estimates.frames[t]);
  }
}

TEST(Estimators, KindNamesRoundTrip) {
  for (EstimatorKind k : {EstimatorKind::full, EstimatorKind::perfect, EstimatorKind::wskf, EstimatorKind::swskf}) {
    EXPECT_EQ(parse_estimator_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_estimator_kind("kalman"), std::invalid_argument);
  for (CovarianceForm f : {CovarianceForm::joseph, CovarianceForm::standard, CovarianceForm::symmetric}) {
    EXPECT_EQ(parse_covariance_form(to_string(f)), f);
  }
  EXPECT_THROW(parse_covariance_form("cholesky"), std::invalid_argument);
}

TEST(FlopEstimate, DominantTerms) {
  EXPECT_EQ(flop_estimate(EstimatorKind::wskf, 1024, 16, 2, 64, 256), 8388608.0);
  const double full = flop_estimate(EstimatorKind::full, 1024, 16, 2, 64, 256);
  EXPECT_EQ(full, 2.0 * 1024.0 * 1024.0 * 1024.0);
  EXPECT_EQ(full / flop_estimate(EstimatorKind::wskf, 1024, 16, 2, 64, 256), 256.0);
  EXPECT_EQ(flop_estimate(EstimatorKind::swskf, 1024, 16, 2, 64, 256), 256.0 * 2.0 * 64 * 64 * 64);
  EXPECT_EQ(flop_estimate(EstimatorKind::perfect, 1024, 1, 2, 64, 256), full);
  EXPECT_EQ(flop_estimate(EstimatorKind::perfect, 100, 4, 2, 1, 1), 16.0 * 1e6);
  EXPECT_THROW(flop_estimate(EstimatorKind::full, 0, 1, 1, 1, 1), std::invalid_argument);
}

}  // namespace
}  // namespace pskf
