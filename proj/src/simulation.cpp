#include "pskf/simulation.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace pskf {

namespace {

struct Blob {
  double row = 0.0;
  double col = 0.0;
  double amplitude = 1.0;
  Index region = 0;
};

// Half-sample symmetric reflection of an integer index into [0, n).
Index reflect_index(Index i, Index n) {
  const Index period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

// Mirror a continuous coordinate into [lo, hi].
double reflect_coord(double x, double lo, double hi) {
  const double span = hi - lo;
  if (span <= 0.0) return lo;
  double t = std::fmod(x - lo, 2.0 * span);
  if (t < 0.0) t += 2.0 * span;
  return lo + (t <= span ? t : 2.0 * span - t);
}

class Renderer {
 public:
  Renderer(Index side, double sigma) : side_(side), radius_(static_cast<Index>(std::ceil(3.0 * sigma))) {
    const Index w = 2 * radius_ + 1;
    stamp_.resize(w, w);
    for (Index r = 0; r < w; ++r) {
      for (Index c = 0; c < w; ++c) {
        const double dr = static_cast<double>(r - radius_), dc = static_cast<double>(c - radius_);
        stamp_(r, c) = std::exp(-(dr * dr + dc * dc) / (2.0 * sigma * sigma));
      }
    }
  }

  // Splat the stamp at a sub-pixel position with bilinear weights; mass that
  // falls outside the image is reflected back in.
  void splat(const Blob& b, Vector& frame) const {
    const double fr = std::floor(b.row), fc = std::floor(b.col);
    const double wr = b.row - fr, wc = b.col - fc;
    const auto ir = static_cast<Index>(fr), ic = static_cast<Index>(fc);
    const double w[2][2] = {{(1 - wr) * (1 - wc), (1 - wr) * wc}, {wr * (1 - wc), wr * wc}};
    const Index width = 2 * radius_ + 1;
    for (Index r = 0; r < width; ++r) {
      for (Index c = 0; c < width; ++c) {
        const double v = b.amplitude * stamp_(r, c);
        for (int u = 0; u < 2; ++u) {
          for (int s = 0; s < 2; ++s) {
            if (w[u][s] == 0.0) continue;
            const Index pr = reflect_index(ir + r - radius_ + u, side_);
            const Index pc = reflect_index(ic + c - radius_ + s, side_);
            frame(pr * side_ + pc) += w[u][s] * v;
          }
        }
      }
    }
  }

 private:
  Index side_;
  Index radius_;
  Matrix stamp_;
};

}  // namespace

void SimConfig::validate() const {
  if (side < 1) throw std::invalid_argument("side must be positive");
  if (frames < 1) throw std::invalid_argument("frame count must be positive");
  if (region_grid < 1 || side % region_grid != 0) {
    throw std::invalid_argument("side must be divisible by the region grid");
  }
  if (velocities.empty()) throw std::invalid_argument("at least one mode velocity is required");
  for (double v : velocities) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("velocities must be finite and nonnegative");
    }
  }
  if (!(switch_prob >= 0.0 && switch_prob <= 1.0)) {
    throw std::invalid_argument("switch probability must lie in [0, 1]");
  }
  if (initial_mode < 0 || initial_mode >= static_cast<Index>(velocities.size())) {
    throw std::invalid_argument("initial mode out of range");
  }
  if (blobs_per_region < 1) throw std::invalid_argument("need at least one blob per region");
  if (!(blob_sigma > 0.0) || !std::isfinite(blob_sigma)) {
    throw std::invalid_argument("blob width must be positive");
  }
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
    throw std::invalid_argument("SNR must be finite or +inf");
  }
}

double SimOutput::realized_snr_db() const {
  double noise = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    noise += (measurements.frames[t] - truth.frames[t]).squaredNorm();
    count += static_cast<std::size_t>(truth.frames[t].size());
  }
  noise /= static_cast<double>(count);
  if (noise == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal_power / noise);
}

std::vector<std::vector<Index>> region_pixels(const SimConfig& config) {
  const ImageDims dims = config.dims();
  const Index rs = config.region_side();
  std::vector<std::vector<Index>> out;
  for (Index gr = 0; gr < config.region_grid; ++gr) {
    for (Index gc = 0; gc < config.region_grid; ++gc) {
      out.push_back(PixelBox{gr * rs, (gr + 1) * rs, gc * rs, (gc + 1) * rs}.indices(dims));
    }
  }
  return out;
}

SimOutput generate(const SimConfig& config) {
  config.validate();
  const Index side = config.side;
  const Index rs = config.region_side();
  const Index K = config.region_count();
  const auto modes = static_cast<Index>(config.velocities.size());

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);

  std::vector<Blob> blobs;
  for (Index k = 0; k < K; ++k) {
    const double r0 = static_cast<double>((k / config.region_grid) * rs);
    const double c0 = static_cast<double>((k % config.region_grid) * rs);
    for (Index b = 0; b < config.blobs_per_region; ++b) {
      Blob blob;
      blob.region = k;
      blob.row = r0 + unit(rng) * static_cast<double>(rs - 1);
      blob.col = c0 + unit(rng) * static_cast<double>(rs - 1);
      blob.amplitude = 0.5 + 0.5 * unit(rng);
      blobs.push_back(blob);
    }
  }

  const Renderer renderer(side, config.blob_sigma);
  SimOutput out;
  out.truth.dims = config.dims();
  out.measurements.dims = config.dims();

  std::vector<Index> mode(static_cast<std::size_t>(K), config.initial_mode);
  for (Index n = 0; n < config.frames; ++n) {
    if (n > 0) {
      for (Index k = 0; k < K; ++k) {
        if (unit(rng) < config.switch_prob && modes > 1) {
          auto& m = mode[static_cast<std::size_t>(k)];
          if (modes == 2) {
            m = 1 - m;
          } else {
            const auto pick = static_cast<Index>(unit(rng) * static_cast<double>(modes - 1));
            m = (m + 1 + std::min(pick, modes - 2)) % modes;
          }
        }
      }
      for (auto& b : blobs) {
        const double v = config.velocities[static_cast<std::size_t>(mode[static_cast<std::size_t>(b.region)])];
        const double theta = angle(rng);
        const double r0 = static_cast<double>((b.region / config.region_grid) * rs);
        const double c0 = static_cast<double>((b.region % config.region_grid) * rs);
        b.row = reflect_coord(b.row + v * std::sin(theta), r0, r0 + static_cast<double>(rs - 1));
        b.col = reflect_coord(b.col + v * std::cos(theta), c0, c0 + static_cast<double>(rs - 1));
      }
    }
    Vector frame = Vector::Zero(side * side);
    for (const auto& b : blobs) renderer.splat(b, frame);
    out.truth.frames.push_back(std::move(frame));
    out.true_modes.push_back(mode);
  }

  double power = 0.0;
  for (const auto& f : out.truth.frames) power += f.squaredNorm();
  power /= static_cast<double>(config.frames * side * side);
  out.signal_power = power;

  if (config.snr_db == std::numeric_limits<double>::infinity()) {
    out.noise_variance = 0.0;
    out.measurements.frames = out.truth.frames;
    return out;
  }
  if (!(power > 0.0)) throw std::invalid_argument("cannot reach an SNR target: truth has zero signal");

  out.noise_variance = power / std::pow(10.0, config.snr_db / 10.0);
  // Separate stream so the truth does not depend on the noise level.
  std::mt19937_64 noise_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> noise(0.0, std::sqrt(out.noise_variance));
  for (const auto& f : out.truth.frames) {
    Vector m = f;
    for (Index i = 0; i < m.size(); ++i) m(i) += noise(noise_rng);
    out.measurements.frames.push_back(std::move(m));
  }
  return out;
}

std::vector<double> mse(const FrameSequence& estimates, const FrameSequence& truth) {
  if (!(estimates.dims == truth.dims) || estimates.size() != truth.size()) {
    throw DimensionError("estimates", "shape differs from truth");
  }
  std::vector<double> out;
  out.reserve(truth.size());
  for (std::size_t t = 0; t < truth.size(); ++t) {
    if (estimates.frames[t].size() != truth.frames[t].size()) {
      throw DimensionError("estimates", "frame " + std::to_string(t) + " length");
    }
    out.push_back((estimates.frames[t] - truth.frames[t]).squaredNorm() /
                  static_cast<double>(truth.frames[t].size()));
  }
  return out;
}

std::vector<double> fit_mode_variances(const SimConfig& config) {
  config.validate();
  constexpr Index kRuns = 5;
  constexpr Index kFramesPerRun = kFitTransitions / kRuns + 1;

  std::vector<double> q;
  for (std::size_t j = 0; j < config.velocities.size(); ++j) {
    double sum = 0.0, sum_sq = 0.0;
    double count = 0.0;
    for (Index run = 0; run < kRuns; ++run) {
      SimConfig c = config;
      c.frames = kFramesPerRun;
      c.switch_prob = 0.0;
      c.initial_mode = static_cast<Index>(j);
      c.snr_db = std::numeric_limits<double>::infinity();
      std::seed_seq seq{config.seed, static_cast<std::uint64_t>(j),
                        static_cast<std::uint64_t>(run), std::uint64_t{0xf17}};
      std::mt19937_64 seeder(seq);
      c.seed = seeder();
      const SimOutput sim = generate(c);
      for (std::size_t t = 1; t < sim.truth.size(); ++t) {
        const Vector inc = sim.truth.frames[t] - sim.truth.frames[t - 1];
        sum += inc.sum();
        sum_sq += inc.squaredNorm();
        count += static_cast<double>(inc.size());
      }
    }
    const double mean = sum / count;
    q.push_back(std::max(sum_sq / count - mean * mean, 0.0));
  }
  bool any = false;
  for (double v : q) {
    if (!std::isfinite(v)) throw std::runtime_error("mode variance fit produced a non-finite value");
    any = any || v > 0.0;
  }
  if (!any) throw std::runtime_error("degenerate mode fit: every mode has zero increment variance");
  return q;
}

ModeLibrary fit_mode_covariances(const SimConfig& config) {
  const std::vector<double> q = fit_mode_variances(config);
  const Index d = config.side * config.side;
  std::vector<LinearEvolution> evolutions;
  for (double v : q) evolutions.push_back(LinearEvolution::random_walk(d, v));
  return ModeLibrary(std::move(evolutions));
}

}  // namespace pskf
