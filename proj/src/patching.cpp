#include "pskf/patching.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include <Eigen/LU>

namespace pskf {

std::vector<Index> PixelBox::indices(const ImageDims& dims) const {
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(std::max<Index>(area(), 0)));
  for (Index r = row0; r < row1; ++r) {
    for (Index c = col0; c < col1; ++c) out.push_back(dims.flat(r, c));
  }
  return out;
}

PatchLayout::PatchLayout(ImageDims dims, LayoutMode mode, std::vector<Patch> patches)
    : dims_(dims), mode_(mode), patches_(std::move(patches)) {
  const Index d = dims_.pixel_count();
  if (d <= 0) throw std::invalid_argument("image must have at least one pixel");
  if (patches_.empty()) throw std::invalid_argument("layout has no patches");

  std::vector<int> center_hits(static_cast<std::size_t>(d), 0);
  std::vector<int> pixel_hits(static_cast<std::size_t>(d), 0);
  std::vector<Index> slot(static_cast<std::size_t>(d), -1);

  for (std::size_t i = 0; i < patches_.size(); ++i) {
    Patch& p = patches_[i];
    for (std::size_t k = 0; k < p.pixels.size(); ++k) {
      const Index px = p.pixels[k];
      if (px < 0 || px >= d) throw std::invalid_argument("patch pixel index out of range");
      if (slot[static_cast<std::size_t>(px)] != -1) {
        throw std::invalid_argument("patch " + std::to_string(i) + " repeats a pixel");
      }
      slot[static_cast<std::size_t>(px)] = static_cast<Index>(k);
      ++pixel_hits[static_cast<std::size_t>(px)];
    }
    p.center_slots.clear();
    for (Index px : p.centers) {
      if (px < 0 || px >= d || slot[static_cast<std::size_t>(px)] == -1) {
        throw std::invalid_argument("patch " + std::to_string(i) +
                                    " has a center pixel outside its window");
      }
      p.center_slots.push_back(slot[static_cast<std::size_t>(px)]);
      ++center_hits[static_cast<std::size_t>(px)];
    }
    for (Index px : p.pixels) slot[static_cast<std::size_t>(px)] = -1;

    for (std::size_t nb : p.neighbors) {
      if (nb >= patches_.size() || nb == i) {
        throw std::invalid_argument("patch " + std::to_string(i) + " has an invalid neighbor id");
      }
    }
  }

  for (Index px = 0; px < d; ++px) {
    if (center_hits[static_cast<std::size_t>(px)] != 1) {
      throw std::invalid_argument("pixel " + std::to_string(px) + " is owned by " +
                                  std::to_string(center_hits[static_cast<std::size_t>(px)]) +
                                  " center regions");
    }
  }

  if (mode_ == LayoutMode::partition) {
    for (std::size_t i = 0; i < patches_.size(); ++i) {
      const Patch& p = patches_[i];
      if (p.centers != p.pixels) {
        throw std::invalid_argument("partition patch " + std::to_string(i) +
                                    " must estimate all of its pixels");
      }
      for (std::size_t nb : p.neighbors) {
        const auto& back = patches_[nb].neighbors;
        if (std::find(back.begin(), back.end(), i) == back.end()) {
          throw std::invalid_argument("partition neighbor relation is not symmetric");
        }
      }
    }
    // With centers == pixels and unique center ownership, pixel sets are disjoint.
  }
}

namespace {

void check_side(Index side, const ImageDims& dims, const char* what) {
  if (side > dims.height || side > dims.width) {
    throw std::invalid_argument(std::string(what) + " " + std::to_string(side) +
                                " exceeds image side (" + std::to_string(dims.height) + "x" +
                                std::to_string(dims.width) + ")");
  }
}

Index ceil_div(Index a, Index b) { return (a + b - 1) / b; }

void link_grid_neighbors(std::vector<Patch>& patches, Index grid_rows, Index grid_cols) {
  for (Index gr = 0; gr < grid_rows; ++gr) {
    for (Index gc = 0; gc < grid_cols; ++gc) {
      auto& p = patches[static_cast<std::size_t>(gr * grid_cols + gc)];
      for (Index dr = -1; dr <= 1; ++dr) {
        for (Index dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const Index nr = gr + dr, nc = gc + dc;
          if (nr < 0 || nr >= grid_rows || nc < 0 || nc >= grid_cols) continue;
          p.neighbors.push_back(static_cast<std::size_t>(nr * grid_cols + nc));
        }
      }
    }
  }
}

}  // namespace

PatchLayout partition_windows(ImageDims dims, Index window_side) {
  if (window_side < 1) throw std::invalid_argument("window side must be at least 1");
  check_side(window_side, dims, "window side");

  const Index grid_rows = ceil_div(dims.height, window_side);
  const Index grid_cols = ceil_div(dims.width, window_side);
  std::vector<Patch> patches;
  patches.reserve(static_cast<std::size_t>(grid_rows * grid_cols));
  for (Index gr = 0; gr < grid_rows; ++gr) {
    for (Index gc = 0; gc < grid_cols; ++gc) {
      Patch p;
      p.window = {gr * window_side, std::min((gr + 1) * window_side, dims.height),
                  gc * window_side, std::min((gc + 1) * window_side, dims.width)};
      p.center = p.window;
      p.pixels = p.window.indices(dims);
      p.centers = p.pixels;
      patches.push_back(std::move(p));
    }
  }
  link_grid_neighbors(patches, grid_rows, grid_cols);
  return PatchLayout(dims, LayoutMode::partition, std::move(patches));
}

PatchLayout sliding_layout(ImageDims dims, Index radius, Index alpha) {
  if (alpha < 1) throw std::invalid_argument("alpha must be at least 1");
  if (radius < 1) throw std::invalid_argument("locality radius r must be at least 1");
  check_side(alpha + 2 * radius, dims, "sliding window side alpha + 2r =");

  const Index grid_rows = ceil_div(dims.height, alpha);
  const Index grid_cols = ceil_div(dims.width, alpha);
  std::vector<Patch> patches;
  patches.reserve(static_cast<std::size_t>(grid_rows * grid_cols));
  for (Index gr = 0; gr < grid_rows; ++gr) {
    for (Index gc = 0; gc < grid_cols; ++gc) {
      Patch p;
      p.center = {gr * alpha, std::min((gr + 1) * alpha, dims.height), gc * alpha,
                  std::min((gc + 1) * alpha, dims.width)};
      p.window = {std::max<Index>(p.center.row0 - radius, 0),
                  std::min(p.center.row1 + radius, dims.height),
                  std::max<Index>(p.center.col0 - radius, 0),
                  std::min(p.center.col1 + radius, dims.width)};
      p.pixels = p.window.indices(dims);
      p.centers = p.center.indices(dims);
      patches.push_back(std::move(p));
    }
  }
  link_grid_neighbors(patches, grid_rows, grid_cols);
  return PatchLayout(dims, LayoutMode::sliding, std::move(patches));
}

PatchLayout single_window_layout(ImageDims dims, LayoutMode mode) {
  Patch p;
  p.window = {0, dims.height, 0, dims.width};
  p.center = p.window;
  p.pixels = p.window.indices(dims);
  p.centers = p.pixels;
  std::vector<Patch> patches;
  patches.push_back(std::move(p));
  return PatchLayout(dims, mode, std::move(patches));
}

// ---------------------------------------------------------------------------

LocalizationBasis::LocalizationBasis(const MeasurementModel& measurement) {
  const Matrix& H = measurement.H();
  if (H.rows() != H.cols()) {
    throw std::invalid_argument(
        "localization requires a square, invertible H; the general localization problem for "
        "non-invertible H is not supported");
  }
  if (measurement.h_is_identity()) {
    identity_ = true;
    h_inverse_ = Matrix::Identity(H.rows(), H.cols());
    transformed_noise_ = measurement.R();
    return;
  }
  Eigen::PartialPivLU<Matrix> lu(H);
  const Vector pivots = lu.matrixLU().diagonal().cwiseAbs();
  const double rcond = pivots.minCoeff() > 0.0 ? lu.rcond() : 0.0;
  if (!(rcond > 1e-8)) {
    throw std::invalid_argument(
        "H is singular or ill-conditioned (condition estimate " + std::to_string(1.0 / rcond) +
        "); localization for non-invertible H (the general constrained Γ problem) is not "
        "supported");
  }
  h_inverse_ = lu.inverse();
  transformed_noise_ = h_inverse_ * measurement.R() * h_inverse_.transpose();
  transformed_noise_ = 0.5 * (transformed_noise_ + transformed_noise_.transpose()).eval();
}

Localizer build_localizer(const LocalizationBasis& basis, const Patch& patch) {
  const auto size = static_cast<Index>(patch.pixels.size());
  for (Index px : patch.pixels) {
    if (px < 0 || px >= basis.h_inverse().rows()) {
      throw DimensionError("patch", "pixel index outside the measurement model");
    }
  }
  Localizer loc;
  loc.gamma = basis.h_inverse()(patch.pixels, Eigen::all);
  loc.theta = Matrix::Identity(size, size);
  loc.noise_cov = basis.transformed_noise()(patch.pixels, patch.pixels);
  return loc;
}

Localizer build_localizer(const MeasurementModel& measurement, const Patch& patch) {
  return build_localizer(LocalizationBasis(measurement), patch);
}

// ---------------------------------------------------------------------------

std::vector<Index> coupling_sources(const Patch& patch, const PatchLayout& layout) {
  std::vector<char> inside(static_cast<std::size_t>(layout.dims().pixel_count()), 0);
  for (Index px : patch.pixels) inside[static_cast<std::size_t>(px)] = 1;
  std::vector<Index> sources;
  for (std::size_t nb : patch.neighbors) {
    for (Index px : layout[nb].centers) {
      if (!inside[static_cast<std::size_t>(px)]) sources.push_back(px);
    }
  }
  std::sort(sources.begin(), sources.end());
  return sources;
}

Vector neighbor_input(const Vector& prev_estimates, const Patch& patch, const PatchLayout& layout,
                      const Matrix& evolution) {
  const Index d = layout.dims().pixel_count();
  if (prev_estimates.size() != d) throw DimensionError("prev_estimates", "length vs image");
  if (evolution.rows() != d || evolution.cols() != d) {
    throw DimensionError("evolution", "must be the full-image evolution matrix");
  }
  const std::vector<Index> sources = coupling_sources(patch, layout);
  Vector input = Vector::Zero(static_cast<Index>(patch.pixels.size()));
  if (sources.empty()) return input;
  input.noalias() = evolution(patch.pixels, sources) * prev_estimates(sources);
  return input;
}

Vector extract_patch(const Vector& frame, const Patch& patch) {
  for (Index px : patch.pixels) {
    if (px < 0 || px >= frame.size()) throw DimensionError("frame", "too short for patch");
  }
  return frame(patch.pixels);
}

Vector merge_estimates(const std::vector<Vector>& patch_estimates, const PatchLayout& layout) {
  if (patch_estimates.size() != layout.size()) {
    throw DimensionError("patch_estimates", "one estimate per patch required");
  }
  const Index d = layout.dims().pixel_count();
  Vector frame = Vector::Zero(d);
  std::vector<int> writes(static_cast<std::size_t>(d), 0);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const Patch& p = layout[i];
    const Vector& est = patch_estimates[i];
    if (est.size() != static_cast<Index>(p.pixels.size())) {
      throw DimensionError("patch_estimates", "patch " + std::to_string(i) + " has wrong length");
    }
    for (std::size_t k = 0; k < p.centers.size(); ++k) {
      const Index px = p.centers[k];
      frame(px) = est(p.center_slots[k]);
      ++writes[static_cast<std::size_t>(px)];
    }
  }
  for (Index px = 0; px < d; ++px) {
    if (writes[static_cast<std::size_t>(px)] != 1) {
      throw std::logic_error("merge wrote pixel " + std::to_string(px) + " " +
                             std::to_string(writes[static_cast<std::size_t>(px)]) + " times");
    }
  }
  return frame;
}

}  // namespace pskf
