#pragma once

// Window geometry over a row-major image and the per-window localization of
// measurements. Pixel (row, col) has flat index row * width + col everywhere.

#include <vector>

#include "pskf/lds.hpp"

namespace pskf {

struct ImageDims {
  Index height = 0;
  Index width = 0;

  Index pixel_count() const { return height * width; }
  Index flat(Index row, Index col) const { return row * width + col; }
  friend bool operator==(const ImageDims&, const ImageDims&) = default;
};

/// Half-open pixel rectangle [row0, row1) × [col0, col1).
struct PixelBox {
  Index row0 = 0, row1 = 0, col0 = 0, col1 = 0;

  Index rows() const { return row1 - row0; }
  Index cols() const { return col1 - col0; }
  Index area() const { return rows() * cols(); }
  bool contains(Index row, Index col) const {
    return row >= row0 && row < row1 && col >= col0 && col < col1;
  }
  /// Row-major flat indices of the box's pixels.
  std::vector<Index> indices(const ImageDims& dims) const;
};

struct Patch {
  PixelBox window;
  PixelBox center;
  std::vector<Index> pixels;   // window pixels, row-major
  std::vector<Index> centers;  // pixels this patch writes to the merged frame
  std::vector<std::size_t> neighbors;
  std::vector<Index> center_slots;  // position of each center pixel inside `pixels`; set by PatchLayout
};

enum class LayoutMode { partition, sliding };

class PatchLayout {
 public:
  /// Validates the layout invariants for `mode` and throws
  /// std::invalid_argument on violation.
  PatchLayout(ImageDims dims, LayoutMode mode, std::vector<Patch> patches);

  const ImageDims& dims() const { return dims_; }
  LayoutMode mode() const { return mode_; }
  const std::vector<Patch>& patches() const { return patches_; }
  std::size_t size() const { return patches_.size(); }
  const Patch& operator[](std::size_t i) const { return patches_[i]; }

 private:
  ImageDims dims_;
  LayoutMode mode_;
  std::vector<Patch> patches_;
};

/// Disjoint grid of square windows, edge windows clipped to the image.
/// Neighbors are the 8-adjacent grid cells.
PatchLayout partition_windows(ImageDims dims, Index window_side);

/// Windows of side alpha + 2r whose alpha×alpha centers tile the image with
/// stride alpha. Windows are clipped at the border; centers never are (except
/// the last tile when alpha does not divide the side).
PatchLayout sliding_layout(ImageDims dims, Index radius, Index alpha);

/// One window covering the whole image, center included.
PatchLayout single_window_layout(ImageDims dims, LayoutMode mode);

struct Localizer {
  Matrix gamma;      // |patch| × m, applied to the measurement vector
  Matrix theta;      // |patch| × |patch|, local measurement operator
  Matrix noise_cov;  // |patch| × |patch| block of Γ R Γᵀ
};

/// H⁻¹ and H⁻¹ R H⁻ᵀ, factored once per measurement model so many patches can
/// be localized without re-inverting H.
class LocalizationBasis {
 public:
  explicit LocalizationBasis(const MeasurementModel& measurement);

  const Matrix& h_inverse() const { return h_inverse_; }
  const Matrix& transformed_noise() const { return transformed_noise_; }
  bool identity() const { return identity_; }

 private:
  Matrix h_inverse_;
  Matrix transformed_noise_;
  bool identity_ = false;
};

/// Γ = S H⁻¹ (S selects the patch rows), Θ = I, noise = S H⁻¹ R H⁻ᵀ Sᵀ.
/// Throws std::invalid_argument if H is not square or is ill-conditioned
/// (condition estimate ≥ 1e8).
Localizer build_localizer(const MeasurementModel& measurement, const Patch& patch);
Localizer build_localizer(const LocalizationBasis& basis, const Patch& patch);

/// Pixels outside `patch` whose previous estimates feed it: the center
/// pixels of its neighbors that the window does not already contain.
std::vector<Index> coupling_sources(const Patch& patch, const PatchLayout& layout);

/// Σ_{j ∈ neighbors} A[patch, C_j \ patch] · x̂_{n−1}[C_j \ patch], where
/// `evolution` is the full-image evolution matrix for the mode in question.
Vector neighbor_input(const Vector& prev_estimates, const Patch& patch, const PatchLayout& layout,
                      const Matrix& evolution);

Vector extract_patch(const Vector& frame, const Patch& patch);

/// Scatters every patch's center values into a frame. Throws if a pixel is
/// written twice or never.
Vector merge_estimates(const std::vector<Vector>& patch_estimates, const PatchLayout& layout);

}  // namespace pskf
