#include "pskf/lds.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

namespace pskf {

namespace {

bool is_symmetric(const Matrix& m, double rel_tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

bool is_psd(const Matrix& m, double rel_tol) {
  if (m.isDiagonal(0.0)) return (m.diagonal().array() >= 0.0).all();
  Eigen::LDLT<Matrix> ldlt(m);
  if (ldlt.info() != Eigen::Success) return false;
  const Vector d = ldlt.vectorD();
  const double scale = std::max(d.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  return d.minCoeff() >= -rel_tol * scale;
}

void symmetrize_average(Matrix& m) {
  const Index n = m.rows();
  for (Index j = 0; j < n; ++j) {
    for (Index i = j + 1; i < n; ++i) {
      const double v = 0.5 * (m(i, j) + m(j, i));
      m(i, j) = v;
      m(j, i) = v;
    }
  }
}

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

double condition_estimate(const Matrix& spd) {
  if (!spd.allFinite()) return std::numeric_limits<double>::infinity();
  Eigen::LDLT<Matrix> ldlt(spd);
  const Vector d = ldlt.vectorD().cwiseAbs();
  const double lo = d.minCoeff();
  if (lo == 0.0) return std::numeric_limits<double>::infinity();
  return d.maxCoeff() / lo;
}

}  // namespace

GaussianBelief GaussianBelief::isotropic(Index dim, double variance, double mean_value) {
  return {Vector::Constant(dim, mean_value), variance * Matrix::Identity(dim, dim)};
}

bool satisfies_invariants(const GaussianBelief& belief, double sym_tol, double psd_tol) {
  const Index n = belief.mean.size();
  if (belief.cov.rows() != n || belief.cov.cols() != n) return false;
  if (!belief.mean.allFinite() || !belief.cov.allFinite()) return false;
  if (n == 0) return true;
  if (!is_symmetric(belief.cov, sym_tol)) return false;
  Eigen::SelfAdjointEigenSolver<Matrix> es(belief.cov, Eigen::EigenvaluesOnly);
  const Vector ev = es.eigenvalues();
  return ev.minCoeff() >= -psd_tol * std::max(ev.maxCoeff(), 0.0);
}

void symmetrize_from_lower(Matrix& m) {
  const Index n = m.rows();
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < j; ++i) m(i, j) = m(j, i);
  }
}

Eigen::LLT<Matrix> robust_cholesky(const Matrix& spd, const char* what) {
  Eigen::LLT<Matrix> llt(spd);
  if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().allFinite()) return llt;

  const Index n = spd.rows();
  const double jitter = 1e-10 * spd.trace() / static_cast<double>(n);
  if (std::isfinite(jitter) && jitter > 0.0) {
    Matrix jittered = spd;
    jittered.diagonal().array() += jitter;
    llt.compute(jittered);
    if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().allFinite()) return llt;
  }
  throw SingularMatrixError(what, condition_estimate(spd));
}

// ---------------------------------------------------------------------------

LinearEvolution::LinearEvolution(Matrix A, Matrix Q) : A_(std::move(A)), Q_(std::move(Q)) {
  if (A_.rows() != A_.cols()) throw DimensionError("A", "must be square, got " + shape(A_));
  if (Q_.rows() != A_.rows() || Q_.cols() != A_.cols()) {
    throw DimensionError("Q", "expected " + shape(A_) + ", got " + shape(Q_));
  }
  if (!is_symmetric(Q_, 1e-10)) throw std::invalid_argument("Q must be symmetric");
  if (!is_psd(Q_, 1e-8)) throw std::invalid_argument("Q must be positive semidefinite");
  a_identity_ = A_.isIdentity(0.0);
}

LinearEvolution LinearEvolution::random_walk(Index dim, double q) {
  return LinearEvolution(Matrix::Identity(dim, dim), q * Matrix::Identity(dim, dim));
}

MeasurementModel::MeasurementModel(Matrix H, Matrix R) : H_(std::move(H)), R_(std::move(R)) {
  if (R_.rows() != H_.rows() || R_.cols() != H_.rows()) {
    throw DimensionError("R", "expected " + std::to_string(H_.rows()) + "x" +
                                  std::to_string(H_.rows()) + ", got " + shape(R_));
  }
  if (!is_symmetric(R_, 1e-10)) throw std::invalid_argument("R must be symmetric");
  Eigen::LLT<Matrix> llt(R_);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("R must be strictly positive definite");
  }
  r_factor_ = llt.matrixL();
  h_identity_ = H_.rows() == H_.cols() && H_.isIdentity(0.0);
  r_diagonal_ = R_.isDiagonal(0.0);
}

MeasurementModel MeasurementModel::identity(Index dim, double variance) {
  return MeasurementModel(Matrix::Identity(dim, dim), variance * Matrix::Identity(dim, dim));
}

// ---------------------------------------------------------------------------

GaussianBelief time_update(const GaussianBelief& belief, const LinearEvolution& model) {
  const Index n = model.dim();
  if (belief.mean.size() != n) {
    throw DimensionError("belief.mean", "length " + std::to_string(belief.mean.size()) +
                                            " vs evolution dimension " + std::to_string(n));
  }
  if (belief.cov.rows() != n || belief.cov.cols() != n) {
    throw DimensionError("belief.cov", "got " + shape(belief.cov) + " for dimension " +
                                           std::to_string(n));
  }

  GaussianBelief out;
  if (model.a_is_identity()) {
    out.mean = belief.mean;
    out.cov = belief.cov + model.Q();
  } else {
    out.mean.noalias() = model.A() * belief.mean;
    const Matrix AP = model.A() * belief.cov;
    out.cov = model.Q();
    out.cov.noalias() += AP * model.A().transpose();
  }
  symmetrize_average(out.cov);
  return out;
}

UpdateResult measurement_update(const GaussianBelief& predicted, const MeasurementModel& model,
                                const Vector& y, CovarianceForm form) {
  const Index n = model.state_dim();
  const Index m = model.measurement_dim();
  if (predicted.mean.size() != n) {
    throw DimensionError("predicted.mean", "length " + std::to_string(predicted.mean.size()) +
                                               " vs H columns " + std::to_string(n));
  }
  if (predicted.cov.rows() != n || predicted.cov.cols() != n) {
    throw DimensionError("predicted.cov", "got " + shape(predicted.cov));
  }
  if (y.size() != m) {
    throw DimensionError("y", "length " + std::to_string(y.size()) + " vs H rows " +
                                  std::to_string(m));
  }

  const Matrix& P = predicted.cov;
  const Matrix& H = model.H();
  const Matrix& R = model.R();
  const bool h_id = model.h_is_identity();

  Vector innovation = y;
  if (h_id) {
    innovation -= predicted.mean;
  } else {
    innovation.noalias() -= H * predicted.mean;
  }

  Matrix hp_storage;
  if (!h_id) hp_storage.noalias() = H * P;
  const Matrix& HP = h_id ? P : hp_storage;

  Matrix B;
  if (h_id) {
    B = P;
  } else {
    B.noalias() = HP * H.transpose();
  }
  if (model.r_is_diagonal()) {
    B.diagonal() += R.diagonal();
  } else {
    B += R;
  }

  const Eigen::LLT<Matrix> chol = robust_cholesky(B, "innovation covariance");

  const auto L = chol.matrixL();
  const Vector whitened = L.solve(innovation);

  UpdateResult result;
  Matrix& cov = result.belief.cov;

  Matrix Kt;
  if (form == CovarianceForm::symmetric) {
    // K e = P Hᵀ L⁻ᵀ (L⁻¹ e) = Wᵀ whitened.
    Matrix W = HP;
    L.solveInPlace(W);
    result.belief.mean = predicted.mean;
    result.belief.mean.noalias() += W.transpose() * whitened;
    cov = P;
    cov.selfadjointView<Eigen::Lower>().rankUpdate(W.transpose(), -1.0);
    symmetrize_from_lower(cov);
  } else {
    // Kᵀ = B⁻¹ H P (B symmetric), so K = P Hᵀ B⁻¹ without forming an inverse.
    Kt = HP;
    chol.solveInPlace(Kt);
    result.belief.mean = predicted.mean;
    result.belief.mean.noalias() += Kt.transpose() * innovation;
  }

  if (form == CovarianceForm::standard) {
    cov = P;
    cov.noalias() -= Kt.transpose() * HP;
    symmetrize_average(cov);
  } else if (form == CovarianceForm::joseph) {
    const Eigen::LLT<Matrix> p_chol(P);
    if (p_chol.info() == Eigen::Success) {
      // Joseph form as X Xᵀ with X = [(I − KH) L_P, K L_R].
      Matrix X(n, n + m);
      X.leftCols(n) = p_chol.matrixL();
      if (h_id) {
        X.leftCols(n).noalias() -= Kt.transpose() * p_chol.matrixL();
      } else {
        const Matrix HL = H * p_chol.matrixL();
        X.leftCols(n).noalias() -= Kt.transpose() * HL;
      }
      if (model.r_is_diagonal()) {
        X.rightCols(m) =
            Kt.transpose() * R.diagonal().cwiseSqrt().asDiagonal();
      } else {
        X.rightCols(m).noalias() =
            Kt.transpose() * model.r_factor().triangularView<Eigen::Lower>();
      }
      cov.setZero(n, n);
      cov.selfadjointView<Eigen::Lower>().rankUpdate(X);
      symmetrize_from_lower(cov);
    } else {
      // P only semidefinite: evaluate the Joseph products directly.
      Matrix MP = P;
      MP.noalias() -= Kt.transpose() * HP;
      const Matrix MPHt = h_id ? MP : Matrix(MP * H.transpose());
      cov = MP;
      cov.noalias() -= MPHt * Kt;
      const Matrix KR = Kt.transpose() * R;
      cov.noalias() += KR * Kt;
      symmetrize_average(cov);
    }
  }

  const double log_det = 2.0 * chol.matrixLLT().diagonal().array().log().sum();
  result.log_likelihood =
      -0.5 * (static_cast<double>(m) * std::log(2.0 * std::numbers::pi) + log_det +
              whitened.squaredNorm());
  return result;
}

UpdateResult kf_step(const GaussianBelief& belief, const LinearEvolution& evolution,
                     const MeasurementModel& measurement, const Vector& y) {
  return measurement_update(time_update(belief, evolution), measurement, y);
}

// ---------------------------------------------------------------------------

std::vector<Vector> batch_map_oracle(const GaussianBelief& x0,
                                     const std::vector<LinearEvolution>& evolutions,
                                     const MeasurementModel& measurement,
                                     const std::vector<Vector>& ys) {
  const Index d = x0.dim();
  const Index m = measurement.measurement_dim();
  const auto steps = static_cast<Index>(ys.size());
  if (evolutions.empty()) throw DimensionError("evolutions", "empty");
  if (evolutions.size() != 1 && evolutions.size() != ys.size()) {
    throw DimensionError("evolutions", "need 1 or " + std::to_string(ys.size()) + " models");
  }
  if (measurement.state_dim() != d) throw DimensionError("measurement.H", "column count");
  for (const auto& e : evolutions) {
    if (e.dim() != d) throw DimensionError("evolutions", "state dimension");
  }
  for (const auto& y : ys) {
    if (y.size() != m) throw DimensionError("ys", "measurement length");
  }

  auto inverse_factor = [](const Matrix& cov, const char* what) {
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) throw SingularMatrixError(what, condition_estimate(cov));
    return Matrix(llt.matrixL().solve(Matrix::Identity(cov.rows(), cov.cols())));
  };
  const Matrix W0 = inverse_factor(x0.cov, "prior covariance");
  const Matrix WR = inverse_factor(measurement.R(), "measurement covariance");
  std::vector<Matrix> WQ;
  for (const auto& e : evolutions) WQ.push_back(inverse_factor(e.Q(), "process covariance"));
  const Matrix WRH = WR * measurement.H();

  std::vector<Vector> out;
  out.reserve(ys.size());
  for (Index n = 1; n <= steps; ++n) {
    const Index unknowns = d * (n + 1);
    const Index rows = d + n * (d + m);
    Matrix J = Matrix::Zero(rows, unknowns);
    Vector rhs = Vector::Zero(rows);

    J.block(0, 0, d, d) = W0;
    rhs.head(d) = W0 * x0.mean;
    Index row = d;
    for (Index k = 1; k <= n; ++k) {
      const std::size_t e = evolutions.size() == 1 ? 0 : static_cast<std::size_t>(k - 1);
      J.block(row, k * d, d, d) = WQ[e];
      J.block(row, (k - 1) * d, d, d) = -WQ[e] * evolutions[e].A();
      row += d;
      J.block(row, k * d, m, d) = WRH;
      rhs.segment(row, m) = WR * ys[static_cast<std::size_t>(k - 1)];
      row += m;
    }

    Eigen::ColPivHouseholderQR<Matrix> qr(J);
    if (qr.rank() < unknowns) {
      throw SingularMatrixError("batch least-squares system",
                                std::numeric_limits<double>::infinity());
    }
    const Vector z = qr.solve(rhs);
    out.push_back(z.tail(d));
  }
  return out;
}

}  // namespace pskf
