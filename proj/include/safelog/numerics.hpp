// Dense linear-algebra and sampling kernel shared by every solver.
//
// Everything here is templated on the scalar type and accepts arbitrary Eigen
// expressions; the rest of the library instantiates it with double.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>

#include "safelog/errors.hpp"

namespace safelog {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

/// Pivots at or below this fraction of the largest diagonal entry are rejected.
inline constexpr double kCholeskyPivotTol = 1e-12;
inline constexpr double kSymmetryTol = 1e-10;

template <typename Derived>
bool is_symmetric(const Eigen::MatrixBase<Derived>& m,
                  typename Derived::Scalar tol = kSymmetryTol) {
  if (m.rows() != m.cols()) return false;
  using std::abs;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = i + 1; j < m.cols(); ++j)
      if (abs(m(i, j) - m(j, i)) > tol) return false;
  return true;
}

/// Lower-triangular L with L Lᵀ = m. Throws NotPositiveDefinite on a pivot
/// that is not strictly above kCholeskyPivotTol relative to max |m_ii|.
template <typename Derived>
MatrixX<typename Derived::Scalar> cholesky(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  if (m.rows() != m.cols()) throw ValidationError("cholesky: matrix is not square");
  if (!m.allFinite()) throw ValidationError("cholesky: non-finite entry");
  if (!is_symmetric(m)) throw ValidationError("cholesky: matrix is not symmetric");
  const Eigen::Index n = m.rows();
  if (n == 0) return MatrixX<Scalar>(0, 0);

  const Scalar scale = m.diagonal().cwiseAbs().maxCoeff();
  const Scalar floor = Scalar(kCholeskyPivotTol) * (scale > Scalar(0) ? scale : Scalar(1));

  Eigen::LLT<MatrixX<Scalar>> llt(m.derived().template cast<Scalar>().eval());
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("cholesky: matrix is not positive definite");
  MatrixX<Scalar> lower = llt.matrixL();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(lower(i, i) * lower(i, i) > floor))
      throw NotPositiveDefinite("cholesky: pivot " + std::to_string(i) + " below tolerance");
  }
  return lower;
}

/// Solves m x = b for symmetric positive definite m.
template <typename DerivedM, typename DerivedB>
VectorX<typename DerivedM::Scalar> solve_psd(const Eigen::MatrixBase<DerivedM>& m,
                                             const Eigen::MatrixBase<DerivedB>& b) {
  if (b.size() != m.rows()) throw ValidationError("solve_psd: dimension mismatch");
  const auto lower = cholesky(m);
  VectorX<typename DerivedM::Scalar> x = lower.template triangularView<Eigen::Lower>().solve(b);
  lower.transpose().template triangularView<Eigen::Upper>().solveInPlace(x);
  return x;
}

/// Seedable generator with platform-independent output. The standard
/// distributions are implementation-defined, so the transforms live here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (one draw per call).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double exponential() { return -std::log1p(-uniform()); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [0, n), rejection-sampled so it is unbiased.
  std::uint64_t index(std::uint64_t n) {
    if (n == 0) throw ValidationError("Rng::index: empty range");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  /// Index drawn from a probability vector (need not be exactly normalized).
  template <typename Derived>
  Eigen::Index categorical(const Eigen::MatrixBase<Derived>& probs) {
    const double total = static_cast<double>(probs.sum());
    const double u = uniform() * total;
    double acc = 0.0;
    Eigen::Index last_positive = 0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
      const double p = static_cast<double>(probs(i));
      if (p <= 0.0) continue;
      acc += p;
      last_positive = i;
      if (u < acc) return i;
    }
    return last_positive;
  }

  /// Independent child stream, e.g. one per worker or replicate.
  Rng split() { return Rng(engine_() ^ 0x9E3779B97F4A7C15ull); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// Confidence set {θ : (θ − center)ᵀ shape⁻¹ (θ − center) ≤ 1}.
template <typename Scalar>
class EllipsoidT {
 public:
  EllipsoidT(VectorX<Scalar> center, MatrixX<Scalar> shape)
      : center_(std::move(center)), shape_(std::move(shape)) {
    if (shape_.rows() != center_.size() || shape_.cols() != center_.size())
      throw ValidationError("Ellipsoid: shape must be d x d with d = center size");
    if (!center_.allFinite()) throw ValidationError("Ellipsoid: non-finite center");
    factor_ = cholesky(shape_);
  }

  Eigen::Index dim() const { return center_.size(); }
  const VectorX<Scalar>& center() const { return center_; }
  const MatrixX<Scalar>& shape() const { return shape_; }
  /// Lower Cholesky factor of the shape matrix.
  const MatrixX<Scalar>& factor() const { return factor_; }

  /// (θ − center)ᵀ shape⁻¹ (θ − center); ≤ 1 means inside.
  template <typename Derived>
  Scalar mahalanobis_sq(const Eigen::MatrixBase<Derived>& theta) const {
    VectorX<Scalar> y = factor_.template triangularView<Eigen::Lower>().solve(
        (theta - center_).eval());
    return y.squaredNorm();
  }

 private:
  VectorX<Scalar> center_;
  MatrixX<Scalar> shape_;
  MatrixX<Scalar> factor_;
};

using Ellipsoid = EllipsoidT<double>;

/// Uniform draw from the ellipsoid: a uniform direction scaled by U^(1/d),
/// mapped through the Cholesky factor of the shape.
template <typename Scalar>
VectorX<Scalar> sample_ellipsoid_uniform(const EllipsoidT<Scalar>& e, Rng& rng) {
  const Eigen::Index d = e.dim();
  VectorX<Scalar> z(d);
  Scalar norm = 0;
  do {
    for (Eigen::Index i = 0; i < d; ++i) z(i) = Scalar(rng.normal());
    norm = z.norm();
  } while (norm == Scalar(0));
  const Scalar radius = std::pow(Scalar(rng.uniform()), Scalar(1) / Scalar(d));
  return e.center() + e.factor() * (z * (radius / norm));
}

template <typename Scalar>
struct LeastSquaresFitT {
  VectorX<Scalar> coefficients;
  /// XᵀX + ridge·I.
  MatrixX<Scalar> gram;
};

using LeastSquaresFit = LeastSquaresFitT<double>;

/// Ridge-regularized least squares via the normal equations.
template <typename DerivedX, typename DerivedY>
LeastSquaresFitT<typename DerivedX::Scalar> least_squares(const Eigen::MatrixBase<DerivedX>& x,
                                                          const Eigen::MatrixBase<DerivedY>& y,
                                                          typename DerivedX::Scalar ridge) {
  using Scalar = typename DerivedX::Scalar;
  if (x.rows() < 1) throw ValidationError("least_squares: need at least one row");
  if (y.size() != x.rows()) throw ValidationError("least_squares: dimension mismatch");
  if (ridge < Scalar(0)) throw ValidationError("least_squares: negative ridge");
  LeastSquaresFitT<Scalar> fit;
  fit.gram = x.transpose() * x;
  fit.gram.diagonal().array() += ridge;
  // Symmetrize the product so round-off never trips the symmetry check.
  fit.gram = (Scalar(0.5) * (fit.gram + fit.gram.transpose())).eval();
  fit.coefficients = solve_psd(fit.gram, (x.transpose() * y).eval());
  return fit;
}

}  // namespace safelog
