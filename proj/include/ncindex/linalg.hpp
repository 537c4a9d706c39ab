#pragma once

// Dense complex linear algebra shared by every module: norms, Hermitian and
// Schur-based functional calculus, null spaces, and the near-zero spectral
// classification used for kernel projections.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <random>

#include "ncindex/errors.hpp"

namespace ncindex {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;

/// Values of a trace: a single complex number for scalar traces, one entry per
/// block for center-valued traces.
using ZValue = Eigen::VectorXcd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr cplx kI{0.0, 1.0};

using ScalarFunction = std::function<cplx(cplx)>;

namespace linalg {

double op_norm(const Mat& m);

/// Descending.
RVec singular_values(const Mat& m);

inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline double normality_residual(const Mat& a) {
  return (a * a.adjoint() - a.adjoint() * a).norm();
}

struct HermitianEigen {
  RVec values;  // ascending
  Mat vectors;
};

/// Eigen-decomposition of the Hermitian part of h, ascending.
HermitianEigen hermitian_eig(const Mat& h);

/// f(a) for a normal matrix through the complex Schur form a = Z T Z*.
/// Off-diagonal entries of T are roundoff for normal input and are dropped.
Mat normal_function(const Mat& a, const ScalarFunction& f, double normality_tol = 1e-10);

/// Eigen-decomposition of a unitary (or any normal) matrix as phases in
/// [0, 1) and an orthonormal eigenbasis, via the Schur form.
struct UnitaryPhases {
  RVec phases;  // eigenvalue = exp(2 pi i phase)
  Mat vectors;
};

UnitaryPhases unitary_phases(const Mat& u);

/// Orthonormal basis of the null space of m: right singular vectors with
/// singular value <= rel_threshold * sigma_max.
Mat null_space(const Mat& m, double rel_threshold = 1e-9);


/// Thin singular value decomposition m = U diag(s) V^*.
struct Svd {
  Mat u;
  RVec values;  // descending
  Mat v;
};
Svd svd(const Mat& m);

/// Eigenvalues and eigenvectors of a general square matrix.
struct GeneralEigen {
  Vec values;
  Mat vectors;
};
GeneralEigen general_eig(const Mat& m);

Mat expm(const Mat& m);
Mat inverse(const Mat& m);

/// Orthonormal basis of the range of a (numerical) projection.
inline Mat range_basis(const Mat& p, double threshold = 0.5) {
  HermitianEigen e = hermitian_eig(p);
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < e.values.size(); ++i)
    if (e.values(i) > threshold) ++count;
  return e.vectors.rightCols(count);
}

/// Result of splitting a positive semidefinite spectrum at a threshold.
struct NearZeroSplit {
  Eigen::Index count = 0;     // eigenvalues <= threshold
  double largest_zero = 0.0;  // largest eigenvalue classified as zero (0 if none)
  double smallest_nonzero = std::numeric_limits<double>::infinity();
  double gap_ratio = std::numeric_limits<double>::infinity();
};

/// Classifies ascending eigenvalues of a PSD operator against `threshold`.
/// gap_ratio = smallest_nonzero / max(largest_zero, floor) when there is a zero
/// cluster and smallest_nonzero / threshold otherwise; `floor` absorbs exact
/// zeros so that an exactly singular operator does not report an infinite gap.
inline NearZeroSplit split_near_zero(const RVec& ascending, double threshold, double floor) {
  NearZeroSplit out;
  for (Eigen::Index i = 0; i < ascending.size(); ++i) {
    const double v = std::max(ascending(i), 0.0);
    if (v <= threshold) {
      ++out.count;
      out.largest_zero = std::max(out.largest_zero, v);
    } else {
      out.smallest_nonzero = std::min(out.smallest_nonzero, v);
    }
  }
  if (!std::isfinite(out.smallest_nonzero)) return out;
  const double denom = out.count > 0 ? std::max(out.largest_zero, floor) : threshold;
  out.gap_ratio = out.smallest_nonzero / denom;
  return out;
}

inline Mat random_gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * cplx(nd(rng), nd(rng)) / std::sqrt(2.0);
  return m;
}

inline Mat random_hermitian(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
  Mat g = random_gaussian(n, n, rng, scale);
  return 0.5 * (g + g.adjoint());
}

/// Haar-distributed unitary (QR of a Gaussian matrix with phase correction).
Mat random_unitary(Eigen::Index n, std::mt19937_64& rng);

/// Orthogonal projection onto a random subspace of the given dimension.
inline Mat random_projection(Eigen::Index n, Eigen::Index rank, std::mt19937_64& rng) {
  Mat u = random_unitary(n, rng);
  Mat v = u.leftCols(rank);
  return v * v.adjoint();
}

}  // namespace linalg
}  // namespace ncindex
