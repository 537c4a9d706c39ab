#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "ncindex/linalg.hpp"

#include <vector>

#ifdef NCINDEX_USE_LAPACKE
#include <lapacke.h>
#endif

namespace ncindex::linalg {

double op_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() <= 64 && m.cols() <= 64) {
    Eigen::JacobiSVD<Mat> svd(m);
    return svd.singularValues()(0);
  }
  Eigen::BDCSVD<Mat> svd(m);
  return svd.singularValues()(0);
}

RVec singular_values(const Mat& m) {
  if (m.size() == 0) return RVec();
  if (m.rows() <= 64 && m.cols() <= 64) return Eigen::JacobiSVD<Mat>(m).singularValues();
  return Eigen::BDCSVD<Mat>(m).singularValues();
}

HermitianEigen hermitian_eig(const Mat& h) {
  if (h.size() == 0) return {RVec(), Mat()};
  Mat sym = 0.5 * (h + h.adjoint());
#ifdef NCINDEX_USE_LAPACKE
  // zheevd from the system LAPACK returned non-orthogonal vectors on some
  // inputs; the MRRR driver does not.
  if (sym.rows() > 32) {
    const lapack_int n = static_cast<lapack_int>(sym.rows());
    RVec w(n);
    Mat z(n, n);
    std::vector<lapack_int> support(2 * static_cast<std::size_t>(n));
    lapack_int found = 0;
    const lapack_int info = LAPACKE_zheevr(LAPACK_COL_MAJOR, 'V', 'A', 'U', n,
                                           reinterpret_cast<lapack_complex_double*>(sym.data()), n, 0.0, 0.0, 0, 0,
                                           0.0, &found, w.data(), reinterpret_cast<lapack_complex_double*>(z.data()),
                                           n, support.data());
    if (info == 0 && found == n) return {std::move(w), std::move(z)};
    sym = 0.5 * (h + h.adjoint());
  }
#endif
  Eigen::SelfAdjointEigenSolver<Mat> es(sym);
  return {es.eigenvalues(), es.eigenvectors()};
}

Mat normal_function(const Mat& a, const ScalarFunction& f, double normality_tol) {
  if (a.size() == 0) return a;
  const double res = normality_residual(a);
  if (res >= normality_tol)
    throw PreconditionError("spectral calculus needs a normal element; ||aa*-a*a|| = " +
                            std::to_string(res));
  Eigen::ComplexSchur<Mat> schur(a);
  const Mat& z = schur.matrixU();
  const Mat& t = schur.matrixT();
  Vec d(t.rows());
  for (Eigen::Index i = 0; i < t.rows(); ++i) d(i) = f(t(i, i));
  return z * d.asDiagonal() * z.adjoint();
}

UnitaryPhases unitary_phases(const Mat& u) {
  Eigen::ComplexSchur<Mat> schur(u);
  UnitaryPhases out{RVec(u.rows()), schur.matrixU()};
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    double ph = std::arg(schur.matrixT()(i, i)) / (2.0 * kPi);
    if (ph < 0) ph += 1.0;
    out.phases(i) = ph;
  }
  return out;
}

Mat null_space(const Mat& m, double rel_threshold) {
  if (m.cols() == 0) return Mat(0, 0);
  if (m.rows() == 0) return Mat::Identity(m.cols(), m.cols());
  Eigen::BDCSVD<Mat> svd(m, Eigen::ComputeFullV);
  const RVec& s = svd.singularValues();
  const double cut = rel_threshold * (s.size() ? s(0) : 0.0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cut) ++rank;
  const Eigen::Index nullity = m.cols() - rank;
  return svd.matrixV().rightCols(nullity);
}

Mat random_unitary(Eigen::Index n, std::mt19937_64& rng) {
  Mat g = random_gaussian(n, n, rng);
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ();
  Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < n; ++i) {
    const cplx d = r(i, i);
    const double ad = std::abs(d);
    if (ad > 0) q.col(i) *= d / ad;
  }
  return q;
}

Svd svd(const Mat& m) {
  if (m.size() == 0) return {Mat(m.rows(), 0), RVec(), Mat(m.cols(), 0)};
  Eigen::BDCSVD<Mat> d(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {d.matrixU(), d.singularValues(), d.matrixV()};
}

GeneralEigen general_eig(const Mat& m) {
  Eigen::ComplexEigenSolver<Mat> es(m);
  return {es.eigenvalues(), es.eigenvectors()};
}

Mat expm(const Mat& m) { return m.exp(); }

Mat inverse(const Mat& m) {
  Eigen::PartialPivLU<Mat> lu(m);
  return lu.inverse();
}

}  // namespace ncindex::linalg
