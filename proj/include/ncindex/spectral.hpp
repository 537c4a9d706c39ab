#pragma once

// Discretized twisted Dolbeault operators on T^2 and their tau-indices.
//
// Per block b of A the operator acts on grid sections of the fiber, written in
// a pointwise orthonormal frame Q_b(x) of the projection field (section space
// C^{points} (x) C^{r_b}). On the GNS space of the section module it acts as
// I_{n_b} (x) L_b; the right A-action is a_b^T (x) I.
//
// A square discretization of dbar = (nabla_x + i nabla_y)/2 has equally many
// zero singular values as its adjoint, so kernel and cokernel are read off the
// two Laplacians that equal dbar^* dbar and dbar dbar^* on the flat torus:
//   Delta_+ = -(nabla_x^2 + nabla_y^2)/4 - (i/4) F,
//   Delta_- = -(nabla_x^2 + nabla_y^2)/4 + (i/4) F,
// with F = Omega_xy the curvature. Thresholds are applied to sqrt(lambda), so
// they are in singular-value units: tol = 1e-6 sigma_max, gap ratio >= 10.

#include <Eigen/SparseCore>

#include <string>
#include <vector>

#include "ncindex/bundle.hpp"
#include "ncindex/chern.hpp"
#include "ncindex/gns.hpp"

namespace ncindex {

inline constexpr double kDefaultRelativeTol = 1e-6;

class TwistedOperator {
 public:
  TwistedOperator() = default;

  const Bundle& bundle() const { return bundle_; }
  const SpecPtr& owner() const { return bundle_.owner(); }
  int num_blocks() const { return bundle_.num_blocks(); }
  int points() const { return bundle_.grid().points(); }
  int fiber_rank(int b) const { return ranks_[b]; }
  int section_dim(int b) const { return points() * ranks_[b]; }

  /// Pointwise orthonormal frame of the fiber: (points d_b) x (points r_b).
  const Mat& frame(int b) const { return frame_[b]; }
  const Mat& dbar(int b) const { return dbar_[b]; }
  const Mat& laplacian(int b, int sign) const { return sign > 0 ? lap_plus_[b] : lap_minus_[b]; }

  /// Laplacians on the ambient sections of A^n as module maps over A (zero on
  /// the complement of the fiber).
  ModuleMap ambient_laplacian(int sign) const {
    const int n = points() * bundle_.rank();
    ModuleMap m = ModuleMap::zero(owner(), n, n);
    for (int b = 0; b < num_blocks(); ++b) m.block(b) = frame_[b] * laplacian(b, sign) * frame_[b].adjoint();
    return m;
  }

  BlockLayout gns_layout() const {
    BlockLayout l;
    l.offsets.assign(1, 0);
    for (int b = 0; b < num_blocks(); ++b)
      l.offsets.push_back(l.offsets.back() + owner()->block_size(b) * section_dim(b));
    return l;
  }
  int gns_dimension() const { return gns_layout().dimension(); }

  /// The operator I_{n_b} (x) X_b on the GNS section space.
  Mat gns_matrix(const std::vector<Mat>& per_block) const {
    const BlockLayout l = gns_layout();
    Mat g = Mat::Zero(l.dimension(), l.dimension());
    for (int b = 0; b < num_blocks(); ++b) {
      const int nb = owner()->block_size(b);
      g.block(l.offsets[b], l.offsets[b], l.size(b), l.size(b)) = linalg::kron(Mat::Identity(nb, nb), per_block[b]);
    }
    return g;
  }
  Mat gns_dbar() const { return gns_matrix(dbar_); }
  Mat gns_laplacian(int sign) const { return gns_matrix(sign > 0 ? lap_plus_ : lap_minus_); }

  Mat gns_right_action(const AlgebraElement& a) const {
    require_same_owner(owner(), a.owner(), "gns_right_action");
    const BlockLayout l = gns_layout();
    Mat r = Mat::Zero(l.dimension(), l.dimension());
    for (int b = 0; b < num_blocks(); ++b) {
      const int m = section_dim(b);
      r.block(l.offsets[b], l.offsets[b], l.size(b), l.size(b)) = linalg::kron(a.block(b).transpose(), Mat::Identity(m, m));
    }
    return r;
  }

  /// Isometry from the GNS section space into l^2(A^{points n}) (ambient
  /// coordinates of the gns module).
  Mat gns_embedding() const {
    const int h = points() * bundle_.rank();
    const BlockLayout amb = GnsSpace::ambient_layout(owner(), h);
    const BlockLayout l = gns_layout();
    Mat j = Mat::Zero(amb.dimension(), l.dimension());
    for (int b = 0; b < num_blocks(); ++b) {
      const int nb = owner()->block_size(b);
      j.block(amb.offsets[b], l.offsets[b], amb.size(b), l.size(b)) = linalg::kron(Mat::Identity(nb, nb), frame_[b]);
    }
    return j;
  }

  /// Largest eigenvalue of Delta_+ and Delta_- over all blocks.
  double lambda_max() const { return lambda_max_; }

  /// Eigen-decomposition of the per-block Laplacian (computed at assembly).
  const linalg::HermitianEigen& spectrum(int b, int sign) const { return sign > 0 ? eig_plus_[b] : eig_minus_[b]; }

  friend TwistedOperator assemble_dolbeault(const Bundle& b);

 private:
  Bundle bundle_;
  std::vector<int> ranks_;
  std::vector<Mat> frame_;
  std::vector<Mat> dbar_;
  std::vector<Mat> lap_plus_;
  std::vector<Mat> lap_minus_;
  std::vector<linalg::HermitianEigen> eig_plus_;
  std::vector<linalg::HermitianEigen> eig_minus_;
  double lambda_max_ = 0.0;
};

/// Pointwise orthonormal frame of a projection field (rank must be constant).
inline Mat fiber_frame(const Mat& projection_diag, int points, int d, int& rank) {
  rank = -1;
  std::vector<Mat> qs;
  for (int p = 0; p < points; ++p) {
    Mat q = linalg::range_basis(projection_diag.block(p * d, p * d, d, d));
    if (rank < 0) rank = static_cast<int>(q.cols());
    if (q.cols() != rank) throw PreconditionError("fiber rank of the projection field is not constant");
    qs.push_back(std::move(q));
  }
  Mat f = Mat::Zero(points * d, points * rank);
  for (int p = 0; p < points; ++p) f.block(p * d, p * rank, d, rank) = qs[p];
  return f;
}

inline TwistedOperator assemble_dolbeault(const Bundle& b) {
  if (b.grid().dim() != 2) throw DomainError("the Dolbeault operator is assembled on the torus");
  if (!b.owner()->block_decomposed())
    throw DomainError("GNS section spaces need a block-decomposed algebra (matrix sums or abelian group algebras)");
  if (!b.is_metric()) throw PreconditionError("Dolbeault assembly needs a metric (skew-adjoint) connection");
  using SpMat = Eigen::SparseMatrix<cplx>;
  TwistedOperator op;
  op.bundle_ = b;
  const int np = b.grid().points();
  double lmax = 0.0;
  for (int k = 0; k < b.num_blocks(); ++k) {
    const CovariantOperators cov = covariant_operators(b, k);
    const int d = b.fiber_dim(k);
    int r = 0;
    Mat q = fiber_frame(cov.projection, np, d, r);
    // the frame is pointwise and the derivatives act along grid lines
    const SpMat qs = q.sparseView();
    const SpMat qa = qs.adjoint();
    const SpMat nx = qa * SpMat(cov.nabla_x.sparseView()) * qs;
    const SpMat ny = qa * SpMat(cov.nabla_y.sparseView()) * qs;
    const SpMat f = qa * SpMat(cov.curvature.sparseView()) * qs;
    const SpMat rough = -0.25 * (nx * nx + ny * ny);
    Mat lp = Mat(rough) - 0.25 * kI * Mat(f), lm = Mat(rough) + 0.25 * kI * Mat(f);
    lp = Mat(0.5 * (lp + lp.adjoint()));
    lm = Mat(0.5 * (lm + lm.adjoint()));
    op.eig_plus_.push_back(linalg::hermitian_eig(lp));
    op.eig_minus_.push_back(linalg::hermitian_eig(lm));
    for (const linalg::HermitianEigen* e : {&op.eig_plus_.back(), &op.eig_minus_.back()})
      if (e->values.size()) lmax = std::max({lmax, e->values.maxCoeff(), -e->values.minCoeff()});
    op.ranks_.push_back(r);
    op.frame_.push_back(std::move(q));
    op.dbar_.push_back(Mat(0.5 * (Mat(nx) + kI * Mat(ny))));
    op.lap_plus_.push_back(std::move(lp));
    op.lap_minus_.push_back(std::move(lm));
  }
  op.lambda_max_ = lmax;
  return op;
}

/// Kernel and cokernel of one positive operator split at tol (singular-value units).
struct NearZeroEigen {
  Mat basis;  // eigenvectors with sqrt(lambda) <= tol
  linalg::NearZeroSplit split;
};

inline NearZeroEigen near_zero_eigen(const linalg::HermitianEigen& e, double tol, double floor) {
  if (e.values.size() == 0) return {Mat(0, 0), {}};
  RVec sigma = e.values.cwiseMax(0.0).cwiseSqrt();
  linalg::NearZeroSplit sp = linalg::split_near_zero(sigma, tol, floor);
  return {e.vectors.leftCols(sp.count), sp};
}

inline NearZeroEigen near_zero_eigen(const Mat& h, double tol, double floor) {
  if (h.size() == 0) return {Mat(0, 0), {}};
  return near_zero_eigen(linalg::hermitian_eig(h), tol, floor);
}

struct SpectralTolerance {
  double tol;        // absolute, singular-value units
  double sigma_max;  // sqrt of the largest Laplacian eigenvalue
  double floor;
};

inline SpectralTolerance spectral_tolerance(const TwistedOperator& op, double rel_tol) {
  const double smax = std::sqrt(op.lambda_max());
  const double rt = rel_tol > 0 ? rel_tol : kDefaultRelativeTol;
  return {rt * smax, smax, 1e-14 * std::max(smax, 1e-300)};
}

/// Per-block kernel and cokernel of the compressed operator.
struct KernelData {
  std::vector<Mat> kernel;    // per block, section coordinates
  std::vector<Mat> cokernel;  // per block
  double gap_ratio = std::numeric_limits<double>::infinity();
  double tol = 0.0;
  double sigma_max = 0.0;

  std::vector<int> kernel_dims() const { return dims(kernel); }
  std::vector<int> cokernel_dims() const { return dims(cokernel); }

 private:
  static std::vector<int> dims(const std::vector<Mat>& v) {
    std::vector<int> d;
    for (const Mat& m : v) d.push_back(static_cast<int>(m.cols()));
    return d;
  }
};

inline KernelData kernel_data(const TwistedOperator& op, double rel_tol = -1.0,
                              double min_gap = kRequiredGapRatio) {
  const SpectralTolerance st = spectral_tolerance(op, rel_tol);
  KernelData kd;
  kd.tol = st.tol;
  kd.sigma_max = st.sigma_max;
  for (int b = 0; b < op.num_blocks(); ++b) {
    NearZeroEigen k = near_zero_eigen(op.spectrum(b, +1), st.tol, st.floor);
    NearZeroEigen c = near_zero_eigen(op.spectrum(b, -1), st.tol, st.floor);
    kd.gap_ratio = std::min({kd.gap_ratio, k.split.gap_ratio, c.split.gap_ratio});
    kd.kernel.push_back(std::move(k.basis));
    kd.cokernel.push_back(std::move(c.basis));
  }
  if (kd.gap_ratio < min_gap)
    throw SpectralGapError("kernel_data: near-zero spectrum is not separated at tol = " + std::to_string(st.tol),
                           kd.gap_ratio);
  return kd;
}

/// Projection onto the kernel (sign > 0) or cokernel on the GNS section space.
inline Mat gns_projection(const TwistedOperator& op, const KernelData& kd, int sign) {
  std::vector<Mat> pb;
  for (int b = 0; b < op.num_blocks(); ++b) {
    const Mat& k = sign > 0 ? kd.kernel[b] : kd.cokernel[b];
    pb.push_back(k * k.adjoint());
  }
  return op.gns_matrix(pb);
}

/// Kernel and cokernel projections of the GNS Laplacians, pushed into the
/// ambient l^2(A^{points n}).
struct GnsKernel {
  Mat kernel;    // ambient coordinates
  Mat cokernel;
  int ambient_rank = 0;
  double gap_ratio = std::numeric_limits<double>::infinity();
  double tol = 0.0;
  double sigma_max = 0.0;
  int kernel_dim = 0;  // complex dimensions on the GNS space
  int cokernel_dim = 0;
};

/// The full GNS matrices I_{n_b} (x) Delta_b are diagonalized as they stand
/// (not block by block) and thresholded in singular-value units.
inline GnsKernel gns_kernel(const TwistedOperator& op, double rel_tol = -1.0, double min_gap = kRequiredGapRatio) {
  const SpectralTolerance st = spectral_tolerance(op, rel_tol);
  const Mat j = op.gns_embedding();
  GnsKernel out;
  out.ambient_rank = op.points() * op.bundle().rank();
  out.tol = st.tol;
  out.sigma_max = st.sigma_max;
  for (int side = 0; side < 2; ++side) {
    NearZeroEigen z = near_zero_eigen(op.gns_laplacian(side == 0 ? +1 : -1), st.tol, st.floor);
    out.gap_ratio = std::min(out.gap_ratio, z.split.gap_ratio);
    const Mat v = j * z.basis;
    (side == 0 ? out.kernel : out.cokernel) = v * v.adjoint();
    (side == 0 ? out.kernel_dim : out.cokernel_dim) = static_cast<int>(z.basis.cols());
  }
  if (out.gap_ratio < min_gap)
    throw SpectralGapError("near-zero spectrum is not separated at tol = " + std::to_string(st.tol), out.gap_ratio);
  return out;
}

struct AnalyticIndex {
  ZValue index;
  ZValue kernel_dim_t;
  ZValue cokernel_dim_t;
  double gap_ratio = 0.0;
  double tol = 0.0;
  double sigma_max = 0.0;
};

/// t(chi_0(Delta_+)) - t(chi_0(Delta_-)) with the extended trace of l^2(A^{points n}).
inline AnalyticIndex analytic_index(const GnsKernel& k, const TraceFunctional& t) {
  AnalyticIndex out;
  out.kernel_dim_t = extended_trace_value(t, k.kernel, k.ambient_rank);
  out.cokernel_dim_t = extended_trace_value(t, k.cokernel, k.ambient_rank);
  out.index = out.kernel_dim_t - out.cokernel_dim_t;
  out.gap_ratio = k.gap_ratio;
  out.tol = k.tol;
  out.sigma_max = k.sigma_max;
  return out;
}

inline AnalyticIndex analytic_index(const TwistedOperator& op, const TraceFunctional& t, double rel_tol = -1.0,
                                    double min_gap = kRequiredGapRatio) {
  require_same_owner(op.owner(), t.owner(), "analytic_index");
  return analytic_index(gns_kernel(op, rel_tol, min_gap), t);
}

/// K_0-valued index [chi_0(Delta_+)] - [chi_0(Delta_-)] of the Laplacians as
/// module maps over A on the ambient section module.
inline FredholmData module_index(const TwistedOperator& op, double rel_tol = -1.0,
                                 double min_gap = kRequiredGapRatio) {
  const SpectralTolerance st = spectral_tolerance(op, rel_tol);
  const double lam_tol = st.tol * st.tol;
  const double lam_floor = st.floor * st.floor;
  NearZeroProjection k = near_zero_projection(op.ambient_laplacian(+1), lam_tol, lam_floor);
  NearZeroProjection c = near_zero_projection(op.ambient_laplacian(-1), lam_tol, lam_floor);
  // gap ratios of eigenvalues are squares of singular-value gap ratios
  const double gap = std::sqrt(std::min(k.gap_ratio, c.gap_ratio));
  if (gap < min_gap) throw SpectralGapError("module_index: no spectral gap", gap);
  ProjectiveModule kp(std::move(k.projection), 1e-8), cp(std::move(c.projection), 1e-8);
  K0Class idx = class_of(kp) - class_of(cp);
  return {std::move(kp), std::move(cp), std::move(idx), gap, st.tol};
}

struct IndexReport {
  ZValue analytic_index;
  ZValue topological_index;
  ZValue kernel_dim_t;
  ZValue cokernel_dim_t;
  double gap_ratio = 0.0;
  int grid_n = 0;
  double tol = 0.0;
  double relative_tol = kDefaultRelativeTol;
  double required_gap = kRequiredGapRatio;
  double discrepancy = 0.0;
  double rounding_residual = 0.0;
  std::vector<long long> k0_index;
};

inline double rounding_residual(const ZValue& z) {
  double r = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i)
    r = std::max({r, std::abs(z(i).real() - std::round(z(i).real())), std::abs(z(i).imag())});
  return r;
}

inline IndexReport index_report(const Bundle& b, const TraceFunctional& t, double rel_tol = -1.0) {
  const TwistedOperator op = assemble_dolbeault(b);
  const AnalyticIndex ai = analytic_index(op, t, rel_tol);
  IndexReport r;
  r.analytic_index = ai.index;
  r.topological_index = topological_index(b, t);
  r.kernel_dim_t = ai.kernel_dim_t;
  r.cokernel_dim_t = ai.cokernel_dim_t;
  r.gap_ratio = ai.gap_ratio;
  r.grid_n = b.grid().ny;
  r.tol = ai.tol;
  r.relative_tol = rel_tol > 0 ? rel_tol : kDefaultRelativeTol;
  r.discrepancy = (ai.index - r.topological_index).norm();
  r.rounding_residual = rounding_residual(ai.index);
  r.k0_index = module_index(op, rel_tol).index.ranks;
  return r;
}

}  // namespace ncindex
