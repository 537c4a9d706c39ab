#pragma once

// The l^2 completion of Hilbert A-modules under a faithful trace, the recovery
// functor back to projective modules, commutants, and the trace extension on
// operators of H (x) l^2(A) that commute with the right A-action.
//
// Coordinates. l^2(A^n) is split over the blocks of A. In block b a vector is an
// (n*n_b) x n_b matrix X with norm^2 w_b Tr(X^*X); its orthonormal coordinates are
// vec(sqrt(w_b) X) (column-major). Right multiplication by a acts as
// a_b^T (x) I, left multiplication by a map Phi as I_{n_b} (x) Phi_b.
// l^2(pA^n) uses the reduced coordinates Y with sqrt(w_b) X = Q_b Y, where the
// columns of Q_b are an orthonormal basis of the range of p_b.

#include <vector>

#include "ncindex/hilbert_module.hpp"

namespace ncindex {

namespace gns_detail {

inline void require_gns_algebra(const SpecPtr& s) {
  if (!s->block_decomposed())
    throw DomainError("GNS coordinates need a block-decomposed algebra (matrix sums or abelian group algebras)");
}

inline void require_faithful(const TraceFunctional& tau) {
  if (tau.kind() != TraceKind::scalar || !tau.is_faithful())
    throw PreconditionError("GNS construction needs a faithful positive scalar trace; the l^2 form is degenerate");
}

}  // namespace gns_detail

/// Offsets of the per-block pieces of a block-diagonal coordinate space.
struct BlockLayout {
  std::vector<int> offsets;  // size num_blocks + 1
  int dimension() const { return offsets.back(); }
  int size(int b) const { return offsets[b + 1] - offsets[b]; }
};

class GnsSpace {
 public:
  GnsSpace() = default;

  /// l^2(pA^n) for a faithful trace.
  GnsSpace(ProjectiveModule p, TraceFunctional tau) : p_(std::move(p)), tau_(std::move(tau)) {
    require_same_owner(p_.owner(), tau_.owner(), "l2_of_module");
    gns_detail::require_gns_algebra(p_.owner());
    gns_detail::require_faithful(tau_);
    const SpecPtr& s = p_.owner();
    layout_.offsets.assign(1, 0);
    for (int b = 0; b < s->num_blocks(); ++b) {
      Mat q = linalg::range_basis(p_.projection().block(b));
      layout_.offsets.push_back(layout_.offsets.back() + static_cast<int>(q.cols()) * s->block_size(b));
      q_.push_back(std::move(q));
    }
  }

  const ProjectiveModule& origin() const { return p_; }
  const TraceFunctional& trace() const { return tau_; }
  const SpecPtr& owner() const { return p_.owner(); }
  int ambient_rank() const { return p_.ambient_rank(); }
  int dimension() const { return layout_.dimension(); }
  const BlockLayout& layout() const { return layout_; }
  const Mat& range_basis(int b) const { return q_[b]; }
  int block_rank(int b) const { return static_cast<int>(q_[b].cols()); }

  /// Right multiplication by a on l^2(pA^n).
  Mat right_action(const AlgebraElement& a) const {
    require_same_owner(owner(), a.owner(), "right_action");
    Mat r = Mat::Zero(dimension(), dimension());
    for (int b = 0; b < owner()->num_blocks(); ++b) {
      const int o = layout_.offsets[b];
      r.block(o, o, layout_.size(b), layout_.size(b)) =
          linalg::kron(a.block(b).transpose(), Mat::Identity(block_rank(b), block_rank(b)));
    }
    return r;
  }

  /// Right action of the matrix units of every block: a generating set of A.
  std::vector<Mat> right_action_generators() const {
    std::vector<Mat> g;
    for (int b = 0; b < owner()->num_blocks(); ++b)
      for (int i = 0; i < owner()->block_size(b); ++i)
        for (int j = 0; j < owner()->block_size(b); ++j)
          g.push_back(right_action(AlgebraElement::matrix_unit(owner(), b, i, j)));
    return g;
  }

  /// Bounded extension of an endomorphism f of pA^n (f is compressed by p).
  Mat extend_map(const ModuleMap& f) const {
    require_same_owner(owner(), f.owner(), "extend_map");
    if (f.rows() != ambient_rank() || f.cols() != ambient_rank())
      throw StructuralError("extend_map: map does not act on the module");
    Mat r = Mat::Zero(dimension(), dimension());
    for (int b = 0; b < owner()->num_blocks(); ++b) {
      const int o = layout_.offsets[b];
      const int nb = owner()->block_size(b);
      r.block(o, o, layout_.size(b), layout_.size(b)) =
          linalg::kron(Mat::Identity(nb, nb), q_[b].adjoint() * f.block(b) * q_[b]);
    }
    return r;
  }

  /// Isometric embedding l^2(pA^n) -> l^2(A^n) in ambient coordinates.
  Mat embedding() const {
    const SpecPtr& s = owner();
    const BlockLayout amb = ambient_layout(s, ambient_rank());
    Mat j = Mat::Zero(amb.dimension(), dimension());
    for (int b = 0; b < s->num_blocks(); ++b) {
      const int nb = s->block_size(b);
      j.block(amb.offsets[b], layout_.offsets[b], amb.size(b), layout_.size(b)) =
          linalg::kron(Mat::Identity(nb, nb), q_[b]);
    }
    return j;
  }

  /// The module vector with orthonormal coordinates e_k.
  ModuleVector basis_vector(int k) const {
    if (k < 0 || k >= dimension()) throw StructuralError("basis index out of range");
    const SpecPtr& s = owner();
    int b = 0;
    while (k >= layout_.offsets[b + 1]) ++b;
    const int local = k - layout_.offsets[b];
    const int r = block_rank(b);
    const int col = local / r, row = local % r;
    const int nb = s->block_size(b);
    const int n = ambient_rank();
    Mat x = Mat::Zero(n * nb, nb);
    x.col(col) = q_[b].col(row) / std::sqrt(tau_.weights()[b]);
    std::vector<AlgebraElement> entries;
    for (int i = 0; i < n; ++i) {
      AlgebraElement e = AlgebraElement::zero(s);
      e.block(b) = x.block(i * nb, 0, nb, nb);
      entries.push_back(e);
    }
    return ModuleVector(std::move(entries));
  }

  static BlockLayout ambient_layout(const SpecPtr& s, int n) {
    BlockLayout l;
    l.offsets.assign(1, 0);
    for (int nb : s->blocks()) l.offsets.push_back(l.offsets.back() + n * nb * nb);
    return l;
  }

 private:
  ProjectiveModule p_;
  TraceFunctional tau_ = TraceFunctional::normalized(AlgebraSpec::matrices({1}));
  std::vector<Mat> q_;
  BlockLayout layout_;
};

inline GnsSpace l2_of_module(const ProjectiveModule& p, const TraceFunctional& tau) { return GnsSpace(p, tau); }

/// tau(<v_i, v_j>) for a family of module vectors.
inline Mat gram_matrix(const std::vector<ModuleVector>& vs, const TraceFunctional& tau) {
  const int n = static_cast<int>(vs.size());
  Mat g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = tau.apply(inner_product(vs[i], vs[j]))(0);
  return g;
}

/// Right action of a on the ambient l^2(A^n).
inline Mat ambient_right_action(const AlgebraElement& a, int n) {
  const SpecPtr& s = a.owner();
  gns_detail::require_gns_algebra(s);
  const BlockLayout l = GnsSpace::ambient_layout(s, n);
  Mat r = Mat::Zero(l.dimension(), l.dimension());
  for (int b = 0; b < s->num_blocks(); ++b) {
    const int nb = s->block_size(b);
    r.block(l.offsets[b], l.offsets[b], l.size(b), l.size(b)) =
        linalg::kron(a.block(b).transpose(), Mat::Identity(n * nb, n * nb));
  }
  return r;
}

/// Left action of a map f : A^n -> A^n on the ambient l^2(A^n).
inline Mat ambient_left_action(const ModuleMap& f) {
  const SpecPtr& s = f.owner();
  gns_detail::require_gns_algebra(s);
  if (f.rows() != f.cols()) throw StructuralError("ambient_left_action needs an endomorphism");
  const BlockLayout l = GnsSpace::ambient_layout(s, f.rows());
  Mat r = Mat::Zero(l.dimension(), l.dimension());
  for (int b = 0; b < s->num_blocks(); ++b) {
    const int nb = s->block_size(b);
    r.block(l.offsets[b], l.offsets[b], l.size(b), l.size(b)) = linalg::kron(Mat::Identity(nb, nb), f.block(b));
  }
  return r;
}

/// Largest commutator ||[x, r(e)]|| over the matrix units e of A.
/// r(e_ij) in block b is e_ji (x) I_m, so x r(e_ij) copies column block j of x
/// into column block i and r(e_ij) x copies row block i into row block j. The
/// commutator is summed blockwise without cancellation.
inline double right_action_commutator(const Mat& x, const SpecPtr& s, int n) {
  const BlockLayout l = GnsSpace::ambient_layout(s, n);
  const Eigen::Index dim = l.dimension();
  if (x.rows() != dim || x.cols() != dim) throw StructuralError("right_action_commutator: operator has the wrong size");
  double worst = 0.0;
  for (int b = 0; b < s->num_blocks(); ++b) {
    const int nb = s->block_size(b), m = n * nb, o = l.offsets[b];
    for (int i = 0; i < nb; ++i)
      for (int j = 0; j < nb; ++j) {
        const Eigen::Index ri = o + i * m, cj = o + j * m;
        const auto col = x.middleCols(cj, m);
        const auto row = x.middleRows(ri, m);
        double r2 = col.topRows(cj).squaredNorm() + col.bottomRows(dim - cj - m).squaredNorm() +
                    row.leftCols(ri).squaredNorm() + row.rightCols(dim - ri - m).squaredNorm();
        if (i != j) r2 += (x.block(cj, cj, m, m) - x.block(ri, ri, m, m)).squaredNorm();
        worst = std::max(worst, std::sqrt(r2));
      }
  }
  return worst;
}

/// Orthonormal (Frobenius) basis of {X : X a_i = a_i X for all i}.
inline std::vector<Mat> commutant(const std::vector<Mat>& generators, double rel_threshold = 1e-9) {
  if (generators.empty()) throw StructuralError("commutant needs at least one generator");
  const Eigen::Index d = generators[0].rows();
  const Mat id = Mat::Identity(d, d);
  Mat system(d * d * static_cast<Eigen::Index>(generators.size()), d * d);
  for (std::size_t i = 0; i < generators.size(); ++i) {
    const Mat& a = generators[i];
    if (a.rows() != d || a.cols() != d) throw StructuralError("commutant: generators have different sizes");
    // vec(Xa - aX) = (a^T (x) I - I (x) a) vec(X)
    system.middleRows(static_cast<Eigen::Index>(i) * d * d, d * d) = linalg::kron(a.transpose(), id) - linalg::kron(id, a);
  }
  const Mat ns = linalg::null_space(system, rel_threshold);
  std::vector<Mat> out;
  for (Eigen::Index k = 0; k < ns.cols(); ++k) out.push_back(Eigen::Map<const Mat>(ns.col(k).data(), d, d));
  return out;
}

/// A(T) for an operator T on l^2(A^n) commuting with the right action: the
/// map f with T = I (x) f_b in every block.
inline ModuleMap recover_map(const Mat& t, const SpecPtr& s, int n, double tol = 1e-9) {
  gns_detail::require_gns_algebra(s);
  const BlockLayout l = GnsSpace::ambient_layout(s, n);
  if (t.rows() != l.dimension() || t.cols() != l.dimension()) throw StructuralError("recover: operator has the wrong size");
  const double res = right_action_commutator(t, s, n);
  if (res > tol * std::max(1.0, t.norm()))
    throw PreconditionError("operator does not commute with the right A-action (residual " + sci_string(res) + ")");
  ModuleMap f = ModuleMap::zero(s, n, n);
  for (int b = 0; b < s->num_blocks(); ++b) {
    const int nb = s->block_size(b), m = n * nb;
    const auto tb = t.block(l.offsets[b], l.offsets[b], l.size(b), l.size(b));
    Mat acc = Mat::Zero(m, m);
    for (int c = 0; c < nb; ++c) acc += tb.block(c * m, c * m, m, m);
    f.block(b) = acc / static_cast<double>(nb);
  }
  return f;
}

/// A(X) for a subspace X of l^2(A^n) given by its orthogonal projection.
inline ProjectiveModule recover_module(const Mat& projection, const SpecPtr& s, int n) {
  return ProjectiveModule(recover_map(projection, s, n));
}

inline ProjectiveModule recover_module(const GnsSpace& x) {
  const Mat j = x.embedding();
  return recover_module(j * j.adjoint(), x.owner(), x.ambient_rank());
}

/// Sum_i t(U_i^* a U_i) for a on C^h (x) l^2(A) (ambient coordinates of
/// l^2(A^h)) commuting with the right action; U_i embeds l^2(A) along the i-th
/// column of `h_basis` (identity when empty).
inline ZValue extended_trace_value(const TraceFunctional& t, const Mat& a, int h, const Mat& h_basis = Mat(),
                                   double tol = 1e-9) {
  const SpecPtr& s = t.owner();
  gns_detail::require_gns_algebra(s);
  const BlockLayout l = GnsSpace::ambient_layout(s, h);
  if (a.rows() != l.dimension() || a.cols() != l.dimension())
    throw StructuralError("extended trace: operator has the wrong size");
  const double res = right_action_commutator(a, s, h);
  if (res > tol * std::max(1.0, a.norm()))
    throw PreconditionError("extended trace: operator is not in the commutant of the right action (residual " +
                            sci_string(res) + ")");
  const Mat w = h_basis.size() ? h_basis : Mat(Mat::Identity(h, h));
  if (w.rows() != h || w.cols() != h) throw StructuralError("extended trace: basis has the wrong size");
  const bool standard = h_basis.size() == 0;
  ZValue total = ZValue::Zero(t.value_size());
  for (int i = 0; i < h; ++i) {
    std::vector<Mat> xb;
    for (int b = 0; b < s->num_blocks(); ++b) {
      const int nb = s->block_size(b), m = h * nb, o = l.offsets[b];
      // U_i in block b is I_{n_b} (x) (w_i (x) I_{n_b}); average the diagonal blocks of U_i^* a U_i
      Mat x = Mat::Zero(nb, nb);
      if (standard) {
        for (int c = 0; c < nb; ++c) x += a.block(o + c * m + i * nb, o + c * m + i * nb, nb, nb);
      } else {
        const Mat v = linalg::kron(w.col(i), Mat::Identity(nb, nb));
        for (int c = 0; c < nb; ++c) x += v.adjoint() * a.block(o + c * m, o + c * m, m, m) * v;
      }
      xb.push_back(x / static_cast<double>(nb));
    }
    total += t.apply(AlgebraElement(s, std::move(xb)));
  }
  return total;
}

/// Extended trace of an operator on l^2(pA^n), pushed into l^2(A^n).
inline ZValue extended_trace_value(const TraceFunctional& t, const GnsSpace& x, const Mat& op) {
  if (op.rows() != x.dimension() || op.cols() != x.dimension())
    throw StructuralError("extended trace: operator has the wrong size for the GNS space");
  const Mat j = x.embedding();
  return extended_trace_value(t, j * op * j.adjoint(), x.ambient_rank());
}

}  // namespace ncindex
