#pragma once

// Cyclic coverings of T^2 along x and the L^2-index of lifted operators.
//
// The cover of degree k is realized geometrically: the torus [0, k) x [0, 1)
// sampled with the base resolution in every unit cell, so the cover grid has
// k*N x N points. A base bundle with automorphy (C, U, V) lifts to the
// automorphy (C, U^k, V) over extent k; the deck generator acts by
//   (T s)(x, y) = exp(2 pi i C y) U s(x - 1, y),
// which commutes with the lifted connection and satisfies T^k = 1. Sections
// of the cover correspond to sections of E (x) l^2(Z/k) over the base via
//   s_j(x, y) = W_j(y)^{-1} s~(x + j, y),  W_j = (exp(2 pi i C y) U)^j,
// whose automorphy along x is exp(2 pi i C y) U (x) S with (S v)_j = v_{j+1}.

#include <string>
#include <vector>

#include "ncindex/spectral.hpp"

namespace ncindex {

struct CoverSpec {
  FiniteGroup group = FiniteGroup::cyclic(1);
  Grid base;
  Grid cover;

  int degree() const { return group.order(); }
  int cell_points() const { return base.points(); }

  /// The Z/k-cover unwrapping the x-circle k times.
  static CoverSpec cyclic(const Grid& base, int k, const std::string& axis = "x") {
    if (axis != "x") throw DomainError("only coverings along the x-circle are implemented");
    if (base.dim() != 2) throw DomainError("coverings are built over the torus");
    if (k < 1) throw DomainError("cover degree must be positive");
    if (base.lx != 1.0) throw DomainError("the base torus must have unit x-extent");
    CoverSpec c;
    c.group = FiniteGroup::cyclic(k);
    c.base = base;
    c.cover = Grid::torus(k * base.nx, base.ny, k * base.lx, base.ly);
    return c;
  }
};

namespace cover_detail {

inline void require_liftable(const Bundle& b, const CoverSpec& c) {
  if (!(b.grid() == c.base)) throw StructuralError("bundle does not live on the base grid of the cover");
  if (b.presentation() == Presentation::projection_field)
    throw DomainError("lifting is implemented for automorphy presentations");
  if (b.gauge_cells() != 1) throw DomainError("bundle is already a lift");
}

inline Mat power(const Mat& m, int k) {
  Mat r = Mat::Identity(m.rows(), m.cols());
  for (int i = 0; i < k; ++i) r = r * m;
  return r;
}

inline int cyclic_generator(const FiniteGroup& g) {
  for (int h = 0; h < g.order(); ++h) {
    int x = h, n = 1;
    while (x != g.identity()) {
      x = g.mul(x, h);
      ++n;
    }
    if (n == g.order()) return h;
  }
  throw DomainError("group " + g.label() + " is not cyclic");
}

/// W_j(y) = (exp(2 pi i C y) U)^j.
inline Mat cell_factor(const Automorphy& a, double y, int j) { return power(a.along_x(y, 1.0), j); }

}  // namespace cover_detail

/// The lifted bundle on the cover grid: automorphy (C, U^k, V), connection
/// form continued into cell j by W_j omega W_j^{-1}.
inline Bundle lift_bundle(const Bundle& b, const CoverSpec& c) {
  cover_detail::require_liftable(b, c);
  const SpecPtr& s = b.owner();
  const int n = b.rank(), k = c.degree();
  const Grid& g = c.base;
  ModuleMap charge = ModuleMap::zero(s, n, n), u = charge, v = charge, p = charge;
  std::vector<MatrixForm> om;
  for (int blk = 0; blk < b.num_blocks(); ++blk) {
    const BundleBlock& bb = b.block(blk);
    const Automorphy aut = b.automorphy_of(blk);
    charge.block(blk) = bb.charge;
    u.block(blk) = cover_detail::power(bb.u, k);
    v.block(blk) = bb.v;
    p.block(blk) = bb.projection.at(0, 0);
    MatrixForm w(c.cover, 1, bb.omega.rows(), bb.omega.cols());
    for (int sc = 0; sc < c.cover.nx; ++sc) {
      const int j = sc / g.nx, sb = sc % g.nx;
      for (int t = 0; t < g.ny; ++t) {
        const Mat wj = cover_detail::cell_factor(aut, g.y(t), j);
        for (int comp = 0; comp < 2; ++comp)
          w.at(comp, c.cover.index(sc, t)) = wj * bb.omega.at(comp, g.index(sb, t)) * wj.adjoint();
      }
    }
    om.push_back(std::move(w));
  }
  return Bundle::automorphy(ProjectiveModule(p), charge, u, v, c.cover, std::move(om)).with_gauge_cells(k);
}

inline TwistedOperator lift_operator(const Bundle& base, const CoverSpec& c) {
  return assemble_dolbeault(lift_bundle(base, c));
}

/// Deck transformation by g in Z/k on ambient cover sections of one block.
inline Mat deck_action(const Bundle& base, const CoverSpec& c, int g, int block = 0) {
  cover_detail::require_liftable(base, c);
  const int k = c.degree();
  g = ((g % k) + k) % k;
  const Automorphy aut = base.automorphy_of(block);
  const int d = base.fiber_dim(block);
  const int nb = c.base.nx, ny = c.base.ny;
  const Grid& cg = c.cover;
  Mat t1 = Mat::Zero(cg.points() * d, cg.points() * d);
  for (int t = 0; t < ny; ++t) {
    const double y = cg.y(t);
    const Mat w1 = aut.along_x(y, 1.0);
    // s(x - 1) for x < 1 is read across the seam: s(x - 1) = M_k^{-1} s(x - 1 + k)
    const Mat seam = w1 * linalg::inverse(cover_detail::power(w1, k));
    for (int sc = 0; sc < cg.nx; ++sc) {
      const bool wrap = sc < nb;
      const int src = wrap ? sc - nb + cg.nx : sc - nb;
      t1.block(cg.index(sc, t) * d, cg.index(src, t) * d, d, d) = wrap ? seam : w1;
    }
  }
  return cover_detail::power(t1, g);
}

/// Isometry from base sections into deck-invariant cover sections:
/// (J s)(x + j, y) = W_j(y) s(x, y) / sqrt(k).
inline Mat invariant_embedding(const Bundle& base, const CoverSpec& c, int block = 0) {
  cover_detail::require_liftable(base, c);
  const Automorphy aut = base.automorphy_of(block);
  const int d = base.fiber_dim(block), k = c.degree();
  const Grid &g = c.base, &cg = c.cover;
  Mat j = Mat::Zero(cg.points() * d, g.points() * d);
  for (int cell = 0; cell < k; ++cell)
    for (int t = 0; t < g.ny; ++t) {
      const Mat wj = cover_detail::cell_factor(aut, g.y(t), cell) / std::sqrt(static_cast<double>(k));
      for (int s = 0; s < g.nx; ++s) j.block(cg.index(cell * g.nx + s, t) * d, g.index(s, t) * d, d, d) = wj;
    }
  return j;
}

/// Unitary from cover sections to sections of E (x) l^2(Z/k) over the base
/// (fiber index i*k + j, E outermost).
inline Mat dictionary_unitary(const Bundle& base, const CoverSpec& c, int block = 0) {
  cover_detail::require_liftable(base, c);
  const Automorphy aut = base.automorphy_of(block);
  const int d = base.fiber_dim(block), k = c.degree();
  const Grid &g = c.base, &cg = c.cover;
  Mat u = Mat::Zero(g.points() * d * k, cg.points() * d);
  for (int cell = 0; cell < k; ++cell)
    for (int t = 0; t < g.ny; ++t) {
      const Mat winv = cover_detail::cell_factor(aut, g.y(t), cell).adjoint();
      for (int s = 0; s < g.nx; ++s) {
        const int pb = g.index(s, t), pc = cg.index(cell * g.nx + s, t);
        for (int i = 0; i < d; ++i)
          for (int i2 = 0; i2 < d; ++i2) u(pb * d * k + i * k + cell, pc * d + i2) = winv(i, i2);
      }
    }
  return u;
}

/// E (x) l^2(Z/k) over the base as a bundle over C: automorphy
/// (C (x) 1, U (x) S, V (x) 1).
inline Bundle regular_twist_bundle(const Bundle& base, int k) {
  if (base.owner()->blocks() != std::vector<int>{1} || base.owner()->group())
    throw DomainError("the regular twist is formed for bundles over C");
  const SpecPtr s = AlgebraSpec::matrices({1});
  Mat shift = Mat::Zero(k, k);
  for (int j = 0; j < k; ++j) shift(j, (j + 1) % k) = 1.0;
  ModuleMap one = ModuleMap::identity(s, k), sm = one;
  sm.block(0) = shift;
  const Bundle w = Bundle::automorphy(ProjectiveModule(one), ModuleMap::zero(s, k, k), sm, one, base.grid());
  return tensor_with_vector_bundle(base, w);
}

/// The flat bundle over T^2 with fiber C[Z/k] and monodromy left
/// multiplication by delta_{-1} along x (trivial along y).
inline Bundle flat_group_bundle(const SpecPtr& group_algebra, const Grid& grid) {
  if (!group_algebra->group() || group_algebra->group_model() != GroupModel::fourier)
    throw DomainError("flat group bundles are built over abelian group algebras");
  const FiniteGroup& g = *group_algebra->group();
  const AlgebraElement step = AlgebraElement::group_element(group_algebra, g.inverse(cover_detail::cyclic_generator(g)));
  return Bundle::flat(ProjectiveModule::free(group_algebra, 1),
                      {ModuleMap::diagonal(step, 1), ModuleMap::identity(group_algebra, 1)}, grid);
}

/// E (x) W with W the flat C[Z/k]-bundle, E a bundle over C.
inline Bundle flat_group_twist(const Bundle& e, int k) {
  const SpecPtr s = AlgebraSpec::group_algebra(FiniteGroup::cyclic(k));
  return tensor_with_vector_bundle(e, flat_group_bundle(s, e.grid()));
}

struct L2Index {
  int element = 0;
  cplx value;  // sum over a fundamental domain of tr(P_+ T_g) - tr(P_- T_g)
};

struct L2Indices {
  std::vector<L2Index> values;  // one per group element, identity first
  int kernel_dim = 0;           // on the whole cover
  int cokernel_dim = 0;
  double gap_ratio = 0.0;
};

/// Gamma-trace indices of the lifted operator for every g in Z/k: the sum over
/// the fundamental domain (cell 0) of the diagonal of P T_g, with P the kernel
/// and cokernel projections.
inline L2Indices l2_indices(const TwistedOperator& lifted, const Bundle& base, const CoverSpec& c,
                            double rel_tol = -1.0) {
  if (lifted.num_blocks() != 1 || lifted.owner()->block_size(0) != 1)
    throw DomainError("L2-indices are computed for lifts of bundles over C");
  const KernelData kd = kernel_data(lifted, rel_tol);
  const Mat t_adj = deck_action(base, c, 1).adjoint();
  const int fd = c.cell_points() * base.fiber_dim(0);  // cell 0 comes first in point order
  L2Indices out;
  out.gap_ratio = kd.gap_ratio;
  out.kernel_dim = static_cast<int>(kd.kernel[0].cols());
  out.cokernel_dim = static_cast<int>(kd.cokernel[0].cols());
  const Mat vp = lifted.frame(0) * kd.kernel[0], vm = lifted.frame(0) * kd.cokernel[0];
  Mat wp = vp, wm = vm;  // (T_g)^* V
  for (int g = 0; g < c.degree(); ++g) {
    // sum_{x in FD} (V V^* T_g)[x, x] = sum_{x in FD, a} V[x, a] conj((T_g^* V)[x, a])
    const cplx plus = (vp.topRows(fd).cwiseProduct(wp.topRows(fd).conjugate())).sum();
    const cplx minus = (vm.topRows(fd).cwiseProduct(wm.topRows(fd).conjugate())).sum();
    out.values.push_back({g, plus - minus});
    wp = t_adj * wp;
    wm = t_adj * wm;
  }
  return out;
}

/// Every quantity in the comparison between a base operator, its lift to the
/// Z/k-cover and its twist by the flat C[Z/k]-bundle.
struct CoverComparison {
  int degree = 0;
  cplx base_index;                     // ordinary index on the base
  int cover_index = 0;                 // ordinary index on the cover
  cplx l2_canonical;                   // Gamma-trace index, g = e
  std::vector<cplx> l2_delocalized;    // g = 1..k-1
  cplx twisted_canonical;              // t_e index of the C[Z/k]-twisted operator
  std::vector<cplx> twisted_delocalized;
  double deck_commutator = 0.0;        // ||[T, Delta_+]|| relative
  double dictionary_residual = 0.0;    // ||U Delta~ U^* - Delta_H|| relative
  double min_gap_ratio = 0.0;
};

inline CoverComparison compare_cover(const Bundle& base, int k, double rel_tol = -1.0) {
  const CoverSpec c = CoverSpec::cyclic(base.grid(), k);
  CoverComparison out;
  out.degree = k;
  const TwistedOperator base_op = assemble_dolbeault(base);
  const AnalyticIndex bi = analytic_index(base_op, TraceFunctional::normalized(base.owner()), rel_tol);
  out.base_index = bi.index(0);
  const TwistedOperator lifted = lift_operator(base, c);
  const L2Indices l2 = l2_indices(lifted, base, c, rel_tol);
  out.cover_index = l2.kernel_dim - l2.cokernel_dim;
  out.l2_canonical = l2.values[0].value;
  out.min_gap_ratio = std::min(bi.gap_ratio, l2.gap_ratio);
  for (int g = 1; g < k; ++g) out.l2_delocalized.push_back(l2.values[g].value);

  const Bundle twisted = flat_group_twist(base, k);
  const TwistedOperator top = assemble_dolbeault(twisted);
  const SpecPtr& gs = twisted.owner();
  const GnsKernel tk = gns_kernel(top, rel_tol);
  out.twisted_canonical = analytic_index(tk, TraceFunctional::canonical_group_trace(gs)).index(0);
  out.min_gap_ratio = std::min(out.min_gap_ratio, tk.gap_ratio);
  for (int g = 1; g < k; ++g)
    out.twisted_delocalized.push_back(analytic_index(tk, TraceFunctional::delocalized(gs, g)).index(0));

  // structural checks on the ambient Laplacians
  const Mat lc = lifted.frame(0) * lifted.laplacian(0, +1) * lifted.frame(0).adjoint();
  const Mat t = deck_action(base, c, 1);
  out.deck_commutator = (t * lc - lc * t).norm() / std::max(1.0, lc.norm());
  const TwistedOperator hop = assemble_dolbeault(regular_twist_bundle(base, k));
  const Mat lh = hop.frame(0) * hop.laplacian(0, +1) * hop.frame(0).adjoint();
  const Mat u = dictionary_unitary(base, c);
  out.dictionary_residual = (u * lc * u.adjoint() - lh).norm() / std::max(1.0, lh.norm());
  return out;
}

}  // namespace ncindex
