#pragma once

// Projective Hilbert A-module bundles over discretized S^1 and T^2.
//
// Every bundle is stored per block b of A as data on the ambient fiber
// C^{d_b}, d_b = n * n_b, of the free module A^n:
//   E(x)      projection field onto the fiber (constant p for automorphy bundles),
//   C, U, V   automorphy: s(x + lx, y) = exp(2 pi i C lx y) U s(x, y), s(x, y + ly) = V s(x, y),
//   omega_1   tensorial part of the connection form.
// The connection is nabla = E (d + omega_0 + omega_1) E with omega_0 = -2 pi i C x dy,
// so the curvature is E (Omega_0 + d omega_1 + omega_1^omega_1) E + E dE^dE E with
// Omega_0 = -2 pi i C dx^dy.

#include <Eigen/SparseCore>

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ncindex/forms.hpp"
#include "ncindex/gns.hpp"
#include "ncindex/hilbert_module.hpp"

namespace ncindex {

enum class Presentation { trivialized, automorphy, projection_field };

inline std::string to_string(Presentation p) {
  switch (p) {
    case Presentation::trivialized: return "trivialized";
    case Presentation::automorphy: return "automorphy";
    case Presentation::projection_field: return "projection_field";
  }
  return "";
}

/// Commuting unitaries of End_A(pA^n), one per torus generator.
struct Monodromy {
  ModuleMap u;
  ModuleMap v;
};

struct BundleBlock {
  Mat charge;
  Mat u;
  Mat v;
  MatrixForm projection;  // degree 0
  MatrixForm omega;       // degree 1, tensorial
};

class Bundle {
 public:
  Bundle() = default;

  static Bundle automorphy(const ProjectiveModule& p, const ModuleMap& charge, const ModuleMap& u, const ModuleMap& v,
                           const Grid& grid, std::vector<MatrixForm> omega = {}) {
    const SpecPtr& s = p.owner();
    const int n = p.ambient_rank();
    Bundle b;
    b.presentation_ = Presentation::automorphy;
    b.owner_ = s;
    b.grid_ = grid;
    b.rank_ = n;
    for (int k = 0; k < s->num_blocks(); ++k) {
      const Mat& pk = p.projection().block(k);
      const Mat id = Mat::Identity(pk.rows(), pk.cols());
      BundleBlock blk;
      blk.charge = charge.block(k);
      blk.u = extend_unitary(u.block(k), pk);
      blk.v = extend_unitary(v.block(k), pk);
      blk.projection = MatrixForm::constant(grid, 0, {pk});
      blk.omega = omega.empty() ? MatrixForm(grid, 1, pk.rows(), pk.cols()) : omega.at(k);
      b.blocks_.push_back(std::move(blk));
    }
    b.retwist();
    b.validate();
    return b;
  }

  /// Trivial automorphy, connection d + omega_1.
  static Bundle trivialized(const ProjectiveModule& p, const Grid& grid, std::vector<MatrixForm> omega = {}) {
    const SpecPtr& s = p.owner();
    const int n = p.ambient_rank();
    Bundle b = automorphy(p, ModuleMap::zero(s, n, n), ModuleMap::identity(s, n), ModuleMap::identity(s, n), grid,
                          std::move(omega));
    b.presentation_ = Presentation::trivialized;
    return b;
  }

  /// Line bundle over C with charge c: Chern number c lx ly.
  static Bundle line(double c, const Grid& grid) {
    const SpecPtr s = AlgebraSpec::matrices({1});
    const ModuleMap one = ModuleMap::identity(s, 1);
    return automorphy(ProjectiveModule(one), c * one, one, one, grid);
  }

  /// Flat bundle with fiber pA^n and monodromies U, V (omega = 0).
  static Bundle flat(const ProjectiveModule& p, const Monodromy& m, const Grid& grid) {
    const int n = p.ambient_rank();
    Bundle b = automorphy(p, ModuleMap::zero(p.owner(), n, n), m.u, m.v, grid);
    return b;
  }

  /// Image bundle of a projection field with the Grassmann connection (plus a
  /// tensorial omega_1 when given).
  static Bundle projection_field(const SpecPtr& s, int rank, std::vector<MatrixForm> eps,
                                 std::vector<MatrixForm> omega = {}) {
    if (static_cast<int>(eps.size()) != s->num_blocks())
      throw StructuralError("projection field needs one field per block");
    Bundle b;
    b.presentation_ = Presentation::projection_field;
    b.owner_ = s;
    b.grid_ = eps[0].grid();
    b.rank_ = rank;
    for (int k = 0; k < s->num_blocks(); ++k) {
      const Eigen::Index d = rank * s->block_size(k);
      if (eps[k].rows() != d || eps[k].cols() != d || eps[k].degree() != 0)
        throw StructuralError("projection field block " + std::to_string(k) + " has the wrong shape");
      BundleBlock blk;
      blk.charge = Mat::Zero(d, d);
      blk.u = Mat::Identity(d, d);
      blk.v = Mat::Identity(d, d);
      blk.projection = std::move(eps[k]);
      blk.omega = omega.empty() ? MatrixForm(b.grid_, 1, d, d) : omega.at(k);
      b.blocks_.push_back(std::move(blk));
    }
    b.retwist();
    b.validate();
    return b;
  }

  /// The same bundle with another tensorial connection part.
  Bundle with_omega(std::vector<MatrixForm> omega) const {
    if (omega.size() != blocks_.size()) throw StructuralError("with_omega: one form per block required");
    Bundle b = *this;
    for (std::size_t k = 0; k < blocks_.size(); ++k) b.blocks_[k].omega = std::move(omega[k]);
    b.retwist();
    b.validate();
    return b;
  }

  /// Number of x-cells whose own gauge is used for the y-derivative (covers).
  Bundle with_gauge_cells(int cells) const {
    if (cells < 1 || grid_.nx % cells != 0) throw DomainError("gauge cells must divide the x resolution");
    Bundle b = *this;
    b.gauge_cells_ = cells;
    return b;
  }

  Presentation presentation() const { return presentation_; }
  const SpecPtr& owner() const { return owner_; }
  const Grid& grid() const { return grid_; }
  int rank() const { return rank_; }
  int gauge_cells() const { return gauge_cells_; }
  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  const BundleBlock& block(int k) const { return blocks_[k]; }
  int fiber_dim(int k) const { return static_cast<int>(blocks_[k].u.rows()); }

  Twist twist(int k) const { return {TwistKind::endomorphism, automorphy_of(k)}; }
  Automorphy automorphy_of(int k) const { return {blocks_[k].charge, blocks_[k].u, blocks_[k].v}; }

  bool has_constant_projection() const {
    for (const auto& blk : blocks_)
      for (int p = 1; p < grid_.points(); ++p)
        if ((blk.projection.at(0, p) - blk.projection.at(0, 0)).norm() > 1e-12) return false;
    return true;
  }

  /// Fiber at a grid point as a projective module.
  ProjectiveModule fiber(int point = 0) const {
    ModuleMap p = ModuleMap::zero(owner_, rank_, rank_);
    for (int k = 0; k < num_blocks(); ++k) p.block(k) = blocks_[k].projection.at(0, point);
    return ProjectiveModule(p, 1e-9);
  }

  /// Skew-adjointness of the connection form (unitary gauge).
  bool is_metric(double tol = 1e-10) const {
    for (const auto& blk : blocks_)
      if ((blk.omega + blk.omega.adjoint()).sup_norm() > tol || (blk.charge - blk.charge.adjoint()).norm() > tol)
        return false;
    return true;
  }

  void validate(double tol = 1e-10) const {
    for (int k = 0; k < num_blocks(); ++k) {
      const BundleBlock& blk = blocks_[k];
      const Eigen::Index d = fiber_dim(k);
      automorphy_of(k).validate(grid_.lx, grid_.ly, tol);
      if (!(blk.projection.grid() == grid_) || !(blk.omega.grid() == grid_))
        throw StructuralError("bundle fields live on different grids");
      if (blk.omega.degree() != 1 || blk.omega.rows() != d || blk.omega.cols() != d)
        throw StructuralError("connection form of block " + std::to_string(k) + " has the wrong shape");
      for (int p = 0; p < grid_.points(); ++p) {
        const Mat& e = blk.projection.at(0, p);
        if ((e * e - e).norm() > tol || (e.adjoint() - e).norm() > tol)
          throw PreconditionError("projection field is not a projection at point " + std::to_string(p));
        if ((e * blk.charge - blk.charge * e).norm() > tol)
          throw PreconditionError("charge does not commute with the fiber projection");
        for (int c = 0; c < blk.omega.num_components(); ++c) {
          const Mat& w = blk.omega.at(c, p);
          if ((e * w * e - w).norm() > tol * std::max(1.0, w.norm()))
            throw PreconditionError("connection form is not reduced by the fiber projection");
          if ((w * blk.charge - blk.charge * w).norm() > tol * std::max(1.0, w.norm()))
            throw PreconditionError("connection form does not commute with the charge");
        }
      }
    }
  }

 private:
  static Mat extend_unitary(const Mat& u, const Mat& p) {
    const Mat id = Mat::Identity(u.rows(), u.cols());
    if ((u.adjoint() * u - id).norm() < 1e-10) return u;
    if ((u.adjoint() * u - p).norm() < 1e-10 && (u * p - u).norm() < 1e-10) return u + (id - p);
    throw PreconditionError("monodromy is not unitary on the fiber");
  }

  void retwist() {
    for (int k = 0; k < num_blocks(); ++k) {
      blocks_[k].projection.set_twist(twist(k));
      blocks_[k].omega.set_twist(twist(k));
    }
  }

  Presentation presentation_ = Presentation::automorphy;
  SpecPtr owner_;
  Grid grid_;
  int rank_ = 1;
  int gauge_cells_ = 1;
  std::vector<BundleBlock> blocks_;
};

inline Bundle flat_bundle(const ProjectiveModule& p, const Monodromy& m, const Grid& grid) {
  const double tol = 1e-12;
  const ModuleMap c = m.u * m.v - m.v * m.u;
  for (const Mat& b : c.blocks())
    if (b.norm() > tol) throw PreconditionError("monodromies do not commute");
  return Bundle::flat(p, m, grid);
}

/// Curvature 2-form per block.
inline std::vector<MatrixForm> curvature(const Bundle& b) {
  std::vector<MatrixForm> out;
  const Grid& g = b.grid();
  if (g.dim() != 2) throw DomainError("curvature 2-forms need a torus grid");
  for (int k = 0; k < b.num_blocks(); ++k) {
    const BundleBlock& blk = b.block(k);
    MatrixForm omega2 = exterior_d(blk.omega) + wedge(blk.omega, blk.omega);
    const MatrixForm de = exterior_d(blk.projection);
    const MatrixForm grass = wedge(wedge(blk.projection, wedge(de, de)), blk.projection);
    const Mat omega0 = -2.0 * kPi * kI * blk.charge;
    for (int p = 0; p < g.points(); ++p) {
      const Mat& e = blk.projection.at(0, p);
      omega2.at(0, p) = e * (omega0 + omega2.at(0, p)) * e + grass.at(0, p);
    }
    omega2.set_twist(b.twist(k));
    out.push_back(std::move(omega2));
  }
  return out;
}

/// Complementary projection field 1 - E with the Grassmann connection.
inline Bundle complement(const Bundle& b) {
  if (b.presentation() != Presentation::projection_field)
    throw DomainError("complement is defined for projection-field bundles");
  std::vector<MatrixForm> eps;
  for (int k = 0; k < b.num_blocks(); ++k) {
    const Mat id = Mat::Identity(b.fiber_dim(k), b.fiber_dim(k));
    eps.push_back(b.block(k).projection.map([&](const Mat& e) { return Mat(id - e); }));
  }
  return Bundle::projection_field(b.owner(), b.rank(), std::move(eps));
}

inline constexpr double kForbiddenLow = 0.4;
inline constexpr double kForbiddenHigh = 0.6;

/// Pointwise chi_{>1/2} of the self-adjoint part. When a reference projection
/// field is given, sup ||F - reference|| must be below delta <= 0.1.
inline MatrixForm retract_projection(const MatrixForm& f, double delta = 0.1,
                                     const MatrixForm* reference = nullptr) {
  if (f.degree() != 0 || f.rows() != f.cols()) throw StructuralError("retraction needs a square degree-0 field");
  if (reference) {
    if (delta > 0.1) throw PreconditionError("retraction margin delta must not exceed 0.1");
    const double dist = f.distance(*reference);
    if (!(dist < delta))
      throw PreconditionError("field is " + std::to_string(dist) + " away from the reference, not within delta");
  }
  MatrixForm out = f;
  for (int p = 0; p < f.grid().points(); ++p) {
    const Mat h = 0.5 * (f.at(0, p) + f.at(0, p).adjoint());
    linalg::HermitianEigen e = linalg::hermitian_eig(h);
    Eigen::Index above = 0;
    for (Eigen::Index i = 0; i < e.values.size(); ++i) {
      const double v = e.values(i);
      if (v > kForbiddenLow && v < kForbiddenHigh)
        throw RetractionError("spectrum enters the forbidden band (0.4, 0.6) at point " + std::to_string(p) +
                              " (eigenvalue " + std::to_string(v) + ")");
      if (v >= kForbiddenHigh) ++above;
    }
    const Mat q = e.vectors.rightCols(above);
    out.at(0, p) = q * q.adjoint();
  }
  return out;
}

/// Smallest singular value of E1 E2 restricted to the images, over all points.
/// Positive exactly when E1 E2 maps image(E2) isomorphically onto image(E1).
inline double image_isomorphism_margin(const MatrixForm& e1, const MatrixForm& e2) {
  double m = std::numeric_limits<double>::infinity();
  for (int p = 0; p < e1.grid().points(); ++p) {
    const Mat q1 = linalg::range_basis(e1.at(0, p));
    const Mat q2 = linalg::range_basis(e2.at(0, p));
    if (q1.cols() != q2.cols()) return 0.0;
    if (q1.cols() == 0) continue;
    const RVec sv = linalg::singular_values(q1.adjoint() * q2);
    m = std::min(m, sv(sv.size() - 1));
  }
  return m;
}

/// Direct sum with the diagonal connection.
inline Bundle direct_sum(const Bundle& a, const Bundle& b) {
  require_same_owner(a.owner(), b.owner(), "bundle direct_sum");
  if (!(a.grid() == b.grid())) throw StructuralError("bundle direct_sum: grids differ");
  const SpecPtr& s = a.owner();
  const int n = a.rank() + b.rank();
  auto sum = [](const Mat& x, const Mat& y) {
    Mat r = Mat::Zero(x.rows() + y.rows(), x.cols() + y.cols());
    r.topLeftCorner(x.rows(), x.cols()) = x;
    r.bottomRightCorner(y.rows(), y.cols()) = y;
    return r;
  };
  std::vector<MatrixForm> eps, om;
  ModuleMap c = ModuleMap::zero(s, n, n), u = c, v = c;
  for (int k = 0; k < s->num_blocks(); ++k) {
    c.block(k) = sum(a.block(k).charge, b.block(k).charge);
    u.block(k) = sum(a.block(k).u, b.block(k).u);
    v.block(k) = sum(a.block(k).v, b.block(k).v);
    const Grid& g = a.grid();
    MatrixForm e(g, 0, c.block(k).rows(), c.block(k).cols());
    MatrixForm w(g, 1, c.block(k).rows(), c.block(k).cols());
    for (int p = 0; p < g.points(); ++p) {
      e.at(0, p) = sum(a.block(k).projection.at(0, p), b.block(k).projection.at(0, p));
      for (int cc = 0; cc < w.num_components(); ++cc)
        w.at(cc, p) = sum(a.block(k).omega.at(cc, p), b.block(k).omega.at(cc, p));
    }
    eps.push_back(std::move(e));
    om.push_back(std::move(w));
  }
  if (a.presentation() == Presentation::projection_field || b.presentation() == Presentation::projection_field) {
    Bundle r = Bundle::projection_field(s, n, eps, om);
    return r;
  }
  ModuleMap p = ModuleMap::zero(s, n, n);
  for (int k = 0; k < s->num_blocks(); ++k) p.block(k) = eps[k].at(0, 0);
  return Bundle::automorphy(ProjectiveModule(p), c, u, v, a.grid(), om);
}

/// E (x) b for a finite-rank vector bundle E over C given by automorphy data.
/// The ambient fiber is C^e (x) A^n with the E index outermost.
inline Bundle tensor_with_vector_bundle(const Bundle& e, const Bundle& b) {
  if (e.owner()->blocks() != std::vector<int>{1} || e.owner()->group())
    throw DomainError("the first factor must be a bundle over C");
  if (!(e.grid() == b.grid())) throw StructuralError("tensor: grids differ");
  if (e.presentation() == Presentation::projection_field || b.presentation() == Presentation::projection_field)
    throw DomainError("tensor products are formed for automorphy presentations");
  const SpecPtr& s = b.owner();
  const int de = e.fiber_dim(0);
  const int n = de * b.rank();
  const Mat ie = Mat::Identity(de, de);
  ModuleMap c = ModuleMap::zero(s, n, n), u = c, v = c, p = c;
  std::vector<MatrixForm> om;
  const Grid& g = b.grid();
  const BundleBlock& eb = e.block(0);
  for (int k = 0; k < s->num_blocks(); ++k) {
    const BundleBlock& bb = b.block(k);
    const Mat ib = Mat::Identity(bb.u.rows(), bb.u.cols());
    c.block(k) = linalg::kron(eb.charge, ib) + linalg::kron(ie, bb.charge);
    u.block(k) = linalg::kron(eb.u, bb.u);
    v.block(k) = linalg::kron(eb.v, bb.v);
    p.block(k) = linalg::kron(eb.projection.at(0, 0), bb.projection.at(0, 0));
    MatrixForm w(g, 1, de * ib.rows(), de * ib.cols());
    for (int q = 0; q < g.points(); ++q)
      for (int cc = 0; cc < w.num_components(); ++cc)
        w.at(cc, q) = linalg::kron(eb.omega.at(cc, q), ib) + linalg::kron(ie, bb.omega.at(cc, q));
    om.push_back(std::move(w));
  }
  return Bundle::automorphy(ProjectiveModule(p), c, u, v, g, std::move(om));
}

/// Pullback along the degree-k cover x -> k x mod lx (cover grid has k times
/// the x resolution): charge kC, U^k, forms pulled back.
inline Bundle pullback(const Bundle& b, int k) {
  const Grid cg = cover_grid(b.grid(), k);
  const SpecPtr& s = b.owner();
  const int n = b.rank();
  std::vector<MatrixForm> eps, om;
  ModuleMap c = ModuleMap::zero(s, n, n), u = c, v = c;
  for (int j = 0; j < b.num_blocks(); ++j) {
    const BundleBlock& blk = b.block(j);
    c.block(j) = static_cast<double>(k) * blk.charge;
    Mat uk = Mat::Identity(blk.u.rows(), blk.u.cols());
    for (int i = 0; i < k; ++i) uk = uk * blk.u;
    u.block(j) = uk;
    v.block(j) = blk.v;
    eps.push_back(pullback_form(blk.projection, k, cg));
    om.push_back(pullback_form(blk.omega, k, cg));
  }
  if (b.presentation() == Presentation::projection_field) {
    if (!b.automorphy_of(0).is_trivial()) throw DomainError("twisted projection fields are not pulled back");
    return Bundle::projection_field(s, n, std::move(eps), std::move(om));
  }
  ModuleMap p = ModuleMap::zero(s, n, n);
  for (int j = 0; j < b.num_blocks(); ++j) p.block(j) = b.block(j).projection.at(0, 0);
  Bundle r = Bundle::automorphy(ProjectiveModule(p), c, u, v, cg, std::move(om));
  return r;
}

/// Holonomy of the connection along the x-circle at height y_t and along the
/// y-circle at x_s, in the fiber at the start point: M T^{-1}, where T is the
/// parallel transport across one period (product of midpoint exponentials) and M
/// the automorphy factor. For flat bundles this is (U, V).
inline std::pair<Mat, Mat> holonomies(const Bundle& b, int block, int s = 0, int t = 0) {
  const Grid& g = b.grid();
  const BundleBlock& blk = b.block(block);
  const Eigen::Index d = b.fiber_dim(block);
  auto transport = [&](bool along_x) {
    Mat tr = Mat::Identity(d, d);
    const int steps = along_x ? g.nx : g.ny;
    const double h = along_x ? g.lx / g.nx : g.ly / g.ny;
    for (int i = 0; i < steps; ++i) {
      const int p = along_x ? g.index(i, t) : g.index(s, i);
      const int q = along_x ? g.index((i + 1) % g.nx, t) : g.index(s, (i + 1) % g.ny);
      Mat w = blk.omega.at(along_x ? 0 : 1, p);
      Mat w2 = blk.omega.at(along_x ? 0 : 1, q);
      if (!along_x) {
        const Mat w0 = -2.0 * kPi * kI * blk.charge * g.x(s);
        w += w0;
        w2 += w0;
      }
      // omega at the end of the period is expressed through the automorphy
      if (along_x && i + 1 == g.nx) {
        const Mat m = b.automorphy_of(block).along_x(g.y(t), g.lx);
        w2 = m * w2 * m.adjoint();
      } else if (!along_x && i + 1 == g.ny) {
        w2 = blk.v * w2 * blk.v.adjoint();
      }
      const Mat mid = 0.5 * (w + w2);
      tr = linalg::expm(-h * mid) * tr;
    }
    return tr;
  };
  const Mat tx = transport(true);
  const Mat ty = g.dim() == 2 ? transport(false) : Mat::Identity(d, d);
  const Mat mx = b.automorphy_of(block).along_x(g.y(t), g.lx);
  return {mx * linalg::inverse(tx), blk.v * linalg::inverse(ty)};
}

/// Dense covariant derivatives on the ambient section space of one block
/// (point-major, fiber-minor), compressed by the projection field:
/// nabla_x = E (D_x^{M(y)} + omega_x) E, nabla_y = E (D_y + omega_0y + omega_y) E.
/// Columns of cell j (width lx / gauge_cells) take the y-derivative in the
/// cell's own gauge g_j = exp(2 pi i C j w y).
struct CovariantOperators {
  Mat nabla_x;
  Mat nabla_y;  // empty on the circle
  Mat curvature;  // pointwise F = Omega_xy, block diagonal
  Mat projection;  // pointwise E, block diagonal
};

inline CovariantOperators covariant_operators(const Bundle& b, int block) {
  const Grid& g = b.grid();
  const BundleBlock& blk = b.block(block);
  const int d = b.fiber_dim(block);
  const int np = g.points();
  const Automorphy aut = b.automorphy_of(block);
  CovariantOperators out;
  out.nabla_x = Mat::Zero(np * d, np * d);
  for (int t = 0; t < g.ny; ++t) {
    const Mat dl = bloch_derivative(g.nx, g.lx, aut.along_x(g.y(t), g.lx));
    for (int s = 0; s < g.nx; ++s)
      for (int s2 = 0; s2 < g.nx; ++s2)
        out.nabla_x.block(g.index(s, t) * d, g.index(s2, t) * d, d, d) = dl.block(s * d, s2 * d, d, d);
  }
  out.projection = Mat::Zero(np * d, np * d);
  for (int p = 0; p < np; ++p) {
    out.nabla_x.block(p * d, p * d, d, d) += blk.omega.at(0, p);
    out.projection.block(p * d, p * d, d, d) = blk.projection.at(0, p);
  }
  if (g.dim() == 2) {
    out.nabla_y = Mat::Zero(np * d, np * d);
    const Mat dy = bloch_derivative(g.ny, g.ly, blk.v);
    const int cell_len = g.nx / b.gauge_cells();
    const double cell_w = g.lx / b.gauge_cells();
    for (int s = 0; s < g.nx; ++s) {
      const int j = s / cell_len;
      Mat gy = Mat::Zero(g.ny * d, g.ny * d);
      for (int t = 0; t < g.ny; ++t) gy.block(t * d, t * d, d, d) = aut.charge_phase(j * cell_w * g.y(t));
      const Mat local = j == 0 ? dy : Mat(gy * dy * gy.adjoint());
      const Mat shift = -2.0 * kPi * kI * aut.charge * (g.x(s) - j * cell_w);
      for (int t = 0; t < g.ny; ++t) {
        for (int t2 = 0; t2 < g.ny; ++t2)
          out.nabla_y.block(g.index(s, t) * d, g.index(s, t2) * d, d, d) = local.block(t * d, t2 * d, d, d);
        out.nabla_y.block(g.index(s, t) * d, g.index(s, t) * d, d, d) += shift + blk.omega.at(1, g.index(s, t));
      }
    }
    out.curvature = Mat::Zero(np * d, np * d);
    const std::vector<MatrixForm> f = curvature(b);
    for (int p = 0; p < np; ++p) out.curvature.block(p * d, p * d, d, d) = f[block].at(0, p);
  }
  if (!b.has_constant_projection() || !out.projection.isApprox(Mat::Identity(np * d, np * d))) {
    // E is pointwise and the derivatives act along grid lines: both are sparse.
    const Eigen::SparseMatrix<cplx> e = out.projection.sparseView();
    out.nabla_x = Mat(e * Eigen::SparseMatrix<cplx>(out.nabla_x.sparseView()) * e);
    if (g.dim() == 2) out.nabla_y = Mat(e * Eigen::SparseMatrix<cplx>(out.nabla_y.sparseView()) * e);
  }
  return out;
}

/// sup over the grid of ||d<s1,s2> - <nabla s1, s2> - <s1, nabla s2>|| for
/// sections of an untwisted bundle given per block as degree-0 fields of
/// shape d_b x n_b.
inline double metric_compatibility_residual(const Bundle& b, const std::vector<MatrixForm>& s1,
                                            const std::vector<MatrixForm>& s2) {
  double worst = 0.0;
  const Grid& g = b.grid();
  for (int k = 0; k < b.num_blocks(); ++k) {
    if (!b.automorphy_of(k).is_trivial()) throw DomainError("metric check needs an untwisted bundle");
    const CovariantOperators ops = covariant_operators(b, k);
    const int d = b.fiber_dim(k);
    const Eigen::Index cols = s1[k].cols();
    auto stack = [&](const MatrixForm& f) {
      Mat v(g.points() * d, cols);
      for (int p = 0; p < g.points(); ++p) v.middleRows(p * d, d) = f.at(0, p);
      return v;
    };
    const Mat v1 = stack(s1[k]), v2 = stack(s2[k]);
    MatrixForm inner(g, 0, cols, cols);
    for (int p = 0; p < g.points(); ++p) inner.at(0, p) = s1[k].at(0, p).adjoint() * s2[k].at(0, p);
    const MatrixForm din = exterior_d(inner);
    for (int c = 0; c < g.dim(); ++c) {
      const Mat& nab = c == 0 ? ops.nabla_x : ops.nabla_y;
      const Mat n1 = nab * v1, n2 = nab * v2;
      for (int p = 0; p < g.points(); ++p) {
        const Mat rhs = n1.middleRows(p * d, d).adjoint() * s2[k].at(0, p) +
                        s1[k].at(0, p).adjoint() * n2.middleRows(p * d, d);
        worst = std::max(worst, (din.at(c, p) - rhs).norm());
      }
    }
  }
  return worst;
}

/// Random skew-adjoint tensorial connection part, band limited to Fourier modes
/// |m|, |n| <= modes. For automorphy bundles the values lie in the commutant of
/// (C, U, V, p), so the automorphy is preserved; for projection fields they are
/// E G E with G skew.
inline std::vector<MatrixForm> random_tensorial_omega(const Bundle& b, std::mt19937_64& rng, double scale = 0.3,
                                                      int modes = 1) {
  const Grid& g = b.grid();
  if (g.dim() != 2) throw DomainError("random connections are generated on the torus");
  std::normal_distribution<double> normal(0.0, 1.0);
  const int nm = (2 * modes + 1) * (2 * modes + 1);
  std::vector<MatrixForm> out;
  for (int k = 0; k < b.num_blocks(); ++k) {
    const BundleBlock& blk = b.block(k);
    const Eigen::Index d = b.fiber_dim(k);
    std::vector<Mat> basis;
    if (b.presentation() == Presentation::projection_field) {
      for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) {
          Mat e = Mat::Zero(d, d);
          e(i, j) = 1.0;
          basis.push_back(e);
        }
    } else {
      const Mat& p = blk.projection.at(0, 0);
      for (const Mat& x : commutant({blk.charge, blk.u, blk.v, p})) basis.push_back(p * x * p);
    }
    // coefficient (component, basis element, mode)
    std::vector<cplx> coef(2 * basis.size() * nm);
    for (cplx& c : coef) c = cplx(normal(rng), normal(rng)) * (scale / std::sqrt(2.0 * nm));
    MatrixForm w(g, 1, d, d);
    for (int s = 0; s < g.nx; ++s)
      for (int t = 0; t < g.ny; ++t) {
        const int p = g.index(s, t);
        for (int c = 0; c < 2; ++c) {
          Mat x = Mat::Zero(d, d);
          std::size_t idx = c * basis.size() * nm;
          for (const Mat& bm : basis)
            for (int m = -modes; m <= modes; ++m)
              for (int n = -modes; n <= modes; ++n, ++idx)
                x += coef[idx] * std::exp(2.0 * kPi * kI * (m * g.x(s) / g.lx + n * g.y(t) / g.ly)) * bm;
          x = Mat(0.5 * (x - x.adjoint()));
          const Mat& e = blk.projection.at(0, p);
          w.at(c, p) = e * x * e;
        }
      }
    out.push_back(std::move(w));
  }
  return out;
}

/// Projection field of the two-band model d = (sin 2pi x, sin 2pi y, m + cos 2pi x + cos 2pi y):
/// E = (1 + d.sigma/|d|)/2, a line bundle with Chern number of magnitude 1 for 0 < |m| < 2.
inline MatrixForm two_band_projection(const Grid& g, double m) {
  return MatrixForm::sample(g, 0, [m](double x, double y) {
    const double d1 = std::sin(2 * kPi * x), d2 = std::sin(2 * kPi * y), d3 = m + std::cos(2 * kPi * x) + std::cos(2 * kPi * y);
    const double r = std::sqrt(d1 * d1 + d2 * d2 + d3 * d3);
    Mat e(2, 2);
    e << 1.0 + d3 / r, cplx(d1, -d2) / r, cplx(d1, d2) / r, 1.0 - d3 / r;
    return std::vector<Mat>{0.5 * e};
  });
}

}  // namespace ncindex
