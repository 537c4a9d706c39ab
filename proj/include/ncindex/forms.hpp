#pragma once

// Matrix-valued differential forms on discretized S^1 and T^2.
//
// A grid has nx x ny points (ny = 1 on the circle) over a rectangle of extent
// lx x ly; point (s, t) sits at (s lx/nx, t ly/ny) and has flat index s*ny + t.
// Derivatives are spectral. Along a grid line a field may be quasi-periodic,
// f(x + lx) = M f(x) for a unitary M; the derivative then acts on each
// eigen-component of M as a Bloch derivative with frequencies
// (phase + m)/extent, m chosen so that phase + m lies in [-n/2, n/2).

#include <complex>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <vector>

#include "ncindex/errors.hpp"
#include "ncindex/linalg.hpp"

namespace ncindex {

enum class Manifold { S1, T2 };

struct Grid {
  Manifold manifold = Manifold::T2;
  int nx = 16;
  int ny = 16;
  double lx = 1.0;
  double ly = 1.0;

  static Grid circle(int n, double length = 1.0) { return make(Manifold::S1, n, 1, length, 1.0); }
  static Grid torus(int n) { return make(Manifold::T2, n, n, 1.0, 1.0); }
  static Grid torus(int nx, int ny, double lx, double ly) { return make(Manifold::T2, nx, ny, lx, ly); }

  int dim() const { return manifold == Manifold::S1 ? 1 : 2; }
  int points() const { return nx * ny; }
  int index(int s, int t) const { return s * ny + t; }
  double x(int s) const { return s * lx / nx; }
  double y(int t) const { return manifold == Manifold::S1 ? 0.0 : t * ly / ny; }
  double cell_volume() const { return manifold == Manifold::S1 ? lx / nx : lx * ly / (nx * ny); }

  bool operator==(const Grid& o) const {
    return manifold == o.manifold && nx == o.nx && ny == o.ny && lx == o.lx && ly == o.ly;
  }

 private:
  static Grid make(Manifold m, int nx, int ny, double lx, double ly) {
    auto ok = [](int n) { return n >= 8 && n % 2 == 0; };
    if (!ok(nx) || (m == Manifold::T2 && !ok(ny)))
      throw DomainError("grid resolution must be even and at least 8");
    if (!(lx > 0) || !(ly > 0)) throw DomainError("grid extent must be positive");
    Grid g;
    g.manifold = m;
    g.nx = nx;
    g.ny = m == Manifold::S1 ? 1 : ny;
    g.lx = lx;
    g.ly = ly;
    return g;
  }
};

/// Quasi-periodicity data: f(x + lx, y) = exp(2 pi i C lx y) U f(x, y) and
/// f(x, y + ly) = V f(x, y). C is Hermitian with integer spectrum; C, U, V
/// commute pairwise.
struct Automorphy {
  Mat charge;
  Mat u;
  Mat v;

  static Automorphy trivial(int d) { return {Mat::Zero(d, d), Mat::Identity(d, d), Mat::Identity(d, d)}; }
  static Automorphy line(double c) {
    return {Mat::Constant(1, 1, c), Mat::Identity(1, 1), Mat::Identity(1, 1)};
  }

  int dimension() const { return static_cast<int>(u.rows()); }

  bool is_trivial(double tol = 1e-14) const {
    const Mat id = Mat::Identity(u.rows(), u.cols());
    return charge.norm() < tol && (u - id).norm() < tol && (v - id).norm() < tol;
  }

  /// exp(2 pi i C s) for real s.
  Mat charge_phase(double s) const {
    linalg::HermitianEigen e = linalg::hermitian_eig(charge);
    Vec d(e.values.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = std::polar(1.0, 2.0 * kPi * e.values(i) * s);
    return e.vectors * d.asDiagonal() * e.vectors.adjoint();
  }

  /// The factor relating f(x + lx, y) to f(x, y).
  Mat along_x(double y, double lx) const { return charge_phase(lx * y) * u; }

  /// Throws unless unitary, commuting and satisfying the cocycle identity.
  void validate(double lx, double ly, double tol = 1e-10) const {
    const Eigen::Index d = u.rows();
    if (charge.rows() != d || charge.cols() != d || u.cols() != d || v.rows() != d || v.cols() != d)
      throw StructuralError("automorphy matrices have inconsistent sizes");
    const Mat id = Mat::Identity(d, d);
    if ((u.adjoint() * u - id).norm() > tol || (v.adjoint() * v - id).norm() > tol)
      throw PreconditionError("automorphy factors must be unitary");
    if ((charge - charge.adjoint()).norm() > tol) throw PreconditionError("charge must be Hermitian");
    auto comm = [](const Mat& a, const Mat& b) { return (a * b - b * a).norm(); };
    if (comm(u, v) > tol || comm(charge, u) > tol || comm(charge, v) > tol)
      throw PreconditionError("automorphy data must commute pairwise");
    // The two ways around a corner agree iff exp(2 pi i C lx ly) = 1.
    if ((charge_phase(lx * ly) - id).norm() > 1e-8)
      throw PreconditionError("charge times the cell area must have integer spectrum");
  }
};

enum class TwistKind { endomorphism, section };

/// Sections transform by f -> M f; endomorphism fields by F -> M F M^*.
struct Twist {
  TwistKind kind = TwistKind::endomorphism;
  Automorphy automorphy;
};

namespace spectral_detail {

inline double windowed(double kappa, int n) {
  return kappa - n * std::floor((kappa + n / 2.0) / n + 1e-9);
}

}  // namespace spectral_detail

/// Spectral derivative on n equispaced samples of [0, extent) for functions
/// with f(x + extent) = exp(2 pi i phase) f(x).
inline Mat line_derivative(int n, double extent, double phase) {
  std::vector<double> kappa(n);
  for (int m = 0; m < n; ++m) kappa[m] = spectral_detail::windowed(phase + m, n);
  // D[s, s'] depends on s - s' only.
  std::vector<cplx> diag(2 * n - 1);
  for (int delta = -(n - 1); delta <= n - 1; ++delta) {
    cplx acc = 0.0;
    for (int m = 0; m < n; ++m)
      acc += (2.0 * kPi * kI * kappa[m] / extent) * std::polar(1.0, 2.0 * kPi * kappa[m] * delta / n);
    diag[delta + n - 1] = acc / static_cast<double>(n);
  }
  Mat d(n, n);
  for (int s = 0; s < n; ++s)
    for (int s2 = 0; s2 < n; ++s2) d(s, s2) = diag[s - s2 + n - 1];
  return d;
}

/// Dense Bloch derivative on a line of n points with vector values in C^d and
/// automorphy f(x + extent) = M f(x); point-major, component-minor ordering.
inline Mat bloch_derivative(int n, double extent, const Mat& m) {
  const Eigen::Index d = m.rows();
  if (d == 1) return line_derivative(n, extent, std::arg(m(0, 0)) / (2.0 * kPi));
  linalg::UnitaryPhases ph = linalg::unitary_phases(m);
  Mat out = Mat::Zero(n * d, n * d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const Vec w = ph.vectors.col(j);
    out += linalg::kron(line_derivative(n, extent, ph.phases(j)), w * w.adjoint());
  }
  return out;
}

/// Applies the Bloch derivative to a line of matrix values.
inline std::vector<Mat> derivative_along_line(const std::vector<Mat>& line, double extent, const Mat& m,
                                              TwistKind kind) {
  const int n = static_cast<int>(line.size());
  std::vector<Mat> out(n, Mat::Zero(line[0].rows(), line[0].cols()));
  linalg::UnitaryPhases ph = linalg::unitary_phases(m);
  const Eigen::Index d = m.rows();
  if (kind == TwistKind::section) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const Vec w = ph.vectors.col(j);
      const Mat dj = line_derivative(n, extent, ph.phases(j));
      std::vector<Mat> g(n);
      for (int s = 0; s < n; ++s) g[s] = w.adjoint() * line[s];
      for (int s = 0; s < n; ++s) {
        Mat acc = Mat::Zero(1, line[0].cols());
        for (int s2 = 0; s2 < n; ++s2) acc += dj(s, s2) * g[s2];
        out[s] += w * acc;
      }
    }
    return out;
  }
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index k = 0; k < d; ++k) {
      const Vec wj = ph.vectors.col(j), wk = ph.vectors.col(k);
      const Mat djk = line_derivative(n, extent, ph.phases(j) - ph.phases(k));
      std::vector<cplx> a(n);
      for (int s = 0; s < n; ++s) a[s] = (wj.adjoint() * line[s] * wk)(0, 0);
      for (int s = 0; s < n; ++s) {
        cplx acc = 0.0;
        for (int s2 = 0; s2 < n; ++s2) acc += djk(s, s2) * a[s2];
        out[s] += acc * (wj * wk.adjoint());
      }
    }
  }
  return out;
}

/// d/dx of a field sampled on the grid.
inline std::vector<Mat> partial_x(const Grid& g, const std::vector<Mat>& f, const std::optional<Twist>& twist) {
  std::vector<Mat> out(f.size());
  const Eigen::Index r = f[0].rows(), c = f[0].cols();
  for (int t = 0; t < g.ny; ++t) {
    std::vector<Mat> line(g.nx);
    for (int s = 0; s < g.nx; ++s) line[s] = f[g.index(s, t)];
    std::vector<Mat> dl;
    if (twist && !twist->automorphy.is_trivial()) {
      dl = derivative_along_line(line, g.lx, twist->automorphy.along_x(g.y(t), g.lx), twist->kind);
    } else {
      const Mat d = line_derivative(g.nx, g.lx, 0.0);
      dl.assign(g.nx, Mat::Zero(r, c));
      for (int s = 0; s < g.nx; ++s)
        for (int s2 = 0; s2 < g.nx; ++s2) dl[s] += d(s, s2) * line[s2];
    }
    for (int s = 0; s < g.nx; ++s) out[g.index(s, t)] = std::move(dl[s]);
  }
  return out;
}

/// d/dy of a field sampled on a torus grid.
inline std::vector<Mat> partial_y(const Grid& g, const std::vector<Mat>& f, const std::optional<Twist>& twist) {
  if (g.manifold != Manifold::T2) throw DomainError("partial_y needs a torus grid");
  std::vector<Mat> out(f.size());
  const Eigen::Index r = f[0].rows(), c = f[0].cols();
  const bool twisted = twist && !twist->automorphy.is_trivial();
  const Mat d = line_derivative(g.ny, g.ly, 0.0);
  for (int s = 0; s < g.nx; ++s) {
    std::vector<Mat> line(g.ny);
    for (int t = 0; t < g.ny; ++t) line[t] = f[g.index(s, t)];
    std::vector<Mat> dl;
    if (twisted) {
      dl = derivative_along_line(line, g.ly, twist->automorphy.v, twist->kind);
    } else {
      dl.assign(g.ny, Mat::Zero(r, c));
      for (int t = 0; t < g.ny; ++t)
        for (int t2 = 0; t2 < g.ny; ++t2) dl[t] += d(t, t2) * line[t2];
    }
    for (int t = 0; t < g.ny; ++t) out[g.index(s, t)] = std::move(dl[t]);
  }
  return out;
}

/// A form of degree 0, 1 or 2 with matrix values. Components: degree 0 has
/// one field; degree 1 has dx (and dy on T^2); degree 2 has dx^dy.
class MatrixForm {
 public:
  MatrixForm() = default;
  MatrixForm(Grid grid, int degree, Eigen::Index rows, Eigen::Index cols, std::optional<Twist> twist = std::nullopt)
      : grid_(grid), degree_(degree), rows_(rows), cols_(cols), twist_(std::move(twist)) {
    if (degree < 0 || degree > grid.dim()) throw DomainError("form degree exceeds the dimension of the manifold");
    comps_.assign(count(grid, degree), std::vector<Mat>(grid.points(), Mat::Zero(rows, cols)));
  }

  /// Samples f(x, y) into every component (f returns one matrix per component).
  static MatrixForm sample(const Grid& g, int degree, const std::function<std::vector<Mat>(double, double)>& f,
                           std::optional<Twist> twist = std::nullopt) {
    const std::vector<Mat> v0 = f(g.x(0), g.y(0));
    if (static_cast<int>(v0.size()) != count(g, degree)) throw StructuralError("wrong number of form components");
    MatrixForm out(g, degree, v0[0].rows(), v0[0].cols(), std::move(twist));
    for (int s = 0; s < g.nx; ++s)
      for (int t = 0; t < g.ny; ++t) {
        const std::vector<Mat> v = f(g.x(s), g.y(t));
        for (int c = 0; c < out.num_components(); ++c) out.comps_[c][g.index(s, t)] = v[c];
      }
    return out;
  }

  static MatrixForm constant(const Grid& g, int degree, const std::vector<Mat>& values) {
    return sample(g, degree, [&](double, double) { return values; });
  }

  static int count(const Grid& g, int degree) { return degree == 1 && g.dim() == 2 ? 2 : 1; }

  const Grid& grid() const { return grid_; }
  int degree() const { return degree_; }
  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }
  int num_components() const { return static_cast<int>(comps_.size()); }
  const std::optional<Twist>& twist() const { return twist_; }
  void set_twist(std::optional<Twist> t) { twist_ = std::move(t); }

  std::vector<Mat>& component(int c) { return comps_.at(c); }
  const std::vector<Mat>& component(int c) const { return comps_.at(c); }
  Mat& at(int c, int p) { return comps_[c][p]; }
  const Mat& at(int c, int p) const { return comps_[c][p]; }

  double sup_norm() const {
    double m = 0.0;
    for (const auto& comp : comps_)
      for (const Mat& v : comp) m = std::max(m, v.norm());
    return m;
  }

  /// Pointwise matrix trace as a 1 x 1 untwisted form.
  MatrixForm trace() const {
    MatrixForm out(grid_, degree_, 1, 1);
    for (int c = 0; c < num_components(); ++c)
      for (int p = 0; p < grid_.points(); ++p) out.comps_[c][p](0, 0) = comps_[c][p].trace();
    return out;
  }

  MatrixForm adjoint() const {
    MatrixForm out(grid_, degree_, cols_, rows_, twist_);
    for (int c = 0; c < num_components(); ++c)
      for (int p = 0; p < grid_.points(); ++p) out.comps_[c][p] = comps_[c][p].adjoint();
    return out;
  }

  /// Applies f to every value.
  MatrixForm map(const std::function<Mat(const Mat&)>& f) const {
    MatrixForm out = *this;
    for (auto& comp : out.comps_)
      for (Mat& v : comp) v = f(v);
    out.rows_ = out.comps_[0][0].rows();
    out.cols_ = out.comps_[0][0].cols();
    return out;
  }

  friend MatrixForm operator+(const MatrixForm& a, const MatrixForm& b) { return combine(a, b, 1.0); }
  friend MatrixForm operator-(const MatrixForm& a, const MatrixForm& b) { return combine(a, b, -1.0); }
  friend MatrixForm operator*(cplx z, const MatrixForm& a) {
    return a.map([z](const Mat& m) { return Mat(z * m); });
  }

  double distance(const MatrixForm& o) const { return (*this - o).sup_norm(); }

 private:
  static MatrixForm combine(const MatrixForm& a, const MatrixForm& b, double sign) {
    if (!(a.grid_ == b.grid_) || a.degree_ != b.degree_ || a.rows_ != b.rows_ || a.cols_ != b.cols_)
      throw StructuralError("forms are not compatible for addition");
    MatrixForm out = a;
    if (!out.twist_) out.twist_ = b.twist_;
    for (int c = 0; c < a.num_components(); ++c)
      for (int p = 0; p < a.grid_.points(); ++p) out.comps_[c][p] += sign * b.comps_[c][p];
    return out;
  }

  Grid grid_;
  int degree_ = 0;
  Eigen::Index rows_ = 0;
  Eigen::Index cols_ = 0;
  std::optional<Twist> twist_;
  std::vector<std::vector<Mat>> comps_;
};

inline MatrixForm exterior_d(const MatrixForm& a) {
  const Grid& g = a.grid();
  if (a.degree() >= g.dim()) throw DomainError("exterior_d of a top-degree form");
  if (a.twist() && a.twist()->kind == TwistKind::section && !a.twist()->automorphy.is_trivial())
    throw DomainError("sections of a twisted bundle are differentiated by a connection, not by d");
  MatrixForm out(g, a.degree() + 1, a.rows(), a.cols(), a.twist());
  if (a.degree() == 0) {
    out.component(0) = partial_x(g, a.component(0), a.twist());
    if (g.dim() == 2) out.component(1) = partial_y(g, a.component(0), a.twist());
    return out;
  }
  const std::vector<Mat> dyx = partial_y(g, a.component(0), a.twist());
  const std::vector<Mat> dxy = partial_x(g, a.component(1), a.twist());
  for (int p = 0; p < g.points(); ++p) out.at(0, p) = dxy[p] - dyx[p];
  return out;
}

/// Pointwise wedge with the convention (a^b)(dx, dy) = a_x b_y - a_y b_x.
inline MatrixForm wedge(const MatrixForm& a, const MatrixForm& b) {
  const Grid& g = a.grid();
  if (!(g == b.grid())) throw StructuralError("wedge: forms live on different grids");
  const int deg = a.degree() + b.degree();
  if (deg > g.dim()) throw DomainError("wedge: degree exceeds the dimension of the manifold");
  if (a.cols() != b.rows()) throw StructuralError("wedge: matrix dimensions do not compose");
  std::optional<Twist> tw = a.twist() ? a.twist() : b.twist();
  MatrixForm out(g, deg, a.rows(), b.cols(), tw);
  for (int p = 0; p < g.points(); ++p) {
    if (a.degree() == 0) {
      for (int c = 0; c < b.num_components(); ++c) out.at(c, p) = a.at(0, p) * b.at(c, p);
    } else if (b.degree() == 0) {
      for (int c = 0; c < a.num_components(); ++c) out.at(c, p) = a.at(c, p) * b.at(0, p);
    } else {
      out.at(0, p) = a.at(0, p) * b.at(1, p) - a.at(1, p) * b.at(0, p);
    }
  }
  return out;
}

/// Integral of a top-degree 1 x 1 form (trapezoid rule on the periodic grid).
inline cplx integrate(const MatrixForm& a) {
  const Grid& g = a.grid();
  if (a.degree() != g.dim()) throw DomainError("integrate needs a top-degree form");
  if (a.rows() != 1 || a.cols() != 1) throw StructuralError("integrate needs scalar values; take a trace first");
  cplx s = 0.0;
  for (int p = 0; p < g.points(); ++p) s += a.at(0, p)(0, 0);
  return s * g.cell_volume();
}

/// Cover grid of the degree-k covering x -> k x mod 1 realized over the same
/// rectangle with k times the resolution along x.
inline Grid cover_grid(const Grid& base, int k) {
  if (k < 1) throw DomainError("cover degree must be positive");
  if (base.manifold == Manifold::S1) return Grid::circle(k * base.nx, base.lx);
  return Grid::torus(k * base.nx, base.ny, base.lx, base.ly);
}

/// Pullback along the degree-k map x -> k x mod lx. Twisted endomorphism fields
/// are continued across cells with the automorphy factor; the cover twist has
/// charge kC and U^k.
inline MatrixForm pullback_form(const MatrixForm& a, int k, const Grid& cover) {
  const Grid& g = a.grid();
  if (k < 1) throw DomainError("cover degree must be positive");
  if (cover.nx != k * g.nx || cover.ny != g.ny || cover.manifold != g.manifold || cover.lx != g.lx ||
      cover.ly != g.ly)
    throw DomainError("cover grid resolution must be k times the base resolution along x");
  const bool twisted = a.twist() && !a.twist()->automorphy.is_trivial();
  if (twisted && a.twist()->kind == TwistKind::section)
    throw DomainError("pullback of twisted sections goes through the bundle pullback");
  std::optional<Twist> tw = a.twist();
  if (twisted) {
    Mat uk = Mat::Identity(a.rows(), a.rows());
    for (int i = 0; i < k; ++i) uk = uk * a.twist()->automorphy.u;
    tw->automorphy.u = uk;
    tw->automorphy.charge = static_cast<double>(k) * a.twist()->automorphy.charge;
  }
  MatrixForm out(cover, a.degree(), a.rows(), a.cols(), tw);
  for (int s = 0; s < cover.nx; ++s) {
    const int cell = s / g.nx, sb = s % g.nx;
    for (int t = 0; t < cover.ny; ++t) {
      Mat w = Mat::Identity(a.rows(), a.rows());
      if (twisted) {
        const Mat m = a.twist()->automorphy.along_x(g.y(t), g.lx);
        for (int i = 0; i < cell; ++i) w = w * m;
      }
      for (int c = 0; c < a.num_components(); ++c) {
        Mat v = a.at(c, g.index(sb, t));
        if (twisted) v = w * v * w.adjoint();
        // dx picks up the chain-rule factor k.
        const bool is_dx = a.degree() == 2 || (a.degree() == 1 && c == 0);
        out.at(c, cover.index(s, t)) = is_dx ? Mat(static_cast<double>(k) * v) : v;
      }
    }
  }
  return out;
}

inline MatrixForm pullback_form(const MatrixForm& a, int k) { return pullback_form(a, k, cover_grid(a.grid(), k)); }

/// One row per grid point: x, y, then re/im of each matrix entry of each
/// component (column-major within a matrix).
inline void write_csv(const MatrixForm& a, std::ostream& os) {
  const Grid& g = a.grid();
  const char* names[] = {"dx", "dy"};
  os << "x,y";
  for (int c = 0; c < a.num_components(); ++c) {
    const std::string tag = a.degree() == 0 ? "f" : a.degree() == 2 ? "dxdy" : names[c];
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      for (Eigen::Index i = 0; i < a.rows(); ++i)
        os << ',' << tag << '_' << i << '_' << j << "_re," << tag << '_' << i << '_' << j << "_im";
  }
  os << '\n' << std::setprecision(17);
  for (int s = 0; s < g.nx; ++s)
    for (int t = 0; t < g.ny; ++t) {
      os << g.x(s) << ',' << g.y(t);
      for (int c = 0; c < a.num_components(); ++c) {
        const Mat& v = a.at(c, g.index(s, t));
        for (Eigen::Index j = 0; j < a.cols(); ++j)
          for (Eigen::Index i = 0; i < a.rows(); ++i) os << ',' << v(i, j).real() << ',' << v(i, j).imag();
      }
      os << '\n';
    }
}

inline void write_csv(const MatrixForm& a, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  write_csv(a, f);
}

}  // namespace ncindex
