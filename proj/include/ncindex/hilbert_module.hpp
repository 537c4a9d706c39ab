#pragma once

// Hilbert A-modules A^n and pA^n, adjointable maps between them, the ev map
// into A/[A,A], K_0 classes and the kernel-projection Fredholm index.
//
// A map A^n -> A^m is an m x n matrix over A. It is stored per block b of A as
// one complex (m*n_b) x (n*n_b) matrix whose (i,j) sub-block is the b-th block
// of the entry a_ij, so composition, adjoint and spectral calculus act blockwise.

#include <cmath>
#include <vector>

#include "ncindex/algebra.hpp"

namespace ncindex {

class ModuleMap {
 public:
  ModuleMap() = default;
  ModuleMap(SpecPtr owner, int rows, int cols, std::vector<Mat> blocks)
      : owner_(std::move(owner)), rows_(rows), cols_(cols), blocks_(std::move(blocks)) {
    if (!owner_) throw StructuralError("module map without owner");
    if (rows < 0 || cols < 0) throw StructuralError("module map shape must be nonnegative");
    if (static_cast<int>(blocks_.size()) != owner_->num_blocks())
      throw StructuralError("module map has the wrong number of blocks");
    for (int b = 0; b < owner_->num_blocks(); ++b) {
      const int nb = owner_->block_size(b);
      if (blocks_[b].rows() != rows * nb || blocks_[b].cols() != cols * nb)
        throw StructuralError("module map block " + std::to_string(b) + " has the wrong shape");
    }
  }

  static ModuleMap zero(const SpecPtr& s, int rows, int cols) {
    std::vector<Mat> b;
    for (int nb : s->blocks()) b.push_back(Mat::Zero(rows * nb, cols * nb));
    return {s, rows, cols, std::move(b)};
  }

  static ModuleMap identity(const SpecPtr& s, int n) {
    std::vector<Mat> b;
    for (int nb : s->blocks()) b.push_back(Mat::Identity(n * nb, n * nb));
    return {s, n, n, std::move(b)};
  }

  static ModuleMap from_entries(const SpecPtr& s, const std::vector<std::vector<AlgebraElement>>& e) {
    const int rows = static_cast<int>(e.size());
    const int cols = rows ? static_cast<int>(e[0].size()) : 0;
    ModuleMap m = zero(s, rows, cols);
    for (int i = 0; i < rows; ++i) {
      if (static_cast<int>(e[i].size()) != cols) throw StructuralError("ragged module map entries");
      for (int j = 0; j < cols; ++j) m.set_entry(i, j, e[i][j]);
    }
    return m;
  }

  /// Diagonal map diag(a, ..., a).
  static ModuleMap diagonal(const AlgebraElement& a, int n) {
    ModuleMap m = zero(a.owner(), n, n);
    for (int i = 0; i < n; ++i) m.set_entry(i, i, a);
    return m;
  }

  static ModuleMap random(const SpecPtr& s, int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
    if (s->group()) {
      ModuleMap m = zero(s, rows, cols);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m.set_entry(i, j, AlgebraElement::random(s, rng, scale));
      return m;
    }
    std::vector<Mat> b;
    for (int nb : s->blocks()) b.push_back(linalg::random_gaussian(rows * nb, cols * nb, rng, scale));
    return {s, rows, cols, std::move(b)};
  }

  const SpecPtr& owner() const { return owner_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  const std::vector<Mat>& blocks() const { return blocks_; }
  const Mat& block(int b) const { return blocks_[b]; }
  Mat& block(int b) { return blocks_[b]; }

  AlgebraElement entry(int i, int j) const {
    check_index(i, j);
    std::vector<Mat> e;
    for (int b = 0; b < owner_->num_blocks(); ++b) {
      const int nb = owner_->block_size(b);
      e.push_back(blocks_[b].block(i * nb, j * nb, nb, nb));
    }
    return {owner_, std::move(e)};
  }

  void set_entry(int i, int j, const AlgebraElement& a) {
    check_index(i, j);
    require_same_owner(owner_, a.owner(), "set_entry");
    for (int b = 0; b < owner_->num_blocks(); ++b) {
      const int nb = owner_->block_size(b);
      blocks_[b].block(i * nb, j * nb, nb, nb) = a.block(b);
    }
  }

  ModuleMap adjoint() const {
    std::vector<Mat> r;
    for (const Mat& m : blocks_) r.push_back(m.adjoint());
    return {owner_, cols_, rows_, std::move(r)};
  }

  /// Operator norm on the Hilbert module: the C*-norm of M_{m x n}(A).
  double norm() const {
    double n = 0.0;
    for (const Mat& m : blocks_) n = std::max(n, linalg::op_norm(m));
    return n;
  }

  /// Block-diagonal realization over the defining representation of A.
  Mat dense() const {
    int r = 0, c = 0;
    for (const Mat& m : blocks_) {
      r += static_cast<int>(m.rows());
      c += static_cast<int>(m.cols());
    }
    Mat d = Mat::Zero(r, c);
    int ro = 0, co = 0;
    for (const Mat& m : blocks_) {
      d.block(ro, co, m.rows(), m.cols()) = m;
      ro += static_cast<int>(m.rows());
      co += static_cast<int>(m.cols());
    }
    return d;
  }

  double distance(const ModuleMap& o) const {
    require_compatible(*this, o, "distance");
    double d = 0.0;
    for (std::size_t b = 0; b < blocks_.size(); ++b) d = std::max(d, (blocks_[b] - o.blocks_[b]).norm());
    return d;
  }

  friend ModuleMap operator*(const ModuleMap& f, const ModuleMap& g) {
    require_same_owner(f.owner_, g.owner_, "compose");
    if (f.cols_ != g.rows_) throw StructuralError("compose: inner dimensions differ");
    std::vector<Mat> r;
    for (std::size_t b = 0; b < f.blocks_.size(); ++b) r.push_back(f.blocks_[b] * g.blocks_[b]);
    return {f.owner_, f.rows_, g.cols_, std::move(r)};
  }
  friend ModuleMap operator+(const ModuleMap& f, const ModuleMap& g) {
    require_compatible(f, g, "add");
    std::vector<Mat> r;
    for (std::size_t b = 0; b < f.blocks_.size(); ++b) r.push_back(f.blocks_[b] + g.blocks_[b]);
    return {f.owner_, f.rows_, f.cols_, std::move(r)};
  }
  friend ModuleMap operator-(const ModuleMap& f, const ModuleMap& g) {
    require_compatible(f, g, "subtract");
    std::vector<Mat> r;
    for (std::size_t b = 0; b < f.blocks_.size(); ++b) r.push_back(f.blocks_[b] - g.blocks_[b]);
    return {f.owner_, f.rows_, f.cols_, std::move(r)};
  }
  friend ModuleMap operator*(cplx z, const ModuleMap& f) {
    std::vector<Mat> r;
    for (const Mat& m : f.blocks_) r.push_back(z * m);
    return {f.owner_, f.rows_, f.cols_, std::move(r)};
  }

 private:
  void check_index(int i, int j) const {
    if (i < 0 || i >= rows_ || j < 0 || j >= cols_) throw StructuralError("module map index out of range");
  }
  static void require_compatible(const ModuleMap& f, const ModuleMap& g, const char* what) {
    require_same_owner(f.owner_, g.owner_, what);
    if (f.rows_ != g.rows_ || f.cols_ != g.cols_)
      throw StructuralError(std::string(what) + ": shapes differ");
  }

  SpecPtr owner_;
  int rows_ = 0;
  int cols_ = 0;
  std::vector<Mat> blocks_;
};

/// Block diagonal sum f + g : A^{n1+n2} -> A^{m1+m2}.
inline ModuleMap direct_sum(const ModuleMap& f, const ModuleMap& g) {
  require_same_owner(f.owner(), g.owner(), "direct_sum");
  const SpecPtr& s = f.owner();
  ModuleMap r = ModuleMap::zero(s, f.rows() + g.rows(), f.cols() + g.cols());
  for (int b = 0; b < s->num_blocks(); ++b) {
    const int nb = s->block_size(b);
    r.block(b).topLeftCorner(f.rows() * nb, f.cols() * nb) = f.block(b);
    r.block(b).bottomRightCorner(g.rows() * nb, g.cols() * nb) = g.block(b);
  }
  return r;
}

/// Element (a_1, ..., a_n) of the free module A^n.
class ModuleVector {
 public:
  ModuleVector() = default;
  explicit ModuleVector(std::vector<AlgebraElement> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw StructuralError("module vector needs at least one entry");
    for (const auto& e : entries_) require_same_owner(entries_[0].owner(), e.owner(), "module vector");
  }

  static ModuleVector random(const SpecPtr& s, int n, std::mt19937_64& rng) {
    std::vector<AlgebraElement> e;
    for (int i = 0; i < n; ++i) e.push_back(AlgebraElement::random(s, rng));
    return ModuleVector(std::move(e));
  }

  const SpecPtr& owner() const { return entries_.at(0).owner(); }
  int size() const { return static_cast<int>(entries_.size()); }
  const AlgebraElement& operator[](int i) const { return entries_[i]; }
  const std::vector<AlgebraElement>& entries() const { return entries_; }

  /// v viewed as the map A -> A^n, a -> v a.
  ModuleMap as_column() const {
    ModuleMap m = ModuleMap::zero(owner(), size(), 1);
    for (int i = 0; i < size(); ++i) m.set_entry(i, 0, entries_[i]);
    return m;
  }

  ModuleVector right_mul(const AlgebraElement& a) const {
    std::vector<AlgebraElement> e;
    for (const auto& x : entries_) e.push_back(x * a);
    return ModuleVector(std::move(e));
  }

  static ModuleVector from_column(const ModuleMap& m) {
    if (m.cols() != 1) throw StructuralError("module vector needs a single column");
    std::vector<AlgebraElement> e;
    for (int i = 0; i < m.rows(); ++i) e.push_back(m.entry(i, 0));
    return ModuleVector(std::move(e));
  }

 private:
  std::vector<AlgebraElement> entries_;
};

inline ModuleVector apply(const ModuleMap& f, const ModuleVector& v) {
  return ModuleVector::from_column(f * v.as_column());
}

/// <v, w> = sum_i v_i^* w_i.
inline AlgebraElement inner_product(const ModuleVector& v, const ModuleVector& w) {
  require_same_owner(v.owner(), w.owner(), "inner_product");
  if (v.size() != w.size()) throw StructuralError("inner_product: vectors have different lengths");
  AlgebraElement s = AlgebraElement::zero(v.owner());
  for (int i = 0; i < v.size(); ++i) s = s + v[i].adjoint() * w[i];
  return s;
}

/// The map x -> <v, x>, a 1 x n matrix over A.
inline ModuleMap bra(const ModuleVector& v) { return v.as_column().adjoint(); }
/// The map a -> v a, the adjoint of bra(v).
inline ModuleMap ket(const ModuleVector& v) { return v.as_column(); }

struct ModuleNorms {
  double op;       // operator norm
  double hilbert;  // norm of the entry tuple in A^{mn}: ||sum a_ij^* a_ij||^{1/2}
};

/// For Phi : A^n -> A^m, both |Phi| <= sqrt(n) ||Phi|| and ||Phi|| <= sqrt(n) |Phi|
/// hold. The sharper ||Phi|| <= |Phi| holds when A is commutative but fails in
/// general (over M_2: the row (e11, e12) has ||Phi|| = sqrt 2, |Phi| = 1).
inline ModuleNorms module_norms(const ModuleMap& f) {
  const SpecPtr& s = f.owner();
  double h2 = 0.0;
  for (int b = 0; b < s->num_blocks(); ++b) {
    const int nb = s->block_size(b);
    Mat acc = Mat::Zero(nb, nb);
    for (int i = 0; i < f.rows(); ++i)
      for (int j = 0; j < f.cols(); ++j) {
        const auto a = f.block(b).block(i * nb, j * nb, nb, nb);
        acc += a.adjoint() * a;
      }
    h2 = std::max(h2, linalg::op_norm(acc));
  }
  return {f.norm(), std::sqrt(h2)};
}

/// Polar decomposition Phi = U |Phi| with U a partial isometry whose initial
/// projection is the support of |Phi|.
struct PolarDecomposition {
  ModuleMap u;
  ModuleMap abs;
};

inline PolarDecomposition polar_decomposition(const ModuleMap& f, double rel_threshold = 1e-12) {
  const SpecPtr& s = f.owner();
  std::vector<Mat> ub, ab;
  const double scale = f.norm();
  for (int b = 0; b < s->num_blocks(); ++b) {
    const Mat& m = f.block(b);
    const linalg::Svd svd = linalg::svd(m);
    const RVec& sv = svd.values;
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv(i) > rel_threshold * scale && sv(i) > 0) ++r;
    const Mat w = svd.u.leftCols(r);
    const Mat v = svd.v.leftCols(r);
    ub.push_back(w * v.adjoint());
    ab.push_back(v * sv.head(r).cast<cplx>().asDiagonal() * v.adjoint());
  }
  return {ModuleMap(s, f.rows(), f.cols(), std::move(ub)), ModuleMap(s, f.cols(), f.cols(), std::move(ab))};
}

/// Image of a projection p = p^2 = p^* in M_n(A).
class ProjectiveModule {
 public:
  ProjectiveModule() = default;
  explicit ProjectiveModule(ModuleMap p, double tol = 1e-10) : p_(std::move(p)) {
    if (p_.rows() != p_.cols()) throw StructuralError("projection must be square");
    const double idem = (p_ * p_).distance(p_);
    const double sa = p_.adjoint().distance(p_);
    if (idem > tol || sa > tol)
      throw PreconditionError("not a projection: ||p^2-p|| = " + std::to_string(idem) +
                              ", ||p^*-p|| = " + std::to_string(sa));
  }

  static ProjectiveModule free(const SpecPtr& s, int n) { return ProjectiveModule(ModuleMap::identity(s, n)); }

  const ModuleMap& projection() const { return p_; }
  const SpecPtr& owner() const { return p_.owner(); }
  int ambient_rank() const { return p_.rows(); }

 private:
  ModuleMap p_;
};

inline ProjectiveModule direct_sum(const ProjectiveModule& p, const ProjectiveModule& q) {
  return ProjectiveModule(direct_sum(p.projection(), q.projection()));
}

/// Element of K_0(A) = Z^k: per-block ranks (block traces) of a projection, or
/// a difference of such.
struct K0Class {
  SpecPtr owner;
  std::vector<long long> ranks;

  static K0Class zero(const SpecPtr& s) { return {s, std::vector<long long>(s->num_blocks(), 0)}; }

  ZValue as_block_traces() const {
    ZValue z(ranks.size());
    for (std::size_t i = 0; i < ranks.size(); ++i) z(i) = static_cast<double>(ranks[i]);
    return z;
  }

  friend K0Class operator+(const K0Class& a, const K0Class& b) {
    require_same_owner(a.owner, b.owner, "K0 add");
    K0Class r = a;
    for (std::size_t i = 0; i < r.ranks.size(); ++i) r.ranks[i] += b.ranks[i];
    return r;
  }
  friend K0Class operator-(const K0Class& a, const K0Class& b) {
    require_same_owner(a.owner, b.owner, "K0 subtract");
    K0Class r = a;
    for (std::size_t i = 0; i < r.ranks.size(); ++i) r.ranks[i] -= b.ranks[i];
    return r;
  }
  friend bool operator==(const K0Class& a, const K0Class& b) {
    return same_owner(a.owner, b.owner) && a.ranks == b.ranks;
  }
};

inline constexpr double kRankRoundingTol = 1e-6;

/// ev: End_A(pA^n) -> A/[A,A] = C^k, the unnormalized block traces.
inline ZValue ev_endomorphism(const ModuleMap& f, const ProjectiveModule& p, double tol = 1e-10) {
  require_same_owner(f.owner(), p.owner(), "ev");
  const ModuleMap& pp = p.projection();
  if (f.rows() != pp.rows() || f.cols() != pp.cols()) throw StructuralError("ev: map does not act on the module");
  const double res = (pp * f * pp).distance(f);
  if (res > tol * std::max(1.0, f.norm()))
    throw PreconditionError("ev: map is not reduced by the projection (||pfp - f|| = " + sci_string(res) + ")");
  ZValue z(f.owner()->num_blocks());
  for (int b = 0; b < f.owner()->num_blocks(); ++b) z(b) = f.block(b).trace();
  return z;
}

/// ev on the free module A^n.
inline ZValue ev_endomorphism(const ModuleMap& f) {
  if (f.rows() != f.cols()) throw StructuralError("ev needs an endomorphism");
  return ev_endomorphism(f, ProjectiveModule::free(f.owner(), f.rows()));
}

inline K0Class class_of(const ProjectiveModule& p) {
  K0Class k = K0Class::zero(p.owner());
  for (int b = 0; b < p.owner()->num_blocks(); ++b) {
    const double t = p.projection().block(b).trace().real();
    const double r = std::round(t);
    if (std::abs(t - r) > kRankRoundingTol)
      throw PreconditionError("block trace " + std::to_string(t) + " of block " + std::to_string(b) +
                              " is not an integer; not a projection");
    k.ranks[b] = static_cast<long long>(r);
  }
  return k;
}

inline ZValue dim_tau(const ProjectiveModule& p, const TraceFunctional& tau) {
  require_same_owner(p.owner(), tau.owner(), "dim_tau");
  return tau.apply_to_block_traces(class_of(p).as_block_traces());
}

inline ZValue apply_trace(const TraceFunctional& tau, const K0Class& k) {
  require_same_owner(k.owner, tau.owner(), "apply_trace");
  return tau.apply_to_block_traces(k.as_block_traces());
}

/// Spectral data of a near-zero split of a positive map, per block.
struct NearZeroProjection {
  ModuleMap projection;
  double gap_ratio;
};

/// chi_[0,tol](h) for a positive h, with the gap of every block reported.
inline NearZeroProjection near_zero_projection(const ModuleMap& h, double tol, double floor) {
  const SpecPtr& s = h.owner();
  std::vector<Mat> pb;
  double gap = std::numeric_limits<double>::infinity();
  for (int b = 0; b < s->num_blocks(); ++b) {
    linalg::HermitianEigen e = linalg::hermitian_eig(h.block(b));
    linalg::NearZeroSplit sp = linalg::split_near_zero(e.values, tol, floor);
    gap = std::min(gap, sp.gap_ratio);
    const Mat k = e.vectors.leftCols(sp.count);
    pb.push_back(k * k.adjoint());
  }
  return {ModuleMap(s, h.rows(), h.cols(), std::move(pb)), gap};
}

inline constexpr double kRequiredGapRatio = 10.0;

struct FredholmData {
  ProjectiveModule kernel;
  ProjectiveModule cokernel;
  K0Class index;
  double gap_ratio;
  double tol;
};

/// Kernel and cokernel projections chi_[0,tol](f^*f), chi_[0,tol](ff^*) and the
/// K_0 index. tol <= 0 selects the default 1e-8 ||f||^2.
inline FredholmData fredholm_data(const ModuleMap& f, double tol = -1.0, double min_gap = kRequiredGapRatio) {
  const double n2 = f.norm() * f.norm();
  if (tol <= 0) tol = 1e-8 * n2;
  if (tol <= 0) tol = 1e-300;
  const double floor = 1e-14 * std::max(n2, 1e-300);
  NearZeroProjection k = near_zero_projection(f.adjoint() * f, tol, floor);
  NearZeroProjection c = near_zero_projection(f * f.adjoint(), tol, floor);
  const double gap = std::min(k.gap_ratio, c.gap_ratio);
  if (gap < min_gap) throw SpectralGapError("fredholm_index: no spectral gap at tol = " + std::to_string(tol), gap);
  ProjectiveModule kp(std::move(k.projection)), cp(std::move(c.projection));
  K0Class idx = class_of(kp) - class_of(cp);
  return {std::move(kp), std::move(cp), std::move(idx), gap, tol};
}

inline ProjectiveModule kernel_projection(const ModuleMap& f, double tol = -1.0) {
  return fredholm_data(f, tol).kernel;
}

inline K0Class fredholm_index(const ModuleMap& f, double tol = -1.0) { return fredholm_data(f, tol).index; }

}  // namespace ncindex
