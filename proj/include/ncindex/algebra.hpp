#pragma once

// Finite-dimensional C*-algebras A = M_{n_1}(C) + ... + M_{n_k}(C) and group
// algebras C[G] of finite groups, their elements, traces, and spectral calculus.
//
// Every element is stored through a faithful *-representation, one complex
// matrix per block. Abelian group algebras use the Fourier (character) basis,
// so C[Z/k] has k blocks of size 1. Nonabelian group algebras use the left
// regular representation as a single |G| x |G| block; products of such blocks
// are convolutions and every operation keeps them inside lambda(C[G]).

#include <algorithm>
#include <memory>
#include <numeric>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "ncindex/errors.hpp"
#include "ncindex/linalg.hpp"

namespace ncindex {

/// A finite group given by its multiplication table.
class FiniteGroup {
 public:
  FiniteGroup() = default;

  static FiniteGroup cyclic(int k) {
    if (k < 1) throw DomainError("cyclic group order must be positive");
    std::vector<std::vector<int>> t(k, std::vector<int>(k));
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) t[a][b] = (a + b) % k;
    FiniteGroup g("Z/" + std::to_string(k), std::move(t));
    g.characters_ = Mat(k, k);
    for (int j = 0; j < k; ++j)
      for (int a = 0; a < k; ++a) g.characters_(j, a) = std::polar(1.0, 2.0 * kPi * j * a / k);
    return g;
  }

  /// Dihedral group of order 2n: elements r^i s^e encoded as i + n*e.
  static FiniteGroup dihedral(int n) {
    if (n < 2) throw DomainError("dihedral group needs n >= 2");
    const int order = 2 * n;
    std::vector<std::vector<int>> t(order, std::vector<int>(order));
    for (int a = 0; a < order; ++a) {
      for (int b = 0; b < order; ++b) {
        const int ia = a % n, ea = a / n, ib = b % n, eb = b / n;
        // r^ia s^ea r^ib s^eb = r^(ia + (-1)^ea ib) s^(ea+eb)
        const int i = ((ia + (ea ? -ib : ib)) % n + n) % n;
        const int e = (ea + eb) % 2;
        t[a][b] = i + n * e;
      }
    }
    return FiniteGroup(n == 3 ? "S3" : "D" + std::to_string(n), std::move(t));
  }

  static FiniteGroup product(const FiniteGroup& g, const FiniteGroup& h) {
    const int m = g.order(), n = h.order();
    std::vector<std::vector<int>> t(m * n, std::vector<int>(m * n));
    for (int a = 0; a < m * n; ++a)
      for (int b = 0; b < m * n; ++b)
        t[a][b] = g.mul(a / n, b / n) * n + h.mul(a % n, b % n);
    FiniteGroup out(g.label() + "x" + h.label(), std::move(t));
    if (g.characters_.size() && h.characters_.size()) {
      out.characters_ = linalg::kron(g.characters_, h.characters_);
    }
    return out;
  }

  /// Validates the group axioms; element 0 need not be the identity.
  static FiniteGroup from_table(std::string label, std::vector<std::vector<int>> table) {
    return FiniteGroup(std::move(label), std::move(table));
  }

  /// "Z/k", "Z/axZ/b" (any number of cyclic factors), "S3", "D<n>".
  static FiniteGroup parse(const std::string& text) {
    static const std::regex cyc(R"(Z/(\d+))");
    static const std::regex dih(R"(D(\d+))");
    std::smatch m;
    if (text == "S3") return dihedral(3);
    if (std::regex_match(text, m, dih)) return dihedral(std::stoi(m[1]));
    std::optional<FiniteGroup> acc;
    std::size_t start = 0;
    while (start <= text.size()) {
      const std::size_t x = text.find('x', start);
      const std::string part = text.substr(start, x == std::string::npos ? std::string::npos : x - start);
      if (!std::regex_match(part, m, cyc)) throw DomainError("unknown group label '" + text + "'");
      FiniteGroup f = cyclic(std::stoi(m[1]));
      acc = acc ? product(*acc, f) : f;
      if (x == std::string::npos) break;
      start = x + 1;
    }
    return *acc;
  }

  const std::string& label() const { return label_; }
  int order() const { return static_cast<int>(table_.size()); }
  int identity() const { return identity_; }
  int mul(int a, int b) const { return table_[a][b]; }
  int inverse(int a) const { return inverse_[a]; }
  const std::vector<std::vector<int>>& table() const { return table_; }
  bool contains(int g) const { return g >= 0 && g < order(); }

  bool is_abelian() const {
    for (int a = 0; a < order(); ++a)
      for (int b = 0; b < order(); ++b)
        if (table_[a][b] != table_[b][a]) return false;
    return true;
  }

  std::vector<int> conjugacy_class(int g) const {
    if (!contains(g)) throw DomainError("element " + std::to_string(g) + " is not in " + label_);
    std::vector<int> cls;
    for (int h = 0; h < order(); ++h) cls.push_back(mul(mul(h, g), inverse(h)));
    std::sort(cls.begin(), cls.end());
    cls.erase(std::unique(cls.begin(), cls.end()), cls.end());
    return cls;
  }

  /// Character table of an abelian group: row j is the character chi_j.
  const Mat& characters() const { return characters_; }

  /// Left regular representation of a group element: delta_h -> delta_{gh}.
  Mat regular(int g) const {
    Mat m = Mat::Zero(order(), order());
    for (int h = 0; h < order(); ++h) m(mul(g, h), h) = 1.0;
    return m;
  }

  /// Right regular action delta_h -> delta_{h g^{-1}} (commutes with the left one).
  Mat right_regular(int g) const {
    Mat m = Mat::Zero(order(), order());
    for (int h = 0; h < order(); ++h) m(mul(h, inverse(g)), h) = 1.0;
    return m;
  }

  bool operator==(const FiniteGroup& o) const { return table_ == o.table_; }

 private:
  FiniteGroup(std::string label, std::vector<std::vector<int>> table)
      : label_(std::move(label)), table_(std::move(table)) {
    const int n = order();
    if (n < 1) throw DomainError("empty group table");
    for (const auto& row : table_)
      if (static_cast<int>(row.size()) != n) throw DomainError("group table is not square");
    for (const auto& row : table_)
      for (int v : row)
        if (v < 0 || v >= n) throw DomainError("group table entry out of range");
    identity_ = -1;
    for (int e = 0; e < n && identity_ < 0; ++e) {
      bool ok = true;
      for (int a = 0; a < n && ok; ++a) ok = table_[e][a] == a && table_[a][e] == a;
      if (ok) identity_ = e;
    }
    if (identity_ < 0) throw DomainError("group table has no identity");
    inverse_.assign(n, -1);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        if (table_[a][b] == identity_) inverse_[a] = b;
    for (int a = 0; a < n; ++a)
      if (inverse_[a] < 0) throw DomainError("group table element without inverse");
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          if (table_[table_[a][b]][c] != table_[a][table_[b][c]]) throw DomainError("group table is not associative");
    if (is_abelian()) compute_characters();
  }

  // Joint eigenvectors of the commuting regular representation give the
  // characters; a generic complex combination separates them.
  void compute_characters() {
    const int n = order();
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> nd;
    Mat combo = Mat::Zero(n, n);
    for (int g = 0; g < n; ++g) combo += cplx(nd(rng), nd(rng)) * regular(g);
    const linalg::GeneralEigen es = linalg::general_eig(combo);
    const Mat& vecs = es.vectors;
    characters_ = Mat(n, n);
    for (int j = 0; j < n; ++j) {
      const Vec v = vecs.col(j);
      Eigen::Index piv;
      v.cwiseAbs().maxCoeff(&piv);
      for (int g = 0; g < n; ++g) {
        // lambda(g) v = conj(chi(g)) v for the eigenvector of characters sum_h chi(h) delta_h
        const cplx lam = (regular(g) * v)(piv) / v(piv);
        characters_(j, g) = std::conj(lam);
      }
    }
  }

  std::string label_;
  std::vector<std::vector<int>> table_;
  int identity_ = 0;
  std::vector<int> inverse_;
  Mat characters_;
};

/// How a group algebra is realized.
enum class GroupModel { none, fourier, regular };

class AlgebraSpec {
 public:
  static std::shared_ptr<const AlgebraSpec> matrices(std::vector<int> blocks) {
    if (blocks.empty()) throw StructuralError("an algebra needs at least one block");
    for (int b : blocks)
      if (b < 1) throw StructuralError("block sizes must be positive");
    return std::shared_ptr<const AlgebraSpec>(new AlgebraSpec(std::move(blocks), std::nullopt));
  }

  static std::shared_ptr<const AlgebraSpec> group_algebra(FiniteGroup g) {
    std::vector<int> blocks;
    if (g.is_abelian())
      blocks.assign(g.order(), 1);
    else
      blocks.assign(1, g.order());
    return std::shared_ptr<const AlgebraSpec>(new AlgebraSpec(std::move(blocks), std::move(g)));
  }

  const std::vector<int>& blocks() const { return blocks_; }
  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  int block_size(int i) const { return blocks_[i]; }
  /// Complex dimension of A.
  int dimension() const {
    int d = 0;
    for (int b : blocks_) d += b * b;
    return d;
  }
  /// Sum of block sizes: the size of the defining block-diagonal representation.
  int representation_size() const { return std::accumulate(blocks_.begin(), blocks_.end(), 0); }

  const std::optional<FiniteGroup>& group() const { return group_; }
  GroupModel group_model() const {
    if (!group_) return GroupModel::none;
    return group_->is_abelian() ? GroupModel::fourier : GroupModel::regular;
  }
  /// True when the blocks are the Wedderburn blocks of A (all but the regular model).
  bool block_decomposed() const { return group_model() != GroupModel::regular; }
  bool is_commutative() const {
    return std::all_of(blocks_.begin(), blocks_.end(), [](int b) { return b == 1; });
  }

  std::string describe() const {
    if (group_) return "C[" + group_->label() + "]";
    std::string s;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      if (i) s += "+";
      s += blocks_[i] == 1 ? "C" : "M" + std::to_string(blocks_[i]);
    }
    return s;
  }

  bool operator==(const AlgebraSpec& o) const {
    if (blocks_ != o.blocks_) return false;
    if (group_.has_value() != o.group_.has_value()) return false;
    return !group_ || *group_ == *o.group_;
  }

 private:
  AlgebraSpec(std::vector<int> blocks, std::optional<FiniteGroup> group)
      : blocks_(std::move(blocks)), group_(std::move(group)) {}

  std::vector<int> blocks_;
  std::optional<FiniteGroup> group_;
};

using SpecPtr = std::shared_ptr<const AlgebraSpec>;

inline bool same_owner(const SpecPtr& a, const SpecPtr& b) {
  return a == b || (a && b && *a == *b);
}

inline void require_same_owner(const SpecPtr& a, const SpecPtr& b, const char* what) {
  if (!same_owner(a, b)) throw StructuralError(std::string(what) + ": operands belong to different algebras");
}

class AlgebraElement {
 public:
  AlgebraElement() = default;
  AlgebraElement(SpecPtr owner, std::vector<Mat> blocks) : owner_(std::move(owner)), blocks_(std::move(blocks)) {
    if (!owner_) throw StructuralError("algebra element without owner");
    if (static_cast<int>(blocks_.size()) != owner_->num_blocks())
      throw StructuralError("algebra element has the wrong number of blocks");
    for (int i = 0; i < owner_->num_blocks(); ++i) {
      const int n = owner_->block_size(i);
      if (blocks_[i].rows() != n || blocks_[i].cols() != n)
        throw StructuralError("algebra element block " + std::to_string(i) + " has the wrong shape");
    }
  }

  static AlgebraElement zero(const SpecPtr& s) {
    std::vector<Mat> b;
    for (int n : s->blocks()) b.push_back(Mat::Zero(n, n));
    return {s, std::move(b)};
  }
  static AlgebraElement identity(const SpecPtr& s) {
    std::vector<Mat> b;
    for (int n : s->blocks()) b.push_back(Mat::Identity(n, n));
    return {s, std::move(b)};
  }
  static AlgebraElement scalar(const SpecPtr& s, cplx z) { return identity(s) * z; }

  /// Matrix unit e_ij in block `block` (matrix-sum algebras and Fourier blocks).
  static AlgebraElement matrix_unit(const SpecPtr& s, int block, int i, int j) {
    AlgebraElement e = zero(s);
    e.blocks_.at(block)(i, j) = 1.0;
    return e;
  }

  /// Group algebra element sum_g coeffs[g] delta_g.
  static AlgebraElement from_coeffs(const SpecPtr& s, const Vec& coeffs) {
    if (!s->group()) throw DomainError("coefficient form needs a group algebra");
    const FiniteGroup& g = *s->group();
    if (coeffs.size() != g.order()) throw StructuralError("coefficient vector has the wrong length");
    std::vector<Mat> b;
    if (s->group_model() == GroupModel::fourier) {
      const Vec hat = g.characters() * coeffs;
      for (int j = 0; j < g.order(); ++j) b.push_back(Mat::Constant(1, 1, hat(j)));
    } else {
      Mat m = Mat::Zero(g.order(), g.order());
      for (int h = 0; h < g.order(); ++h) m += coeffs(h) * g.regular(h);
      b.push_back(m);
    }
    return {s, std::move(b)};
  }

  static AlgebraElement group_element(const SpecPtr& s, int h) {
    if (!s->group() || !s->group()->contains(h)) throw DomainError("element not in the group");
    Vec c = Vec::Zero(s->group()->order());
    c(h) = 1.0;
    return from_coeffs(s, c);
  }

  static AlgebraElement random(const SpecPtr& s, std::mt19937_64& rng, double scale = 1.0) {
    if (s->group()) return from_coeffs(s, linalg::random_gaussian(s->group()->order(), 1, rng, scale).col(0));
    std::vector<Mat> b;
    for (int n : s->blocks()) b.push_back(linalg::random_gaussian(n, n, rng, scale));
    return {s, std::move(b)};
  }

  /// Coefficient function on the group, recovered from the representation.
  Vec coeffs() const {
    if (!owner_->group()) throw DomainError("coefficients need a group algebra");
    const FiniteGroup& g = *owner_->group();
    Vec c(g.order());
    if (owner_->group_model() == GroupModel::fourier) {
      Vec hat(g.order());
      for (int j = 0; j < g.order(); ++j) hat(j) = blocks_[j](0, 0);
      c = g.characters().adjoint() * hat / static_cast<double>(g.order());
    } else {
      c = blocks_[0].col(g.identity());
    }
    return c;
  }

  const SpecPtr& owner() const { return owner_; }
  const std::vector<Mat>& blocks() const { return blocks_; }
  const Mat& block(int i) const { return blocks_[i]; }
  Mat& block(int i) { return blocks_[i]; }

  AlgebraElement adjoint() const {
    std::vector<Mat> b;
    for (const Mat& m : blocks_) b.push_back(m.adjoint());
    return {owner_, std::move(b)};
  }

  /// C*-norm: the largest operator norm over blocks.
  double norm() const {
    double n = 0.0;
    for (const Mat& m : blocks_) n = std::max(n, linalg::op_norm(m));
    return n;
  }

  /// Block-diagonal matrix of the defining representation.
  Mat dense() const {
    const int n = owner_->representation_size();
    Mat d = Mat::Zero(n, n);
    int off = 0;
    for (const Mat& m : blocks_) {
      d.block(off, off, m.rows(), m.cols()) = m;
      off += static_cast<int>(m.rows());
    }
    return d;
  }

  double distance(const AlgebraElement& o) const {
    require_same_owner(owner_, o.owner_, "distance");
    double d = 0.0;
    for (std::size_t i = 0; i < blocks_.size(); ++i) d = std::max(d, (blocks_[i] - o.blocks_[i]).norm());
    return d;
  }

  friend AlgebraElement operator+(const AlgebraElement& a, const AlgebraElement& b) {
    require_same_owner(a.owner_, b.owner_, "add");
    std::vector<Mat> r;
    for (std::size_t i = 0; i < a.blocks_.size(); ++i) r.push_back(a.blocks_[i] + b.blocks_[i]);
    return {a.owner_, std::move(r)};
  }
  friend AlgebraElement operator-(const AlgebraElement& a, const AlgebraElement& b) {
    require_same_owner(a.owner_, b.owner_, "subtract");
    std::vector<Mat> r;
    for (std::size_t i = 0; i < a.blocks_.size(); ++i) r.push_back(a.blocks_[i] - b.blocks_[i]);
    return {a.owner_, std::move(r)};
  }
  friend AlgebraElement operator*(const AlgebraElement& a, const AlgebraElement& b) {
    require_same_owner(a.owner_, b.owner_, "mul");
    std::vector<Mat> r;
    for (std::size_t i = 0; i < a.blocks_.size(); ++i) r.push_back(a.blocks_[i] * b.blocks_[i]);
    return {a.owner_, std::move(r)};
  }
  friend AlgebraElement operator*(const AlgebraElement& a, cplx z) {
    std::vector<Mat> r;
    for (const Mat& m : a.blocks_) r.push_back(m * z);
    return {a.owner_, std::move(r)};
  }
  friend AlgebraElement operator*(cplx z, const AlgebraElement& a) { return a * z; }

 private:
  SpecPtr owner_;
  std::vector<Mat> blocks_;
};

inline AlgebraElement mul(const AlgebraElement& a, const AlgebraElement& b) { return a * b; }
inline AlgebraElement adjoint(const AlgebraElement& a) { return a.adjoint(); }
inline double norm(const AlgebraElement& a) { return a.norm(); }

/// f(a) for a normal element. Elements of regular-model group algebras are
/// projected back onto lambda(C[G]) through their coefficient function.
inline AlgebraElement spectral_calculus(const AlgebraElement& a, const ScalarFunction& f,
                                        double normality_tol = 1e-10) {
  std::vector<Mat> out;
  for (const Mat& m : a.blocks()) out.push_back(linalg::normal_function(m, f, normality_tol));
  AlgebraElement r(a.owner(), std::move(out));
  if (a.owner()->group_model() == GroupModel::regular) return AlgebraElement::from_coeffs(a.owner(), r.coeffs());
  return r;
}

inline ScalarFunction indicator_above(double threshold) {
  return [threshold](cplx z) { return z.real() > threshold ? cplx(1.0) : cplx(0.0); };
}

enum class TraceKind { scalar, center_valued, delocalized };

/// A trace on A with values in Z: C for scalar and delocalized traces, C^k for
/// the center-valued trace (one normalized trace per block).
class TraceFunctional {
 public:
  /// tau(a) = sum_i w_i Tr(a_i).
  static TraceFunctional scalar(const SpecPtr& s, std::vector<double> weights) {
    if (static_cast<int>(weights.size()) != s->num_blocks())
      throw StructuralError("trace weights must have one entry per block");
    TraceFunctional t(s, TraceKind::scalar);
    t.weights_ = std::move(weights);
    return t;
  }

  /// Weights 1/sum(n_j): normalized, faithful. For group algebras this is the canonical trace.
  static TraceFunctional normalized(const SpecPtr& s) {
    if (s->group()) return canonical_group_trace(s);
    const double total = s->representation_size();
    return scalar(s, std::vector<double>(s->num_blocks(), 1.0 / total));
  }

  static TraceFunctional center_valued(const SpecPtr& s) {
    if (!s->block_decomposed()) throw DomainError("center-valued trace needs a block-decomposed algebra");
    return TraceFunctional(s, TraceKind::center_valued);
  }

  /// f -> f(e) on C[G].
  static TraceFunctional canonical_group_trace(const SpecPtr& s) {
    if (!s->group()) throw DomainError("canonical trace needs a group algebra");
    const double w = 1.0 / s->group()->order();
    return scalar(s, std::vector<double>(s->num_blocks(), w));
  }

  /// f -> sum_{gamma in [g]} f(gamma) on C[G].
  static TraceFunctional delocalized(const SpecPtr& s, int g) {
    if (!s->group()) throw DomainError("delocalized trace needs a group algebra");
    if (!s->group()->contains(g)) throw DomainError("element " + std::to_string(g) + " is not in the group");
    TraceFunctional t(s, TraceKind::delocalized);
    t.element_ = g;
    t.conjugacy_class_ = s->group()->conjugacy_class(g);
    return t;
  }

  const SpecPtr& owner() const { return owner_; }
  TraceKind kind() const { return kind_; }
  const std::vector<double>& weights() const { return weights_; }
  int element() const { return element_; }
  const std::vector<int>& conjugacy_class() const { return conjugacy_class_; }
  Eigen::Index value_size() const { return kind_ == TraceKind::center_valued ? owner_->num_blocks() : 1; }

  bool is_positive() const {
    if (kind_ == TraceKind::center_valued) return true;
    if (kind_ == TraceKind::delocalized) return conjugacy_class_.size() == 1 && conjugacy_class_[0] == owner_->group()->identity();
    return std::all_of(weights_.begin(), weights_.end(), [](double w) { return w >= 0; });
  }
  bool is_faithful() const {
    if (kind_ == TraceKind::center_valued) return true;
    if (kind_ == TraceKind::delocalized) return is_positive();
    return std::all_of(weights_.begin(), weights_.end(), [](double w) { return w > 0; });
  }
  bool is_normalized(double tol = 1e-12) const {
    return (apply(AlgebraElement::identity(owner_)) - ZValue::Ones(value_size())).norm() < tol;
  }

  ZValue apply(const AlgebraElement& a) const {
    require_same_owner(owner_, a.owner(), "apply_trace");
    if (kind_ == TraceKind::delocalized) {
      const Vec c = a.coeffs();
      cplx s = 0.0;
      for (int h : conjugacy_class_) s += c(h);
      return ZValue::Constant(1, s);
    }
    ZValue bt(owner_->num_blocks());
    for (int i = 0; i < owner_->num_blocks(); ++i) bt(i) = a.block(i).trace();
    return apply_to_block_traces(bt);
  }

  /// Evaluates the trace on an element of A/[A,A], represented by its
  /// unnormalized block traces.
  ZValue apply_to_block_traces(const ZValue& bt) const {
    if (bt.size() != owner_->num_blocks()) throw StructuralError("block-trace vector has the wrong length");
    switch (kind_) {
      case TraceKind::scalar: {
        cplx s = 0.0;
        for (int i = 0; i < bt.size(); ++i) s += weights_[i] * bt(i);
        return ZValue::Constant(1, s);
      }
      case TraceKind::center_valued: {
        ZValue z(bt.size());
        for (int i = 0; i < bt.size(); ++i) z(i) = bt(i) / static_cast<double>(owner_->block_size(i));
        return z;
      }
      case TraceKind::delocalized: {
        if (owner_->group_model() != GroupModel::fourier)
          throw DomainError("delocalized traces on block traces need an abelian group algebra");
        const FiniteGroup& g = *owner_->group();
        cplx s = 0.0;
        for (int j = 0; j < g.order(); ++j) {
          cplx cj = 0.0;
          for (int h : conjugacy_class_) cj += std::conj(g.characters()(j, h));
          s += cj * bt(j) / static_cast<double>(g.order());
        }
        return ZValue::Constant(1, s);
      }
    }
    return ZValue();
  }

  std::string describe() const {
    switch (kind_) {
      case TraceKind::scalar: return "scalar";
      case TraceKind::center_valued: return "center-valued";
      case TraceKind::delocalized: return "delocalized[" + std::to_string(element_) + "]";
    }
    return "";
  }

 private:
  TraceFunctional(SpecPtr s, TraceKind k) : owner_(std::move(s)), kind_(k) {}

  SpecPtr owner_;
  TraceKind kind_;
  std::vector<double> weights_;
  int element_ = -1;
  std::vector<int> conjugacy_class_;
};

inline TraceFunctional canonical_group_trace(const SpecPtr& s) { return TraceFunctional::canonical_group_trace(s); }
inline TraceFunctional delocalized_trace(const SpecPtr& s, int g) { return TraceFunctional::delocalized(s, g); }
inline ZValue apply_trace(const TraceFunctional& t, const AlgebraElement& a) { return t.apply(a); }

}  // namespace ncindex
