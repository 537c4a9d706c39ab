#pragma once

// The eight acceptance criteria, shared by the acceptance test binary and the
// `suite` command. Every criterion returns one pass/fail line with the measured
// numbers; exceptions inside a criterion count as a failure.

#include <Eigen/QR>

#include <chrono>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ncindex/chern.hpp"
#include "ncindex/cover.hpp"
#include "ncindex/parallel.hpp"
#include "ncindex/spectral.hpp"

namespace ncindex {

inline constexpr std::uint64_t kDefaultSeed = 20240611;

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

namespace acceptance_detail {

inline std::string sci(double v) {
  std::ostringstream os;
  os << std::setprecision(2) << std::scientific << v;
  return os.str();
}

inline std::string fixed(double v, int digits = 3) {
  std::ostringstream os;
  os << std::setprecision(digits) << std::fixed << v;
  return os.str();
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// Collects failures; the first few are kept verbatim for the detail line.
class Failures {
 public:
  void add(const std::string& what) {
    std::lock_guard<std::mutex> lock(m_);
    if (count_++ < 3) first_.push_back(what);
  }
  int count() const { return count_; }
  std::string summary() const {
    std::string s;
    for (const std::string& f : first_) s += "; " + f;
    if (count_ > 3) s += "; ... (" + std::to_string(count_) + " failures)";
    return s;
  }

 private:
  std::mutex m_;
  int count_ = 0;
  std::vector<std::string> first_;
};

/// Unitary on C^d commuting with the projection p, diagonal in a random basis
/// adapted to p with the given phases.
inline Mat adapted_unitary(const Mat& p, const Mat& basis, const std::vector<double>& phases) {
  Vec ph(p.rows());
  for (Eigen::Index i = 0; i < ph.size(); ++i) ph(i) = std::exp(2.0 * kPi * kI * phases[i]);
  return basis * ph.asDiagonal() * basis.adjoint();
}

inline Mat adapted_basis(const Mat& p, std::mt19937_64& rng) {
  const Mat id = Mat::Identity(p.rows(), p.cols());
  const Mat q1 = linalg::range_basis(p), q0 = linalg::range_basis(id - p);
  Mat b(p.rows(), p.cols());
  b << q1 * linalg::random_unitary(q1.cols(), rng), q0 * linalg::random_unitary(q0.cols(), rng);
  return b;
}

/// Flat bundle over A with fiber pA^n and random commuting monodromies.
inline Bundle random_flat(const ProjectiveModule& p, const Grid& g, std::mt19937_64& rng) {
  const SpecPtr& s = p.owner();
  std::uniform_real_distribution<double> angle(0.05, 0.95);
  ModuleMap u = ModuleMap::identity(s, p.ambient_rank()), v = u;
  for (int b = 0; b < s->num_blocks(); ++b) {
    const Mat& pb = p.projection().block(b);
    const Mat basis = adapted_basis(pb, rng);
    std::vector<double> au(pb.rows()), av(pb.rows());
    for (double& a : au) a = angle(rng);
    for (double& a : av) a = angle(rng);
    u.block(b) = adapted_unitary(pb, basis, au);
    v.block(b) = adapted_unitary(pb, basis, av);
  }
  return flat_bundle(p, {u, v}, g);
}

struct FlatChoice {
  std::string label;
  SpecPtr algebra;
  ModuleMap projection;
  double dim_tau;  // normalized trace of the projection, computed by hand
};

inline ModuleMap block_projection(const SpecPtr& s, int n, const std::vector<Mat>& blocks) {
  ModuleMap p = ModuleMap::zero(s, n, n);
  for (int b = 0; b < s->num_blocks(); ++b) p.block(b) = blocks[b];
  return p;
}

/// Three fibers per algebra. dim_tau is r / (sum of block sizes) for the
/// normalized trace on matrix sums, and |support| / |G| for the canonical trace.
inline std::vector<FlatChoice> flat_choices() {
  std::vector<FlatChoice> out;
  const SpecPtr m2 = AlgebraSpec::matrices({2});
  const SpecPtr z3 = AlgebraSpec::group_algebra(FiniteGroup::cyclic(3));
  const SpecPtr m2c = AlgebraSpec::matrices({2, 1});
  Mat e11 = Mat::Zero(2, 2);
  e11(0, 0) = 1.0;
  out.push_back({"M2 p=1", m2, ModuleMap::identity(m2, 1), 1.0});
  out.push_back({"M2 p=e11", m2, block_projection(m2, 1, {e11}), 0.5});
  out.push_back({"M2 n=2", m2, ModuleMap::identity(m2, 2), 2.0});
  out.push_back({"C[Z/3] p=1", z3, ModuleMap::identity(z3, 1), 1.0});
  // (1 + g + g^2) / 3 lives in the block of the trivial character
  const AlgebraElement avg = (AlgebraElement::group_element(z3, 0) + AlgebraElement::group_element(z3, 1) +
                              AlgebraElement::group_element(z3, 2)) *
                             cplx(1.0 / 3.0);
  out.push_back({"C[Z/3] p=avg", z3, ModuleMap::diagonal(avg, 1), 1.0 / 3.0});
  out.push_back({"C[Z/3] n=2", z3, ModuleMap::identity(z3, 2), 2.0});
  out.push_back({"M2+C p=(e11,0)", m2c, block_projection(m2c, 1, {e11, Mat::Zero(1, 1)}), 1.0 / 3.0});
  out.push_back({"M2+C p=1", m2c, ModuleMap::identity(m2c, 1), 1.0});
  out.push_back({"M2+C n=2", m2c, ModuleMap::identity(m2c, 2), 2.0});
  return out;
}

/// Smooth random projection field of rank r in C^d: W P0 W^* with W = exp(S),
/// S skew and band limited.
inline MatrixForm smooth_projection_field(const Grid& g, int d, int r, std::mt19937_64& rng) {
  std::vector<Mat> coef;
  for (int i = 0; i < 4; ++i) coef.push_back(linalg::random_hermitian(d, rng, 0.6));
  Mat p0 = Mat::Zero(d, d);
  for (int i = 0; i < r; ++i) p0(i, i) = 1.0;
  return MatrixForm::sample(g, 0, [&](double x, double y) {
    const Mat h = std::cos(2 * kPi * x) * coef[0] + std::sin(2 * kPi * x) * coef[1] + std::cos(2 * kPi * y) * coef[2] +
                  std::sin(2 * kPi * y) * coef[3];
    const Mat w = linalg::expm(kI * h);
    return std::vector<Mat>{w * p0 * w.adjoint()};
  });
}

inline std::vector<SpecPtr> module_algebras() {
  return {AlgebraSpec::matrices({1}),        AlgebraSpec::matrices({1, 1, 1}),
          AlgebraSpec::group_algebra(FiniteGroup::cyclic(3)), AlgebraSpec::matrices({2}),
          AlgebraSpec::matrices({2, 1}),     AlgebraSpec::matrices({3})};
}

/// Product of random maps A^n -> A^r -> A^m: rank deficient when r < min(m, n).
inline ModuleMap random_low_rank(const SpecPtr& s, int m, int n, int r, std::mt19937_64& rng) {
  if (r == 0) return ModuleMap::zero(s, m, n);
  return ModuleMap::random(s, m, r, rng) * ModuleMap::random(s, r, n, rng);
}

inline int qr_rank(const Mat& m) {
  if (m.size() == 0) return 0;
  Eigen::ColPivHouseholderQR<Mat> qr(m);
  qr.setThreshold(1e-9);
  return static_cast<int>(qr.rank());
}

}  // namespace acceptance_detail

/// 1. Classical reduction over C: index of the Chern-c line bundle at N = 24.
inline CriterionResult criterion_classical(std::uint64_t) {
  using namespace acceptance_detail;
  CriterionResult r{1, "classical reduction (A = C, N = 24, c = -3..3)"};
  Failures fail;
  std::vector<double> secs(7, 0.0);
  double worst_res = 0.0, worst_disc = 0.0, min_gap = std::numeric_limits<double>::infinity();
  std::mutex m;
  parallel_for(7, [&](int i) {
    const int c = i - 3;
    Stopwatch sw;
    const Bundle b = Bundle::line(c, Grid::torus(24));
    const IndexReport rep = index_report(b, TraceFunctional::normalized(b.owner()));
    secs[i] = sw.seconds();
    const double a = rep.analytic_index(0).real();
    // theta functions: h0 = c for c > 0, 1 for c = 0 (constants), 0 otherwise; h1 by Serre duality
    const double ker = c > 0 ? c : (c == 0 ? 1 : 0), coker = c < 0 ? -c : (c == 0 ? 1 : 0);
    {
      std::lock_guard<std::mutex> lock(m);
      worst_res = std::max(worst_res, rep.rounding_residual);
      worst_disc = std::max(worst_disc, rep.discrepancy);
      min_gap = std::min(min_gap, rep.gap_ratio);
    }
    if (std::lround(a) != c || rep.rounding_residual >= 1e-6)
      fail.add("c=" + std::to_string(c) + " analytic " + fixed(a, 9));
    if (rep.discrepancy > 1e-10) fail.add("c=" + std::to_string(c) + " discrepancy " + sci(rep.discrepancy));
    if (std::abs(rep.kernel_dim_t(0).real() - ker) > 1e-6 || std::abs(rep.cokernel_dim_t(0).real() - coker) > 1e-6)
      fail.add("c=" + std::to_string(c) + " kernel dims differ from theta-function count");
    if (rep.k0_index.at(0) != c) fail.add("c=" + std::to_string(c) + " K0 index " + std::to_string(rep.k0_index[0]));
    if (secs[i] >= 30.0) fail.add("c=" + std::to_string(c) + " took " + fixed(secs[i], 1) + " s");
  });
  r.pass = fail.count() == 0;
  r.detail = "max residual " + sci(worst_res) + ", max |analytic - topological| " + sci(worst_disc) +
             ", min gap " + sci(min_gap) + ", max time " + fixed(*std::max_element(secs.begin(), secs.end()), 2) +
             " s" + fail.summary();
  return r;
}

/// 2. Flat twists: ind_tau(E_c (x) W) = c dim_tau(W) for three fibers over
/// each of M2, C[Z/3], M2 + C.
inline CriterionResult criterion_flat_twist(std::uint64_t seed) {
  using namespace acceptance_detail;
  CriterionResult r{2, "flat-twist index = c dim_tau(W) (N = 12)"};
  const std::vector<FlatChoice> choices = flat_choices();
  const Grid g = Grid::torus(12);
  Failures fail;
  double worst = 0.0;
  std::mutex m;
  const int per = 5;
  parallel_for(static_cast<int>(choices.size()) * per, [&](int idx) {
    const FlatChoice& ch = choices[idx / per];
    const int c = idx % per - 2;
    std::mt19937_64 rng(seed + 101 * (idx / per));
    const ProjectiveModule p(ch.projection);
    const Bundle w = random_flat(p, g, rng);
    const TraceFunctional tau = TraceFunctional::normalized(ch.algebra);
    const double dim = dim_tau(p, tau)(0).real();
    if (std::abs(dim - ch.dim_tau) > 1e-12) fail.add(ch.label + " dim_tau " + fixed(dim, 6));
    const Bundle e = tensor_with_vector_bundle(Bundle::line(c, g), w);
    const AnalyticIndex ai = analytic_index(assemble_dolbeault(e), tau);
    const double err = std::abs(ai.index(0) - c * ch.dim_tau);
    {
      std::lock_guard<std::mutex> lock(m);
      worst = std::max(worst, err);
    }
    if (err > 1e-6) fail.add(ch.label + " c=" + std::to_string(c) + " index " + fixed(ai.index(0).real(), 8));
  });
  r.pass = fail.count() == 0;
  r.detail = std::to_string(choices.size() * per) + " cases, max error " + sci(worst) + fail.summary();
  return r;
}

/// 3. Finite cyclic covers: cover L2 index, base index and flat C[Z/k] twist agree.
inline CriterionResult criterion_cover(std::uint64_t) {
  using namespace acceptance_detail;
  CriterionResult r{3, "cover L2 index = base index = C[Z/k]-twist index (N = 16, k = 2..4, c = -2..2)"};
  Failures fail;
  double worst_res = 0.0, worst_deloc = 0.0, worst_time = 0.0, worst_dict = 0.0;
  std::mutex m;
  parallel_for(15, [&](int idx) {
    const int k = 2 + idx / 5, c = idx % 5 - 2;
    const std::string tag = "k=" + std::to_string(k) + " c=" + std::to_string(c);
    Stopwatch sw;
    const CoverComparison cc = compare_cover(Bundle::line(c, Grid::torus(16)), k);
    const double t = sw.seconds();
    double res = std::max({std::abs(cc.base_index - std::round(cc.base_index.real())),
                           std::abs(cc.l2_canonical - std::round(cc.l2_canonical.real())),
                           std::abs(cc.twisted_canonical - std::round(cc.twisted_canonical.real()))});
    double deloc = 0.0;
    for (cplx z : cc.l2_delocalized) deloc = std::max(deloc, std::abs(z));
    for (cplx z : cc.twisted_delocalized) deloc = std::max(deloc, std::abs(z));
    {
      std::lock_guard<std::mutex> lock(m);
      worst_res = std::max(worst_res, res);
      worst_deloc = std::max(worst_deloc, deloc);
      worst_time = std::max(worst_time, t);
      worst_dict = std::max(worst_dict, cc.dictionary_residual);
    }
    const long base = std::lround(cc.base_index.real());
    if (base != c || std::lround(cc.l2_canonical.real()) != base || std::lround(cc.twisted_canonical.real()) != base)
      fail.add(tag + " indices " + fixed(cc.base_index.real(), 6) + "/" + fixed(cc.l2_canonical.real(), 6) + "/" +
               fixed(cc.twisted_canonical.real(), 6));
    if (res >= 1e-6) fail.add(tag + " residual " + sci(res));
    if (deloc >= 1e-6) fail.add(tag + " delocalized " + sci(deloc));
    if (cc.cover_index != k * base) fail.add(tag + " cover index " + std::to_string(cc.cover_index));
    if (cc.deck_commutator >= 1e-12) fail.add(tag + " deck commutator " + sci(cc.deck_commutator));
    if (cc.dictionary_residual >= 1e-10) fail.add(tag + " dictionary " + sci(cc.dictionary_residual));
    if (t >= 120.0) fail.add(tag + " took " + fixed(t, 1) + " s");
  });
  r.pass = fail.count() == 0;
  r.detail = "max rounding residual " + sci(worst_res) + ", max |t_g index| " + sci(worst_deloc) +
             ", max dictionary residual " + sci(worst_dict) + ", max time " + fixed(worst_time, 1) + " s" +
             fail.summary();
  return r;
}

/// 4. Center-valued index on M2 + C against the K0 pipeline, and injectivity of
/// the center-valued trace on K0.
inline CriterionResult criterion_center_valued(std::uint64_t seed) {
  using namespace acceptance_detail;
  CriterionResult r{4, "center-valued index on M2 + C, trace vectors separate K0"};
  const SpecPtr s = AlgebraSpec::matrices({2, 1});
  const TraceFunctional cv = TraceFunctional::center_valued(s);
  const std::vector<FlatChoice> all = flat_choices();
  const Grid g = Grid::torus(12);
  Failures fail;
  double worst = 0.0;
  std::mutex m;
  const std::vector<int> charges{-1, 1, 2};
  parallel_for(9, [&](int idx) {
    const FlatChoice& ch = all[6 + idx / 3];
    const int c = charges[idx % 3];
    std::mt19937_64 rng(seed + 7 * idx);
    const Bundle e = tensor_with_vector_bundle(Bundle::line(c, g), random_flat(ProjectiveModule(ch.projection), g, rng));
    const TwistedOperator op = assemble_dolbeault(e);
    const ZValue gns = analytic_index(op, cv).index;
    const ZValue k0 = apply_trace(cv, module_index(op).index);
    const double err = (gns - k0).cwiseAbs().maxCoeff();
    {
      std::lock_guard<std::mutex> lock(m);
      worst = std::max(worst, err);
    }
    if (err > 1e-8) fail.add(ch.label + " c=" + std::to_string(c) + " differs by " + sci(err));
  });
  // injectivity on random projections of M_n(A), n = 1..3
  std::mt19937_64 rng(seed + 4);
  std::uniform_int_distribution<int> pick_n(1, 3);
  std::vector<ZValue> traces;
  std::vector<std::vector<long long>> ranks;
  for (int i = 0; i < 50; ++i) {
    const int n = pick_n(rng);
    std::vector<Mat> blocks;
    for (int b = 0; b < s->num_blocks(); ++b) {
      const int d = n * s->block_size(b);
      blocks.push_back(linalg::random_projection(d, std::uniform_int_distribution<int>(0, d)(rng), rng));
    }
    const ModuleMap p = block_projection(s, n, blocks);
    ZValue bt(s->num_blocks());
    for (int b = 0; b < s->num_blocks(); ++b) bt(b) = p.block(b).trace();
    traces.push_back(cv.apply_to_block_traces(bt));
    ranks.push_back(class_of(ProjectiveModule(p)).ranks);
  }
  int pairs = 0, equal_classes = 0;
  for (int i = 0; i < 50; ++i)
    for (int j = i + 1; j < 50; ++j) {
      ++pairs;
      const bool same_trace = (traces[i] - traces[j]).cwiseAbs().maxCoeff() < 1e-8;
      const bool same_class = ranks[i] == ranks[j];
      equal_classes += same_class;
      if (same_trace != same_class) fail.add("projections " + std::to_string(i) + ", " + std::to_string(j));
    }
  r.pass = fail.count() == 0;
  r.detail = "9 bundles, max |GNS - K0| " + sci(worst) + "; " + std::to_string(pairs) + " pairs (" +
             std::to_string(equal_classes) + " with equal class) consistent" + fail.summary();
  return r;
}

/// 5. Chern-Weil: closedness, connection independence over random connections
/// on three bundle families, and flat bundles.
inline CriterionResult criterion_chern_weil(std::uint64_t seed) {
  using namespace acceptance_detail;
  CriterionResult r{5, "Chern-Weil closedness, connection independence, flat bundles"};
  Failures fail;
  double worst_closed = 0.0, worst_indep = 0.0, worst_flat = 0.0;
  std::mutex m;
  const std::vector<FlatChoice> choices = flat_choices();
  // family 0: line bundles over C; 1: E_c (x) flat W over M2 + C; 2: two-band projection field
  parallel_for(60, [&](int idx) {
    const int family = idx / 20, i = idx % 20;
    std::mt19937_64 rng(seed + 1000 * family + i);
    const int c = i % 5 - 2;
    Bundle b;
    if (family == 0) {
      b = Bundle::line(c, Grid::torus(12));
    } else if (family == 1) {
      const Grid g = Grid::torus(10);
      b = tensor_with_vector_bundle(Bundle::line(c, g),
                                    random_flat(ProjectiveModule(choices[6 + i % 3].projection), g, rng));
    } else {
      const Grid g = Grid::torus(48);
      b = Bundle::projection_field(AlgebraSpec::matrices({1}), 2, {two_band_projection(g, 1.0 + 0.02 * i)});
    }
    const TraceFunctional tau = TraceFunctional::normalized(b.owner());
    const Bundle b1 = b.with_omega(random_tensorial_omega(b, rng));
    const Bundle b2 = b.with_omega(random_tensorial_omega(b, rng));
    double omega_norm = 0.0;
    for (const MatrixForm& f : curvature(b1)) omega_norm = std::max(omega_norm, f.sup_norm());
    const double closed = closedness_residual(ch_tau(b1, tau)) / std::max(omega_norm, 1e-300);
    const double indep = connection_independence_gap(b1, b2, tau);
    {
      std::lock_guard<std::mutex> lock(m);
      worst_closed = std::max(worst_closed, closed);
      worst_indep = std::max(worst_indep, indep);
    }
    const std::string tag = "family " + std::to_string(family) + " sample " + std::to_string(i);
    if (closed >= 1e-8) fail.add(tag + " closedness " + sci(closed));
    if (indep >= 1e-8) fail.add(tag + " connection gap " + sci(indep));
  });
  for (std::size_t i = 0; i < choices.size(); ++i) {
    std::mt19937_64 rng(seed + 31 * i);
    const ProjectiveModule p(choices[i].projection);
    const Bundle w = random_flat(p, Grid::torus(8), rng);
    const TraceFunctional tau = TraceFunctional::normalized(choices[i].algebra);
    const ChernForm ch = ch_tau(w, tau);
    double err = 0.0;
    for (const ZValue& z : ch.degree0) err = std::max(err, std::abs(z(0) - choices[i].dim_tau));
    for (const ZValue& z : ch.degree2) err = std::max(err, std::abs(z(0)));
    worst_flat = std::max(worst_flat, err);
    if (err > 1e-10) fail.add(choices[i].label + " flat ch error " + sci(err));
  }
  r.pass = fail.count() == 0;
  r.detail = "60 connection pairs: max closedness / ||Omega|| " + sci(worst_closed) + ", max connection gap " +
             sci(worst_indep) + "; 9 flat bundles: max ch error " + sci(worst_flat) + fail.summary();
  return r;
}

/// 6. Retraction of perturbed projection fields.
inline CriterionResult criterion_retraction(std::uint64_t seed) {
  using namespace acceptance_detail;
  CriterionResult r{6, "retraction of 100 perturbed projection fields (delta < 0.1)"};
  Failures fail;
  double worst_idem = 0.0, min_margin = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(seed + 6);
  std::uniform_real_distribution<double> pick_delta(0.01, 0.099);
  const Grid g = Grid::torus(8);
  for (int i = 0; i < 100; ++i) {
    MatrixForm e;
    if (i % 4 == 0) {
      e = two_band_projection(g, 0.5 + 0.03 * i);
    } else {
      const int d = 2 + i % 3;
      e = smooth_projection_field(g, d, 1 + i % (d - 1), rng);
    }
    const double delta = pick_delta(rng);
    MatrixForm f = e;
    for (int p = 0; p < g.points(); ++p) {
      const Mat x = linalg::random_gaussian(e.rows(), e.cols(), rng);
      f.at(0, p) += (0.999 * delta / x.norm()) * x;
    }
    try {
      const MatrixForm q = retract_projection(f, delta, &e);
      double idem = 0.0;
      for (int p = 0; p < g.points(); ++p) {
        const Mat& x = q.at(0, p);
        idem = std::max(idem, std::max((x * x - x).norm(), (x.adjoint() - x).norm()));
      }
      const double margin = image_isomorphism_margin(q, e);
      worst_idem = std::max(worst_idem, idem);
      min_margin = std::min(min_margin, margin);
      if (idem >= 1e-12) fail.add("sample " + std::to_string(i) + " idempotency " + sci(idem));
      if (margin <= 0.5) fail.add("sample " + std::to_string(i) + " margin " + fixed(margin));
    } catch (const std::exception& ex) {
      fail.add("sample " + std::to_string(i) + ": " + ex.what());
    }
  }
  r.pass = fail.count() == 0;
  r.detail = "max idempotency residual " + sci(worst_idem) + ", min singular value of e1 e2 " + fixed(min_margin) +
             fail.summary();
  return r;
}

/// 7. Module and GNS property suite.
inline CriterionResult criterion_modules(std::uint64_t seed) {
  using namespace acceptance_detail;
  CriterionResult r{7, "module and GNS properties"};
  Failures fail;
  std::mt19937_64 rng(seed + 7);
  std::uniform_int_distribution<int> dim(1, 3);
  const std::vector<SpecPtr> algebras = module_algebras();
  std::vector<std::string> notes;

  // C*-identity
  double cstar = 0.0;
  for (int i = 0; i < 200; ++i) {
    const SpecPtr& s = algebras[i % algebras.size()];
    const AlgebraElement a = AlgebraElement::random(s, rng);
    const double na = a.norm();
    cstar = std::max(cstar, std::abs((a.adjoint() * a).norm() - na * na) / (na * na));
  }
  if (cstar >= 1e-12) fail.add("C*-identity " + sci(cstar));
  notes.push_back("C* identity " + sci(cstar));

  // ||Phi|| <= |Phi| <= sqrt(n) ||Phi|| for Phi : A^n -> A^m
  int lower_comm = 0, lower_noncomm = 0, upper = 0, samples_noncomm = 0, corrected = 0;
  double worst_ratio = 0.0;
  for (int i = 0; i < 200; ++i) {
    const SpecPtr& s = algebras[i % algebras.size()];
    const int m = dim(rng), n = dim(rng);
    const ModuleMap f = ModuleMap::random(s, m, n, rng);
    const ModuleNorms nm = module_norms(f);
    const double slack = 1.0 + 1e-12;
    const bool comm = s->is_commutative();
    samples_noncomm += !comm;
    if (nm.op > nm.hilbert * slack) {
      (comm ? lower_comm : lower_noncomm)++;
      worst_ratio = std::max(worst_ratio, nm.op / nm.hilbert);
    }
    if (nm.hilbert > std::sqrt(static_cast<double>(n)) * nm.op * slack) ++upper;
    if (nm.op > std::sqrt(static_cast<double>(n)) * nm.hilbert * slack) ++corrected;
  }
  if (lower_comm + lower_noncomm > 0)
    fail.add("||Phi|| <= |Phi| violated on " + std::to_string(lower_comm + lower_noncomm) + "/200 maps (" +
             std::to_string(lower_noncomm) + " of " + std::to_string(samples_noncomm) +
             " over noncommutative A, " + std::to_string(lower_comm) + " over commutative A; max ||Phi||/|Phi| " +
             fixed(worst_ratio, 4) + "; ||Phi|| <= sqrt(n)|Phi| violated on " + std::to_string(corrected) + ")");
  if (upper > 0) fail.add("|Phi| <= sqrt(n)||Phi|| violated on " + std::to_string(upper) + "/200 maps");

  // ev(f g) = ev(g f)
  double ev_err = 0.0;
  for (int i = 0; i < 100; ++i) {
    const SpecPtr& s = algebras[i % algebras.size()];
    const int m = dim(rng), n = dim(rng);
    const ModuleMap f = ModuleMap::random(s, m, n, rng), h = ModuleMap::random(s, n, m, rng);
    const ZValue a = ev_endomorphism(f * h), b = ev_endomorphism(h * f);
    ev_err = std::max(ev_err, (a - b).cwiseAbs().maxCoeff() / std::max(1.0, a.cwiseAbs().maxCoeff()));
  }
  if (ev_err >= 1e-10) fail.add("ev trace property " + sci(ev_err));
  notes.push_back("ev " + sci(ev_err));

  // polar decomposition, including rank-deficient maps
  double polar = 0.0;
  for (int i = 0; i < 100; ++i) {
    const SpecPtr& s = algebras[i % algebras.size()];
    const int m = dim(rng), n = dim(rng);
    const ModuleMap f = random_low_rank(s, m, n, std::uniform_int_distribution<int>(0, std::min(m, n))(rng), rng);
    const PolarDecomposition pd = polar_decomposition(f);
    const double scale = std::max(1.0, f.norm());
    polar = std::max({polar, (pd.u * pd.abs).distance(f) / scale, (pd.abs * pd.abs).distance(f.adjoint() * f) / (scale * scale),
                      (pd.u * pd.u.adjoint() * pd.u).distance(pd.u), pd.abs.distance(pd.abs.adjoint()) / scale});
  }
  if (polar >= 1e-10) fail.add("polar decomposition residual " + sci(polar));
  notes.push_back("polar " + sci(polar));

  // fredholm_index against per-block rank-nullity with a QR rank
  int fred_bad = 0;
  for (int i = 0; i < 200; ++i) {
    const SpecPtr& s = algebras[i % algebras.size()];
    const int m = dim(rng), n = dim(rng);
    const ModuleMap f = random_low_rank(s, m, n, std::uniform_int_distribution<int>(0, std::min(m, n))(rng), rng);
    try {
      const FredholmData fd = fredholm_data(f);
      const K0Class ker = class_of(fd.kernel), coker = class_of(fd.cokernel);
      for (int b = 0; b < s->num_blocks(); ++b) {
        const int rk = qr_rank(f.block(b));
        const int nb = s->block_size(b);
        if (ker.ranks[b] != n * nb - rk || coker.ranks[b] != m * nb - rk) {
          ++fred_bad;
          break;
        }
      }
    } catch (const std::exception& ex) {
      ++fred_bad;
    }
  }
  if (fred_bad > 0) fail.add("fredholm_index differs from rank-nullity on " + std::to_string(fred_bad) + "/200 maps");

  // commutant of the right regular action of Z/k
  for (int k = 2; k <= 6; ++k) {
    const FiniteGroup g = FiniteGroup::cyclic(k);
    std::vector<Mat> gens;
    for (int h = 0; h < k; ++h) gens.push_back(g.right_regular(h));
    const std::size_t dc = commutant(gens).size();
    if (dc != static_cast<std::size_t>(k))
      fail.add("commutant of C[Z/" + std::to_string(k) + "] has dimension " + std::to_string(dc));
  }

  // extended trace: basis independence and the product formula
  double basis_err = 0.0, product_err = 0.0;
  const std::vector<SpecPtr> gns_algebras{AlgebraSpec::matrices({2, 1}), AlgebraSpec::group_algebra(FiniteGroup::cyclic(3)),
                                          AlgebraSpec::matrices({3})};
  for (int i = 0; i < 30; ++i) {
    const SpecPtr& s = gns_algebras[i % gns_algebras.size()];
    const int h = 1 + i % 3;
    std::vector<TraceFunctional> traces{TraceFunctional::normalized(s)};
    if (s->group()) traces.push_back(TraceFunctional::delocalized(s, 1));
    else traces.push_back(TraceFunctional::center_valued(s));
    const Mat t = ambient_left_action(ModuleMap::random(s, h, h, rng));
    const Mat basis = linalg::random_unitary(h, rng);
    const Mat bm = linalg::random_gaussian(h, h, rng);
    const AlgebraElement x = AlgebraElement::random(s, rng);
    std::vector<std::vector<AlgebraElement>> entries(h, std::vector<AlgebraElement>(h));
    for (int a = 0; a < h; ++a)
      for (int b = 0; b < h; ++b) entries[a][b] = x * bm(a, b);
    const Mat prod = ambient_left_action(ModuleMap::from_entries(s, entries));
    for (const TraceFunctional& tr : traces) {
      const ZValue v0 = extended_trace_value(tr, t, h), v1 = extended_trace_value(tr, t, h, basis);
      basis_err = std::max(basis_err, (v0 - v1).cwiseAbs().maxCoeff());
      const ZValue expect = bm.trace() * tr.apply(x);
      product_err = std::max(product_err, (extended_trace_value(tr, prod, h) - expect).cwiseAbs().maxCoeff());
    }
  }
  if (basis_err >= 1e-10) fail.add("extended trace basis dependence " + sci(basis_err));
  if (product_err >= 1e-10) fail.add("product formula error " + sci(product_err));
  notes.push_back("basis " + sci(basis_err) + ", product " + sci(product_err));

  r.pass = fail.count() == 0;
  r.detail.clear();
  for (const std::string& n : notes) r.detail += (r.detail.empty() ? "" : ", ") + n;
  r.detail += fail.summary();
  return r;
}

/// 8. N -> 2N refinement of band-limited scenarios.
inline CriterionResult criterion_refinement(std::uint64_t seed) {
  using namespace acceptance_detail;
  CriterionResult r{8, "refinement stability N -> 2N"};
  Failures fail;
  double worst = 0.0;
  std::mutex m;
  // each case returns (rounded indices, continuous quantities) at a resolution
  using Sample = std::pair<std::vector<long>, std::vector<cplx>>;
  const std::vector<FlatChoice> choices = flat_choices();
  const std::vector<std::pair<std::string, std::function<Sample(int)>>> cases{
      {"line c=2", [](int n) {
         const Bundle b = Bundle::line(2, Grid::torus(n));
         const IndexReport rep = index_report(b, TraceFunctional::normalized(b.owner()));
         return Sample{{std::lround(rep.analytic_index(0).real()), rep.k0_index[0]},
                       {rep.topological_index(0), rep.kernel_dim_t(0), rep.cokernel_dim_t(0)}};
       }},
      {"line c=-1 with random omega", [seed](int n) {
         const Bundle b0 = Bundle::line(-1, Grid::torus(n));
         std::mt19937_64 rng(seed + 8);
         const Bundle b = b0.with_omega(random_tensorial_omega(b0, rng, 0.4, 1));
         const IndexReport rep = index_report(b, TraceFunctional::normalized(b.owner()));
         return Sample{{std::lround(rep.analytic_index(0).real())},
                       {rep.topological_index(0), rep.kernel_dim_t(0), rep.cokernel_dim_t(0)}};
       }},
      {"E_1 (x) flat W over M2+C", [&choices, seed](int n) {
         std::mt19937_64 rng(seed + 9);
         const Grid g = Grid::torus(n);
         const Bundle b = tensor_with_vector_bundle(Bundle::line(1, g),
                                                    random_flat(ProjectiveModule(choices[8].projection), g, rng));
         const IndexReport rep = index_report(b, TraceFunctional::center_valued(b.owner()));
         std::vector<long> idx;
         std::vector<cplx> cont;
         for (Eigen::Index z = 0; z < rep.analytic_index.size(); ++z) {
           idx.push_back(std::lround(rep.analytic_index(z).real()));
           cont.push_back(rep.topological_index(z));
           cont.push_back(rep.kernel_dim_t(z));
         }
         return Sample{idx, cont};
       }},
      {"2-fold cover of c=1", [](int n) {
         const CoverComparison cc = compare_cover(Bundle::line(1, Grid::torus(n)), 2);
         return Sample{{std::lround(cc.base_index.real()), cc.cover_index},
                       {cc.l2_canonical, cc.twisted_canonical, cc.l2_delocalized.at(0)}};
       }},
  };
  const std::vector<int> base_n{12, 12, 8, 8};
  parallel_for(static_cast<int>(cases.size()), [&](int i) {
    const Sample a = cases[i].second(base_n[i]), b = cases[i].second(2 * base_n[i]);
    if (a.first != b.first) fail.add(cases[i].first + ": rounded index changed");
    double d = 0.0;
    for (std::size_t j = 0; j < a.second.size(); ++j) d = std::max(d, std::abs(a.second[j] - b.second[j]));
    {
      std::lock_guard<std::mutex> lock(m);
      worst = std::max(worst, d);
    }
    if (d >= 1e-8) fail.add(cases[i].first + ": continuous quantities moved by " + sci(d));
  });
  r.pass = fail.count() == 0;
  r.detail = std::to_string(cases.size()) + " scenarios, max change " + sci(worst) + fail.summary();
  return r;
}

using CriterionFn = CriterionResult (*)(std::uint64_t);

inline const std::vector<CriterionFn>& all_criteria() {
  static const std::vector<CriterionFn> v{criterion_classical, criterion_flat_twist,   criterion_cover,
                                          criterion_center_valued, criterion_chern_weil, criterion_retraction,
                                          criterion_modules,   criterion_refinement};
  return v;
}

/// Criteria ids of a named suite.
inline std::vector<int> suite_criteria(const std::string& name) {
  if (name == "all") return {1, 2, 3, 4, 5, 6, 7, 8};
  if (name == "chern") return {5, 6};
  if (name == "index") return {1, 2, 4, 8};
  if (name == "cover") return {3};
  if (name == "modules") return {7};
  throw ConfigError("unknown suite '" + name + "' (expected all, chern, index, cover or modules)");
}

inline CriterionResult run_criterion(int id, std::uint64_t seed) {
  acceptance_detail::Stopwatch sw;
  CriterionResult r;
  try {
    r = all_criteria().at(id - 1)(seed);
  } catch (const std::exception& ex) {
    r.id = id;
    r.name = "criterion " + std::to_string(id);
    r.pass = false;
    r.detail = std::string("exception: ") + ex.what();
  }
  r.seconds = sw.seconds();
  return r;
}

inline void print_result(const CriterionResult& r, std::ostream& os) {
  os << (r.pass ? "PASS" : "FAIL") << "  [" << r.id << "] " << r.name << " (" << acceptance_detail::fixed(r.seconds, 1)
     << " s): " << r.detail << std::endl;
}

}  // namespace ncindex
