#pragma once

// tau-Chern character ch_tau = tau(ev(exp((i/2pi) Omega))) of a bundle on S^1 or
// T^2, truncated at the top degree, and the topological side of the index
// formula for the Dolbeault operator on the flat torus (Todd class 1).
//
// Normalization: the degree-2j part is tau(ev(Omega^j)) (i/2pi)^j / j!, so a
// line bundle with automorphy charge c has integral c.

#include <string>
#include <vector>

#include "ncindex/bundle.hpp"

namespace ncindex {

struct ChernForm {
  Grid grid;
  Eigen::Index value_size = 1;
  std::vector<ZValue> degree0;  // one value per grid point
  std::vector<ZValue> degree2;  // empty on the circle
  std::string trace;            // description of the trace used
  std::string bundle;           // presentation of the bundle used

  ZValue integral0() const { return sum(degree0) * grid.cell_volume(); }
  ZValue integral2() const {
    if (degree2.empty()) return ZValue::Zero(value_size);
    return sum(degree2) * grid.cell_volume();
  }

  /// Degree-j part as 1 x 1 forms, one per component of Z.
  MatrixForm component_form(int degree, Eigen::Index component) const {
    const std::vector<ZValue>& src = degree == 0 ? degree0 : degree2;
    if (src.empty()) throw DomainError("no degree-" + std::to_string(degree) + " part");
    MatrixForm f(grid, degree, 1, 1);
    for (int p = 0; p < grid.points(); ++p) f.at(0, p)(0, 0) = src[p](component);
    return f;
  }

 private:
  ZValue sum(const std::vector<ZValue>& v) const {
    ZValue s = ZValue::Zero(value_size);
    for (const ZValue& z : v) s += z;
    return s;
  }
};

inline ChernForm ch_tau(const Bundle& b, const TraceFunctional& tau) {
  require_same_owner(b.owner(), tau.owner(), "ch_tau");
  if (!tau.is_positive()) throw PreconditionError("ch_tau needs a positive trace");
  const Grid& g = b.grid();
  ChernForm c;
  c.grid = g;
  c.value_size = tau.value_size();
  c.trace = tau.describe();
  c.bundle = to_string(b.presentation());
  const int nb = b.num_blocks();
  for (int p = 0; p < g.points(); ++p) {
    ZValue bt(nb);
    for (int k = 0; k < nb; ++k) bt(k) = b.block(k).projection.at(0, p).trace();
    c.degree0.push_back(tau.apply_to_block_traces(bt));
  }
  if (g.dim() == 2) {
    const std::vector<MatrixForm> omega = curvature(b);
    const cplx norm = kI / (2.0 * kPi);
    for (int p = 0; p < g.points(); ++p) {
      ZValue bt(nb);
      for (int k = 0; k < nb; ++k) bt(k) = norm * omega[k].at(0, p).trace();
      c.degree2.push_back(tau.apply_to_block_traces(bt));
    }
  }
  return c;
}

/// Delocalized and other signed traces are allowed here: ch is linear in tau.
inline ChernForm ch_linear(const Bundle& b, const TraceFunctional& tau) {
  const Grid& g = b.grid();
  ChernForm c;
  c.grid = g;
  c.value_size = tau.value_size();
  c.trace = tau.describe();
  c.bundle = to_string(b.presentation());
  const std::vector<MatrixForm> omega = g.dim() == 2 ? curvature(b) : std::vector<MatrixForm>{};
  for (int p = 0; p < g.points(); ++p) {
    ZValue b0(b.num_blocks()), b2(b.num_blocks());
    for (int k = 0; k < b.num_blocks(); ++k) {
      b0(k) = b.block(k).projection.at(0, p).trace();
      if (g.dim() == 2) b2(k) = kI / (2.0 * kPi) * omega[k].at(0, p).trace();
    }
    c.degree0.push_back(tau.apply_to_block_traces(b0));
    if (g.dim() == 2) c.degree2.push_back(tau.apply_to_block_traces(b2));
  }
  return c;
}

/// sup-norm of d applied to every non-top-degree part (on T^2 and S^1 only the
/// degree-0 part has a derivative to check).
inline double closedness_residual(const ChernForm& c) {
  double worst = 0.0;
  for (Eigen::Index z = 0; z < c.value_size; ++z) {
    const MatrixForm f = c.component_form(0, z);
    worst = std::max(worst, exterior_d(f).sup_norm());
  }
  return worst;
}

/// |int ch_tau(b1) - int ch_tau(b2)| for two connections on the same bundle.
inline double connection_independence_gap(const Bundle& b1, const Bundle& b2, const TraceFunctional& tau) {
  if (!(b1.grid() == b2.grid()) || b1.num_blocks() != b2.num_blocks())
    throw PreconditionError("connection comparison needs the same underlying bundle");
  for (int k = 0; k < b1.num_blocks(); ++k) {
    const BundleBlock &x = b1.block(k), &y = b2.block(k);
    if ((x.charge - y.charge).norm() > 1e-12 || (x.u - y.u).norm() > 1e-12 || (x.v - y.v).norm() > 1e-12 ||
        x.projection.distance(y.projection) > 1e-12)
      throw PreconditionError("connection comparison needs the same fiber and automorphy");
  }
  return (ch_tau(b1, tau).integral2() - ch_tau(b2, tau).integral2()).norm();
}

enum class OperatorKind { dolbeault_flat_torus, signature, dirac_curved };

inline std::string to_string(OperatorKind k) {
  switch (k) {
    case OperatorKind::dolbeault_flat_torus: return "dolbeault";
    case OperatorKind::signature: return "signature";
    case OperatorKind::dirac_curved: return "dirac_curved";
  }
  return "";
}

/// <ch(sigma(D)) Td ch_tau(W), [T^2]> for the Dolbeault operator on the flat
/// torus, where the characteristic factor is 1: the integral of the degree-2 part.
inline ZValue topological_index(const Bundle& b, const TraceFunctional& tau,
                                OperatorKind kind = OperatorKind::dolbeault_flat_torus) {
  if (kind != OperatorKind::dolbeault_flat_torus)
    throw DomainError("topological index is implemented for the Dolbeault operator on the flat torus only");
  if (b.grid().dim() != 2) throw DomainError("topological index needs a torus");
  return ch_linear(b, tau).integral2();
}

inline void write_csv(const ChernForm& c, std::ostream& os) {
  os << "x,y";
  for (Eigen::Index z = 0; z < c.value_size; ++z) {
    os << ",ch0_" << z << "_re,ch0_" << z << "_im";
    if (!c.degree2.empty()) os << ",ch2_" << z << "_re,ch2_" << z << "_im";
  }
  os << '\n' << std::setprecision(17);
  for (int s = 0; s < c.grid.nx; ++s)
    for (int t = 0; t < c.grid.ny; ++t) {
      const int p = c.grid.index(s, t);
      os << c.grid.x(s) << ',' << c.grid.y(t);
      for (Eigen::Index z = 0; z < c.value_size; ++z) {
        os << ',' << c.degree0[p](z).real() << ',' << c.degree0[p](z).imag();
        if (!c.degree2.empty()) os << ',' << c.degree2[p](z).real() << ',' << c.degree2[p](z).imag();
      }
      os << '\n';
    }
}

}  // namespace ncindex
