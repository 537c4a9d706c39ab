#include <gtest/gtest.h>

#include <random>

#include "ncindex/acceptance.hpp"

using namespace ncindex;
using acceptance_detail::random_flat;

TEST(Spectral, HermitianEigenResidualOnLargeMatrices) {
  std::mt19937_64 rng(1);
  for (int n : {8, 40, 120}) {
    const Mat h = linalg::random_hermitian(n, rng);
    const linalg::HermitianEigen e = linalg::hermitian_eig(h);
    EXPECT_LT((h * e.vectors - e.vectors * e.values.cast<cplx>().asDiagonal()).norm(), 1e-11 * n);
    EXPECT_LT((e.vectors.adjoint() * e.vectors - Mat::Identity(n, n)).norm(), 1e-11 * n);
    for (int i = 1; i < n; ++i) EXPECT_LE(e.values(i - 1), e.values(i));
  }
}

TEST(Spectral, TrivialBundleKernelIsConstants) {
  const TwistedOperator op = assemble_dolbeault(Bundle::line(0.0, Grid::torus(8)));
  const KernelData kd = kernel_data(op);
  EXPECT_EQ(kd.kernel_dims(), std::vector<int>{1});
  EXPECT_EQ(kd.cokernel_dims(), std::vector<int>{1});
  const Vec k = op.frame(0) * kd.kernel[0].col(0);
  EXPECT_LT((k - Vec::Constant(k.size(), k(0))).norm(), 1e-10);
}

TEST(Spectral, LineBundleKernelsFollowTheDegree) {
  const Grid g = Grid::torus(12);
  for (int c : {-2, 1, 2}) {
    const TwistedOperator op = assemble_dolbeault(Bundle::line(c, g));
    const KernelData kd = kernel_data(op);
    EXPECT_EQ(kd.kernel_dims()[0], std::max(c, 0)) << c;
    EXPECT_EQ(kd.cokernel_dims()[0], std::max(-c, 0)) << c;
    EXPECT_GT(kd.gap_ratio, 1e3);
  }
}

TEST(Spectral, GnsOperatorCommutesWithRightAction) {
  std::mt19937_64 rng(2);
  const SpecPtr s = AlgebraSpec::matrices({2, 1});
  const Bundle b = random_flat(ProjectiveModule::free(s, 1), Grid::torus(8), rng);
  const TwistedOperator op = assemble_dolbeault(b);
  const Mat d = op.gns_dbar();
  for (int i = 0; i < 3; ++i) {
    const Mat r = op.gns_right_action(AlgebraElement::random(s, rng));
    EXPECT_LT((d * r - r * d).norm(), 1e-10 * d.norm());
  }
}

TEST(Spectral, GnsRouteMatchesModuleRoute) {
  std::mt19937_64 rng(3);
  const SpecPtr s = AlgebraSpec::matrices({2, 1});
  const Grid g = Grid::torus(12);
  const Bundle b = tensor_with_vector_bundle(Bundle::line(2.0, g), random_flat(ProjectiveModule::free(s, 1), g, rng));
  const TwistedOperator op = assemble_dolbeault(b);
  const TraceFunctional cv = TraceFunctional::center_valued(s);
  const ZValue gns = analytic_index(op, cv).index;
  const ZValue k0 = apply_trace(cv, module_index(op).index);
  EXPECT_LT((gns - k0).norm(), 1e-9);
  EXPECT_LT((gns - topological_index(b, cv)).norm(), 1e-9);
  EXPECT_EQ(module_index(op).index.ranks, (std::vector<long long>{4, 2}));
}

TEST(Spectral, FlatTwistHasIndexZero) {
  std::mt19937_64 rng(4);
  const SpecPtr s = AlgebraSpec::matrices({2});
  const Bundle b = random_flat(ProjectiveModule::free(s, 1), Grid::torus(8), rng);
  const IndexReport r = index_report(b, TraceFunctional::normalized(s));
  EXPECT_LT(std::abs(r.analytic_index(0)), 1e-9);
  EXPECT_LT(r.discrepancy, 1e-9);
  EXPECT_EQ(r.k0_index, std::vector<long long>{0});
}

TEST(Spectral, MissingGapIsReported) {
  const TwistedOperator op = assemble_dolbeault(Bundle::line(1.0, Grid::torus(8)));
  EXPECT_THROW(kernel_data(op, -1.0, 1e300), SpectralGapError);
  try {
    gns_kernel(op, -1.0, 1e300);
    FAIL() << "expected a gap failure";
  } catch (const SpectralGapError& e) {
    EXPECT_GT(e.measured_gap(), 10.0);
  }
}

TEST(Spectral, RoundingResidual) {
  ZValue z(2);
  z << cplx(1.0 + 1e-9, 0.0), cplx(-2.0, 3e-10);
  EXPECT_NEAR(rounding_residual(z), 1e-9, 1e-15);
}
