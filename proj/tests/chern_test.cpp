#include <gtest/gtest.h>

#include <random>

#include "ncindex/acceptance.hpp"

using namespace ncindex;
using acceptance_detail::random_flat;

TEST(Chern, LineBundleIntegratesToCharge) {
  const Grid g = Grid::torus(8);
  for (int c = -3; c <= 3; ++c) {
    const ChernForm ch = ch_tau(Bundle::line(c, g), TraceFunctional::normalized(AlgebraSpec::matrices({1})));
    EXPECT_NEAR(ch.integral2()(0).real(), c, 1e-12);
    EXPECT_NEAR(ch.integral0()(0).real(), 1.0, 1e-14);
    EXPECT_LT(closedness_residual(ch), 1e-12);
  }
}

TEST(Chern, IndependentOfConnection) {
  std::mt19937_64 rng(1);
  const Grid g = Grid::torus(10);
  const Bundle b = Bundle::line(2.0, g);
  const TraceFunctional tau = TraceFunctional::normalized(b.owner());
  for (int i = 0; i < 3; ++i) {
    const Bundle w = b.with_omega(random_tensorial_omega(b, rng, 0.6, 2));
    EXPECT_LT(connection_independence_gap(b, w, tau), 1e-10);
  }
}

TEST(Chern, FlatBundlesHaveNoDegreeTwoPart) {
  std::mt19937_64 rng(2);
  const SpecPtr s = AlgebraSpec::matrices({2, 1});
  const Bundle b = random_flat(ProjectiveModule::free(s, 2), Grid::torus(8), rng);
  const ChernForm ch = ch_tau(b, TraceFunctional::center_valued(s));
  EXPECT_LT(ch.integral2().norm(), 1e-12);
  EXPECT_LT((ch.integral0() - ZValue::Constant(2, 2.0)).norm(), 1e-12);
}

TEST(Chern, ScalarTraceIsCombinationOfCenterValued) {
  std::mt19937_64 rng(3);
  const SpecPtr s = AlgebraSpec::matrices({2, 1});
  const Grid g = Grid::torus(8);
  Bundle b = tensor_with_vector_bundle(Bundle::line(-1.0, g), random_flat(ProjectiveModule::free(s, 1), g, rng));
  b = b.with_omega(random_tensorial_omega(b, rng));
  const std::vector<double> w{0.3, 0.4};
  const ZValue cv = ch_tau(b, TraceFunctional::center_valued(s)).integral2();
  const cplx sc = ch_tau(b, TraceFunctional::scalar(s, w)).integral2()(0);
  EXPECT_LT(std::abs(sc - (w[0] * 2.0 * cv(0) + w[1] * 1.0 * cv(1))), 1e-12);
  EXPECT_LT((cv - ZValue::Constant(2, -1.0)).norm(), 1e-10);
}

TEST(Chern, SignedTracesNeedTheLinearForm) {
  const Bundle b = flat_group_twist(Bundle::line(1.0, Grid::torus(8)), 3);
  const TraceFunctional deloc = TraceFunctional::delocalized(b.owner(), 1);
  EXPECT_THROW(ch_tau(b, deloc), PreconditionError);
  EXPECT_LT(std::abs(ch_linear(b, deloc).integral2()(0)), 1e-12);
  EXPECT_NEAR(ch_linear(b, TraceFunctional::canonical_group_trace(b.owner())).integral2()(0).real(), 1.0, 1e-12);
}

TEST(Chern, TopologicalIndexOnlyForDolbeault) {
  const Bundle b = Bundle::line(1.0, Grid::torus(8));
  const TraceFunctional tau = TraceFunctional::normalized(b.owner());
  EXPECT_NEAR(topological_index(b, tau)(0).real(), 1.0, 1e-12);
  EXPECT_THROW(topological_index(b, tau, OperatorKind::signature), DomainError);
}

TEST(Chern, CsvHasOneRowPerPoint) {
  const ChernForm ch = ch_tau(Bundle::line(1.0, Grid::torus(8)), TraceFunctional::normalized(AlgebraSpec::matrices({1})));
  std::ostringstream os;
  write_csv(ch, os);
  const std::string text = os.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 64);
}
