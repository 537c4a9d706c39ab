#include <gtest/gtest.h>

#include <random>

#include "ncindex/acceptance.hpp"

using namespace ncindex;
using acceptance_detail::random_flat;

TEST(Bundle, LineBundleCurvatureIsConstant) {
  const Grid g = Grid::torus(8);
  for (double c : {-2.0, 1.0, 3.0}) {
    const std::vector<MatrixForm> f = curvature(Bundle::line(c, g));
    for (int p = 0; p < g.points(); ++p) EXPECT_LT(std::abs(f[0].at(0, p)(0, 0) + 2.0 * kPi * kI * c), 1e-12);
  }
}

TEST(Bundle, FlatBundleHolonomyIsMonodromy) {
  std::mt19937_64 rng(1);
  const SpecPtr s = AlgebraSpec::matrices({2, 1});
  const Bundle b = random_flat(ProjectiveModule::free(s, 1), Grid::torus(8), rng);
  for (int k = 0; k < b.num_blocks(); ++k) {
    const auto [hx, hy] = holonomies(b, k, 2, 3);
    EXPECT_LT((hx - b.block(k).u).norm(), 1e-12);
    EXPECT_LT((hy - b.block(k).v).norm(), 1e-12);
    EXPECT_LT(curvature(b)[k].sup_norm(), 1e-12);
  }
}

TEST(Bundle, NonCommutingMonodromiesAreRejected) {
  std::mt19937_64 rng(2);
  const SpecPtr s = AlgebraSpec::matrices({2});
  const ModuleMap u = ModuleMap::diagonal(AlgebraElement::matrix_unit(s, 0, 0, 1) + AlgebraElement::matrix_unit(s, 0, 1, 0), 1);
  const ModuleMap v = ModuleMap::diagonal(AlgebraElement::matrix_unit(s, 0, 0, 0) - AlgebraElement::matrix_unit(s, 0, 1, 1), 1);
  EXPECT_THROW(flat_bundle(ProjectiveModule::free(s, 1), {u, v}, Grid::torus(8)), PreconditionError);
}

TEST(Bundle, RandomOmegaIsSkewAndKeepsAutomorphy) {
  std::mt19937_64 rng(3);
  const SpecPtr s = AlgebraSpec::matrices({2, 1});
  const Bundle b = random_flat(ProjectiveModule::free(s, 2), Grid::torus(8), rng);
  const std::vector<MatrixForm> om = random_tensorial_omega(b, rng, 0.5, 1);
  for (const MatrixForm& w : om) EXPECT_LT((w + w.adjoint()).sup_norm(), 1e-12);
  EXPECT_NO_THROW(b.with_omega(om).validate());
}

TEST(Bundle, RandomOmegaDoesNotDependOnGrid) {
  const Bundle coarse = Bundle::line(1.0, Grid::torus(8)), fine = Bundle::line(1.0, Grid::torus(16));
  std::mt19937_64 r1(4), r2(4);
  const MatrixForm a = random_tensorial_omega(coarse, r1)[0], b = random_tensorial_omega(fine, r2)[0];
  for (int s = 0; s < 8; ++s)
    for (int t = 0; t < 8; ++t)
      for (int c = 0; c < 2; ++c)
        EXPECT_LT((a.at(c, coarse.grid().index(s, t)) - b.at(c, fine.grid().index(2 * s, 2 * t))).norm(), 1e-13);
}

TEST(Bundle, MetricCompatibility) {
  std::mt19937_64 rng(5);
  const SpecPtr s = AlgebraSpec::matrices({2});
  const Grid g = Grid::torus(12);
  const Bundle triv = Bundle::trivialized(ProjectiveModule::free(s, 1), g);
  const Bundle b = triv.with_omega(random_tensorial_omega(triv, rng, 0.5, 1));
  auto section = [&](std::uint64_t seed) {
    std::mt19937_64 r(seed);
    const Mat c0 = linalg::random_gaussian(2, 2, r), c1 = linalg::random_gaussian(2, 2, r);
    return std::vector<MatrixForm>{MatrixForm::sample(g, 0, [&](double x, double y) {
      return std::vector<Mat>{Mat(c0 + std::exp(2.0 * kPi * kI * (x - y)) * c1)};
    })};
  };
  EXPECT_LT(metric_compatibility_residual(b, section(10), section(11)), 1e-9);
}

TEST(Bundle, RetractionReturnsNearbyProjection) {
  std::mt19937_64 rng(6);
  const Grid g = Grid::torus(8);
  const MatrixForm e = two_band_projection(g, 1.0);
  const MatrixForm f = e.map([&](const Mat& m) { return Mat(m + 0.01 * linalg::random_gaussian(2, 2, rng)); });
  const MatrixForm r = retract_projection(f, 0.1, &e);
  for (int p = 0; p < g.points(); ++p) {
    const Mat& q = r.at(0, p);
    EXPECT_LT((q * q - q).norm(), 1e-12);
    EXPECT_LT((q - q.adjoint()).norm(), 1e-12);
  }
  EXPECT_LT(r.distance(e), 0.1);
  EXPECT_GT(image_isomorphism_margin(r, e), 0.9);
}

TEST(Bundle, RetractionRejectsForbiddenBand) {
  const Grid g = Grid::circle(8);
  const MatrixForm half = MatrixForm::constant(g, 0, {Mat(0.5 * Mat::Identity(2, 2))});
  EXPECT_THROW(retract_projection(half), RetractionError);
  const MatrixForm e = MatrixForm::constant(g, 0, {Mat(Mat::Identity(2, 2))});
  EXPECT_THROW(retract_projection(half, 0.2, &e), PreconditionError);
}

TEST(Bundle, GrassmannCurvatureOfTwoBandModel) {
  const Grid g = Grid::torus(32);
  const Bundle b = Bundle::projection_field(AlgebraSpec::matrices({1}), 2, {two_band_projection(g, 1.0)});
  cplx total = 0.0;
  const MatrixForm f = curvature(b)[0];
  for (int p = 0; p < g.points(); ++p) total += f.at(0, p).trace();
  total *= kI / (2.0 * kPi) * g.cell_volume();
  EXPECT_NEAR(std::abs(total.real()), 1.0, 1e-3);
  EXPECT_LT(std::abs(total.imag()), 1e-10);
}

TEST(Bundle, ComplementAddsUpToTrivial) {
  const Grid g = Grid::torus(8);
  const Bundle b = Bundle::projection_field(AlgebraSpec::matrices({1}), 2, {two_band_projection(g, 0.5)});
  const Bundle c = complement(b);
  for (int p = 0; p < g.points(); ++p)
    EXPECT_LT((b.block(0).projection.at(0, p) + c.block(0).projection.at(0, p) - Mat::Identity(2, 2)).norm(), 1e-12);
}

TEST(Bundle, PullbackMultipliesCharge) {
  const Bundle b = Bundle::line(2.0, Grid::torus(8));
  const Bundle p = pullback(b, 3);
  EXPECT_EQ(p.grid().nx, 24);
  EXPECT_NEAR(p.block(0).charge(0, 0).real(), 6.0, 1e-15);
}

TEST(Bundle, DirectSumIsBlockDiagonal) {
  const Grid g = Grid::torus(8);
  const Bundle d = direct_sum(Bundle::line(1.0, g), Bundle::line(-2.0, g));
  EXPECT_EQ(d.rank(), 2);
  EXPECT_NEAR(d.block(0).charge.trace().real(), -1.0, 1e-15);
}
