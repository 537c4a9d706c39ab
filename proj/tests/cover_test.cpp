#include <gtest/gtest.h>

#include <random>

#include "ncindex/acceptance.hpp"

using namespace ncindex;

TEST(Cover, DegreeOneCoverIsTheBase) {
  const Bundle b = Bundle::line(1.0, Grid::torus(8));
  const CoverSpec c = CoverSpec::cyclic(b.grid(), 1);
  const Mat t = deck_action(b, c, 1);
  EXPECT_LT((t - Mat::Identity(t.rows(), t.cols())).norm(), 1e-13);
  const TwistedOperator base = assemble_dolbeault(b), lifted = lift_operator(b, c);
  EXPECT_LT((base.laplacian(0, +1) - lifted.laplacian(0, +1)).norm(), 1e-9 * base.lambda_max());
}

TEST(Cover, DeckGroupActsAndCommutesWithLift) {
  const Bundle b = Bundle::line(1.0, Grid::torus(8));
  for (int k : {2, 3}) {
    const CoverSpec c = CoverSpec::cyclic(b.grid(), k);
    const Mat t = deck_action(b, c, 1);
    EXPECT_LT((deck_action(b, c, k) - Mat::Identity(t.rows(), t.cols())).norm(), 1e-12);
    EXPECT_LT((t.adjoint() * t - Mat::Identity(t.rows(), t.cols())).norm(), 1e-12);
    const TwistedOperator lifted = lift_operator(b, c);
    const Mat lc = lifted.frame(0) * lifted.laplacian(0, +1) * lifted.frame(0).adjoint();
    EXPECT_LT((t * lc - lc * t).norm(), 1e-12 * lc.norm());
  }
}

TEST(Cover, InvariantEmbeddingLandsInInvariants) {
  const Bundle b = Bundle::line(2.0, Grid::torus(8));
  const CoverSpec c = CoverSpec::cyclic(b.grid(), 3);
  const Mat j = invariant_embedding(b, c), t = deck_action(b, c, 1);
  EXPECT_LT((j.adjoint() * j - Mat::Identity(j.cols(), j.cols())).norm(), 1e-12);
  EXPECT_LT((t * j - j).norm(), 1e-12);
}

TEST(Cover, DictionaryIsUnitaryAndIntertwines) {
  const Bundle b = Bundle::line(1.0, Grid::torus(8));
  const CoverSpec c = CoverSpec::cyclic(b.grid(), 2);
  const Mat u = dictionary_unitary(b, c);
  EXPECT_LT((u.adjoint() * u - Mat::Identity(u.cols(), u.cols())).norm(), 1e-12);
  const TwistedOperator lifted = lift_operator(b, c), h = assemble_dolbeault(regular_twist_bundle(b, 2));
  const Mat lc = lifted.frame(0) * lifted.laplacian(0, +1) * lifted.frame(0).adjoint();
  const Mat lh = h.frame(0) * h.laplacian(0, +1) * h.frame(0).adjoint();
  EXPECT_LT((u * lc * u.adjoint() - lh).norm(), 1e-10 * lh.norm());
}

TEST(Cover, L2IndicesOfLiftedLineBundle) {
  for (int k : {2, 3}) {
    const CoverComparison cc = compare_cover(Bundle::line(1.0, Grid::torus(8)), k);
    EXPECT_NEAR(cc.base_index.real(), 1.0, 1e-9);
    EXPECT_EQ(cc.cover_index, k);
    EXPECT_LT(std::abs(cc.l2_canonical - 1.0), 1e-9);
    EXPECT_LT(std::abs(cc.twisted_canonical - 1.0), 1e-9);
    for (cplx z : cc.l2_delocalized) EXPECT_LT(std::abs(z), 1e-9);
    for (cplx z : cc.twisted_delocalized) EXPECT_LT(std::abs(z), 1e-9);
    EXPECT_LT(cc.deck_commutator, 1e-12);
    EXPECT_LT(cc.dictionary_residual, 1e-10);
  }
}

TEST(Cover, UnsupportedCoversAreRejected) {
  const Grid g = Grid::torus(8);
  EXPECT_THROW(CoverSpec::cyclic(g, 2, "y"), DomainError);
  EXPECT_THROW(CoverSpec::cyclic(Grid::circle(8), 2), DomainError);
  const Bundle pf = Bundle::projection_field(AlgebraSpec::matrices({1}), 2, {two_band_projection(g, 1.0)});
  EXPECT_THROW(lift_bundle(pf, CoverSpec::cyclic(g, 2)), DomainError);
}
