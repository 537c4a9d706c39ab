#include <gtest/gtest.h>

#include <random>

#include "ncindex/algebra.hpp"

using namespace ncindex;

namespace {

// Convolution on a finite group computed directly from the multiplication table.
Vec convolve(const FiniteGroup& g, const Vec& f, const Vec& h) {
  Vec r = Vec::Zero(g.order());
  for (int a = 0; a < g.order(); ++a)
    for (int b = 0; b < g.order(); ++b) r(g.mul(a, b)) += f(a) * h(b);
  return r;
}

}  // namespace

TEST(Algebra, BlockProductMatchesDenseMatrices) {
  std::mt19937_64 rng(1);
  const SpecPtr s = AlgebraSpec::matrices({2, 1, 3});
  const AlgebraElement a = AlgebraElement::random(s, rng), b = AlgebraElement::random(s, rng);
  EXPECT_LT(((a * b).dense() - a.dense() * b.dense()).norm(), 1e-12);
  EXPECT_EQ(s->dimension(), 4 + 1 + 9);
}

TEST(Algebra, CStarIdentity) {
  std::mt19937_64 rng(2);
  for (const SpecPtr& s : {AlgebraSpec::matrices({3}), AlgebraSpec::matrices({2, 2}),
                           AlgebraSpec::group_algebra(FiniteGroup::cyclic(4)),
                           AlgebraSpec::group_algebra(FiniteGroup::dihedral(3))}) {
    for (int i = 0; i < 20; ++i) {
      const AlgebraElement a = AlgebraElement::random(s, rng);
      EXPECT_NEAR((a.adjoint() * a).norm(), a.norm() * a.norm(), 1e-12 * a.norm() * a.norm());
    }
  }
}

TEST(Algebra, GroupProductIsConvolution) {
  std::mt19937_64 rng(3);
  for (const FiniteGroup& g : {FiniteGroup::cyclic(5), FiniteGroup::parse("Z/2xZ/3"), FiniteGroup::dihedral(3)}) {
    const SpecPtr s = AlgebraSpec::group_algebra(g);
    const AlgebraElement a = AlgebraElement::random(s, rng), b = AlgebraElement::random(s, rng);
    EXPECT_LT(((a * b).coeffs() - convolve(g, a.coeffs(), b.coeffs())).norm(), 1e-12) << g.label();
  }
}

TEST(Algebra, AbelianGroupsAreBlockDecomposed) {
  EXPECT_TRUE(AlgebraSpec::group_algebra(FiniteGroup::cyclic(3))->block_decomposed());
  EXPECT_FALSE(AlgebraSpec::group_algebra(FiniteGroup::dihedral(3))->block_decomposed());
  EXPECT_EQ(AlgebraSpec::group_algebra(FiniteGroup::cyclic(3))->num_blocks(), 3);
}

TEST(Algebra, ConjugacyClassesOfS3) {
  const FiniteGroup g = FiniteGroup::parse("S3");
  std::vector<std::size_t> sizes;
  std::vector<bool> seen(g.order(), false);
  for (int h = 0; h < g.order(); ++h) {
    if (seen[h]) continue;
    const auto cls = g.conjugacy_class(h);
    for (int x : cls) seen[x] = true;
    sizes.push_back(cls.size());
  }
  std::sort(sizes.begin(), sizes.end());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{1, 2, 3}));
}

TEST(Algebra, TracesOnGroupAlgebras) {
  std::mt19937_64 rng(4);
  const SpecPtr s = AlgebraSpec::group_algebra(FiniteGroup::cyclic(4));
  const AlgebraElement a = AlgebraElement::random(s, rng);
  const Vec c = a.coeffs();
  EXPECT_LT(std::abs(canonical_group_trace(s).apply(a)(0) - c(0)), 1e-12);
  EXPECT_LT(std::abs(delocalized_trace(s, 3).apply(a)(0) - c(3)), 1e-12);
  // delocalized traces on block traces agree with the coefficient formula
  ZValue bt(s->num_blocks());
  for (int b = 0; b < s->num_blocks(); ++b) bt(b) = a.block(b).trace();
  EXPECT_LT(std::abs(delocalized_trace(s, 1).apply_to_block_traces(bt)(0) - c(1)), 1e-12);
  EXPECT_FALSE(delocalized_trace(s, 1).is_positive());
  EXPECT_TRUE(canonical_group_trace(s).is_normalized());
}

TEST(Algebra, CenterValuedTraceOfMatrixUnit) {
  const SpecPtr s = AlgebraSpec::matrices({2, 1});
  const ZValue z = TraceFunctional::center_valued(s).apply(AlgebraElement::matrix_unit(s, 0, 0, 0));
  EXPECT_NEAR(z(0).real(), 0.5, 1e-15);
  EXPECT_NEAR(std::abs(z(1)), 0.0, 1e-15);
  EXPECT_TRUE(TraceFunctional::normalized(s).is_normalized());
}

TEST(Algebra, SpectralProjectionIsProjection) {
  std::mt19937_64 rng(5);
  const SpecPtr s = AlgebraSpec::matrices({3, 2});
  const AlgebraElement a = AlgebraElement::random(s, rng);
  const AlgebraElement h = a + a.adjoint();
  const AlgebraElement p = spectral_calculus(h, indicator_above(0.0));
  EXPECT_LT((p * p).distance(p), 1e-12);
  EXPECT_LT(p.adjoint().distance(p), 1e-12);
  EXPECT_LT((p * h).distance(h * p), 1e-10);
}

TEST(Algebra, MixedOwnersAreRejected) {
  const SpecPtr s = AlgebraSpec::matrices({2}), t = AlgebraSpec::matrices({1, 1});
  EXPECT_THROW(AlgebraElement::identity(s) * AlgebraElement::identity(t), StructuralError);
  EXPECT_THROW(FiniteGroup::parse("Q8"), DomainError);
}
