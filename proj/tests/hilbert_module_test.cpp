#include <gtest/gtest.h>

#include <Eigen/QR>
#include <random>

#include "ncindex/hilbert_module.hpp"

using namespace ncindex;

namespace {

int qr_rank(const Mat& m) {
  Eigen::ColPivHouseholderQR<Mat> qr(m);
  qr.setThreshold(1e-9);
  return static_cast<int>(qr.rank());
}

}  // namespace

TEST(HilbertModule, InnerProductIsRightLinearAndPositive) {
  std::mt19937_64 rng(1);
  const SpecPtr s = AlgebraSpec::matrices({2, 1});
  const ModuleVector v = ModuleVector::random(s, 3, rng), w = ModuleVector::random(s, 3, rng);
  const AlgebraElement a = AlgebraElement::random(s, rng);
  EXPECT_LT(inner_product(v, w.right_mul(a)).distance(inner_product(v, w) * a), 1e-12);
  EXPECT_LT(inner_product(v, w).adjoint().distance(inner_product(w, v)), 1e-12);
  const AlgebraElement vv = inner_product(v, v);
  for (const Mat& b : vv.blocks()) EXPECT_GT(linalg::hermitian_eig(b).values.minCoeff(), -1e-12);
}

TEST(HilbertModule, AdjointSatisfiesInnerProductIdentity) {
  std::mt19937_64 rng(2);
  const SpecPtr s = AlgebraSpec::group_algebra(FiniteGroup::cyclic(3));
  const ModuleMap f = ModuleMap::random(s, 2, 3, rng);
  const ModuleVector v = ModuleVector::random(s, 3, rng), w = ModuleVector::random(s, 2, rng);
  EXPECT_LT(inner_product(w, apply(f, v)).distance(inner_product(apply(f.adjoint(), w), v)), 1e-12);
}

TEST(HilbertModule, NormBoundsOverCommutativeAlgebras) {
  std::mt19937_64 rng(3);
  for (const SpecPtr& s : {AlgebraSpec::matrices({1}), AlgebraSpec::matrices({1, 1, 1}),
                           AlgebraSpec::group_algebra(FiniteGroup::cyclic(4))}) {
    for (int i = 0; i < 30; ++i) {
      const int m = 1 + i % 3, n = 1 + (i / 3) % 3;
      const ModuleNorms nm = module_norms(ModuleMap::random(s, m, n, rng));
      EXPECT_LE(nm.op, nm.hilbert * (1 + 1e-12));
      EXPECT_LE(nm.hilbert, std::sqrt(n) * nm.op * (1 + 1e-12));
    }
  }
}

// Over M2 the row (e11, e12) : A^2 -> A has ||Phi||^2 = ||e11 e11^* + e12 e12^*|| = 2 while
// |Phi|^2 = ||e11^* e11 + e12^* e12|| = ||1|| = 1, so ||Phi|| <= |Phi| fails; sqrt(n)|Phi| still bounds it.
TEST(HilbertModule, NormLowerBoundFailsOverMatrices) {
  const SpecPtr s = AlgebraSpec::matrices({2});
  const ModuleMap row = ModuleMap::from_entries(
      s, {{AlgebraElement::matrix_unit(s, 0, 0, 0), AlgebraElement::matrix_unit(s, 0, 0, 1)}});
  const ModuleNorms nm = module_norms(row);
  EXPECT_NEAR(nm.op, std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(nm.hilbert, 1.0, 1e-12);
  EXPECT_GT(nm.op, nm.hilbert);
  EXPECT_LE(nm.op, std::sqrt(2.0) * nm.hilbert + 1e-12);
}

TEST(HilbertModule, UpperNormBoundHoldsOverMatrices) {
  std::mt19937_64 rng(4);
  const SpecPtr s = AlgebraSpec::matrices({2, 1});
  for (int i = 0; i < 50; ++i) {
    const int m = 1 + i % 3, n = 1 + (i / 3) % 3;
    const ModuleNorms nm = module_norms(ModuleMap::random(s, m, n, rng));
    EXPECT_LE(nm.hilbert, std::sqrt(n) * nm.op * (1 + 1e-12));
    EXPECT_LE(nm.op, std::sqrt(n) * nm.hilbert * (1 + 1e-12));
  }
}

TEST(HilbertModule, PolarDecomposition) {
  std::mt19937_64 rng(5);
  const SpecPtr s = AlgebraSpec::matrices({2, 3});
  const ModuleMap f = ModuleMap::random(s, 3, 1, rng) * ModuleMap::random(s, 1, 2, rng);  // rank deficient
  const PolarDecomposition pd = polar_decomposition(f);
  EXPECT_LT((pd.u * pd.abs).distance(f), 1e-12);
  EXPECT_LT((pd.abs * pd.abs).distance(f.adjoint() * f), 1e-10);
  EXPECT_LT((pd.u * pd.u.adjoint() * pd.u).distance(pd.u), 1e-12);
}

TEST(HilbertModule, EvIsATrace) {
  std::mt19937_64 rng(6);
  const SpecPtr s = AlgebraSpec::matrices({2, 1});
  const ModuleMap f = ModuleMap::random(s, 2, 3, rng), g = ModuleMap::random(s, 3, 2, rng);
  EXPECT_LT((ev_endomorphism(f * g) - ev_endomorphism(g * f)).norm(), 1e-12);
}

TEST(HilbertModule, ClassesAndDimensions) {
  const SpecPtr s = AlgebraSpec::matrices({2});
  const ProjectiveModule p(ModuleMap::diagonal(AlgebraElement::matrix_unit(s, 0, 0, 0), 1));
  EXPECT_EQ(class_of(p).ranks, std::vector<long long>{1});
  EXPECT_NEAR(dim_tau(p, TraceFunctional::normalized(s))(0).real(), 0.5, 1e-15);
  EXPECT_EQ(class_of(ProjectiveModule::free(s, 1)).ranks, std::vector<long long>{2});
  EXPECT_THROW(ProjectiveModule(ModuleMap::diagonal(AlgebraElement::scalar(s, 2.0), 1)), PreconditionError);
}

TEST(HilbertModule, FredholmIndexMatchesRankNullity) {
  std::mt19937_64 rng(7);
  const SpecPtr s = AlgebraSpec::matrices({2, 1});
  for (int r = 1; r <= 2; ++r) {
    const ModuleMap f = ModuleMap::random(s, 3, r, rng) * ModuleMap::random(s, r, 2, rng);
    const FredholmData fd = fredholm_data(f);
    for (int b = 0; b < s->num_blocks(); ++b) {
      const int nb = s->block_size(b), rk = qr_rank(f.block(b));
      EXPECT_EQ(class_of(fd.kernel).ranks[b], 2 * nb - rk);
      EXPECT_EQ(class_of(fd.cokernel).ranks[b], 3 * nb - rk);
      EXPECT_EQ(fd.index.ranks[b], -nb);
    }
  }
}

TEST(HilbertModule, InvertibleMapHasZeroIndex) {
  std::mt19937_64 rng(8);
  const SpecPtr s = AlgebraSpec::matrices({3});
  const FredholmData fd = fredholm_data(ModuleMap::random(s, 2, 2, rng));
  EXPECT_EQ(fd.index.ranks, std::vector<long long>{0});
  EXPECT_EQ(class_of(fd.kernel).ranks, std::vector<long long>{0});
}
