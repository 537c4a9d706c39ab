#include <gtest/gtest.h>

#include <random>

#include "ncindex/gns.hpp"

using namespace ncindex;

namespace {

ModuleMap random_projection_map(const SpecPtr& s, int n, std::mt19937_64& rng) {
  ModuleMap p = ModuleMap::zero(s, n, n);
  for (int b = 0; b < s->num_blocks(); ++b) {
    const int d = n * s->block_size(b);
    p.block(b) = linalg::random_projection(d, 1 + b % d, rng);
  }
  return p;
}

}  // namespace

TEST(Gns, BasisVectorsAreOrthonormal) {
  std::mt19937_64 rng(1);
  const SpecPtr s = AlgebraSpec::matrices({2, 1});
  const GnsSpace x(ProjectiveModule(random_projection_map(s, 2, rng)), TraceFunctional::normalized(s));
  std::vector<ModuleVector> vs;
  for (int k = 0; k < x.dimension(); ++k) vs.push_back(x.basis_vector(k));
  const Mat g = gram_matrix(vs, x.trace());
  EXPECT_LT((g - Mat::Identity(g.rows(), g.cols())).norm(), 1e-12);
}

TEST(Gns, RightActionIsAnAntiRepresentation) {
  std::mt19937_64 rng(2);
  const SpecPtr s = AlgebraSpec::matrices({2, 3});
  const GnsSpace x(ProjectiveModule::free(s, 2), TraceFunctional::normalized(s));
  const AlgebraElement a = AlgebraElement::random(s, rng), b = AlgebraElement::random(s, rng);
  EXPECT_LT((x.right_action(a * b) - x.right_action(b) * x.right_action(a)).norm(), 1e-11);
  EXPECT_LT((x.right_action(a.adjoint()) - x.right_action(a).adjoint()).norm(), 1e-12);
}

TEST(Gns, ExtendedMapsCommuteWithRightAction) {
  std::mt19937_64 rng(3);
  const SpecPtr s = AlgebraSpec::group_algebra(FiniteGroup::cyclic(3));
  const ProjectiveModule p(random_projection_map(s, 2, rng));
  const GnsSpace x(p, TraceFunctional::canonical_group_trace(s));
  const ModuleMap f = p.projection() * ModuleMap::random(s, 2, 2, rng) * p.projection();
  const Mat t = x.extend_map(f);
  for (const Mat& r : x.right_action_generators()) EXPECT_LT((t * r - r * t).norm(), 1e-12);
}

TEST(Gns, CommutantOfRightActionIsMatrixAlgebraOverA) {
  const SpecPtr s = AlgebraSpec::matrices({2, 1});
  const int n = 2;
  std::vector<Mat> gens;
  for (int b = 0; b < s->num_blocks(); ++b)
    for (int i = 0; i < s->block_size(b); ++i)
      for (int j = 0; j < s->block_size(b); ++j)
        gens.push_back(ambient_right_action(AlgebraElement::matrix_unit(s, b, i, j), n));
  // End_A(A^2) = M_2(A) has dimension sum (2 n_b)^2
  EXPECT_EQ(commutant(gens).size(), 16u + 4u);
}

TEST(Gns, RecoverMapInvertsLeftAction) {
  std::mt19937_64 rng(4);
  const SpecPtr s = AlgebraSpec::matrices({3, 1});
  const ModuleMap f = ModuleMap::random(s, 2, 2, rng);
  const Mat t = ambient_left_action(f);
  EXPECT_LT(right_action_commutator(t, s, 2), 1e-12);
  EXPECT_LT(recover_map(t, s, 2).distance(f), 1e-12);
}

TEST(Gns, RecoverModuleRoundTrip) {
  std::mt19937_64 rng(5);
  const SpecPtr s = AlgebraSpec::matrices({2, 1});
  const ProjectiveModule p(random_projection_map(s, 2, rng));
  const ProjectiveModule q = recover_module(GnsSpace(p, TraceFunctional::normalized(s)));
  EXPECT_LT(q.projection().distance(p.projection()), 1e-12);
}

TEST(Gns, CommutatorSeesSmallPerturbations) {
  std::mt19937_64 rng(6);
  const SpecPtr s = AlgebraSpec::matrices({2});
  Mat t = ambient_left_action(ModuleMap::identity(s, 1));
  EXPECT_EQ(right_action_commutator(t, s, 1), 0.0);
  t(0, 1) += 1e-9;
  EXPECT_GT(right_action_commutator(t, s, 1), 5e-10);
}

TEST(Gns, ExtendedTraceOfProjectionIsDimension) {
  std::mt19937_64 rng(7);
  for (const SpecPtr& s : {AlgebraSpec::matrices({2, 1}), AlgebraSpec::group_algebra(FiniteGroup::cyclic(3))}) {
    const TraceFunctional tau = s->group() ? TraceFunctional::canonical_group_trace(s) : TraceFunctional::normalized(s);
    const ProjectiveModule p(random_projection_map(s, 2, rng));
    const ZValue ext = extended_trace_value(tau, ambient_left_action(p.projection()), 2);
    EXPECT_LT((ext - dim_tau(p, tau)).norm(), 1e-12);
    const GnsSpace x(p, tau);
    const Mat id = Mat::Identity(x.dimension(), x.dimension());
    EXPECT_LT((extended_trace_value(tau, x, id) - dim_tau(p, tau)).norm(), 1e-12);
  }
}

TEST(Gns, ExtendedTraceIsBasisIndependent) {
  std::mt19937_64 rng(8);
  const SpecPtr s = AlgebraSpec::matrices({2, 1});
  const TraceFunctional cv = TraceFunctional::center_valued(s);
  const Mat a = ambient_left_action(ModuleMap::random(s, 3, 3, rng));
  const Mat w = linalg::random_unitary(3, rng);
  EXPECT_LT((extended_trace_value(cv, a, 3, w) - extended_trace_value(cv, a, 3)).norm(), 1e-12);
}

TEST(Gns, RejectsOperatorsOutsideTheCommutant) {
  std::mt19937_64 rng(9);
  const SpecPtr s = AlgebraSpec::matrices({2});
  const Mat a = linalg::random_hermitian(4, rng);
  EXPECT_THROW(extended_trace_value(TraceFunctional::normalized(s), a, 1), PreconditionError);
  EXPECT_THROW(recover_map(a, s, 1), PreconditionError);
}

TEST(Gns, RejectsDegenerateTracesAndNonabelianGroups) {
  const SpecPtr s = AlgebraSpec::matrices({1, 1});
  EXPECT_THROW(GnsSpace(ProjectiveModule::free(s, 1), TraceFunctional::scalar(s, {1.0, 0.0})), PreconditionError);
  const SpecPtr d = AlgebraSpec::group_algebra(FiniteGroup::dihedral(3));
  EXPECT_THROW(GnsSpace(ProjectiveModule::free(d, 1), TraceFunctional::canonical_group_trace(d)), DomainError);
}
