#include <gtest/gtest.h>

#include <random>

#include "ncindex/forms.hpp"

using namespace ncindex;

namespace {

Mat scalar(cplx z) { return Mat::Constant(1, 1, z); }

// Random trigonometric polynomial with modes |m|, |n| <= 2 and d x d values.
std::function<Mat(double, double)> trig_field(int d, std::mt19937_64& rng) {
  std::vector<Mat> c;
  for (int i = 0; i < 25; ++i) c.push_back(linalg::random_gaussian(d, d, rng));
  return [c](double x, double y) {
    Mat v = Mat::Zero(c[0].rows(), c[0].cols());
    int i = 0;
    for (int m = -2; m <= 2; ++m)
      for (int n = -2; n <= 2; ++n, ++i) v += std::exp(2.0 * kPi * kI * (m * x + n * y)) * c[i];
    return v;
  };
}

}  // namespace

TEST(Forms, LineDerivativeIsExactOnBlochWaves) {
  const int n = 12;
  for (double theta : {0.0, 0.3, -0.45}) {
    const Mat d = line_derivative(n, 1.0, theta);
    for (int m = -3; m <= 3; ++m) {
      Vec f(n);
      for (int s = 0; s < n; ++s) f(s) = std::exp(2.0 * kPi * kI * (theta + m) * (s / double(n)));
      EXPECT_LT((d * f - 2.0 * kPi * kI * (theta + m) * f).norm(), 1e-10 * f.norm() * (1 + std::abs(m)));
    }
  }
}

TEST(Forms, BlochDerivativeMatchesPhasesOfMonodromy) {
  std::mt19937_64 rng(1);
  const int n = 10;
  const Mat m = linalg::random_unitary(3, rng);
  const Mat d = bloch_derivative(n, 1.0, m);
  const linalg::UnitaryPhases ph = linalg::unitary_phases(m);
  for (int j = 0; j < 3; ++j) {
    Vec f(n * 3);
    for (int s = 0; s < n; ++s)
      f.segment(s * 3, 3) = std::exp(2.0 * kPi * kI * ph.phases(j) * (s / double(n))) * ph.vectors.col(j);
    EXPECT_LT((d * f - 2.0 * kPi * kI * ph.phases(j) * f).norm(), 1e-10);
  }
}

TEST(Forms, ExteriorDerivativeSquaresToZero) {
  std::mt19937_64 rng(2);
  const Grid g = Grid::torus(12);
  const auto f = trig_field(2, rng);
  const MatrixForm a = MatrixForm::sample(g, 0, [&](double x, double y) { return std::vector<Mat>{f(x, y)}; });
  EXPECT_LT(exterior_d(exterior_d(a)).sup_norm(), 1e-9);
  EXPECT_THROW(exterior_d(exterior_d(exterior_d(a))), DomainError);
}

TEST(Forms, LeibnizRuleOnResolvedFields) {
  std::mt19937_64 rng(3);
  const Grid g = Grid::torus(12);
  const auto f1 = trig_field(2, rng), f2 = trig_field(2, rng);
  auto sample = [&](const std::function<Mat(double, double)>& f) {
    return MatrixForm::sample(g, 0, [&](double x, double y) { return std::vector<Mat>{f(x, y)}; });
  };
  const MatrixForm a = sample(f1), b = sample(f2);
  const MatrixForm lhs = exterior_d(wedge(a, b));
  const MatrixForm rhs = wedge(exterior_d(a), b) + wedge(a, exterior_d(b));
  EXPECT_LT(lhs.distance(rhs), 1e-9 * lhs.sup_norm());
}

TEST(Forms, WedgeOfOneFormsIsAntisymmetric) {
  std::mt19937_64 rng(4);
  const Grid g = Grid::torus(8);
  const auto f = trig_field(1, rng), h = trig_field(1, rng);
  const MatrixForm a = MatrixForm::sample(g, 1, [&](double x, double y) { return std::vector<Mat>{f(x, y), h(x, y)}; });
  const MatrixForm b = MatrixForm::sample(g, 1, [&](double x, double y) { return std::vector<Mat>{h(y, x), f(y, x)}; });
  EXPECT_LT((wedge(a, b) + wedge(b, a)).sup_norm(), 1e-12);
  EXPECT_LT(wedge(a, a).sup_norm(), 1e-12);
}

TEST(Forms, IntegrationIsExactOnTrigonometricPolynomials) {
  const Grid g = Grid::torus(8);
  const MatrixForm a = MatrixForm::sample(g, 2, [](double x, double y) {
    return std::vector<Mat>{scalar(std::pow(std::cos(2 * kPi * x), 2) + std::sin(2 * kPi * y) + 0.25)};
  });
  EXPECT_NEAR(integrate(a).real(), 0.75, 1e-14);
  const MatrixForm c = MatrixForm::sample(Grid::circle(8, 2.0), 1, [](double x, double) {
    return std::vector<Mat>{scalar(1.0 + std::cos(kPi * x))};
  });
  EXPECT_NEAR(integrate(c).real(), 2.0, 1e-14);
}

TEST(Forms, PullbackMultipliesIntegralByDegree) {
  std::mt19937_64 rng(5);
  const Grid g = Grid::torus(8);
  const auto f = trig_field(1, rng);
  const MatrixForm a = MatrixForm::sample(g, 2, [&](double x, double y) { return std::vector<Mat>{f(x, y)}; });
  for (int k : {1, 2, 3}) EXPECT_LT(std::abs(integrate(pullback_form(a, k)) - double(k) * integrate(a)), 1e-10);
}

TEST(Forms, PullbackCommutesWithD) {
  std::mt19937_64 rng(6);
  const Grid g = Grid::torus(8);
  const auto f = trig_field(2, rng);
  const MatrixForm a = MatrixForm::sample(g, 0, [&](double x, double y) { return std::vector<Mat>{f(x, y)}; });
  EXPECT_LT(exterior_d(pullback_form(a, 2)).distance(pullback_form(exterior_d(a), 2)), 1e-9);
}

TEST(Forms, TwistedEndomorphismFieldsAreDifferentiatedInTheirGauge) {
  // A(x + 1) = U A(x) U^* with U diagonal: entry (0, 1) is a Bloch wave of phase 0.2 - 0.7.
  const int n = 12;
  Automorphy aut;
  aut.charge = Mat::Zero(2, 2);
  Mat u = Mat::Zero(2, 2);
  u(0, 0) = std::polar(1.0, 2 * kPi * 0.2);
  u(1, 1) = std::polar(1.0, 2 * kPi * 0.7);
  aut.u = u;
  aut.v = Mat::Identity(2, 2);
  const Grid g = Grid::torus(n);
  const Twist tw{TwistKind::endomorphism, aut};
  const MatrixForm a = MatrixForm::sample(g, 0, [](double x, double) {
    Mat m = Mat::Zero(2, 2);
    m(0, 1) = std::exp(2.0 * kPi * kI * (-0.5) * x);
    return std::vector<Mat>{m};
  }, tw);
  const MatrixForm da = exterior_d(a);
  for (int p = 0; p < g.points(); ++p)
    EXPECT_LT(std::abs(da.at(0, p)(0, 1) - 2.0 * kPi * kI * (-0.5) * a.at(0, p)(0, 1)), 1e-9);
  EXPECT_NO_THROW(aut.validate(1.0, 1.0));
}

TEST(Forms, AutomorphyValidation) {
  Automorphy bad = Automorphy::line(0.5);
  EXPECT_THROW(bad.validate(1.0, 1.0), PreconditionError);
  EXPECT_NO_THROW(Automorphy::line(3.0).validate(1.0, 1.0));
}
