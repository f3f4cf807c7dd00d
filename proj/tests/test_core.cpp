#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "covsteer/core.hpp"
#include "covsteer/serialization.hpp"

using namespace covsteer;

TEST_CASE("eigenvalue extremes on symmetric matrices") {
  Matrix M(2, 2);
  M << 2.0, 1.0, 1.0, 2.0;
  CHECK(min_eigenvalue(M) == doctest::Approx(1.0));
  CHECK(max_eigenvalue(M) == doctest::Approx(3.0));

  Matrix asym(2, 2);
  asym << 1.0, 2.0, 0.0, 1.0;
  CHECK_THROWS_AS(min_eigenvalue(asym), std::invalid_argument);
}

TEST_CASE("Loewner order") {
  const Matrix I = Matrix::Identity(3, 3);
  CHECK(psd_order_leq(I, 2.0 * I));
  CHECK(!psd_order_leq(2.0 * I, I));
  CHECK(psd_order_leq(I, I));  // equality within tolerance
}

TEST_CASE("system constructor validates shape and nonsingularity") {
  Matrix A = Matrix::Identity(2, 2);
  Matrix B(2, 1);
  B << 0.0, 1.0;
  Matrix D = 0.1 * Matrix::Identity(2, 2);
  LinearGaussianSystem sys(A, B, D);
  CHECK(sys.n == 2);
  CHECK(sys.m == 1);

  Matrix singular = Matrix::Zero(2, 2);
  CHECK_THROWS_AS(LinearGaussianSystem(singular, B, D), std::invalid_argument);
  CHECK_THROWS_AS(LinearGaussianSystem(A, Matrix::Zero(3, 1), D), std::invalid_argument);
}

TEST_CASE("belief symmetrizes and rejects indefinite covariance") {
  Vector mu(2);
  mu << 1.0, 2.0;
  Matrix almost(2, 2);
  almost << 1.0, 0.3 + 1e-12, 0.3, 1.0;
  GaussianBelief b(mu, almost);
  CHECK(b.covariance(0, 1) == doctest::Approx(b.covariance(1, 0)));

  Matrix indefinite(2, 2);
  indefinite << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(GaussianBelief(mu, indefinite), std::invalid_argument);
}

TEST_CASE("chance constraint validation") {
  Vector a(2);
  a << 1.0, 0.0;
  CHECK_NOTHROW(HalfspaceChanceConstraint(a, 1.0, 0.05));
  CHECK_THROWS_AS(HalfspaceChanceConstraint(a, 1.0, 0.6), std::invalid_argument);
  CHECK_THROWS_AS(HalfspaceChanceConstraint(a, 1.0, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(HalfspaceChanceConstraint(Vector::Zero(2), 1.0, 0.05), std::invalid_argument);
}

TEST_CASE("feedback law dimensions") {
  AffineFeedbackLaw law({{Matrix::Zero(1, 2), Vector::Zero(1)},
                         {Matrix::Ones(1, 2), Vector::Ones(1)}});
  CHECK(law.length() == 2);
  CHECK(law.state_dim() == 2);
  CHECK(law.input_dim() == 1);
}

TEST_CASE("steering weights factories") {
  const auto zero = SteeringWeights::zero(2, 1, 3);
  CHECK(zero.horizon() == 3);
  CHECK(zero.all_zero());
  const auto effort = SteeringWeights::identity_effort(2, 1, 3);
  CHECK(!effort.all_zero());
  CHECK(effort.R[0](0, 0) == doctest::Approx(1.0));
  CHECK(effort.Q[0].isZero());
}

TEST_CASE("JSON round trips preserve every field") {
  Matrix A(2, 2);
  A << 1.0, 0.1, 0.0, 1.0;
  Matrix B(2, 1);
  B << 0.0, 0.1;
  LinearGaussianSystem sys(A, B, 0.05 * Matrix::Identity(2, 2), 0.1);
  json js = sys;
  const auto sys2 = js.get<LinearGaussianSystem>();
  CHECK(sys2.A.isApprox(sys.A));
  CHECK(sys2.B.isApprox(sys.B));
  CHECK(sys2.D.isApprox(sys.D));
  CHECK(sys2.dt == doctest::Approx(0.1));
  CHECK(js.contains("a"));
  CHECK(js.contains("b"));
  CHECK(js.contains("d"));
  CHECK(js.contains("n"));
  CHECK(js.contains("m"));
  CHECK(js.contains("dt"));

  Vector mu(2);
  mu << -1.0, 2.0;
  GaussianBelief belief(mu, Matrix::Identity(2, 2));
  json jb = belief;
  CHECK(jb.contains("mean"));
  CHECK(jb.contains("covariance"));
  CHECK(jb.get<GaussianBelief>().mean.isApprox(mu));

  Vector alpha(1);
  alpha << 1.0;
  HalfspaceChanceConstraint c(alpha, 2.5, 0.05);
  json jc = c;
  CHECK(jc.at("beta").get<double>() == doctest::Approx(2.5));
  CHECK(jc.at("epsilon").get<double>() == doctest::Approx(0.05));
  const auto c2 = jc.get<HalfspaceChanceConstraint>();
  CHECK(c2.alpha.isApprox(alpha));

  PlanningScene scene({HalfspaceChanceConstraint(mu, 3.0, 0.1)}, {c},
                      Matrix::Identity(2, 2), Matrix::Identity(1, 1));
  json jscene = scene;
  CHECK(jscene.contains("sigma_ref"));
  CHECK(jscene.contains("y_ref"));
  const auto scene2 = jscene.get<PlanningScene>();
  CHECK(scene2.state_constraints.size() == 1);
  CHECK(scene2.control_constraints.size() == 1);

  AffineFeedbackLaw law({{Matrix::Ones(1, 2), Vector::Constant(1, 0.5)}});
  json jlaw = law;
  CHECK(jlaw.at("steps")[0].contains("k"));
  CHECK(jlaw.at("steps")[0].contains("v"));
  const auto law2 = jlaw.get<AffineFeedbackLaw>();
  CHECK(law2.steps[0].K.isApprox(law.steps[0].K));
  CHECK(law2.steps[0].v.isApprox(law.steps[0].v));
}
