#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "covsteer/moments.hpp"
#include "covsteer/montecarlo.hpp"

using namespace covsteer;

namespace {

// Two-sided epsilon with unit quantile: Phi^{-1}(1 - eps) = 1.
constexpr double kEpsUnitQuantile = 0.15865525393145707;

}  // namespace

TEST_CASE("standard normal quantile") {
  CHECK(normal_inverse_cdf(0.5) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(normal_inverse_cdf(0.8413447460685429) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(normal_inverse_cdf(0.9772498680518208) == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(normal_inverse_cdf(0.0013498980316301) == doctest::Approx(-3.0).epsilon(1e-8));
  // Antisymmetry about 1/2.
  CHECK(normal_inverse_cdf(0.3) == doctest::Approx(-normal_inverse_cdf(0.7)).epsilon(1e-12));
  CHECK_THROWS_AS(normal_inverse_cdf(0.0), std::invalid_argument);
  CHECK_THROWS_AS(normal_inverse_cdf(1.0), std::invalid_argument);
}

TEST_CASE("state chance margin pinned values") {
  {
    Vector alpha(2), mu(2);
    alpha << 1.0, 0.0;
    mu << 1.0, 0.0;
    HalfspaceChanceConstraint c(alpha, 3.0, 1.0 - 0.9772498680518208);
    CHECK(state_chance_margin(mu, Matrix::Identity(2, 2), c) ==
          doctest::Approx(0.0).epsilon(1e-3));
  }
  {
    Vector alpha(1), mu(1);
    alpha << 1.0;
    mu << 0.0;
    HalfspaceChanceConstraint c(alpha, 0.0, 0.5);
    CHECK(state_chance_margin(mu, Matrix::Identity(1, 1), c) == doctest::Approx(0.0));
  }
  {
    Vector alpha(1), mu(1);
    alpha << 1.0;
    mu << 2.0;
    HalfspaceChanceConstraint c(alpha, 1.0, 0.5);
    CHECK(state_chance_margin(mu, Matrix::Identity(1, 1), c) == doctest::Approx(1.0));
  }
}

TEST_CASE("control chance margin pinned values") {
  {
    Vector alpha(1), v(1);
    alpha << 1.0;
    v << 0.5;
    HalfspaceChanceConstraint c(alpha, 1.0, 0.25);
    CHECK(control_chance_margin(Matrix::Zero(1, 1), v, Matrix::Identity(1, 1), c) ==
          doctest::Approx(-0.5));
  }
  {
    Vector alpha(1), v(1);
    alpha << 1.0;
    v << 0.0;
    Matrix K = -Matrix::Identity(1, 1);
    HalfspaceChanceConstraint c(alpha, 2.0, kEpsUnitQuantile);
    CHECK(control_chance_margin(K, v, Matrix::Identity(1, 1), c) ==
          doctest::Approx(-1.0).epsilon(1e-8));
  }
}

TEST_CASE("state margin is monotone in the covariance") {
  Vector alpha(2), mu(2);
  alpha << 1.0, -0.5;
  mu << 0.2, 0.1;
  HalfspaceChanceConstraint c(alpha, 1.0, 0.05);
  Matrix small = Matrix::Identity(2, 2);
  Matrix big(2, 2);
  big << 2.0, 0.3, 0.3, 1.5;  // big - small is PSD
  CHECK(state_chance_margin(mu, small, c) <= state_chance_margin(mu, big, c));
}

TEST_CASE("propagation matches the Monte Carlo oracle") {
  Matrix A(2, 2);
  A << 1.0, 0.1, 0.0, 1.0;
  Matrix B(2, 1);
  B << 0.0, 0.1;
  LinearGaussianSystem sys(A, B, 0.1 * Matrix::Identity(2, 2));

  Vector mu0(2);
  mu0 << 1.0, -0.5;
  Matrix sigma0(2, 2);
  sigma0 << 0.5, 0.1, 0.1, 0.3;
  GaussianBelief initial(mu0, sigma0);

  std::mt19937_64 law_rng(7);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<AffineFeedbackLaw::Step> steps;
  for (int k = 0; k < 3; ++k) {
    Matrix K(1, 2);
    K << 0.3 * normal(law_rng), 0.3 * normal(law_rng);
    Vector v(1);
    v << normal(law_rng);
    steps.push_back({K, v});
  }
  AffineFeedbackLaw law(steps);

  const MomentTrajectory traj = propagate(sys, initial, law);
  REQUIRE(traj.length() == 3);

  std::mt19937_64 rng(12345);
  const auto samples = montecarlo::rollout(sys, initial, law, 100000, rng);
  for (int k = 0; k <= 3; ++k) {
    const double mean_tol = 4.0 * std::sqrt(max_eigenvalue(traj.covariances[k]) / 1e5);
    CHECK((montecarlo::sample_mean(samples, k) - traj.means[k]).norm() < mean_tol);
    const double cov_err = (montecarlo::sample_covariance(samples, k) - traj.covariances[k]).norm() /
                           traj.covariances[k].norm();
    CHECK(cov_err < 0.05);
  }
}

TEST_CASE("maneuver report checks margins, mean and terminal") {
  Matrix A = Matrix::Identity(1, 1);
  Matrix B = Matrix::Identity(1, 1);
  LinearGaussianSystem sys(A, B, Matrix::Zero(1, 1));
  Vector mu0(1);
  mu0 << 1.0;
  GaussianBelief initial(mu0, Matrix::Identity(1, 1));

  // u_0 = -0.5 (x - mu) - 1 takes (1, 1) to (0, 0.25).
  AffineFeedbackLaw law({{-0.5 * Matrix::Identity(1, 1), -Vector::Ones(1)}});
  GaussianBelief goal(Vector::Zero(1), 0.25 * Matrix::Identity(1, 1));

  auto scene = PlanningScene::unconstrained(1, 1);
  const auto report = check_maneuver(sys, initial, law, scene, goal, /*spectral=*/true);
  CHECK(report.pass);
  CHECK(report.terminal_ok);
  CHECK(report.mean_error == doctest::Approx(0.0));

  // A goal that the law misses must fail.
  GaussianBelief tight_goal(Vector::Zero(1), 0.1 * Matrix::Identity(1, 1));
  CHECK(!check_maneuver(sys, initial, law, scene, tight_goal, true).pass);

  // A violated control constraint must fail and be reported.
  Vector alpha(1);
  alpha << -1.0;  // -u <= 0.5, but v_0 = -1
  PlanningScene constrained({}, {HalfspaceChanceConstraint(alpha, 0.5, 0.4)},
                            Matrix::Identity(1, 1), Matrix::Identity(1, 1));
  const auto bad = check_maneuver(sys, initial, law, constrained, goal, true);
  CHECK(!bad.pass);
  CHECK(bad.worst_control_margin > 0.0);
}
