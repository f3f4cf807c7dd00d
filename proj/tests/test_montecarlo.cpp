#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "covsteer/montecarlo.hpp"

using namespace covsteer;
using namespace covsteer::montecarlo;

namespace {

LinearGaussianSystem two_state() {
  Matrix A(2, 2);
  A << 1.0, 0.1, 0.0, 1.0;
  Matrix B(2, 1);
  B << 0.0, 0.1;
  return LinearGaussianSystem(A, B, 0.05 * Matrix::Identity(2, 2));
}

}  // namespace

TEST_CASE("rollouts reproduce the analytic moments") {
  const auto sys = two_state();
  Vector mu0(2);
  mu0 << 1.0, 0.0;
  Matrix sigma0(2, 2);
  sigma0 << 0.4, -0.1, -0.1, 0.2;
  GaussianBelief initial(mu0, sigma0);

  Matrix K(1, 2);
  K << -0.5, -0.8;
  Vector v(1);
  v << 0.3;
  AffineFeedbackLaw law({{K, v}, {0.5 * K, -v}, {K, 0.0 * v}});

  const auto traj = propagate(sys, initial, law);
  std::mt19937_64 rng(99);
  const int trials = 100000;
  const auto samples = rollout(sys, initial, law, trials, rng);
  REQUIRE(samples.trials() == trials);
  REQUIRE(samples.states.size() == 4);
  REQUIRE(samples.controls.size() == 3);

  for (int k = 0; k <= 3; ++k) {
    const double mean_tol = 4.0 * std::sqrt(max_eigenvalue(traj.covariances[k]) / trials);
    CHECK((sample_mean(samples, k) - traj.means[k]).norm() < mean_tol);
    CHECK((sample_covariance(samples, k) - traj.covariances[k]).norm() <
          0.05 * std::max(traj.covariances[k].norm(), 1e-12));
  }

  // Control moments: mean v_k, covariance K Sigma_k K'.
  for (int k = 0; k < 3; ++k) {
    const Vector u_mean = samples.controls[k].rowwise().mean();
    CHECK((u_mean - law.steps[k].v).norm() < 0.05);
  }
}

TEST_CASE("violation rate at an exact-boundary constraint equals epsilon") {
  // Scalar static case: x ~ N(0, 1), constraint x <= Phi^{-1}(1 - eps) has
  // analytic margin exactly zero and violation probability exactly eps.
  LinearGaussianSystem sys(Matrix::Identity(1, 1), Matrix::Identity(1, 1), Matrix::Zero(1, 1));
  GaussianBelief initial(Vector::Zero(1), Matrix::Identity(1, 1));
  AffineFeedbackLaw law({{Matrix::Zero(1, 1), Vector::Zero(1)}});

  const double eps = 0.1;
  Vector alpha(1);
  alpha << 1.0;
  HalfspaceChanceConstraint c(alpha, normal_inverse_cdf(1.0 - eps), eps);
  CHECK(state_chance_margin(initial.mean, initial.covariance, c) ==
        doctest::Approx(0.0).epsilon(1e-9));

  std::mt19937_64 rng(5);
  const int trials = 100000;
  const auto samples = rollout(sys, initial, law, trials, rng);
  const double rate = empirical_violation_rate(samples, c, 0);
  const double band = 3.0 * std::sqrt(eps * (1.0 - eps) / trials);
  CHECK(std::abs(rate - eps) < band);
}

TEST_CASE("sampling is deterministic for a fixed seed") {
  const auto sys = two_state();
  GaussianBelief initial(Vector::Ones(2), Matrix::Identity(2, 2));
  AffineFeedbackLaw law({{Matrix::Zero(1, 2), Vector::Zero(1)}});

  std::mt19937_64 rng_a(42), rng_b(42);
  const auto sa = rollout(sys, initial, law, 1000, rng_a);
  const auto sb = rollout(sys, initial, law, 1000, rng_b);
  CHECK(sa.states[1] == sb.states[1]);
  CHECK(sa.controls[0] == sb.controls[0]);
}

TEST_CASE("gaussian_sample handles semidefinite covariances") {
  Matrix rank1(2, 2);
  rank1 << 1.0, 1.0, 1.0, 1.0;  // rank deficient, PSD
  GaussianBelief b(Vector::Zero(2), rank1);
  std::mt19937_64 rng(1);
  Matrix draws(2, 20000);
  for (int t = 0; t < draws.cols(); ++t) draws.col(t) = gaussian_sample(b, rng);
  // All mass on the x = y line.
  CHECK((draws.row(0) - draws.row(1)).cwiseAbs().maxCoeff() < 1e-9);
  const Vector mu = draws.rowwise().mean();
  CHECK(mu.norm() < 0.05);
}
