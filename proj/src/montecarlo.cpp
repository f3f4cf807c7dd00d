#include "covsteer/montecarlo.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace covsteer::montecarlo {

namespace {

Matrix covariance_factor(const Matrix& sigma) {
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  // Semidefinite input: eigenvalue square root with a floor at zero.
  Eigen::SelfAdjointEigenSolver<Matrix> es(sigma);
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

}  // namespace

Vector gaussian_sample(const GaussianBelief& belief, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const Matrix L = covariance_factor(belief.covariance);
  Vector z(belief.dim());
  for (int i = 0; i < z.size(); ++i) z(i) = normal(rng);
  return belief.mean + L * z;
}

SampleSet rollout(const LinearGaussianSystem& system, const GaussianBelief& initial,
                  const AffineFeedbackLaw& law, int trials, std::mt19937_64& rng) {
  if (min_eigenvalue(initial.covariance) < -kPsdTol)
    throw std::invalid_argument("rollout: initial covariance not PSD");
  if (initial.dim() != system.n) throw std::invalid_argument("rollout: dimension mismatch");

  const int L = law.length();
  SampleSet out;
  if (trials == 0) return out;

  // Nominal means for the feedback offset.
  const MomentTrajectory nominal = propagate(system, initial, law);

  std::normal_distribution<double> normal(0.0, 1.0);
  const Matrix L0 = covariance_factor(initial.covariance);

  out.states.assign(L + 1, Matrix(system.n, trials));
  out.controls.assign(L, Matrix(system.m, trials));

  Vector z(system.n), w(system.n);
  for (int t = 0; t < trials; ++t) {
    for (int i = 0; i < system.n; ++i) z(i) = normal(rng);
    Vector x = initial.mean + L0 * z;
    out.states[0].col(t) = x;
    for (int k = 0; k < L; ++k) {
      const Vector u = law.steps[k].K * (x - nominal.means[k]) + law.steps[k].v;
      out.controls[k].col(t) = u;
      for (int i = 0; i < system.n; ++i) w(i) = normal(rng);
      x = system.A * x + system.B * u + system.D * w;
      out.states[k + 1].col(t) = x;
    }
  }
  return out;
}

double empirical_violation_rate(const SampleSet& samples, const HalfspaceChanceConstraint& c,
                                int k, bool control) {
  const auto& block = control ? samples.controls : samples.states;
  if (k < 0 || k >= static_cast<int>(block.size()))
    throw std::invalid_argument("empirical_violation_rate: step out of range");
  const Matrix& Z = block[k];
  if (c.alpha.size() != Z.rows())
    throw std::invalid_argument("empirical_violation_rate: dimension mismatch");
  // Evaluate once: keeping the product as an expression re-evaluates the
  // whole row for every coefficient access below.
  const Eigen::RowVectorXd proj = c.alpha.transpose() * Z;
  int violations = 0;
  for (int t = 0; t < Z.cols(); ++t) {
    if (proj(t) > c.beta) ++violations;
  }
  return static_cast<double>(violations) / static_cast<double>(Z.cols());
}

Vector sample_mean(const SampleSet& samples, int k) {
  return samples.states.at(k).rowwise().mean();
}

Matrix sample_covariance(const SampleSet& samples, int k) {
  const Matrix& X = samples.states.at(k);
  const Vector mu = X.rowwise().mean();
  const Matrix centered = X.colwise() - mu;
  return (centered * centered.transpose()) / static_cast<double>(X.cols() - 1);
}

}  // namespace covsteer::montecarlo
