#include "covsteer/core.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace covsteer {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

void check_symmetric(const Matrix& M, double tol, const char* what) {
  require(M.rows() == M.cols(), "matrix must be square");
  const double dev = (M - M.transpose()).cwiseAbs().maxCoeff();
  if (dev > tol) throw std::invalid_argument(std::string(what) + ": matrix not symmetric");
}

}  // namespace

double min_eigenvalue(const Matrix& M, double sym_tol) {
  check_symmetric(M, sym_tol, "min_eigenvalue");
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(M), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double max_eigenvalue(const Matrix& M, double sym_tol) {
  check_symmetric(M, sym_tol, "max_eigenvalue");
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(M), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

bool psd_order_leq(const Matrix& A, const Matrix& B, double tol) {
  require(A.rows() == B.rows() && A.cols() == B.cols(), "psd_order_leq: shape mismatch");
  return min_eigenvalue(B - A) >= -tol;
}

LinearGaussianSystem::LinearGaussianSystem(Matrix A_, Matrix B_, Matrix D_, double dt_)
    : A(std::move(A_)), B(std::move(B_)), D(std::move(D_)), dt(dt_) {
  require(A.rows() == A.cols(), "A must be square");
  n = static_cast<int>(A.rows());
  require(B.rows() == n, "B row count must equal state dimension");
  m = static_cast<int>(B.cols());
  require(D.rows() == n && D.cols() == n, "D must be n x n");

  Eigen::JacobiSVD<Matrix> svd(A);
  const auto& sv = svd.singularValues();
  require(sv.maxCoeff() > 0.0 && sv.minCoeff() >= 1e-12 * sv.maxCoeff(), "A must be nonsingular");
}

GaussianBelief::GaussianBelief(Vector mu, const Matrix& sigma) : mean(std::move(mu)) {
  require(sigma.rows() == mean.size() && sigma.cols() == mean.size(),
          "covariance shape must match mean dimension");
  const double dev = (sigma - sigma.transpose()).cwiseAbs().maxCoeff();
  require(dev <= kPsdTol, "covariance not symmetric within tolerance");
  covariance = symmetrized(sigma);
  require(min_eigenvalue(covariance) >= -kPsdTol, "covariance not PSD within tolerance");
}

HalfspaceChanceConstraint::HalfspaceChanceConstraint(Vector alpha_, double beta_, double epsilon_)
    : alpha(std::move(alpha_)), beta(beta_), epsilon(epsilon_) {
  require(epsilon >= 0.0 && epsilon <= 0.5, "epsilon must lie in [0, 0.5]");
  require(alpha.size() > 0 && alpha.cwiseAbs().maxCoeff() > 0.0,
          "alpha must have a nonzero entry");
}

PlanningScene::PlanningScene(std::vector<HalfspaceChanceConstraint> state_cs,
                             std::vector<HalfspaceChanceConstraint> control_cs,
                             Matrix sigma_ref_, Matrix y_ref_)
    : state_constraints(std::move(state_cs)),
      control_constraints(std::move(control_cs)),
      sigma_ref(std::move(sigma_ref_)),
      y_ref(std::move(y_ref_)) {
  require(min_eigenvalue(sigma_ref) > 0.0, "sigma_ref must be positive definite");
  require(min_eigenvalue(y_ref) > 0.0, "y_ref must be positive definite");
  for (const auto& c : state_constraints) {
    require(c.alpha.size() == sigma_ref.rows(), "state constraint dimension mismatch");
  }
  for (const auto& c : control_constraints) {
    require(c.alpha.size() == y_ref.rows(), "control constraint dimension mismatch");
  }
}

PlanningScene PlanningScene::unconstrained(int n, int m) {
  PlanningScene scene;
  scene.sigma_ref = Matrix::Identity(n, n);
  scene.y_ref = Matrix::Identity(m, m);
  return scene;
}

AffineFeedbackLaw::AffineFeedbackLaw(std::vector<Step> steps_) : steps(std::move(steps_)) {
  require(!steps.empty(), "feedback law must have at least one step");
  const auto rows = steps.front().K.rows();
  const auto cols = steps.front().K.cols();
  for (const auto& s : steps) {
    require(s.K.rows() == rows && s.K.cols() == cols, "all K_k must share shape");
    require(s.v.size() == rows, "v_k length must equal input dimension");
  }
}

SteeringWeights::SteeringWeights(std::vector<Matrix> Q_, std::vector<Matrix> R_)
    : Q(std::move(Q_)), R(std::move(R_)) {
  require(Q.size() == R.size(), "Q and R lists must share length");
  for (const auto& q : Q) require(min_eigenvalue(q) >= -kPsdTol, "Q_k must be PSD");
  for (const auto& r : R) {
    // R_k == 0 is allowed as the degenerate "pure feasibility" weighting.
    const double lo = min_eigenvalue(r);
    require(lo > 0.0 || r.cwiseAbs().maxCoeff() == 0.0, "R_k must be positive definite or zero");
  }
}

SteeringWeights SteeringWeights::zero(int n, int m, int horizon) {
  return SteeringWeights(std::vector<Matrix>(horizon, Matrix::Zero(n, n)),
                         std::vector<Matrix>(horizon, Matrix::Zero(m, m)));
}

SteeringWeights SteeringWeights::identity_effort(int n, int m, int horizon) {
  return SteeringWeights(std::vector<Matrix>(horizon, Matrix::Zero(n, n)),
                         std::vector<Matrix>(horizon, Matrix::Identity(m, m)));
}

bool SteeringWeights::all_zero() const {
  for (const auto& q : Q) {
    if (q.cwiseAbs().maxCoeff() > 0.0) return false;
  }
  for (const auto& r : R) {
    if (r.cwiseAbs().maxCoeff() > 0.0) return false;
  }
  return true;
}

}  // namespace covsteer
