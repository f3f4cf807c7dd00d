#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <vector>

namespace covsteer {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Absolute eigenvalue tolerance used for PSD / symmetry checks throughout.
inline constexpr double kPsdTol = 1e-9;

/// Smallest eigenvalue of a symmetric matrix.
/// Throws std::invalid_argument if M is not symmetric within tolerance.
double min_eigenvalue(const Matrix& M, double sym_tol = 1e-8);

/// Largest eigenvalue of a symmetric matrix.
double max_eigenvalue(const Matrix& M, double sym_tol = 1e-8);

/// Loewner order test: A <= B iff min_eigenvalue(B - A) >= -tol.
bool psd_order_leq(const Matrix& A, const Matrix& B, double tol = kPsdTol);

/// Returns (M + M^T)/2.
inline Matrix symmetrized(const Matrix& M) { return 0.5 * (M + M.transpose()); }

/// Discrete-time linear system x_{t+1} = A x_t + B u_t + D w_t with
/// w_t ~ N(0, I). A must be nonsingular.
struct LinearGaussianSystem {
  Matrix A;
  Matrix B;
  Matrix D;
  int n = 0;
  int m = 0;
  double dt = 1.0;

  LinearGaussianSystem() = default;
  LinearGaussianSystem(Matrix A_, Matrix B_, Matrix D_, double dt_ = 1.0);
};

/// A Gaussian state distribution (mu, Sigma). The covariance is symmetrized
/// on construction and must be PSD within tolerance.
struct GaussianBelief {
  Vector mean;
  Matrix covariance;

  GaussianBelief() = default;
  GaussianBelief(Vector mu, const Matrix& sigma);

  int dim() const { return static_cast<int>(mean.size()); }
};

/// P(alpha^T z <= beta) >= 1 - epsilon over a state (dim n) or control (dim m)
/// halfspace.
struct HalfspaceChanceConstraint {
  Vector alpha;
  double beta = 0.0;
  double epsilon = 0.0;

  HalfspaceChanceConstraint() = default;
  HalfspaceChanceConstraint(Vector alpha_, double beta_, double epsilon_);
};

/// Chance constraints plus the fixed linearization references Sigma_r, Y_r.
struct PlanningScene {
  std::vector<HalfspaceChanceConstraint> state_constraints;
  std::vector<HalfspaceChanceConstraint> control_constraints;
  Matrix sigma_ref;  // n x n, positive definite
  Matrix y_ref;      // m x m, positive definite

  PlanningScene() = default;
  PlanningScene(std::vector<HalfspaceChanceConstraint> state_cs,
                std::vector<HalfspaceChanceConstraint> control_cs,
                Matrix sigma_ref_, Matrix y_ref_);

  static PlanningScene unconstrained(int n, int m);
};

/// u_k = K_k (x_k - mu_k) + v_k with K_k in R^{m x n}, v_k in R^m.
struct AffineFeedbackLaw {
  struct Step {
    Matrix K;  // m x n
    Vector v;  // m
  };
  std::vector<Step> steps;

  AffineFeedbackLaw() = default;
  explicit AffineFeedbackLaw(std::vector<Step> steps_);

  int length() const { return static_cast<int>(steps.size()); }
  int state_dim() const { return static_cast<int>(steps.front().K.cols()); }
  int input_dim() const { return static_cast<int>(steps.front().K.rows()); }
};

/// Per-step cost weights: Q_k PSD on states, R_k positive definite on inputs.
struct SteeringWeights {
  std::vector<Matrix> Q;
  std::vector<Matrix> R;

  SteeringWeights() = default;
  SteeringWeights(std::vector<Matrix> Q_, std::vector<Matrix> R_);

  static SteeringWeights zero(int n, int m, int horizon);
  static SteeringWeights identity_effort(int n, int m, int horizon);

  bool all_zero() const;
  int horizon() const { return static_cast<int>(Q.size()); }
};

}  // namespace covsteer
