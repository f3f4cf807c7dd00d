#pragma once

#include "covsteer/core.hpp"
#include "covsteer/serialization.hpp"

namespace covsteer {

/// Gaussian moment sequences mu_0..mu_L, Sigma_0..Sigma_L under an L-step law.
struct MomentTrajectory {
  std::vector<Vector> means;
  std::vector<Matrix> covariances;

  int length() const { return static_cast<int>(means.size()) - 1; }
};

/// Standard-normal quantile, |error| <= 1e-9 on (0,1).
double normal_inverse_cdf(double p);

/// Exact moment recursion under u_k = K_k (x_k - mu_k) + v_k:
///   mu_{k+1}    = A mu_k + B v_k
///   Sigma_{k+1} = (A + B K_k) Sigma_k (A + B K_k)^T + D D^T
MomentTrajectory propagate(const LinearGaussianSystem& system, const GaussianBelief& initial,
                           const AffineFeedbackLaw& law);

/// LHS of the deterministic reformulation of a state chance constraint;
/// the constraint holds iff the returned margin is <= 0.
double state_chance_margin(const Vector& mu_k, const Matrix& sigma_k,
                           const HalfspaceChanceConstraint& c);

/// Same for a control chance constraint; the control covariance at step k is
/// K_k Sigma_k K_k^T and the control mean is v_k.
double control_chance_margin(const Matrix& K_k, const Vector& v_k, const Matrix& sigma_k,
                             const HalfspaceChanceConstraint& c);

struct StepMargins {
  int step = 0;
  std::vector<double> state;
  std::vector<double> control;  // empty at the terminal step
};

struct ManeuverReport {
  bool pass = false;
  double mean_error = 0.0;
  bool terminal_ok = false;
  double worst_state_margin = 0.0;
  double worst_control_margin = 0.0;
  std::vector<StepMargins> per_step;
  MomentTrajectory trajectory;
};

inline constexpr double kMarginPassTol = 1e-7;
inline constexpr double kMeanPassTol = 1e-6;

/// Propagates the law from `initial` and checks every chance constraint at
/// every step plus the terminal goal-reaching condition. With
/// spectral_terminal the terminal test is lambda_max(Sigma_L) <=
/// lambda_min(Sigma_goal); otherwise Sigma_L <= Sigma_goal in the Loewner
/// order.
ManeuverReport check_maneuver(const LinearGaussianSystem& system, const GaussianBelief& initial,
                              const AffineFeedbackLaw& law, const PlanningScene& scene,
                              const GaussianBelief& goal, bool spectral_terminal,
                              double margin_tol = kMarginPassTol);

json report_to_json(const ManeuverReport& report);

}  // namespace covsteer
