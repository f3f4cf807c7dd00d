#pragma once

#include "covsteer/conic.hpp"
#include "covsteer/core.hpp"
#include "covsteer/moments.hpp"

namespace covsteer::steering {

using covsteer::Matrix;
using covsteer::Vector;

enum class SteeringStatus { Optimal, Infeasible, Unbounded, RelaxationGap, Failed };

const char* to_string(SteeringStatus s);

/// Affine-in-(second moment, first moment) overestimator of a chance
/// constraint, tangent at the reference point:
///   <quad_coeff, S> + lin_coeff . z - rhs <= 0
/// where S is Sigma_k (state) or Y_k (control) and z is mu_k or v_k.
struct LinearizedChance {
  Matrix quad_coeff;
  Vector lin_coeff;
  double rhs = 0.0;

  double evaluate(const Matrix& S, const Vector& z) const {
    return (quad_coeff.cwiseProduct(S)).sum() + lin_coeff.dot(z) - rhs;
  }
};

LinearizedChance linearize_state_chance(const HalfspaceChanceConstraint& c,
                                        const Matrix& sigma_ref);
LinearizedChance linearize_control_chance(const HalfspaceChanceConstraint& c,
                                          const Matrix& y_ref);

/// Metadata tying SDP variables back to the steering problem.
struct ProgramLayout {
  int N = 0;
  int n = 0;
  int m = 0;
  bool free_initial_covariance = false;  // MAX-COVAR
  bool spectral_terminal = false;
  GaussianBelief initial;  // covariance ignored when free_initial_covariance
  GaussianBelief goal;
};

struct BuiltProgram {
  conic::ConicProgram program;
  ProgramLayout layout;
  LinearGaussianSystem system;
};

/// `tighten` shrinks the terminal bound and the chance budgets by a small
/// relative amount during the solve, leaving slack so that exact replay of a
/// finitely accurate solution still satisfies the original constraints.
BuiltProgram build_opt_steer(const LinearGaussianSystem& system, const GaussianBelief& initial,
                             const GaussianBelief& goal, int N, const PlanningScene& scene,
                             const SteeringWeights& weights, bool spectral_terminal,
                             double tighten = 0.0);

BuiltProgram build_max_covar(const LinearGaussianSystem& system, const Vector& mu_q,
                             const GaussianBelief& target, int N, const PlanningScene& scene,
                             double tighten = 0.0);

struct SteeringSolution {
  SteeringStatus status = SteeringStatus::Failed;
  AffineFeedbackLaw law;
  MomentTrajectory trajectory;  // from the SDP variables
  std::vector<Matrix> aux_U;
  std::vector<Matrix> aux_Y;
  double objective_value = 0.0;
  double replay_rel_error = 0.0;  // max per-step relative Frobenius mismatch
  ManeuverReport report;          // replay verification
  conic::SolverStats solver_stats;
  bool pseudo_inverse_used = false;
};

/// Reads the SDP variables back into controller form, K_k = U_k Sigma_k^{-1}.
/// Throws std::runtime_error if a Sigma_k is singular beyond the
/// pseudo-inverse tolerance.
SteeringSolution recover_controller(const conic::ConicSolution& solution,
                                    const BuiltProgram& built);

struct SteerOptions {
  conic::SolveSettings solve;
  double replay_margin_tol = kMarginPassTol;
  /// Relative constraint tightening applied while solving OPT-STEER (the
  /// replay check still uses the original constraints). Zero keeps the
  /// program exact.
  double tighten = 0.0;
};

SteeringSolution opt_steer(const LinearGaussianSystem& system, const GaussianBelief& initial,
                           const GaussianBelief& goal, int N, const PlanningScene& scene,
                           const SteeringWeights& weights, bool spectral_terminal,
                           const SteerOptions& options = {});

struct MaxCovarResult {
  SteeringStatus status = SteeringStatus::Failed;
  Matrix sigma_max;
  AffineFeedbackLaw law;
  SteeringSolution detail;
  /// Shrink factor applied to the SDP covariance when finite solver accuracy
  /// left the replayed trajectory slightly infeasible (1 = no shrink). The
  /// law stays valid for the smaller covariance.
  double backoff = 1.0;
};

MaxCovarResult max_covar(const LinearGaussianSystem& system, const Vector& mu_q,
                         const GaussianBelief& target, int N, const PlanningScene& scene,
                         const SteerOptions& options = {});

/// True iff a verified L-step maneuver from q to p exists (zero-cost
/// OPT-STEER with the spectral terminal constraint).
bool feasible(const GaussianBelief& q, const GaussianBelief& p, int L,
              const LinearGaussianSystem& system, const PlanningScene& scene,
              const SteerOptions& options = {});

}  // namespace covsteer::steering
