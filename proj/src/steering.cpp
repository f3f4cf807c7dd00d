#include "covsteer/steering.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <iostream>

namespace covsteer::steering {

namespace {

using conic::ConicProgram;
using conic::LinExpr;
using conic::MatExpr;

/// A per-step second-moment block that is either a fixed matrix or an SDP
/// variable.
struct BlockRef {
  int var = -1;
  Matrix constant;
  bool is_var() const { return var >= 0; }
};

struct VecRef {
  int var = -1;
  Vector constant;
  bool is_var() const { return var >= 0; }
};

// Column-major component index of entry (p,q) of an m x n matrix variable.
int mat_comp(int p, int q, int m) { return q * m + p; }

LinExpr sym_entry(const BlockRef& S, int i, int j) {
  LinExpr e;
  if (S.is_var()) {
    e.add(S.var, ConicProgram::sym_comp(i, j), 1.0);
  } else {
    e.constant = S.constant(i, j);
  }
  return e;
}

Matrix sqrt_psd(const Matrix& M) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(M));
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

/// Shared constraint system of the two steering SDPs.
class SteeringBuilder {
 public:
  SteeringBuilder(const LinearGaussianSystem& system, const PlanningScene& scene, int N)
      : sys_(system), scene_(scene), N_(N), noise_(system.D * system.D.transpose()) {
    if (N < 1) throw std::invalid_argument("steering horizon must be >= 1");
  }

  ConicProgram& program() { return prog_; }

  void set_initial_covariance(const Matrix& sigma0) { sigmas_.push_back({-1, sigma0}); }
  void set_free_initial_covariance() {
    sigmas_.push_back({prog_.add_sym_var("sigma_0", sys_.n), {}});
  }

  void add_moment_variables(const Vector& mu0, const Vector& mu_goal) {
    for (int k = 1; k <= N_; ++k) sigmas_.push_back({prog_.add_sym_var("sigma_" + std::to_string(k), sys_.n), {}});
    for (int k = 0; k < N_; ++k) {
      u_vars_.push_back(prog_.add_vector_var("u_" + std::to_string(k), sys_.m * sys_.n));
      y_vars_.push_back(prog_.add_sym_var("y_" + std::to_string(k), sys_.m));
      v_vars_.push_back(prog_.add_vector_var("v_" + std::to_string(k), sys_.m));
    }
    mus_.push_back({-1, mu0});
    for (int k = 1; k < N_; ++k) mus_.push_back({prog_.add_vector_var("mu_" + std::to_string(k), sys_.n), {}});
    if (N_ >= 1) mus_.push_back({-1, mu_goal});
  }

  void add_mean_recursion() {
    for (int k = 0; k < N_; ++k) {
      for (int i = 0; i < sys_.n; ++i) {
        LinExpr e;
        if (mus_[k + 1].is_var()) {
          e.add(mus_[k + 1].var, i, 1.0);
        } else {
          e.constant += mus_[k + 1].constant(i);
        }
        for (int j = 0; j < sys_.n; ++j) {
          if (mus_[k].is_var()) {
            e.add(mus_[k].var, j, -sys_.A(i, j));
          } else {
            e.constant -= sys_.A(i, j) * mus_[k].constant(j);
          }
        }
        for (int j = 0; j < sys_.m; ++j) e.add(v_vars_[k], j, -sys_.B(i, j));
        prog_.add_eq(e);
      }
    }
  }

  void add_covariance_recursion() {
    for (int k = 0; k < N_; ++k) {
      const BlockRef& S = sigmas_[k];
      for (int j = 0; j < sys_.n; ++j) {
        for (int i = 0; i <= j; ++i) {
          LinExpr e;
          e.constant += noise_(i, j);
          if (S.is_var()) {
            for (int p = 0; p < sys_.n; ++p) {
              for (int q = 0; q < sys_.n; ++q) {
                e.add(S.var, ConicProgram::sym_comp(p, q), sys_.A(i, p) * sys_.A(j, q));
              }
            }
          } else {
            e.constant += (sys_.A * S.constant * sys_.A.transpose())(i, j);
          }
          for (int p = 0; p < sys_.m; ++p) {
            for (int q = 0; q < sys_.n; ++q) {
              // B U A' and its transpose A U' B'.
              e.add(u_vars_[k], mat_comp(p, q, sys_.m),
                    sys_.B(i, p) * sys_.A(j, q) + sys_.B(j, p) * sys_.A(i, q));
            }
          }
          for (int p = 0; p < sys_.m; ++p) {
            for (int q = 0; q < sys_.m; ++q) {
              e.add(y_vars_[k], ConicProgram::sym_comp(p, q), sys_.B(i, p) * sys_.B(j, q));
            }
          }
          e.add(sigmas_[k + 1].var, ConicProgram::sym_comp(i, j), -1.0);
          prog_.add_eq(e);
        }
      }
    }
  }

  void add_feedback_lmis() {
    const int n = sys_.n;
    const int m = sys_.m;
    for (int k = 0; k < N_; ++k) {
      MatExpr lmi(n + m);
      for (int j = 0; j < n + m; ++j) {
        for (int i = 0; i <= j; ++i) {
          if (i < n && j < n) {
            lmi.at(i, j) = sym_entry(sigmas_[k], i, j);
          } else if (i < n && j >= n) {
            LinExpr e;
            e.add(u_vars_[k], mat_comp(j - n, i, m), 1.0);
            lmi.at(i, j) = e;
          } else {
            LinExpr e;
            e.add(y_vars_[k], ConicProgram::sym_comp(i - n, j - n), 1.0);
            lmi.at(i, j) = e;
          }
        }
      }
      prog_.add_psd(std::move(lmi));
    }
  }

  void add_terminal_covariance(const Matrix& goal_cov, bool spectral, double tighten = 0.0) {
    const int n = sys_.n;
    Matrix bound = spectral ? Matrix(min_eigenvalue(goal_cov) * Matrix::Identity(n, n))
                            : symmetrized(goal_cov);
    bound *= 1.0 - tighten;
    MatExpr cap(n);
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i <= j; ++i) {
        LinExpr e;
        e.constant = bound(i, j);
        e.add(sigmas_[N_].var, ConicProgram::sym_comp(i, j), -1.0);
        cap.at(i, j) = e;
      }
    }
    prog_.add_psd(std::move(cap));
  }

  void add_chance_constraints(double tighten = 0.0) {
    for (const auto& c : scene_.state_constraints) {
      LinearizedChance lc = linearize_state_chance(c, scene_.sigma_ref);
      lc.rhs -= tighten * (1.0 + std::abs(lc.rhs));
      // Terminal step included so the SDP matches replay verification.
      for (int k = 0; k <= N_; ++k) {
        LinExpr e;
        if (sigmas_[k].is_var()) {
          e += prog_.trace_dot(sigmas_[k].var, lc.quad_coeff);
        } else {
          e.constant += lc.quad_coeff.cwiseProduct(sigmas_[k].constant).sum();
        }
        for (int i = 0; i < sys_.n; ++i) {
          if (mus_[k].is_var()) {
            e.add(mus_[k].var, i, lc.lin_coeff(i));
          } else {
            e.constant += lc.lin_coeff(i) * mus_[k].constant(i);
          }
        }
        e.constant -= lc.rhs;
        prog_.add_ineq(e);
      }
    }
    for (const auto& c : scene_.control_constraints) {
      LinearizedChance lc = linearize_control_chance(c, scene_.y_ref);
      lc.rhs -= tighten * (1.0 + std::abs(lc.rhs));
      for (int k = 0; k < N_; ++k) {
        LinExpr e = prog_.trace_dot(y_vars_[k], lc.quad_coeff);
        for (int i = 0; i < sys_.m; ++i) e.add(v_vars_[k], i, lc.lin_coeff(i));
        e.constant -= lc.rhs;
        prog_.add_ineq(e);
      }
    }
  }

  LinExpr cost(const SteeringWeights& weights) {
    LinExpr obj;
    if (weights.all_zero()) return obj;
    if (weights.horizon() != N_) throw std::invalid_argument("weights horizon mismatch");
    for (int k = 0; k < N_; ++k) {
      const Matrix& Q = weights.Q[k];
      const Matrix& R = weights.R[k];
      if (Q.cwiseAbs().maxCoeff() > 0.0) {
        if (sigmas_[k].is_var()) {
          obj += prog_.trace_dot(sigmas_[k].var, Q);
        } else {
          obj.constant += Q.cwiseProduct(sigmas_[k].constant).sum();
        }
        obj += quadratic_epigraph("qmu_" + std::to_string(k), Q, mus_[k], sys_.n);
      }
      if (R.cwiseAbs().maxCoeff() > 0.0) {
        obj += prog_.trace_dot(y_vars_[k], R);
        VecRef v{v_vars_[k], {}};
        obj += quadratic_epigraph("rv_" + std::to_string(k), R, v, sys_.m);
      }
    }
    return obj;
  }

  const std::vector<BlockRef>& sigmas() const { return sigmas_; }
  const std::vector<VecRef>& mus() const { return mus_; }

 private:
  /// Adds epigraph variable s >= z' W z via [[s, (L z)'], [L z, I]] >= 0
  /// with W = L L'; returns the objective contribution.
  LinExpr quadratic_epigraph(const std::string& name, const Matrix& W, const VecRef& z, int dim) {
    LinExpr contrib;
    if (!z.is_var()) {
      contrib.constant += z.constant.dot(W * z.constant);
      return contrib;
    }
    const Matrix L = sqrt_psd(W);
    const int s_var = prog_.add_vector_var(name, 1);
    MatExpr lmi(dim + 1);
    {
      LinExpr e;
      e.add(s_var, 0, 1.0);
      lmi.at(0, 0) = e;
    }
    for (int a = 0; a < dim; ++a) {
      LinExpr e;
      for (int b = 0; b < dim; ++b) e.add(z.var, b, L(a, b));
      lmi.at(0, 1 + a) = e;
      lmi.at(1 + a, 1 + a) = LinExpr(1.0);
    }
    prog_.add_psd(std::move(lmi));
    contrib.add(s_var, 0, 1.0);
    return contrib;
  }

  const LinearGaussianSystem& sys_;
  const PlanningScene& scene_;
  int N_;
  Matrix noise_;
  ConicProgram prog_;
  std::vector<BlockRef> sigmas_;
  std::vector<VecRef> mus_;
  std::vector<int> u_vars_;
  std::vector<int> y_vars_;
  std::vector<int> v_vars_;
};

}  // namespace

const char* to_string(SteeringStatus s) {
  switch (s) {
    case SteeringStatus::Optimal: return "optimal";
    case SteeringStatus::Infeasible: return "infeasible";
    case SteeringStatus::Unbounded: return "unbounded";
    case SteeringStatus::RelaxationGap: return "relaxation_gap";
    case SteeringStatus::Failed: return "failed";
  }
  return "failed";
}

LinearizedChance linearize_state_chance(const HalfspaceChanceConstraint& c,
                                        const Matrix& sigma_ref) {
  const double ref = c.alpha.dot(sigma_ref * c.alpha);
  if (ref <= 0.0) throw std::invalid_argument("degenerate linearization reference");
  const double root = std::sqrt(ref);
  const double quantile = normal_inverse_cdf(1.0 - c.epsilon);
  LinearizedChance lc;
  lc.quad_coeff = (quantile / (2.0 * root)) * (c.alpha * c.alpha.transpose());
  lc.lin_coeff = c.alpha;
  lc.rhs = c.beta - quantile * 0.5 * root;
  return lc;
}

LinearizedChance linearize_control_chance(const HalfspaceChanceConstraint& c,
                                          const Matrix& y_ref) {
  return linearize_state_chance(c, y_ref);
}

BuiltProgram build_opt_steer(const LinearGaussianSystem& system, const GaussianBelief& initial,
                             const GaussianBelief& goal, int N, const PlanningScene& scene,
                             const SteeringWeights& weights, bool spectral_terminal,
                             double tighten) {
  if (initial.dim() != system.n || goal.dim() != system.n)
    throw std::invalid_argument("build_opt_steer: belief dimension mismatch");
  if (tighten < 0.0 || tighten >= 1.0)
    throw std::invalid_argument("build_opt_steer: tighten must be in [0, 1)");

  SteeringBuilder builder(system, scene, N);
  builder.set_initial_covariance(initial.covariance);
  builder.add_moment_variables(initial.mean, goal.mean);
  builder.add_mean_recursion();
  builder.add_covariance_recursion();
  builder.add_feedback_lmis();
  builder.add_terminal_covariance(goal.covariance, spectral_terminal, tighten);
  builder.add_chance_constraints(tighten);
  builder.program().minimize(builder.cost(weights));

  BuiltProgram out{std::move(builder.program()),
                   {N, system.n, system.m, false, spectral_terminal, initial, goal},
                   system};
  return out;
}

BuiltProgram build_max_covar(const LinearGaussianSystem& system, const Vector& mu_q,
                             const GaussianBelief& target, int N, const PlanningScene& scene,
                             double tighten) {
  if (mu_q.size() != system.n || target.dim() != system.n)
    throw std::invalid_argument("build_max_covar: dimension mismatch");
  if (tighten < 0.0 || tighten >= 1.0)
    throw std::invalid_argument("build_max_covar: tighten must be in [0, 1)");

  SteeringBuilder builder(system, scene, N);
  builder.set_free_initial_covariance();
  builder.add_moment_variables(mu_q, target.mean);
  builder.add_mean_recursion();
  builder.add_covariance_recursion();
  builder.add_feedback_lmis();
  builder.add_terminal_covariance(target.covariance, /*spectral=*/true, tighten);
  builder.add_chance_constraints(tighten);

  // Epigraph of lambda_min: maximize t subject to Sigma_0 >= t I.
  ConicProgram& prog = builder.program();
  const int t_var = prog.add_vector_var("t", 1);
  const int sigma0 = prog.var_id("sigma_0");
  MatExpr floor_lmi(system.n);
  for (int j = 0; j < system.n; ++j) {
    for (int i = 0; i <= j; ++i) {
      LinExpr e;
      e.add(sigma0, ConicProgram::sym_comp(i, j), 1.0);
      if (i == j) e.add(t_var, 0, -1.0);
      floor_lmi.at(i, j) = e;
    }
  }
  prog.add_psd(std::move(floor_lmi));
  LinExpr obj;
  obj.add(t_var, 0, -1.0);
  prog.minimize(obj);

  GaussianBelief initial(mu_q, Matrix::Zero(system.n, system.n));
  BuiltProgram out{std::move(prog), {N, system.n, system.m, true, true, initial, target}, system};
  return out;
}

SteeringSolution recover_controller(const conic::ConicSolution& solution,
                                    const BuiltProgram& built) {
  if (solution.status != conic::SolveStatus::Optimal &&
      solution.status != conic::SolveStatus::Inaccurate)
    throw std::invalid_argument("recover_controller requires an optimal or inaccurate solve");

  const auto& lay = built.layout;
  SteeringSolution ss;
  ss.objective_value = solution.objective_value;
  ss.solver_stats = solution.stats;

  ss.trajectory.covariances.push_back(
      lay.free_initial_covariance ? symmetrized(solution.matrix_value("sigma_0"))
                                  : built.layout.initial.covariance);
  for (int k = 1; k <= lay.N; ++k) {
    ss.trajectory.covariances.push_back(
        symmetrized(solution.matrix_value("sigma_" + std::to_string(k))));
  }
  ss.trajectory.means.push_back(lay.initial.mean);
  for (int k = 1; k < lay.N; ++k) {
    ss.trajectory.means.push_back(solution.value("mu_" + std::to_string(k)));
  }
  ss.trajectory.means.push_back(lay.goal.mean);

  std::vector<AffineFeedbackLaw::Step> steps;
  for (int k = 0; k < lay.N; ++k) {
    const Vector u_flat = solution.value("u_" + std::to_string(k));
    const Matrix U = Eigen::Map<const Matrix>(u_flat.data(), lay.m, lay.n);
    ss.aux_U.push_back(U);
    ss.aux_Y.push_back(solution.matrix_value("y_" + std::to_string(k)));

    const Matrix& sigma = ss.trajectory.covariances[k];
    Eigen::SelfAdjointEigenSolver<Matrix> es(sigma);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    Matrix K;
    if (lo > 1e-10 * std::max(1.0, hi)) {
      K = sigma.ldlt().solve(U.transpose()).transpose();
    } else {
      ss.pseudo_inverse_used = true;
      Vector inv = es.eigenvalues();
      for (int i = 0; i < inv.size(); ++i) {
        inv(i) = std::abs(inv(i)) > 1e-10 * std::max(1.0, hi) ? 1.0 / inv(i) : 0.0;
      }
      K = U * es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
    }
    steps.push_back({K, solution.value("v_" + std::to_string(k))});
  }

  // Polish the feedforward terms: the solver leaves O(eps) residual in the
  // mean recursion, which accumulates when laws are concatenated across tree
  // edges. A least-squares correction through the step-to-terminal input maps
  // pins the terminal mean to the goal exactly (up to reachability).
  {
    const Matrix& A = built.system.A;
    const Matrix& B = built.system.B;
    Vector mu = lay.initial.mean;
    for (int k = 0; k < lay.N; ++k) mu = A * mu + B * steps[k].v;
    const Vector err = mu - lay.goal.mean;
    if (err.norm() > 0.0) {
      Matrix G(lay.n, lay.N * lay.m);
      Matrix Ak = Matrix::Identity(lay.n, lay.n);  // A^{N-1-k}, built backwards
      for (int k = lay.N - 1; k >= 0; --k) {
        G.middleCols(k * lay.m, lay.m) = Ak * B;
        Ak = A * Ak;
      }
      const Vector dv = G.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(err);
      for (int k = 0; k < lay.N; ++k) steps[k].v -= dv.segment(k * lay.m, lay.m);
    }
  }

  ss.law = AffineFeedbackLaw(std::move(steps));
  return ss;
}

namespace {

Matrix clip_psd(const Matrix& M) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(M));
  return symmetrized(es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() *
                     es.eigenvectors().transpose());
}

SteeringStatus map_failed_status(conic::SolveStatus s) {
  switch (s) {
    case conic::SolveStatus::Infeasible: return SteeringStatus::Infeasible;
    case conic::SolveStatus::Unbounded: return SteeringStatus::Unbounded;
    default: return SteeringStatus::Failed;
  }
}

/// Replay-verifies a recovered controller against the exact recursion.
void verify_replay(SteeringSolution& ss, const LinearGaussianSystem& system,
                   const GaussianBelief& initial, const GaussianBelief& goal,
                   const PlanningScene& scene, bool spectral_terminal, double margin_tol,
                   conic::SolveStatus raw_status) {
  ss.report = check_maneuver(system, initial, ss.law, scene, goal, spectral_terminal, margin_tol);
  double rel = 0.0;
  for (std::size_t k = 0; k < ss.trajectory.covariances.size(); ++k) {
    const double denom = 1.0 + ss.trajectory.covariances[k].norm();
    rel = std::max(rel,
                   (ss.trajectory.covariances[k] - ss.report.trajectory.covariances[k]).norm() /
                       denom);
  }
  ss.replay_rel_error = rel;
  if (ss.report.pass) {
    ss.status = SteeringStatus::Optimal;
  } else if (raw_status == conic::SolveStatus::Optimal) {
    ss.status = SteeringStatus::RelaxationGap;
  } else {
    ss.status = SteeringStatus::Failed;
  }
}

}  // namespace

SteeringSolution opt_steer(const LinearGaussianSystem& system, const GaussianBelief& initial,
                           const GaussianBelief& goal, int N, const PlanningScene& scene,
                           const SteeringWeights& weights, bool spectral_terminal,
                           const SteerOptions& options) {
  BuiltProgram built =
      build_opt_steer(system, initial, goal, N, scene, weights, spectral_terminal, options.tighten);
  const conic::ConicSolution sol = conic::solve(built.program, options.solve);
  SteeringSolution ss;
  if (sol.status != conic::SolveStatus::Optimal && sol.status != conic::SolveStatus::Inaccurate) {
    ss.status = map_failed_status(sol.status);
    ss.solver_stats = sol.stats;
    return ss;
  }
  ss = recover_controller(sol, built);
  verify_replay(ss, system, initial, goal, scene, spectral_terminal, options.replay_margin_tol,
                sol.status);
  return ss;
}

MaxCovarResult max_covar(const LinearGaussianSystem& system, const Vector& mu_q,
                         const GaussianBelief& target, int N, const PlanningScene& scene,
                         const SteerOptions& options) {
  BuiltProgram built = build_max_covar(system, mu_q, target, N, scene, options.tighten);
  const conic::ConicSolution sol = conic::solve(built.program, options.solve);
  MaxCovarResult out;
  if (sol.status != conic::SolveStatus::Optimal && sol.status != conic::SolveStatus::Inaccurate) {
    out.status = map_failed_status(sol.status);
    out.detail.status = out.status;
    out.detail.solver_stats = sol.stats;
    return out;
  }
  out.detail = recover_controller(sol, built);
  out.sigma_max = clip_psd(out.detail.trajectory.covariances.front());
  out.detail.trajectory.covariances.front() = out.sigma_max;
  const GaussianBelief initial(mu_q, out.sigma_max);
  verify_replay(out.detail, system, initial, target, scene, /*spectral=*/true,
                options.replay_margin_tol, sol.status);

  if (!out.detail.report.pass) {
    // Finite solver accuracy can leave the replayed trajectory slightly
    // outside the constraint set. The recovered law stays valid for any
    // smaller-or-equal initial covariance and shrinking the covariance only
    // improves every margin, so back the covariance off to the largest
    // passing fraction instead of discarding the node.
    const auto passes = [&](double rho) {
      const GaussianBelief shrunk(mu_q, symmetrized(rho * out.sigma_max));
      return check_maneuver(system, shrunk, out.detail.law, scene, target,
                            /*spectral=*/true, options.replay_margin_tol)
          .pass;
    };
    if (passes(0.0)) {
      double lo = 0.0, hi = 1.0;
      for (int it = 0; it < 50; ++it) {
        const double mid = 0.5 * (lo + hi);
        (passes(mid) ? lo : hi) = mid;
      }
      out.backoff = lo;
      out.sigma_max = clip_psd(lo * out.sigma_max);
      out.detail.trajectory.covariances.front() = out.sigma_max;
      verify_replay(out.detail, system, GaussianBelief(mu_q, out.sigma_max), target, scene,
                    /*spectral=*/true, options.replay_margin_tol, sol.status);
      // The SDP trajectory no longer matches the shrunk covariance; report
      // the exact replayed one instead.
      out.detail.trajectory = out.detail.report.trajectory;
      out.detail.replay_rel_error = 0.0;
    }
  }

  out.status = out.detail.status;
  out.law = out.detail.law;
  return out;
}

bool feasible(const GaussianBelief& q, const GaussianBelief& p, int L,
              const LinearGaussianSystem& system, const PlanningScene& scene,
              const SteerOptions& options) {
  if (L < 1) throw std::invalid_argument("feasible: horizon must be >= 1");
  try {
    const SteeringSolution ss = opt_steer(system, q, p, L, scene,
                                          SteeringWeights::zero(system.n, system.m, L),
                                          /*spectral_terminal=*/true, options);
    return ss.status == SteeringStatus::Optimal;
  } catch (const std::exception& e) {
    std::cerr << "feasible: solver failure treated as infeasible: " << e.what() << "\n";
    return false;
  }
}

}  // namespace covsteer::steering
