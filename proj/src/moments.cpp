#include "covsteer/moments.hpp"

#include <cmath>

namespace covsteer {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
}

// Acklam's rational approximation, |rel err| < 1.15e-9 before refinement.
double inverse_cdf_seed(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double normal_inverse_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_inverse_cdf: p must lie in (0,1)");
  double z = inverse_cdf_seed(p);
  // One Halley-flavored Newton step against erfc.
  const double e = normal_cdf(z) - p;
  const double u = e / normal_pdf(z);
  z -= u / (1.0 + 0.5 * z * u);
  return z;
}

MomentTrajectory propagate(const LinearGaussianSystem& system, const GaussianBelief& initial,
                           const AffineFeedbackLaw& law) {
  if (initial.dim() != system.n) throw std::invalid_argument("propagate: belief dimension mismatch");
  if (law.state_dim() != system.n || law.input_dim() != system.m)
    throw std::invalid_argument("propagate: law dimension mismatch");

  const Matrix noise = system.D * system.D.transpose();
  MomentTrajectory traj;
  traj.means.push_back(initial.mean);
  traj.covariances.push_back(initial.covariance);
  for (const auto& step : law.steps) {
    const Vector& mu = traj.means.back();
    const Matrix& sigma = traj.covariances.back();
    const Matrix closed = system.A + system.B * step.K;
    traj.means.push_back(system.A * mu + system.B * step.v);
    traj.covariances.push_back(symmetrized(closed * sigma * closed.transpose() + noise));
  }
  return traj;
}

double state_chance_margin(const Vector& mu_k, const Matrix& sigma_k,
                           const HalfspaceChanceConstraint& c) {
  if (c.alpha.size() != mu_k.size() || sigma_k.rows() != mu_k.size())
    throw std::invalid_argument("state_chance_margin: dimension mismatch");
  const double quantile = normal_inverse_cdf(1.0 - c.epsilon);
  const double var = c.alpha.dot(sigma_k * c.alpha);
  return quantile * std::sqrt(std::max(var, 0.0)) + c.alpha.dot(mu_k) - c.beta;
}

double control_chance_margin(const Matrix& K_k, const Vector& v_k, const Matrix& sigma_k,
                             const HalfspaceChanceConstraint& c) {
  if (c.alpha.size() != v_k.size() || K_k.rows() != v_k.size() || K_k.cols() != sigma_k.rows())
    throw std::invalid_argument("control_chance_margin: dimension mismatch");
  const double quantile = normal_inverse_cdf(1.0 - c.epsilon);
  const double var = c.alpha.dot(K_k * sigma_k * K_k.transpose() * c.alpha);
  return quantile * std::sqrt(std::max(var, 0.0)) + c.alpha.dot(v_k) - c.beta;
}

ManeuverReport check_maneuver(const LinearGaussianSystem& system, const GaussianBelief& initial,
                              const AffineFeedbackLaw& law, const PlanningScene& scene,
                              const GaussianBelief& goal, bool spectral_terminal,
                              double margin_tol) {
  if (law.length() < 1) throw std::invalid_argument("check_maneuver: law must have length >= 1");

  ManeuverReport report;
  report.trajectory = propagate(system, initial, law);
  const int L = report.trajectory.length();

  double worst_state = -std::numeric_limits<double>::infinity();
  double worst_control = -std::numeric_limits<double>::infinity();
  for (int k = 0; k <= L; ++k) {
    StepMargins sm;
    sm.step = k;
    for (const auto& c : scene.state_constraints) {
      const double margin =
          state_chance_margin(report.trajectory.means[k], report.trajectory.covariances[k], c);
      sm.state.push_back(margin);
      worst_state = std::max(worst_state, margin);
    }
    if (k < L) {
      for (const auto& c : scene.control_constraints) {
        const double margin = control_chance_margin(law.steps[k].K, law.steps[k].v,
                                                    report.trajectory.covariances[k], c);
        sm.control.push_back(margin);
        worst_control = std::max(worst_control, margin);
      }
    }
    report.per_step.push_back(std::move(sm));
  }
  report.worst_state_margin = std::isfinite(worst_state) ? worst_state : 0.0;
  report.worst_control_margin = std::isfinite(worst_control) ? worst_control : 0.0;

  report.mean_error = (report.trajectory.means.back() - goal.mean).norm();
  const Matrix& terminal = report.trajectory.covariances.back();
  if (spectral_terminal) {
    report.terminal_ok =
        max_eigenvalue(terminal) <= min_eigenvalue(goal.covariance) + margin_tol;
  } else {
    report.terminal_ok = psd_order_leq(terminal, goal.covariance, margin_tol);
  }

  report.pass = report.terminal_ok && report.mean_error <= kMeanPassTol &&
                report.worst_state_margin <= margin_tol &&
                report.worst_control_margin <= margin_tol;
  return report;
}

json report_to_json(const ManeuverReport& report) {
  json per_step = json::array();
  for (const auto& s : report.per_step) {
    per_step.push_back(json{{"step", s.step}, {"state", s.state}, {"control", s.control}});
  }
  return json{{"pass", report.pass},
              {"mean_error", report.mean_error},
              {"terminal_ok", report.terminal_ok},
              {"worst_state_margin", report.worst_state_margin},
              {"worst_control_margin", report.worst_control_margin},
              {"per_step", std::move(per_step)}};
}

}  // namespace covsteer
