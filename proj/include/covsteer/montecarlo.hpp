#pragma once

#include <random>

#include "covsteer/core.hpp"
#include "covsteer/moments.hpp"

namespace covsteer::montecarlo {

using covsteer::Matrix;
using covsteer::Vector;

/// Per-step samples from closed-loop rollouts: states[k] is n x trials,
/// controls[k] is m x trials.
struct SampleSet {
  std::vector<Matrix> states;
  std::vector<Matrix> controls;
  int trials() const { return states.empty() ? 0 : static_cast<int>(states.front().cols()); }
};

/// Simulates `trials` closed-loop trajectories x_{t+1} = A x + B u + D w with
/// u_k = K_k (x_k - mu_k) + v_k around the analytically propagated nominal
/// mean. Deterministic for a fixed rng state.
SampleSet rollout(const LinearGaussianSystem& system, const GaussianBelief& initial,
                  const AffineFeedbackLaw& law, int trials, std::mt19937_64& rng);

/// Fraction of samples at step k with alpha' z > beta. `control` selects the
/// control sample block (step k < L) instead of the state block.
double empirical_violation_rate(const SampleSet& samples, const HalfspaceChanceConstraint& c,
                                int k, bool control = false);

Vector sample_mean(const SampleSet& samples, int k);
Matrix sample_covariance(const SampleSet& samples, int k);

/// Draws x ~ N(mu, Sigma) via the eigenvalue square root (semidefinite
/// covariances allowed; negative eigenvalues are clipped at zero).
Vector gaussian_sample(const GaussianBelief& belief, std::mt19937_64& rng);

}  // namespace covsteer::montecarlo
