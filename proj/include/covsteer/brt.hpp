#pragma once

#include <cstdint>
#include <map>
#include <random>

#include "covsteer/core.hpp"
#include "covsteer/serialization.hpp"
#include "covsteer/steering.hpp"

namespace covsteer::brt {

using covsteer::Matrix;
using covsteer::Vector;

struct BrtNode {
  int id = 0;
  Vector mean;
  Matrix covariance;
  std::optional<int> parent;
  std::optional<AffineFeedbackLaw> edge_law;  // steers this node to its parent
  std::vector<int> children;
  int depth = 0;

  GaussianBelief belief() const { return GaussianBelief(mean, covariance); }
};

/// Backward reachable tree rooted at the goal distribution (node id 0).
struct Brt {
  LinearGaussianSystem system;
  PlanningScene scene;
  int horizon = 1;
  std::uint64_t rng_seed = 0;
  GaussianBelief goal;
  std::vector<BrtNode> nodes;
  std::map<std::pair<int, int>, AffineFeedbackLaw> edges;
};

Brt create_root(const LinearGaussianSystem& system, const PlanningScene& scene, int horizon,
                std::uint64_t seed, const GaussianBelief& goal);

/// Independent substreams so MAXCOVAR and RANDCOVAR builds see identical
/// site sequences from the same seed.
struct RngStreams {
  std::mt19937_64 select;
  std::mt19937_64 mean;
  std::mt19937_64 covariance;

  explicit RngStreams(std::uint64_t seed);
};

/// Voronoi-biased node selection: uniform point in the inflated hull of node
/// means, nearest node wins (ties to the lowest id).
int select_node(const Brt& tree, const Vector& radii, std::mt19937_64& rng);

Vector sample_mean_around(const BrtNode& node, const Vector& radii, std::mt19937_64& rng);

/// Random positive semidefinite matrix with eigenvalues uniform in
/// [eig_lo, eig_hi] and a Haar-ish orthonormal eigenbasis.
Matrix sample_psd(int n, double eig_lo, double eig_hi, std::mt19937_64& rng);

enum class GrowthMode { MaxCovar, RandCovar };

struct GrowthStats {
  int iterations = 0;
  int accepted = 0;
  int rejected = 0;
  std::vector<double> iter_seconds;
};

GrowthStats grow_maxcovar(Brt& tree, int n_iter, const Vector& radii,
                          const steering::SteerOptions& options = {});
GrowthStats grow_randcovar(Brt& tree, int n_iter, const Vector& radii,
                           const steering::SteerOptions& options = {});

struct AuditResult {
  bool pass = true;
  std::vector<int> failed_nodes;
};

/// Replays every edge law through the exact recursion and re-checks the
/// structural invariants.
AuditResult audit(const Brt& tree);

json brt_to_json(const Brt& tree);

struct LoadOptions {
  bool replay_audit = true;
};

Brt brt_from_json(const json& j, const LoadOptions& options = {});

}  // namespace covsteer::brt
