#include "covsteer/brt.hpp"

#include <Eigen/QR>

#include <chrono>

namespace covsteer::brt {

Brt create_root(const LinearGaussianSystem& system, const PlanningScene& scene, int horizon,
                std::uint64_t seed, const GaussianBelief& goal) {
  if (horizon < 1) throw std::invalid_argument("create_root: horizon must be >= 1");
  if (goal.dim() != system.n) throw std::invalid_argument("create_root: goal dimension mismatch");
  Brt tree;
  tree.system = system;
  tree.scene = scene;
  tree.horizon = horizon;
  tree.rng_seed = seed;
  tree.goal = goal;
  BrtNode root;
  root.id = 0;
  root.mean = goal.mean;
  root.covariance = goal.covariance;
  root.depth = 0;
  tree.nodes.push_back(std::move(root));
  return tree;
}

RngStreams::RngStreams(std::uint64_t seed) {
  std::seed_seq s0{seed, std::uint64_t{0}};
  std::seed_seq s1{seed, std::uint64_t{1}};
  std::seed_seq s2{seed, std::uint64_t{2}};
  select.seed(s0);
  mean.seed(s1);
  covariance.seed(s2);
}

int select_node(const Brt& tree, const Vector& radii, std::mt19937_64& rng) {
  if (tree.nodes.empty()) throw std::invalid_argument("select_node: empty tree");
  const int n = static_cast<int>(tree.nodes.front().mean.size());
  Vector lo = tree.nodes.front().mean;
  Vector hi = tree.nodes.front().mean;
  for (const auto& node : tree.nodes) {
    lo = lo.cwiseMin(node.mean);
    hi = hi.cwiseMax(node.mean);
  }
  lo -= radii;
  hi += radii;

  Vector point(n);
  for (int i = 0; i < n; ++i) {
    std::uniform_real_distribution<double> dist(lo(i), hi(i));
    point(i) = dist(rng);
  }

  int best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (const auto& node : tree.nodes) {
    const double d = (node.mean - point).norm();
    if (d < best_dist) {
      best_dist = d;
      best = node.id;
    }
  }
  return best;
}

Vector sample_mean_around(const BrtNode& node, const Vector& radii, std::mt19937_64& rng) {
  if (radii.size() != node.mean.size())
    throw std::invalid_argument("sample_mean_around: radii dimension mismatch");
  Vector out(node.mean.size());
  for (int i = 0; i < out.size(); ++i) {
    if (radii(i) == 0.0) {
      out(i) = node.mean(i);
      continue;
    }
    std::uniform_real_distribution<double> dist(-radii(i), radii(i));
    out(i) = node.mean(i) + dist(rng);
  }
  return out;
}

Matrix sample_psd(int n, double eig_lo, double eig_hi, std::mt19937_64& rng) {
  if (n < 1 || eig_lo < 0.0 || eig_hi < eig_lo)
    throw std::invalid_argument("sample_psd: invalid arguments");
  std::uniform_real_distribution<double> eig_dist(eig_lo, eig_hi);
  Vector eigs(n);
  for (int i = 0; i < n; ++i) eigs(i) = eig_dist(rng);

  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix G(n, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) G(i, j) = normal(rng);
  }
  Eigen::HouseholderQR<Matrix> qr(G);
  Matrix Q = qr.householderQ();
  const Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < n; ++j) {
    if (R(j, j) < 0) Q.col(j) *= -1.0;
  }
  return symmetrized(Q * eigs.asDiagonal() * Q.transpose());
}

namespace {

void insert_node(Brt& tree, const Vector& mean, const Matrix& covariance, int parent,
                 const AffineFeedbackLaw& law) {
  BrtNode node;
  node.id = static_cast<int>(tree.nodes.size());
  node.mean = mean;
  node.covariance = covariance;
  node.parent = parent;
  node.edge_law = law;
  node.depth = tree.nodes[parent].depth + 1;
  tree.nodes[parent].children.push_back(node.id);
  tree.edges[{node.id, parent}] = law;
  tree.nodes.push_back(std::move(node));
}

GrowthStats grow(Brt& tree, int n_iter, const Vector& radii, GrowthMode mode,
                 const steering::SteerOptions& options) {
  if (tree.nodes.empty()) throw std::invalid_argument("grow: tree must have a root");
  if (radii.size() != tree.system.n) throw std::invalid_argument("grow: radii dimension mismatch");

  RngStreams streams(tree.rng_seed);
  GrowthStats stats;
  for (int it = 0; it < n_iter; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    ++stats.iterations;

    const int k = select_node(tree, radii, streams.select);
    const Vector mu_q = sample_mean_around(tree.nodes[k], radii, streams.mean);
    const GaussianBelief target = tree.nodes[k].belief();

    steering::MaxCovarResult mc;
    try {
      mc = steering::max_covar(tree.system, mu_q, target, tree.horizon, tree.scene, options);
    } catch (const std::exception&) {
      mc.status = steering::SteeringStatus::Failed;
    }

    bool accepted = false;
    if (mode == GrowthMode::MaxCovar) {
      if (mc.status == steering::SteeringStatus::Optimal) {
        insert_node(tree, mu_q, mc.sigma_max, k, mc.law);
        accepted = true;
      }
    } else {
      // Draw the covariance sample unconditionally so rejected iterations
      // keep the stream aligned with the MAXCOVAR schedule.
      const Matrix unit_psd = sample_psd(tree.system.n, 0.0, 1.0, streams.covariance);
      if (mc.status == steering::SteeringStatus::Optimal) {
        const double hi = std::max(min_eigenvalue(mc.sigma_max), 0.0);
        const double lo = 0.01 * hi;
        if (hi > 0.0) {
          // unit_psd has spectrum uniform in [0,1]; shift it into [lo, hi].
          const Matrix sigma_rand = symmetrized(
              lo * Matrix::Identity(tree.system.n, tree.system.n) + (hi - lo) * unit_psd);
          try {
            const GaussianBelief q(mu_q, sigma_rand);
            const auto sol = steering::opt_steer(
                tree.system, q, target, tree.horizon, tree.scene,
                SteeringWeights::identity_effort(tree.system.n, tree.system.m, tree.horizon),
                /*spectral_terminal=*/true, options);
            if (sol.status == steering::SteeringStatus::Optimal) {
              insert_node(tree, mu_q, sigma_rand, k, sol.law);
              accepted = true;
            }
          } catch (const std::exception&) {
          }
        }
      }
    }
    if (accepted) {
      ++stats.accepted;
    } else {
      ++stats.rejected;
    }
    stats.iter_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return stats;
}

}  // namespace

GrowthStats grow_maxcovar(Brt& tree, int n_iter, const Vector& radii,
                          const steering::SteerOptions& options) {
  return grow(tree, n_iter, radii, GrowthMode::MaxCovar, options);
}

GrowthStats grow_randcovar(Brt& tree, int n_iter, const Vector& radii,
                           const steering::SteerOptions& options) {
  return grow(tree, n_iter, radii, GrowthMode::RandCovar, options);
}

AuditResult audit(const Brt& tree) {
  AuditResult result;
  for (const auto& node : tree.nodes) {
    if (node.id == 0) {
      if (node.parent || node.edge_law || node.depth != 0) {
        result.pass = false;
        result.failed_nodes.push_back(node.id);
      }
      continue;
    }
    bool ok = node.parent.has_value() && node.edge_law.has_value();
    if (ok) {
      const BrtNode& parent = tree.nodes.at(*node.parent);
      ok = node.depth == parent.depth + 1;
      auto it = tree.edges.find({node.id, *node.parent});
      ok = ok && it != tree.edges.end();
      if (ok) {
        const auto report = check_maneuver(tree.system, node.belief(), *node.edge_law, tree.scene,
                                           parent.belief(), /*spectral=*/true);
        ok = report.pass;
      }
    }
    if (!ok) {
      result.pass = false;
      result.failed_nodes.push_back(node.id);
    }
  }
  return result;
}

json brt_to_json(const Brt& tree) {
  json nodes = json::array();
  for (const auto& node : tree.nodes) {
    json jn{{"id", node.id},
            {"mean", vector_to_json(node.mean)},
            {"covariance", matrix_to_json(node.covariance)},
            {"children", node.children},
            {"depth", node.depth}};
    if (node.parent) jn["parent"] = *node.parent;
    nodes.push_back(std::move(jn));
  }
  json edges = json::array();
  for (const auto& [key, law] : tree.edges) {
    edges.push_back(json{{"from", key.first}, {"to", key.second}, {"law", law}});
  }
  return json{{"version", 1},
              {"system", tree.system},
              {"scene", tree.scene},
              {"horizon", tree.horizon},
              {"seed", tree.rng_seed},
              {"goal", tree.goal},
              {"nodes", std::move(nodes)},
              {"edges", std::move(edges)}};
}

Brt brt_from_json(const json& j, const LoadOptions& options) {
  Brt tree;
  tree.system = j.at("system").get<LinearGaussianSystem>();
  tree.scene = j.at("scene").get<PlanningScene>();
  tree.horizon = j.at("horizon").get<int>();
  tree.rng_seed = j.at("seed").get<std::uint64_t>();
  tree.goal = j.at("goal").get<GaussianBelief>();
  for (const auto& jn : j.at("nodes")) {
    BrtNode node;
    node.id = jn.at("id").get<int>();
    node.mean = vector_from_json(jn.at("mean"));
    node.covariance = matrix_from_json(jn.at("covariance"));
    node.children = jn.at("children").get<std::vector<int>>();
    node.depth = jn.at("depth").get<int>();
    if (jn.contains("parent")) node.parent = jn.at("parent").get<int>();
    tree.nodes.push_back(std::move(node));
  }
  for (const auto& je : j.at("edges")) {
    const int from = je.at("from").get<int>();
    const int to = je.at("to").get<int>();
    tree.edges[{from, to}] = je.at("law").get<AffineFeedbackLaw>();
    if (from >= 0 && from < static_cast<int>(tree.nodes.size())) {
      tree.nodes[from].edge_law = tree.edges[{from, to}];
    }
  }

  // Structural validation.
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const BrtNode& node = tree.nodes[i];
    if (node.id != static_cast<int>(i)) throw std::invalid_argument("tree file: ids not contiguous");
    if (node.id == 0) {
      if (node.parent || node.edge_law) throw std::invalid_argument("tree file: root has a parent");
    } else {
      if (!node.parent || !node.edge_law)
        throw std::invalid_argument("tree file: non-root node missing parent or edge law");
      if (*node.parent >= node.id) throw std::invalid_argument("tree file: parent ids must precede children");
      if (node.depth != tree.nodes[*node.parent].depth + 1)
        throw std::invalid_argument("tree file: depth bookkeeping broken");
    }
  }
  if (options.replay_audit) {
    const AuditResult result = audit(tree);
    if (!result.pass) throw std::invalid_argument("tree file: replay audit failed");
  }
  return tree;
}

}  // namespace covsteer::brt
