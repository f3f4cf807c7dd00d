#include "covsteer/planner.hpp"

#include <algorithm>
#include <chrono>

namespace covsteer::planner {

std::vector<int> nearest_nodes(const brt::Brt& tree, const Vector& mu_q, int M) {
  std::vector<std::pair<double, int>> ranked;
  ranked.reserve(tree.nodes.size());
  for (const auto& node : tree.nodes) {
    ranked.emplace_back((node.mean - mu_q).norm(), node.id);
  }
  std::sort(ranked.begin(), ranked.end());
  std::vector<int> out;
  const int count = std::min<int>(M, static_cast<int>(ranked.size()));
  for (int i = 0; i < count; ++i) out.push_back(ranked[i].second);
  return out;
}

AffineFeedbackLaw concat(const AffineFeedbackLaw& a, const AffineFeedbackLaw& b) {
  std::vector<AffineFeedbackLaw::Step> steps = a.steps;
  steps.insert(steps.end(), b.steps.begin(), b.steps.end());
  return AffineFeedbackLaw(std::move(steps));
}

QueryResult query(const brt::Brt& tree, const GaussianBelief& q, int M,
                  const SteeringWeights& weights, const steering::SteerOptions& options) {
  if (tree.nodes.empty()) throw std::invalid_argument("query: empty tree");
  const auto t0 = std::chrono::steady_clock::now();

  QueryResult result;
  for (int id : nearest_nodes(tree, q.mean, M)) {
    ++result.attempts;
    steering::SteeringSolution sol;
    try {
      sol = steering::opt_steer(tree.system, q, tree.nodes[id].belief(), tree.horizon, tree.scene,
                                weights, /*spectral_terminal=*/true, options);
    } catch (const std::exception&) {
      continue;
    }
    if (sol.status != steering::SteeringStatus::Optimal) continue;

    result.found = true;
    result.connect_law = sol.law;
    int cur = id;
    result.node_path.push_back(cur);
    result.full_law = sol.law;
    while (tree.nodes[cur].parent) {
      result.full_law = concat(result.full_law, *tree.nodes[cur].edge_law);
      cur = *tree.nodes[cur].parent;
      result.node_path.push_back(cur);
    }
    result.hops = tree.nodes[id].depth + 1;
    break;
  }
  result.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

bool brs_member(const GaussianBelief& q, const brt::BrtNode& node, int h, const brt::Brt& tree,
                const steering::SteerOptions& options) {
  if (h < 1) return false;
  return steering::feasible(q, node.belief(), h * tree.horizon, tree.system, tree.scene, options);
}

bool tree_brs_member(const GaussianBelief& q, const brt::Brt& tree, int h,
                     const steering::SteerOptions& options, bool exhaustive) {
  std::vector<int> order = nearest_nodes(tree, q.mean, static_cast<int>(tree.nodes.size()));
  bool member = false;
  for (int id : order) {
    const brt::BrtNode& node = tree.nodes[id];
    if (node.depth >= h) continue;
    if (brs_member(q, node, h - node.depth, tree, options)) {
      member = true;
      if (!exhaustive) return true;
    }
  }
  return member;
}

json query_result_to_json(const QueryResult& result) {
  json j{{"found", result.found},
         {"hops", result.hops},
         {"attempts", result.attempts},
         {"wall_time", result.wall_time},
         {"node_path", result.node_path}};
  if (result.found) {
    j["connect_law"] = result.connect_law;
    j["full_law"] = result.full_law;
  }
  return j;
}

QueryResult query_result_from_json(const json& j) {
  QueryResult r;
  r.found = j.at("found").get<bool>();
  r.hops = j.at("hops").get<int>();
  r.attempts = j.at("attempts").get<int>();
  r.wall_time = j.at("wall_time").get<double>();
  r.node_path = j.at("node_path").get<std::vector<int>>();
  if (r.found) {
    r.connect_law = j.at("connect_law").get<AffineFeedbackLaw>();
    r.full_law = j.at("full_law").get<AffineFeedbackLaw>();
  }
  return r;
}

}  // namespace covsteer::planner
