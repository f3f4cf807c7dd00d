#pragma once

#include "covsteer/brt.hpp"

namespace covsteer::planner {

using covsteer::Matrix;
using covsteer::Vector;

struct QueryResult {
  bool found = false;
  AffineFeedbackLaw connect_law;
  std::vector<int> node_path;  // connection node first, root last
  AffineFeedbackLaw full_law;
  int hops = 0;
  int attempts = 0;
  double wall_time = 0.0;
};

/// Node ids ordered by Euclidean distance of means to mu_q (ties by id),
/// truncated to M.
std::vector<int> nearest_nodes(const brt::Brt& tree, const Vector& mu_q, int M);

/// Order-sensitive concatenation: first the steps of a, then the steps of b.
AffineFeedbackLaw concat(const AffineFeedbackLaw& a, const AffineFeedbackLaw& b);

/// Attempts single-hop connections to the M nearest nodes in order; on the
/// first verified connection assembles the node path to the root and the
/// concatenated control sequence.
QueryResult query(const brt::Brt& tree, const GaussianBelief& q, int M,
                  const SteeringWeights& weights, const steering::SteerOptions& options = {});

/// Membership of q in the h-hop backward reachable set of a single node.
bool brs_member(const GaussianBelief& q, const brt::BrtNode& node, int h, const brt::Brt& tree,
                const steering::SteerOptions& options = {});

/// Membership in the h-hop backward reachable set of the whole tree,
/// evaluated nearest-first with short-circuiting (or exhaustively).
bool tree_brs_member(const GaussianBelief& q, const brt::Brt& tree, int h,
                     const steering::SteerOptions& options = {}, bool exhaustive = false);

json query_result_to_json(const QueryResult& result);
QueryResult query_result_from_json(const json& j);

}  // namespace covsteer::planner
