// Command-line front end: build backward reachable trees, compare coverage,
// answer queries, verify artifacts by replay / Monte Carlo, and emit CSV
// series for plotting.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <random>

#include "covsteer/brt.hpp"
#include "covsteer/montecarlo.hpp"
#include "covsteer/planner.hpp"

namespace {

using namespace covsteer;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;   // verification or planning failed
constexpr int kExitUsage = 2;     // bad config / arguments

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  in >> j;
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

struct TreeConfig {
  LinearGaussianSystem system;
  PlanningScene scene;
  GaussianBelief goal;
  int horizon = 1;
  int n_iter = 0;
  Vector radii;
  std::string mode = "maxcovar";
  std::uint64_t seed = 0;
  json query;  // optional section, used by coverage/query defaults
  steering::SteerOptions options;
};

/// Optional per-config solver overrides; large systems need looser targets
/// plus a little constraint tightening so replay verification still passes.
steering::SteerOptions parse_solver(const json& j) {
  steering::SteerOptions o;
  if (!j.contains("solver")) return o;
  const json& s = j.at("solver");
  if (s.contains("eps")) o.solve.eps = s.at("eps").get<double>();
  if (s.contains("eps_inaccurate")) o.solve.eps_inaccurate = s.at("eps_inaccurate").get<double>();
  if (s.contains("max_iters")) o.solve.max_iters = s.at("max_iters").get<int>();
  if (s.contains("tighten")) o.tighten = s.at("tighten").get<double>();
  return o;
}

TreeConfig parse_config(const json& j) {
  TreeConfig c;
  c.system = j.at("system").get<LinearGaussianSystem>();
  c.scene = j.at("scene").get<PlanningScene>();
  c.goal = j.at("goal").get<GaussianBelief>();
  const json& t = j.at("tree");
  c.horizon = t.at("horizon").get<int>();
  c.n_iter = t.at("n_iter").get<int>();
  c.radii = vector_from_json(t.at("radii"));
  if (t.contains("mode")) c.mode = t.at("mode").get<std::string>();
  if (t.contains("seed")) c.seed = t.at("seed").get<std::uint64_t>();
  if (j.contains("query")) c.query = j.at("query");
  c.options = parse_solver(j);
  return c;
}

int cmd_build_tree(const std::string& config_path, const std::string& out_path,
                   std::optional<std::uint64_t> seed, std::optional<std::string> mode) {
  TreeConfig c;
  try {
    c = parse_config(load_json(config_path));
    if (seed) c.seed = *seed;
    if (mode) c.mode = *mode;
    if (c.mode != "maxcovar" && c.mode != "randcovar")
      throw std::runtime_error("unknown mode '" + c.mode + "'");
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  }

  brt::Brt tree = brt::create_root(c.system, c.scene, c.horizon, c.seed, c.goal);
  brt::GrowthStats stats = c.mode == "maxcovar"
                               ? brt::grow_maxcovar(tree, c.n_iter, c.radii, c.options)
                               : brt::grow_randcovar(tree, c.n_iter, c.radii, c.options);

  write_text(out_path, brt::brt_to_json(tree).dump(2) + "\n");

  json report{{"mode", c.mode},
              {"seed", c.seed},
              {"iterations", stats.iterations},
              {"accepted", stats.accepted},
              {"rejected", stats.rejected},
              {"acceptance_rate",
               stats.iterations ? static_cast<double>(stats.accepted) / stats.iterations : 0.0},
              {"nodes", tree.nodes.size()},
              {"iter_seconds", stats.iter_seconds}};
  write_text(out_path + ".report.json", report.dump(2) + "\n");
  std::cout << "built " << tree.nodes.size() << " nodes (" << stats.accepted << "/"
            << stats.iterations << " accepted) -> " << out_path << "\n";
  return kExitOk;
}

/// Query means uniform on a position-subspace annulus, zero elsewhere;
/// covariances diagonal with entries uniform in [lo, hi].
GaussianBelief sample_query(int n, double inner, double outer, int position_dims, double lo,
                            double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector mu = Vector::Zero(n);
  // Radius density proportional to r so the annulus is sampled uniformly by
  // area (for 2-D position subspaces).
  const double r = std::sqrt(inner * inner + (outer * outer - inner * inner) * unit(rng));
  Vector dir(position_dims);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < position_dims; ++i) dir(i) = normal(rng);
  dir.normalize();
  mu.head(position_dims) = r * dir;

  Vector diag(n);
  std::uniform_real_distribution<double> eig(lo, hi);
  for (int i = 0; i < n; ++i) diag(i) = eig(rng);
  return GaussianBelief(mu, diag.asDiagonal());
}

int cmd_coverage(const std::string& tree_a_path, const std::string& tree_b_path,
                 const std::string& config_path, int trials, const std::string& out_path,
                 std::uint64_t seed) {
  TreeConfig c;
  double inner = 0.0, outer = 0.0;
  int position_dims = 0, M = 5;
  std::vector<std::pair<double, double>> intervals;
  try {
    c = parse_config(load_json(config_path));
    const json& q = c.query;
    inner = q.at("annulus").at("inner").get<double>();
    outer = q.at("annulus").at("outer").get<double>();
    position_dims = q.at("annulus").at("position_dims").get<int>();
    if (q.contains("m_nearest")) M = q.at("m_nearest").get<int>();
    for (const auto& iv : q.at("eig_intervals"))
      intervals.emplace_back(iv.at(0).get<double>(), iv.at(1).get<double>());
    if (intervals.empty()) throw std::runtime_error("query.eig_intervals is empty");
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  }

  brt::Brt tree_a, tree_b;
  try {
    tree_a = brt::brt_from_json(load_json(tree_a_path), {.replay_audit = false});
    tree_b = brt::brt_from_json(load_json(tree_b_path), {.replay_audit = false});
  } catch (const std::exception& e) {
    std::cerr << "tree load error: " << e.what() << "\n";
    return kExitUsage;
  }

  const SteeringWeights weights =
      SteeringWeights::identity_effort(tree_a.system.n, tree_a.system.m, tree_a.horizon);

  std::string csv = "interval_lo,interval_hi,tree,success_rate,trials\n";
  for (const auto& [lo, hi] : intervals) {
    // Both trees see the identical query stream for this interval.
    std::seed_seq sseq{seed, static_cast<std::uint64_t>(std::llround(lo * 1e6))};
    std::mt19937_64 rng(sseq);
    std::vector<GaussianBelief> queries;
    for (int t = 0; t < trials; ++t)
      queries.push_back(sample_query(tree_a.system.n, inner, outer, position_dims, lo, hi, rng));

    for (const auto* entry : {&tree_a, &tree_b}) {
      int successes = 0;
      for (const auto& q : queries) {
        if (planner::query(*entry, q, M, weights, c.options).found) ++successes;
      }
      const double rate = static_cast<double>(successes) / trials;
      const std::string label = entry == &tree_a ? tree_a_path : tree_b_path;
      csv += std::to_string(lo) + "," + std::to_string(hi) + "," + label + "," +
             std::to_string(rate) + "," + std::to_string(trials) + "\n";
      std::cout << "[" << lo << ", " << hi << "] " << label << ": " << rate << "\n";
    }
  }
  write_text(out_path, csv);
  return kExitOk;
}

int cmd_query(const std::string& tree_path, const std::string& query_path, int M,
              const std::string& out_path, bool monolithic, const std::string& config_path) {
  brt::Brt tree;
  GaussianBelief q;
  steering::SteerOptions options;
  try {
    tree = brt::brt_from_json(load_json(tree_path), {.replay_audit = false});
    q = load_json(query_path).get<GaussianBelief>();
    if (!config_path.empty()) options = parse_solver(load_json(config_path));
  } catch (const std::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitUsage;
  }

  const SteeringWeights weights =
      SteeringWeights::identity_effort(tree.system.n, tree.system.m, tree.horizon);
  planner::QueryResult result = planner::query(tree, q, M, weights, options);
  json out = planner::query_result_to_json(result);

  if (monolithic && result.found) {
    const int L = result.hops * tree.horizon;
    const auto t0 = std::chrono::steady_clock::now();
    auto sol = steering::opt_steer(tree.system, q, tree.goal, L, tree.scene,
                                   SteeringWeights::identity_effort(tree.system.n, tree.system.m, L),
                                   /*spectral_terminal=*/true, options);
    const double mono_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out["monolithic"] = {{"status", steering::to_string(sol.status)},
                         {"horizon", L},
                         {"wall_time", mono_time}};
  }

  write_text(out_path, out.dump(2) + "\n");
  if (!result.found) {
    std::cerr << "no path found after " << result.attempts << " attempts\n";
    return kExitFailure;
  }
  std::cout << "path found: " << result.hops << " hops, " << result.attempts << " attempts, "
            << result.wall_time << " s -> " << out_path << "\n";
  return kExitOk;
}

int cmd_verify(const std::string& tree_path, const std::string& result_path,
               const std::string& query_path, int trials, std::uint64_t seed) {
  brt::Brt tree;
  try {
    tree = brt::brt_from_json(load_json(tree_path), {.replay_audit = false});
  } catch (const std::exception& e) {
    std::cerr << "tree load error: " << e.what() << "\n";
    return kExitUsage;
  }

  if (result_path.empty()) {
    const brt::AuditResult audit = brt::audit(tree);
    if (!audit.pass) {
      std::cerr << "tree audit FAILED at nodes:";
      for (int id : audit.failed_nodes) std::cerr << " " << id;
      std::cerr << "\n";
      return kExitFailure;
    }
    std::cout << "tree audit passed (" << tree.nodes.size() << " nodes)\n";
    return kExitOk;
  }

  planner::QueryResult result;
  GaussianBelief q;
  try {
    result = planner::query_result_from_json(load_json(result_path));
    q = load_json(query_path).get<GaussianBelief>();
  } catch (const std::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitUsage;
  }
  if (!result.found) {
    std::cerr << "query result reports no path; nothing to verify\n";
    return kExitFailure;
  }

  // Replay the concatenated law and check empirical violation rates against
  // the CLT bound eps + 3*sqrt(eps(1-eps)/trials).
  std::mt19937_64 rng(seed);
  const auto samples = montecarlo::rollout(tree.system, q, result.full_law, trials, rng);
  bool ok = true;
  const int L = result.full_law.length();
  auto check = [&](const HalfspaceChanceConstraint& c, int k, bool control) {
    const double rate = montecarlo::empirical_violation_rate(samples, c, k, control);
    const double bound = c.epsilon + 3.0 * std::sqrt(c.epsilon * (1.0 - c.epsilon) / trials);
    if (rate > bound) {
      std::cerr << (control ? "control" : "state") << " constraint violated at step " << k
                << ": rate " << rate << " > " << bound << "\n";
      ok = false;
    }
  };
  for (int k = 0; k <= L; ++k)
    for (const auto& c : tree.scene.state_constraints) check(c, k, false);
  for (int k = 0; k < L; ++k)
    for (const auto& c : tree.scene.control_constraints) check(c, k, true);

  // Terminal spread against the goal.
  const Matrix sigma_L = montecarlo::sample_covariance(samples, L);
  const double goal_floor = min_eigenvalue(tree.goal.covariance);
  const double slack = 1.0 + 5.0 / std::sqrt(static_cast<double>(trials) / 100.0);
  if (max_eigenvalue(sigma_L) > goal_floor * slack) {
    std::cerr << "terminal covariance too large: lambda_max " << max_eigenvalue(sigma_L)
              << " vs goal floor " << goal_floor << "\n";
    ok = false;
  }

  if (!ok) return kExitFailure;
  std::cout << "verification passed at " << trials << " trials\n";
  return kExitOk;
}

int cmd_plot_data(const std::string& kind, const std::string& tree_path,
                  const std::string& input_path, const std::string& query_path, int trials,
                  std::uint64_t seed, const std::string& out_path) {
  try {
    if (kind == "nodes") {
      const brt::Brt tree = brt::brt_from_json(load_json(tree_path), {.replay_audit = false});
      // 3-sigma ellipse of the leading 2x2 covariance block per node.
      std::string csv = "id,depth,mean_x,mean_y,ellipse_a,ellipse_b,ellipse_angle\n";
      for (const auto& node : tree.nodes) {
        const Matrix block = node.covariance.topLeftCorner(2, 2);
        Eigen::SelfAdjointEigenSolver<Matrix> es(block);
        const Vector eigs = es.eigenvalues();
        const double angle = std::atan2(es.eigenvectors()(1, 1), es.eigenvectors()(0, 1));
        csv += std::to_string(node.id) + "," + std::to_string(node.depth) + "," +
               std::to_string(node.mean(0)) + "," + std::to_string(node.mean(1)) + "," +
               std::to_string(3.0 * std::sqrt(std::max(eigs(1), 0.0))) + "," +
               std::to_string(3.0 * std::sqrt(std::max(eigs(0), 0.0))) + "," +
               std::to_string(angle) + "\n";
      }
      write_text(out_path, csv);
    } else if (kind == "coverage") {
      // Pass-through: the coverage command already emits the CSV schema.
      std::ifstream in(input_path);
      if (!in) throw std::runtime_error("cannot open " + input_path);
      std::string csv((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      if (csv.rfind("interval_lo,interval_hi,tree,success_rate,trials", 0) != 0)
        throw std::runtime_error("input is not a coverage CSV");
      write_text(out_path, csv);
    } else if (kind == "trajectories") {
      const brt::Brt tree = brt::brt_from_json(load_json(tree_path), {.replay_audit = false});
      const planner::QueryResult result = planner::query_result_from_json(load_json(input_path));
      const GaussianBelief q = load_json(query_path).get<GaussianBelief>();
      if (!result.found) throw std::runtime_error("query result reports no path");
      std::mt19937_64 rng(seed);
      const auto samples = montecarlo::rollout(tree.system, q, result.full_law, trials, rng);
      std::string csv = "trial,step,x,y\n";
      for (int t = 0; t < trials; ++t) {
        for (std::size_t k = 0; k < samples.states.size(); ++k) {
          csv += std::to_string(t) + "," + std::to_string(k) + "," +
                 std::to_string(samples.states[k](0, t)) + "," +
                 std::to_string(samples.states[k](1, t)) + "\n";
        }
      }
      write_text(out_path, csv);
    } else {
      std::cerr << "unknown kind '" << kind << "' (expected nodes|coverage|trajectories)\n";
      return kExitUsage;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  std::cout << "wrote " << out_path << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Covariance-steering backward reachable trees"};
  app.require_subcommand(1);

  std::string config, out, tree_path, tree_b_path, query_path, result_path, kind, input_path;
  std::optional<std::uint64_t> seed_opt;
  std::string mode;
  std::uint64_t seed = 0;
  int trials = 10000, M = 5;
  bool monolithic = false;

  auto* build = app.add_subcommand("build-tree", "Grow a backward reachable tree");
  build->add_option("--config", config, "Config JSON")->required();
  build->add_option("--out", out, "Tree output path")->required();
  std::uint64_t seed_flag = 0;
  auto* seed_o = build->add_option("--seed", seed_flag, "Override config seed");
  auto* mode_o = build->add_option("--mode", mode, "maxcovar|randcovar");

  auto* cov = app.add_subcommand("coverage", "Compare query coverage of two trees");
  cov->add_option("--tree-a", tree_path, "First tree file")->required();
  cov->add_option("--tree-b", tree_b_path, "Second tree file")->required();
  cov->add_option("--config", config, "Config JSON with a query section")->required();
  cov->add_option("--trials", trials, "Queries per eigenvalue interval")->default_val(100);
  cov->add_option("--seed", seed, "Query sampling seed");
  cov->add_option("--out", out, "Output CSV")->required();

  auto* qc = app.add_subcommand("query", "Plan a path for a query distribution");
  qc->add_option("--tree", tree_path, "Tree file")->required();
  qc->add_option("--query", query_path, "Query belief JSON")->required();
  qc->add_option("-M,--nearest", M, "Connection attempts")->default_val(5);
  qc->add_option("--out", out, "QueryResult output path")->required();
  qc->add_flag("--monolithic", monolithic, "Also time the single long-horizon solve");
  std::string query_config;
  qc->add_option("--config", query_config, "Config JSON (for its solver section)");

  auto* ver = app.add_subcommand("verify", "Replay-audit a tree or Monte Carlo a query result");
  ver->add_option("--tree", tree_path, "Tree file")->required();
  ver->add_option("--result", result_path, "QueryResult JSON (omit for tree audit)");
  ver->add_option("--query", query_path, "Query belief JSON (required with --result)");
  ver->add_option("--trials", trials, "Monte Carlo trials")->default_val(10000);
  ver->add_option("--seed", seed, "Monte Carlo seed");

  auto* plot = app.add_subcommand("plot-data", "Emit CSV series for plotting");
  plot->add_option("--kind", kind, "nodes|coverage|trajectories")->required();
  plot->add_option("--tree", tree_path, "Tree file (nodes, trajectories)");
  plot->add_option("--input", input_path, "Coverage CSV or QueryResult JSON");
  plot->add_option("--query", query_path, "Query belief JSON (trajectories)");
  plot->add_option("--trials", trials, "Sampled trajectories")->default_val(50);
  plot->add_option("--seed", seed, "Sampling seed");
  plot->add_option("--out", out, "Output CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (build->parsed()) {
      if (*seed_o) seed_opt = seed_flag;
      return cmd_build_tree(config, out, seed_opt,
                            mode_o->count() ? std::optional<std::string>(mode) : std::nullopt);
    }
    if (cov->parsed()) return cmd_coverage(tree_path, tree_b_path, config, trials, out, seed);
    if (qc->parsed()) return cmd_query(tree_path, query_path, M, out, monolithic, query_config);
    if (ver->parsed()) {
      if (!result_path.empty() && query_path.empty()) {
        std::cerr << "--result requires --query\n";
        return kExitUsage;
      }
      return cmd_verify(tree_path, result_path, query_path, trials, seed);
    }
    if (plot->parsed()) return cmd_plot_data(kind, tree_path, input_path, query_path, trials, seed, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
