#include "covsteer/serialization.hpp"

namespace covsteer {

json matrix_to_json(const Matrix& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw std::invalid_argument("matrix json must be a nonempty array");
  const auto rows = j.size();
  const auto cols = j.at(0).size();
  Matrix M(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (j.at(i).size() != cols) throw std::invalid_argument("ragged matrix json");
    for (std::size_t c = 0; c < cols; ++c) M(i, c) = j.at(i).at(c).get<double>();
  }
  return M;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector vector_from_json(const json& j) {
  Vector v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = j.at(i).get<double>();
  return v;
}

void to_json(json& j, const LinearGaussianSystem& s) {
  j = json{{"a", matrix_to_json(s.A)}, {"b", matrix_to_json(s.B)}, {"d", matrix_to_json(s.D)},
           {"n", s.n},                 {"m", s.m},                 {"dt", s.dt}};
}

void from_json(const json& j, LinearGaussianSystem& s) {
  s = LinearGaussianSystem(matrix_from_json(j.at("a")), matrix_from_json(j.at("b")),
                           matrix_from_json(j.at("d")), j.value("dt", 1.0));
  if (j.contains("n") && j.at("n").get<int>() != s.n)
    throw std::invalid_argument("declared n inconsistent with matrix shapes");
  if (j.contains("m") && j.at("m").get<int>() != s.m)
    throw std::invalid_argument("declared m inconsistent with matrix shapes");
}

void to_json(json& j, const GaussianBelief& b) {
  j = json{{"mean", vector_to_json(b.mean)}, {"covariance", matrix_to_json(b.covariance)}};
}

void from_json(const json& j, GaussianBelief& b) {
  b = GaussianBelief(vector_from_json(j.at("mean")), matrix_from_json(j.at("covariance")));
}

void to_json(json& j, const HalfspaceChanceConstraint& c) {
  j = json{{"alpha", vector_to_json(c.alpha)}, {"beta", c.beta}, {"epsilon", c.epsilon}};
}

void from_json(const json& j, HalfspaceChanceConstraint& c) {
  c = HalfspaceChanceConstraint(vector_from_json(j.at("alpha")), j.at("beta").get<double>(),
                                j.at("epsilon").get<double>());
}

void to_json(json& j, const PlanningScene& s) {
  j = json{{"state_constraints", s.state_constraints},
           {"control_constraints", s.control_constraints},
           {"sigma_ref", matrix_to_json(s.sigma_ref)},
           {"y_ref", matrix_to_json(s.y_ref)}};
}

void from_json(const json& j, PlanningScene& s) {
  s = PlanningScene(j.at("state_constraints").get<std::vector<HalfspaceChanceConstraint>>(),
                    j.at("control_constraints").get<std::vector<HalfspaceChanceConstraint>>(),
                    matrix_from_json(j.at("sigma_ref")), matrix_from_json(j.at("y_ref")));
}

void to_json(json& j, const AffineFeedbackLaw& law) {
  json steps = json::array();
  for (const auto& s : law.steps) {
    steps.push_back(json{{"k", matrix_to_json(s.K)}, {"v", vector_to_json(s.v)}});
  }
  j = json{{"steps", std::move(steps)}};
}

void from_json(const json& j, AffineFeedbackLaw& law) {
  std::vector<AffineFeedbackLaw::Step> steps;
  for (const auto& s : j.at("steps")) {
    steps.push_back({matrix_from_json(s.at("k")), vector_from_json(s.at("v"))});
  }
  law = AffineFeedbackLaw(std::move(steps));
}

}  // namespace covsteer
