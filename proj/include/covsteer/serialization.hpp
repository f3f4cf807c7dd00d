#pragma once

#include <json.hpp>

#include "covsteer/core.hpp"

namespace covsteer {

using json = nlohmann::json;

json matrix_to_json(const Matrix& M);
Matrix matrix_from_json(const json& j);
json vector_to_json(const Vector& v);
Vector vector_from_json(const json& j);

void to_json(json& j, const LinearGaussianSystem& s);
void from_json(const json& j, LinearGaussianSystem& s);

void to_json(json& j, const GaussianBelief& b);
void from_json(const json& j, GaussianBelief& b);

void to_json(json& j, const HalfspaceChanceConstraint& c);
void from_json(const json& j, HalfspaceChanceConstraint& c);

void to_json(json& j, const PlanningScene& s);
void from_json(const json& j, PlanningScene& s);

void to_json(json& j, const AffineFeedbackLaw& law);
void from_json(const json& j, AffineFeedbackLaw& law);

}  // namespace covsteer
