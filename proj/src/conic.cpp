#include "covsteer/conic.hpp"

#include "covsteer/solver.hpp"

namespace covsteer::conic {

LinExpr& LinExpr::operator+=(const LinExpr& other) {
  terms.insert(terms.end(), other.terms.begin(), other.terms.end());
  constant += other.constant;
  return *this;
}

LinExpr& LinExpr::operator*=(double s) {
  for (auto& t : terms) t.coeff *= s;
  constant *= s;
  return *this;
}

LinExpr operator+(LinExpr a, const LinExpr& b) {
  a += b;
  return a;
}

LinExpr operator-(LinExpr a, const LinExpr& b) {
  LinExpr neg = b;
  neg *= -1.0;
  a += neg;
  return a;
}

LinExpr operator*(double s, LinExpr e) {
  e *= s;
  return e;
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Inaccurate: return "inaccurate";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::Failed: return "failed";
  }
  return "failed";
}

const Vector& ConicSolution::value(const std::string& name) const {
  auto it = values.find(name);
  if (it == values.end()) throw std::invalid_argument("no value for variable " + name);
  return it->second;
}

Matrix ConicSolution::matrix_value(const std::string& name) const {
  const Vector& v = value(name);
  auto it = sym_sizes.find(name);
  if (it == sym_sizes.end()) throw std::invalid_argument(name + " is not a symmetric variable");
  const int s = it->second;
  Matrix M(s, s);
  for (int j = 0; j < s; ++j) {
    for (int i = 0; i <= j; ++i) {
      M(i, j) = M(j, i) = v(MatExpr::tri_index(i, j));
    }
  }
  return M;
}

int ConicProgram::add_var(const std::string& name, VarKind kind, int dim, int components) {
  if (by_name_.count(name)) throw std::invalid_argument("duplicate variable name " + name);
  if (dim <= 0) throw std::invalid_argument("variable dimension must be positive");
  VarInfo info{name, kind, dim, components, next_offset_};
  next_offset_ += components;
  vars_.push_back(std::move(info));
  by_name_[name] = static_cast<int>(vars_.size()) - 1;
  return static_cast<int>(vars_.size()) - 1;
}

int ConicProgram::add_vector_var(const std::string& name, int dim) {
  return add_var(name, VarKind::Vector, dim, dim);
}

int ConicProgram::add_sym_var(const std::string& name, int size) {
  return add_var(name, VarKind::Symmetric, size, size * (size + 1) / 2);
}

LinExpr ConicProgram::trace_dot(int var, const Matrix& C) const {
  const VarInfo& info = variable(var);
  if (info.kind != VarKind::Symmetric || C.rows() != info.dim || C.cols() != info.dim)
    throw std::invalid_argument("trace_dot: shape mismatch");
  LinExpr e;
  for (int j = 0; j < info.dim; ++j) {
    e.add(var, sym_comp(j, j), C(j, j));
    for (int i = 0; i < j; ++i) e.add(var, sym_comp(i, j), C(i, j) + C(j, i));
  }
  return e;
}

int ConicProgram::var_id(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw std::invalid_argument("unknown variable " + name);
  return it->second;
}

void ConicProgram::check_expr(const LinExpr& e) const {
  for (const auto& t : e.terms) {
    if (t.var < 0 || t.var >= static_cast<int>(vars_.size()))
      throw std::invalid_argument("expression references undeclared variable");
    if (t.comp < 0 || t.comp >= vars_[t.var].components)
      throw std::invalid_argument("expression references out-of-range component");
  }
}

json ConicProgram::to_json() const {
  auto expr_json = [](const LinExpr& e) {
    json terms = json::array();
    for (const auto& t : e.terms) terms.push_back(json::array({t.var, t.comp, t.coeff}));
    return json{{"terms", std::move(terms)}, {"constant", e.constant}};
  };
  json vars = json::array();
  for (const auto& v : vars_) {
    vars.push_back(json{{"name", v.name},
                        {"kind", v.kind == VarKind::Symmetric ? "symmetric" : "vector"},
                        {"dim", v.dim}});
  }
  json eqs = json::array();
  for (const auto& e : eqs_) eqs.push_back(expr_json(e));
  json ineqs = json::array();
  for (const auto& e : ineqs_) ineqs.push_back(expr_json(e));
  json psds = json::array();
  for (const auto& p : psds_) {
    json entries = json::array();
    for (int j = 0; j < p.size(); ++j) {
      for (int i = 0; i <= j; ++i) {
        entries.push_back(json{{"i", i}, {"j", j}, {"expr", expr_json(p.at(i, j))}});
      }
    }
    psds.push_back(json{{"size", p.size()}, {"entries", std::move(entries)}});
  }
  return json{{"variables", std::move(vars)}, {"objective", expr_json(objective_)},
              {"eq", std::move(eqs)},         {"ineq", std::move(ineqs)},
              {"psd", std::move(psds)}};
}

ConicProgram ConicProgram::from_json(const json& j) {
  auto expr_from = [](const json& e) {
    LinExpr out;
    out.constant = e.at("constant").get<double>();
    for (const auto& t : e.at("terms")) {
      out.add(t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<double>());
    }
    return out;
  };
  ConicProgram p;
  for (const auto& v : j.at("variables")) {
    const std::string kind = v.at("kind").get<std::string>();
    if (kind == "symmetric") {
      p.add_sym_var(v.at("name").get<std::string>(), v.at("dim").get<int>());
    } else {
      p.add_vector_var(v.at("name").get<std::string>(), v.at("dim").get<int>());
    }
  }
  p.minimize(expr_from(j.at("objective")));
  for (const auto& e : j.at("eq")) p.add_eq(expr_from(e));
  for (const auto& e : j.at("ineq")) p.add_ineq(expr_from(e));
  for (const auto& blk : j.at("psd")) {
    MatExpr m(blk.at("size").get<int>());
    for (const auto& entry : blk.at("entries")) {
      m.at(entry.at("i").get<int>(), entry.at("j").get<int>()) = expr_from(entry.at("expr"));
    }
    p.add_psd(m);
  }
  return p;
}

ConicSolution solve(const ConicProgram& program, const SolveSettings& settings,
                    const ConicBackend* backend) {
  for (const auto& e : program.eq_constraints()) program.check_expr(e);
  for (const auto& e : program.ineq_constraints()) program.check_expr(e);
  for (const auto& p : program.psd_constraints()) {
    for (int j = 0; j < p.size(); ++j) {
      for (int i = 0; i <= j; ++i) program.check_expr(p.at(i, j));
    }
  }
  program.check_expr(program.objective());

  const StandardForm form = compile(program);

  ConicSolution out;
  for (const auto& v : program.variables()) {
    if (v.kind == VarKind::Symmetric) out.sym_sizes[v.name] = v.dim;
  }

  if (form.trivially_infeasible) {
    out.status = SolveStatus::Infeasible;
    return out;
  }

  const ConicBackend& be = backend ? *backend : default_backend();
  RawSolution raw = be.solve(form, settings);
  out.status = raw.status;
  out.stats = raw.stats;
  out.objective_value = raw.objective;
  if (raw.status == SolveStatus::Optimal || raw.status == SolveStatus::Inaccurate) {
    for (const auto& v : program.variables()) {
      out.values[v.name] = raw.x.segment(v.offset, v.components);
    }
  }
  return out;
}

}  // namespace covsteer::conic
