#pragma once

#include <map>
#include <string>

#include "covsteer/core.hpp"
#include "covsteer/serialization.hpp"

namespace covsteer::conic {

using covsteer::json;
using covsteer::Matrix;
using covsteer::Vector;

enum class VarKind { Vector, Symmetric };

struct VarInfo {
  std::string name;
  VarKind kind = VarKind::Vector;
  int dim = 0;         // vector length, or matrix side length
  int components = 0;  // flattened component count
  int offset = 0;      // first column in the compiled coefficient matrix
};

/// One linear term: coefficient on component `comp` of variable `var`.
struct LinTerm {
  int var = 0;
  int comp = 0;
  double coeff = 0.0;
};

/// Affine scalar expression sum_i coeff_i * x_i + constant.
struct LinExpr {
  std::vector<LinTerm> terms;
  double constant = 0.0;

  LinExpr() = default;
  explicit LinExpr(double c) : constant(c) {}

  LinExpr& add(int var, int comp, double coeff) {
    if (coeff != 0.0) terms.push_back({var, comp, coeff});
    return *this;
  }
  LinExpr& operator+=(const LinExpr& other);
  LinExpr& operator*=(double s);
};

LinExpr operator+(LinExpr a, const LinExpr& b);
LinExpr operator-(LinExpr a, const LinExpr& b);
LinExpr operator*(double s, LinExpr e);

/// Symmetric affine matrix expression; only the upper triangle is stored.
class MatExpr {
 public:
  MatExpr() = default;
  explicit MatExpr(int size) : size_(size), entries_(size * (size + 1) / 2) {}

  int size() const { return size_; }
  LinExpr& at(int i, int j) { return entries_[tri_index(i, j)]; }
  const LinExpr& at(int i, int j) const { return entries_[tri_index(i, j)]; }

  /// Index of entry (i,j), i<=j after swap, in column-major upper triangle.
  static int tri_index(int i, int j) {
    if (i > j) std::swap(i, j);
    return j * (j + 1) / 2 + i;
  }

 private:
  int size_ = 0;
  std::vector<LinExpr> entries_;
};

enum class SolveStatus { Optimal, Inaccurate, Infeasible, Unbounded, Failed };

const char* to_string(SolveStatus s);

struct SolverStats {
  int iterations = 0;
  double primal_res = 0.0;
  double dual_res = 0.0;
  double gap = 0.0;
};

struct SolveSettings {
  double eps = 1e-8;             // primal/dual feasibility and gap target
  double eps_inaccurate = 1e-5;  // acceptance band for the Inaccurate status
  double eps_infeas = 1e-9;      // certificate tolerance
  int max_iters = 100000;
};

class ConicProgram;

struct ConicSolution {
  SolveStatus status = SolveStatus::Failed;
  std::map<std::string, Vector> values;
  double objective_value = 0.0;
  SolverStats stats;

  const Vector& value(const std::string& name) const;
  /// Reconstructs a symmetric-matrix variable from its triangle components.
  Matrix matrix_value(const std::string& name) const;

  std::map<std::string, int> sym_sizes;  // bookkeeping for matrix_value
};

/// Linear objective over vector / symmetric-matrix variables with equality,
/// scalar inequality and PSD-cone constraints. Immutable once solved.
class ConicProgram {
 public:
  int add_vector_var(const std::string& name, int dim);
  int add_sym_var(const std::string& name, int size);

  /// Component index of entry (i,j) of a symmetric variable.
  static int sym_comp(int i, int j) { return MatExpr::tri_index(i, j); }

  void minimize(LinExpr objective) { objective_ = std::move(objective); }
  void add_eq(LinExpr e) { eqs_.push_back(std::move(e)); }
  void add_ineq(LinExpr e) { ineqs_.push_back(std::move(e)); }
  void add_psd(MatExpr e) { psds_.push_back(std::move(e)); }

  /// LinExpr for tr(C X) with X the symmetric variable `var`.
  LinExpr trace_dot(int var, const Matrix& C) const;

  const std::vector<VarInfo>& variables() const { return vars_; }
  const VarInfo& variable(int id) const { return vars_.at(id); }
  int var_id(const std::string& name) const;
  int num_components() const { return next_offset_; }

  const LinExpr& objective() const { return objective_; }
  const std::vector<LinExpr>& eq_constraints() const { return eqs_; }
  const std::vector<LinExpr>& ineq_constraints() const { return ineqs_; }
  const std::vector<MatExpr>& psd_constraints() const { return psds_; }

  json to_json() const;
  static ConicProgram from_json(const json& j);

  /// Throws if the expression references unknown variables or components.
  void check_expr(const LinExpr& e) const;

 private:
  int add_var(const std::string& name, VarKind kind, int dim, int components);

  std::vector<VarInfo> vars_;
  std::map<std::string, int> by_name_;
  int next_offset_ = 0;
  LinExpr objective_;
  std::vector<LinExpr> eqs_;
  std::vector<LinExpr> ineqs_;
  std::vector<MatExpr> psds_;
};

class ConicBackend;

/// Solves the program with the given backend (default: the built-in
/// first-order conic solver). Never throws on numerical breakdown; a
/// malformed program throws std::invalid_argument.
ConicSolution solve(const ConicProgram& program, const SolveSettings& settings = {},
                    const ConicBackend* backend = nullptr);

}  // namespace covsteer::conic
