#pragma once

#include <Eigen/Sparse>

#include "covsteer/conic.hpp"

namespace covsteer::conic {

/// Compiled standard form: minimize c'x subject to Ax + s = b with
/// s in {0}^p x R+^q x (product of svec PSD cones).
struct StandardForm {
  Eigen::SparseMatrix<double> A;
  Vector b;
  Vector c;
  int zero_rows = 0;
  int nonneg_rows = 0;
  std::vector<int> psd_sizes;
  bool trivially_infeasible = false;

  int rows() const { return static_cast<int>(A.rows()); }
  int cols() const { return static_cast<int>(A.cols()); }
};

StandardForm compile(const ConicProgram& program);

struct RawSolution {
  SolveStatus status = SolveStatus::Failed;
  Vector x;
  Vector y;
  Vector s;
  double objective = 0.0;
  SolverStats stats;
};

class ConicBackend {
 public:
  virtual ~ConicBackend() = default;
  virtual RawSolution solve(const StandardForm& form, const SolveSettings& settings) const = 0;
};

/// Operator-splitting (ADMM) solver on the homogeneous self-dual embedding,
/// with Ruiz equilibration and over-relaxation. Deterministic for fixed
/// input and settings.
class SplittingConicBackend final : public ConicBackend {
 public:
  RawSolution solve(const StandardForm& form, const SolveSettings& settings) const override;
};

const ConicBackend& default_backend();

/// svec dimension of an s x s symmetric block.
inline int svec_dim(int s) { return s * (s + 1) / 2; }

}  // namespace covsteer::conic
