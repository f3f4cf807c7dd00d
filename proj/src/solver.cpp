#include "covsteer/solver.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <cmath>

namespace covsteer::conic {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

using Triplet = Eigen::Triplet<double>;

void append_scalar_row(const LinExpr& e, const ConicProgram& program, int row,
                       std::vector<Triplet>& trips, std::vector<double>& b) {
  for (const auto& t : e.terms) {
    trips.emplace_back(row, program.variable(t.var).offset + t.comp, t.coeff);
  }
  b.push_back(-e.constant);
}

bool constant_only(const LinExpr& e) { return e.terms.empty(); }

}  // namespace

StandardForm compile(const ConicProgram& program) {
  StandardForm form;
  std::vector<Triplet> trips;
  std::vector<double> b;
  int row = 0;

  for (const auto& e : program.eq_constraints()) {
    if (constant_only(e)) {
      if (std::abs(e.constant) > 1e-9) form.trivially_infeasible = true;
      continue;
    }
    append_scalar_row(e, program, row++, trips, b);
  }
  form.zero_rows = row;

  for (const auto& e : program.ineq_constraints()) {
    if (constant_only(e)) {
      if (e.constant > 1e-9) form.trivially_infeasible = true;
      continue;
    }
    append_scalar_row(e, program, row++, trips, b);
  }
  form.nonneg_rows = row - form.zero_rows;

  // PSD blocks: s = b - Ax must equal svec(M(x)), so the coefficient rows
  // carry a minus sign and the constant goes to b.
  for (const auto& p : program.psd_constraints()) {
    form.psd_sizes.push_back(p.size());
    for (int j = 0; j < p.size(); ++j) {
      for (int i = 0; i <= j; ++i) {
        const double w = (i == j) ? 1.0 : kSqrt2;
        const LinExpr& e = p.at(i, j);
        for (const auto& t : e.terms) {
          trips.emplace_back(row, program.variable(t.var).offset + t.comp, -w * t.coeff);
        }
        b.push_back(w * e.constant);
        ++row;
      }
    }
  }

  const int n = program.num_components();
  form.A.resize(row, n);
  form.A.setFromTriplets(trips.begin(), trips.end());
  form.A.makeCompressed();
  form.b = Eigen::Map<const Vector>(b.data(), static_cast<Eigen::Index>(b.size()));

  form.c = Vector::Zero(n);
  for (const auto& t : program.objective().terms) {
    form.c(program.variable(t.var).offset + t.comp) += t.coeff;
  }
  return form;
}

namespace {

struct ConeLayout {
  int zero_rows;
  int nonneg_rows;
  std::vector<int> psd_sizes;
  std::vector<int> psd_offsets;  // row offset of each PSD block
};

ConeLayout make_layout(const StandardForm& form) {
  ConeLayout lay{form.zero_rows, form.nonneg_rows, form.psd_sizes, {}};
  int off = form.zero_rows + form.nonneg_rows;
  for (int s : form.psd_sizes) {
    lay.psd_offsets.push_back(off);
    off += svec_dim(s);
  }
  return lay;
}

void svec_to_mat(const double* v, int s, Matrix& M) {
  int r = 0;
  for (int j = 0; j < s; ++j) {
    for (int i = 0; i <= j; ++i) {
      const double val = (i == j) ? v[r] : v[r] / kSqrt2;
      M(i, j) = val;
      M(j, i) = val;
      ++r;
    }
  }
}

void mat_to_svec(const Matrix& M, int s, double* v) {
  int r = 0;
  for (int j = 0; j < s; ++j) {
    for (int i = 0; i <= j; ++i) {
      v[r++] = (i == j) ? M(i, j) : kSqrt2 * 0.5 * (M(i, j) + M(j, i));
    }
  }
}

/// Projects the segment of `vec` holding cone rows onto the primal cone K
/// (if dual==false) or onto the dual cone K* (free on the zero-cone rows).
void project_cone(Eigen::Ref<Vector> vec, const ConeLayout& lay, bool dual,
                  std::vector<Matrix>& scratch) {
  if (!dual) vec.head(lay.zero_rows).setZero();
  vec.segment(lay.zero_rows, lay.nonneg_rows) =
      vec.segment(lay.zero_rows, lay.nonneg_rows).cwiseMax(0.0);
  for (std::size_t bidx = 0; bidx < lay.psd_sizes.size(); ++bidx) {
    const int s = lay.psd_sizes[bidx];
    const int off = lay.psd_offsets[bidx];
    Matrix& M = scratch[bidx];
    svec_to_mat(vec.data() + off, s, M);
    Eigen::SelfAdjointEigenSolver<Matrix> es(M);
    const Vector evals = es.eigenvalues().cwiseMax(0.0);
    M = es.eigenvectors() * evals.asDiagonal() * es.eigenvectors().transpose();
    mat_to_svec(M, s, vec.data() + off);
  }
}

struct Scaling {
  Vector row;     // D
  Vector col;     // E
  double b_norm;  // sigma
  double c_norm;  // rho
};

Scaling equilibrate(Eigen::SparseMatrix<double>& A, Vector& b, Vector& c,
                    const ConeLayout& lay) {
  const int m = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  Scaling sc{Vector::Ones(m), Vector::Ones(n), 1.0, 1.0};

  for (int iter = 0; iter < 10; ++iter) {
    Vector rnorm = Vector::Zero(m);
    Vector cnorm = Vector::Zero(n);
    for (int k = 0; k < A.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it) {
        const double a = std::abs(it.value());
        rnorm(it.row()) = std::max(rnorm(it.row()), a);
        cnorm(it.col()) = std::max(cnorm(it.col()), a);
      }
    }
    // Rows of a PSD block must share one scale to keep the cone invariant.
    for (std::size_t bidx = 0; bidx < lay.psd_sizes.size(); ++bidx) {
      const int off = lay.psd_offsets[bidx];
      const int d = svec_dim(lay.psd_sizes[bidx]);
      const double blk = rnorm.segment(off, d).maxCoeff();
      rnorm.segment(off, d).setConstant(blk);
    }
    Vector dr(m), dc(n);
    for (int i = 0; i < m; ++i) dr(i) = rnorm(i) > 0 ? 1.0 / std::sqrt(rnorm(i)) : 1.0;
    for (int j = 0; j < n; ++j) dc(j) = cnorm(j) > 0 ? 1.0 / std::sqrt(cnorm(j)) : 1.0;
    dr = dr.cwiseMax(1e-4).cwiseMin(1e4);
    dc = dc.cwiseMax(1e-4).cwiseMin(1e4);
    A = dr.asDiagonal() * A * dc.asDiagonal();
    sc.row = sc.row.cwiseProduct(dr);
    sc.col = sc.col.cwiseProduct(dc);
  }

  b = sc.row.cwiseProduct(b);
  c = sc.col.cwiseProduct(c);
  sc.b_norm = std::max(b.norm(), 1e-6);
  sc.c_norm = std::max(c.norm(), 1e-6);
  b /= sc.b_norm;
  c /= sc.c_norm;
  return sc;
}

}  // namespace

RawSolution SplittingConicBackend::solve(const StandardForm& form,
                                         const SolveSettings& settings) const {
  RawSolution out;
  const int n = form.cols();
  const int m = form.rows();
  const ConeLayout lay = make_layout(form);

  if (m == 0) {
    // Unconstrained: minimum is 0 at the origin unless the objective tilts.
    out.x = Vector::Zero(n);
    out.y = Vector::Zero(0);
    out.s = Vector::Zero(0);
    out.status = form.c.norm() > 0 ? SolveStatus::Unbounded : SolveStatus::Optimal;
    out.objective = 0.0;
    return out;
  }

  // Scaled copies.
  Eigen::SparseMatrix<double> A = form.A;
  Vector b = form.b;
  Vector c = form.c;
  const Scaling sc = equilibrate(A, b, c, lay);

  const Eigen::SparseMatrix<double> At = A.transpose();
  Eigen::SparseMatrix<double> I(n, n);
  I.setIdentity();
  const Eigen::SparseMatrix<double> gram = (I + Eigen::SparseMatrix<double>(At * A)).pruned();
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(gram);
  if (llt.info() != Eigen::Success) {
    out.status = SolveStatus::Failed;
    return out;
  }

  auto lin_solve = [&](const Vector& wx, const Vector& wy, Vector& zx, Vector& zy) {
    zx = llt.solve(wx - At * wy);
    zy = wy + A * zx;
  };

  Vector h(n + m);
  h << c, b;
  Vector gx, gy;
  lin_solve(c, b, gx, gy);
  Vector g(n + m);
  g << gx, gy;
  const double g_dot = h.dot(g);

  Vector u = Vector::Zero(n + m + 1);
  Vector v = Vector::Zero(n + m + 1);
  u(n + m) = 1.0;
  v(n + m) = 1.0;

  std::vector<Matrix> scratch;
  for (int s : lay.psd_sizes) scratch.emplace_back(s, s);

  const double alpha = 1.5;
  Vector w(n + m + 1), ut(n + m + 1), ut_rel(n + m + 1), zx(n), zy(m);

  auto unscale_x = [&](const Vector& xs) -> Vector {
    return sc.b_norm * sc.col.cwiseProduct(xs);
  };
  auto unscale_y = [&](const Vector& ys) -> Vector {
    return sc.c_norm * sc.row.cwiseProduct(ys);
  };
  auto unscale_s = [&](const Vector& ss) -> Vector {
    return sc.b_norm * ss.cwiseQuotient(sc.row);
  };

  const double b_norm0 = form.b.norm();
  const double c_norm0 = form.c.norm();

  SolveStatus status = SolveStatus::Failed;
  double best_pres = std::numeric_limits<double>::infinity();
  double best_dres = std::numeric_limits<double>::infinity();
  double best_gap = std::numeric_limits<double>::infinity();
  int iter = 0;

  for (iter = 0; iter < settings.max_iters; ++iter) {
    w = u + v;
    lin_solve(w.head(n), w.segment(n, m), zx, zy);
    Vector Mw(n + m);
    Mw << zx, zy;
    const double zeta = (w(n + m) + h.dot(Mw)) / (1.0 + g_dot);
    ut.head(n + m) = Mw - zeta * g;
    ut(n + m) = zeta;

    ut_rel = alpha * ut + (1.0 - alpha) * u;
    u = ut_rel - v;
    // Projection onto R^n x K* x R+.
    project_cone(u.segment(n, m), lay, /*dual=*/true, scratch);
    u(n + m) = std::max(u(n + m), 0.0);
    v = v + u - ut_rel;

    if (!u.allFinite() || !v.allFinite()) {
      out.status = SolveStatus::Failed;
      out.stats.iterations = iter;
      return out;
    }

    if ((iter + 1) % 20 != 0 && iter + 1 != settings.max_iters) continue;

    const double tau = u(n + m);
    if (tau > 1e-10) {
      const Vector x = unscale_x(u.head(n) / tau);
      const Vector y = unscale_y(u.segment(n, m) / tau);
      const Vector s = unscale_s(v.segment(n, m) / tau);
      const double pres = (form.A * x + s - form.b).norm() / (1.0 + b_norm0);
      const double dres = (form.A.transpose() * y + form.c).norm() / (1.0 + c_norm0);
      const double pobj = form.c.dot(x);
      const double dobj = -form.b.dot(y);
      const double gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
      best_pres = pres;
      best_dres = dres;
      best_gap = gap;
      if (pres <= settings.eps && dres <= settings.eps && gap <= settings.eps) {
        out.x = x;
        out.y = y;
        out.s = s;
        out.objective = pobj;
        status = SolveStatus::Optimal;
        break;
      }
    }

    // Certificates of primal infeasibility / unboundedness.
    {
      const Vector y = unscale_y(u.segment(n, m));
      const double by = form.b.dot(y);
      if (by < -1e-12) {
        const Vector yn = y / (-by);
        if ((form.A.transpose() * yn).norm() <= settings.eps_infeas * (1.0 + c_norm0)) {
          status = SolveStatus::Infeasible;
          out.y = yn;
          break;
        }
      }
      const Vector x = unscale_x(u.head(n));
      const Vector s = unscale_s(v.segment(n, m));
      const double cx = form.c.dot(x);
      if (cx < -1e-12) {
        const Vector xn = x / (-cx);
        const Vector sn = s / (-cx);
        if ((form.A * xn + sn).norm() <= settings.eps_infeas * (1.0 + b_norm0)) {
          status = SolveStatus::Unbounded;
          out.x = xn;
          break;
        }
      }
    }
  }

  out.stats.iterations = iter;
  out.stats.primal_res = best_pres;
  out.stats.dual_res = best_dres;
  out.stats.gap = best_gap;

  if (status == SolveStatus::Failed) {
    // Ran out of iterations: accept a looser band as Inaccurate.
    const double tau = u(n + m);
    if (tau > 1e-10 && best_pres <= settings.eps_inaccurate &&
        best_dres <= settings.eps_inaccurate && best_gap <= settings.eps_inaccurate) {
      out.x = unscale_x(u.head(n) / tau);
      out.y = unscale_y(u.segment(n, m) / tau);
      out.s = unscale_s(v.segment(n, m) / tau);
      out.objective = form.c.dot(out.x);
      status = SolveStatus::Inaccurate;
    }
  }
  out.status = status;
  return out;
}

const ConicBackend& default_backend() {
  static SplittingConicBackend backend;
  return backend;
}

}  // namespace covsteer::conic
