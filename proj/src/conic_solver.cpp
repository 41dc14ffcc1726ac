#include "meshpde/conic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace meshpde {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Product cone R_+^n_lin x Q^{d_1} x ... x Q^{d_N}; vectors are stacked with
// the orthant part first and each cone led by its bound entry.
struct ConeLayout {
  int n_lin = 0;
  std::vector<int> soc_dims;
  std::vector<int> soc_offsets;
  int total = 0;
  int degree = 0;
};

// Internal standard form: min c^T x s.t. A x = b, G x + s = h, s in K.
struct InternalForm {
  int n = 0, p = 0, m = 0;
  Eigen::SparseMatrix<double> A;
  Eigen::SparseMatrix<double> G;
  Eigen::VectorXd b, h, c;
  ConeLayout cones;
  double obj_scale = 1.0;
  std::vector<double> lin_scale, soc_scale, eq_scale;
  std::vector<int> eq_kept;  // internal eq row -> original equality index
};

double row_scale_factor(const AffineRow& row) {
  double m = std::abs(row.constant);
  for (const auto& [idx, val] : row.coeffs) m = std::max(m, std::abs(val));
  return m > 0 ? 1.0 / m : 1.0;
}

InternalForm build_internal(const ConicProgram& prog, const std::vector<int>& eq_kept) {
  InternalForm f;
  f.n = prog.num_vars;
  f.p = static_cast<int>(eq_kept.size());
  f.eq_kept = eq_kept;
  f.cones.n_lin = static_cast<int>(prog.linear_inequalities.size());
  int offset = f.cones.n_lin;
  for (const auto& cone : prog.soc_constraints) {
    f.cones.soc_offsets.push_back(offset);
    f.cones.soc_dims.push_back(static_cast<int>(cone.rows.size()) + 1);
    offset += static_cast<int>(cone.rows.size()) + 1;
  }
  f.cones.total = offset;
  f.cones.degree = f.cones.n_lin + static_cast<int>(f.cones.soc_dims.size());
  f.m = f.cones.total;

  f.obj_scale = std::max(1.0, prog.objective.size() ? prog.objective.cwiseAbs().maxCoeff() : 1.0);
  f.c = prog.objective / f.obj_scale;

  std::vector<Eigen::Triplet<double>> g_trip, a_trip;
  f.h = Eigen::VectorXd::Zero(f.m);
  f.b = Eigen::VectorXd::Zero(f.p);

  for (int r = 0; r < f.cones.n_lin; ++r) {
    const AffineRow& row = prog.linear_inequalities[r];
    const double rho = row_scale_factor(row);
    f.lin_scale.push_back(rho);
    for (const auto& [idx, val] : row.coeffs) g_trip.emplace_back(r, idx, -rho * val);
    f.h[r] = rho * row.constant;
  }
  for (size_t q = 0; q < prog.soc_constraints.size(); ++q) {
    const SocConstraint& cone = prog.soc_constraints[q];
    double m = std::abs(cone.bound.constant);
    for (const auto& [idx, val] : cone.bound.coeffs) m = std::max(m, std::abs(val));
    for (const auto& row : cone.rows) {
      m = std::max(m, std::abs(row.constant));
      for (const auto& [idx, val] : row.coeffs) m = std::max(m, std::abs(val));
    }
    const double rho = m > 0 ? 1.0 / m : 1.0;
    f.soc_scale.push_back(rho);
    const int o = f.cones.soc_offsets[q];
    for (const auto& [idx, val] : cone.bound.coeffs) g_trip.emplace_back(o, idx, -rho * val);
    f.h[o] = rho * cone.bound.constant;
    for (size_t k = 0; k < cone.rows.size(); ++k) {
      for (const auto& [idx, val] : cone.rows[k].coeffs)
        g_trip.emplace_back(o + 1 + static_cast<int>(k), idx, -rho * val);
      f.h[o + 1 + static_cast<int>(k)] = rho * cone.rows[k].constant;
    }
  }
  for (int r = 0; r < f.p; ++r) {
    const AffineRow& row = prog.equalities[eq_kept[r]];
    const double rho = row_scale_factor(row);
    f.eq_scale.push_back(rho);
    for (const auto& [idx, val] : row.coeffs) a_trip.emplace_back(r, idx, rho * val);
    f.b[r] = -rho * row.constant;
  }

  f.G.resize(f.m, f.n);
  f.G.setFromTriplets(g_trip.begin(), g_trip.end());
  f.A.resize(f.p, f.n);
  f.A.setFromTriplets(a_trip.begin(), a_trip.end());
  return f;
}

// ---- cone algebra ---------------------------------------------------------

double cone_violation(const ConeLayout& lay, const Eigen::VectorXd& v) {
  double viol = -kInf;
  for (int i = 0; i < lay.n_lin; ++i) viol = std::max(viol, -v[i]);
  for (size_t q = 0; q < lay.soc_dims.size(); ++q) {
    const int o = lay.soc_offsets[q], d = lay.soc_dims[q];
    viol = std::max(viol, v.segment(o + 1, d - 1).norm() - v[o]);
  }
  return viol;
}

void add_identity(const ConeLayout& lay, Eigen::VectorXd& v, double alpha) {
  for (int i = 0; i < lay.n_lin; ++i) v[i] += alpha;
  for (size_t q = 0; q < lay.soc_dims.size(); ++q) v[lay.soc_offsets[q]] += alpha;
}

Eigen::VectorXd cone_identity(const ConeLayout& lay) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(lay.total);
  add_identity(lay, e, 1.0);
  return e;
}

// sup { alpha : v + alpha dv in K }
double max_step(const ConeLayout& lay, const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
  double alpha = kInf;
  for (int i = 0; i < lay.n_lin; ++i)
    if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
  for (size_t q = 0; q < lay.soc_dims.size(); ++q) {
    const int o = lay.soc_offsets[q], d = lay.soc_dims[q];
    const double v0 = v[o], d0 = dv[o];
    const auto v1 = v.segment(o + 1, d - 1);
    const auto d1 = dv.segment(o + 1, d - 1);
    const double a = d0 * d0 - d1.squaredNorm();
    const double bq = 2.0 * (v0 * d0 - v1.dot(d1));
    const double cq = v0 * v0 - v1.squaredNorm();
    // f(alpha) = a alpha^2 + b alpha + c, f(0) = c > 0; first positive root
    // bounds the step (the boundary is hit on the norm condition first).
    double root = kInf;
    if (std::abs(a) < 1e-300) {
      if (bq < 0.0) root = -cq / bq;
    } else {
      const double disc = bq * bq - 4.0 * a * cq;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        const double qq = -0.5 * (bq + (bq >= 0.0 ? sq : -sq));
        for (double r : {qq / a, qq != 0.0 ? cq / qq : kInf})
          if (r > 0.0 && std::isfinite(r)) root = std::min(root, r);
      }
    }
    alpha = std::min(alpha, root);
  }
  return alpha;
}

// Nesterov-Todd scaling point: W z = W^{-1} s = lambda.
struct NtScaling {
  const ConeLayout* lay = nullptr;
  Eigen::VectorXd d_lin;                  // orthant: W = diag(d)
  std::vector<double> eta;                // per cone: W = eta * Wbar
  std::vector<Eigen::VectorXd> wbar;      // hyperbolic unit vectors
  Eigen::VectorXd lambda;
};

Eigen::VectorXd apply_wbar(const Eigen::VectorXd& w, const Eigen::VectorXd& v) {
  const int d = static_cast<int>(v.size());
  const double w0 = w[0];
  const auto w1 = w.tail(d - 1);
  const auto v1 = v.tail(d - 1);
  const double dot = w1.dot(v1);
  Eigen::VectorXd r(d);
  r[0] = w0 * v[0] + dot;
  r.tail(d - 1) = v1 + (v[0] + dot / (1.0 + w0)) * w1;
  return r;
}

Eigen::VectorXd apply_jmat(const Eigen::VectorXd& v) {
  Eigen::VectorXd r = -v;
  r[0] = v[0];
  return r;
}

NtScaling identity_scaling(const ConeLayout& lay) {
  NtScaling w;
  w.lay = &lay;
  w.d_lin = Eigen::VectorXd::Ones(lay.n_lin);
  for (size_t q = 0; q < lay.soc_dims.size(); ++q) {
    w.eta.push_back(1.0);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(lay.soc_dims[q]);
    e[0] = 1.0;
    w.wbar.push_back(e);
  }
  return w;
}

NtScaling compute_scaling(const ConeLayout& lay, const Eigen::VectorXd& s,
                          const Eigen::VectorXd& z) {
  NtScaling w;
  w.lay = &lay;
  w.d_lin.resize(lay.n_lin);
  for (int i = 0; i < lay.n_lin; ++i) w.d_lin[i] = std::sqrt(s[i] / z[i]);
  for (size_t q = 0; q < lay.soc_dims.size(); ++q) {
    const int o = lay.soc_offsets[q], d = lay.soc_dims[q];
    const Eigen::VectorXd sq = s.segment(o, d), zq = z.segment(o, d);
    const double aa =
        std::sqrt(std::max(sq[0] * sq[0] - sq.tail(d - 1).squaredNorm(), 1e-300));
    const double bb =
        std::sqrt(std::max(zq[0] * zq[0] - zq.tail(d - 1).squaredNorm(), 1e-300));
    const Eigen::VectorXd sb = sq / aa, zb = zq / bb;
    const double gamma = std::sqrt((1.0 + sb.dot(zb)) / 2.0);
    w.eta.push_back(std::sqrt(aa / bb));
    w.wbar.push_back((sb + apply_jmat(zb)) / (2.0 * gamma));
  }
  // lambda = W z is filled in by the caller once the scaling is complete
  return w;
}

Eigen::VectorXd apply_w(const NtScaling& w, const Eigen::VectorXd& v) {
  const ConeLayout& lay = *w.lay;
  Eigen::VectorXd r(lay.total);
  r.head(lay.n_lin) = w.d_lin.cwiseProduct(v.head(lay.n_lin));
  for (size_t q = 0; q < lay.soc_dims.size(); ++q) {
    const int o = lay.soc_offsets[q], d = lay.soc_dims[q];
    r.segment(o, d) = w.eta[q] * apply_wbar(w.wbar[q], v.segment(o, d));
  }
  return r;
}

Eigen::VectorXd apply_winv(const NtScaling& w, const Eigen::VectorXd& v) {
  const ConeLayout& lay = *w.lay;
  Eigen::VectorXd r(lay.total);
  r.head(lay.n_lin) = v.head(lay.n_lin).cwiseQuotient(w.d_lin);
  for (size_t q = 0; q < lay.soc_dims.size(); ++q) {
    const int o = lay.soc_offsets[q], d = lay.soc_dims[q];
    r.segment(o, d) =
        apply_jmat(apply_wbar(w.wbar[q], apply_jmat(v.segment(o, d)))) / w.eta[q];
  }
  return r;
}

Eigen::VectorXd apply_w2(const NtScaling& w, const Eigen::VectorXd& v) {
  const ConeLayout& lay = *w.lay;
  Eigen::VectorXd r(lay.total);
  r.head(lay.n_lin) = w.d_lin.array().square().matrix().cwiseProduct(v.head(lay.n_lin));
  for (size_t q = 0; q < lay.soc_dims.size(); ++q) {
    const int o = lay.soc_offsets[q], d = lay.soc_dims[q];
    const auto vq = v.segment(o, d);
    const double e2 = w.eta[q] * w.eta[q];
    r.segment(o, d) = e2 * (2.0 * w.wbar[q].dot(vq) * w.wbar[q] - apply_jmat(vq));
  }
  return r;
}

Eigen::VectorXd jordan_prod(const ConeLayout& lay, const Eigen::VectorXd& u,
                            const Eigen::VectorXd& v) {
  Eigen::VectorXd r(lay.total);
  r.head(lay.n_lin) = u.head(lay.n_lin).cwiseProduct(v.head(lay.n_lin));
  for (size_t q = 0; q < lay.soc_dims.size(); ++q) {
    const int o = lay.soc_offsets[q], d = lay.soc_dims[q];
    const auto uq = u.segment(o, d);
    const auto vq = v.segment(o, d);
    r[o] = uq.dot(vq);
    r.segment(o + 1, d - 1) = uq[0] * vq.tail(d - 1) + vq[0] * uq.tail(d - 1);
  }
  return r;
}

// x with lambda o x = d
Eigen::VectorXd jordan_solve(const ConeLayout& lay, const Eigen::VectorXd& lambda,
                             const Eigen::VectorXd& d) {
  Eigen::VectorXd r(lay.total);
  r.head(lay.n_lin) = d.head(lay.n_lin).cwiseQuotient(lambda.head(lay.n_lin));
  for (size_t q = 0; q < lay.soc_dims.size(); ++q) {
    const int o = lay.soc_offsets[q], dd = lay.soc_dims[q];
    const auto lq = lambda.segment(o, dd);
    const auto dq = d.segment(o, dd);
    const double nu = lq[0] * lq[0] - lq.tail(dd - 1).squaredNorm();
    const double x0 = (lq[0] * dq[0] - lq.tail(dd - 1).dot(dq.tail(dd - 1))) / nu;
    r[o] = x0;
    r.segment(o + 1, dd - 1) = (dq.tail(dd - 1) - x0 * lq.tail(dd - 1)) / lq[0];
  }
  return r;
}

// ---- presolve -------------------------------------------------------------

struct Presolve {
  bool infeasible = false;
  std::vector<int> eq_kept;
  bool shortcut = false;
  Eigen::VectorXd x;
  Eigen::VectorXd z_lin;
  Eigen::VectorXd y_eq_full;  // per original equality row
};

Presolve run_presolve(const ConicProgram& prog) {
  Presolve pre;
  std::map<int, std::pair<double, int>> fixes;  // var -> (value, kept row)
  for (size_t r = 0; r < prog.equalities.size(); ++r) {
    const AffineRow& row = prog.equalities[r];
    if (row.coeffs.size() == 1 && row.coeffs[0].second != 0.0) {
      const int v = row.coeffs[0].first;
      const double val = -row.constant / row.coeffs[0].second;
      auto it = fixes.find(v);
      if (it == fixes.end()) {
        fixes.emplace(v, std::make_pair(val, static_cast<int>(r)));
        pre.eq_kept.push_back(static_cast<int>(r));
      } else if (std::abs(it->second.first - val) > 1e-12 * (1.0 + std::abs(val))) {
        pre.infeasible = true;
        return pre;
      }
      // consistent duplicate: drop
    } else {
      pre.eq_kept.push_back(static_cast<int>(r));
    }
  }

  // Bound-only LP shortcut: no cones, only variable fixes, every inequality a
  // singleton lower bound with positive coefficient, objective >= 0. The
  // optimum is each variable at its tightest bound (or its fix), exactly.
  if (!prog.soc_constraints.empty()) return pre;
  const int n = prog.num_vars;
  for (size_t r = 0; r < prog.equalities.size(); ++r) {
    const AffineRow& row = prog.equalities[r];
    if (row.coeffs.size() != 1 || row.coeffs[0].second == 0.0) return pre;
  }
  std::vector<double> bound(n, -kInf);
  std::vector<int> bound_row(n, -1);
  for (size_t r = 0; r < prog.linear_inequalities.size(); ++r) {
    const AffineRow& row = prog.linear_inequalities[r];
    if (row.coeffs.size() != 1 || row.coeffs[0].second <= 0.0) return pre;
    const int v = row.coeffs[0].first;
    const double lb = -row.constant / row.coeffs[0].second;
    if (lb > bound[v]) {
      bound[v] = lb;
      bound_row[v] = static_cast<int>(r);
    }
  }
  pre.x = Eigen::VectorXd::Zero(n);
  for (int v = 0; v < n; ++v) {
    const double cv = prog.objective[v];
    auto it = fixes.find(v);
    if (it != fixes.end()) {
      pre.x[v] = it->second.first;
    } else if (bound_row[v] >= 0) {
      pre.x[v] = bound[v];
    } else if (cv != 0.0) {
      return pre;  // unbounded or needs a real solve
    }
    if (cv < 0.0 && it == fixes.end()) return pre;
  }
  // feasibility of bounds at fixed variables
  for (const AffineRow& row : prog.linear_inequalities)
    if (row.eval(pre.x) < -1e-12 * (1.0 + std::abs(row.constant))) return pre;

  pre.z_lin = Eigen::VectorXd::Zero(prog.linear_inequalities.size());
  pre.y_eq_full = Eigen::VectorXd::Zero(prog.equalities.size());
  for (int v = 0; v < n; ++v) {
    const double cv = prog.objective[v];
    if (cv == 0.0) continue;
    auto it = fixes.find(v);
    if (it != fixes.end()) {
      const AffineRow& row = prog.equalities[it->second.second];
      pre.y_eq_full[it->second.second] = -cv / row.coeffs[0].second;
    } else {
      const AffineRow& row = prog.linear_inequalities[bound_row[v]];
      pre.z_lin[bound_row[v]] = cv / row.coeffs[0].second;
    }
  }
  pre.shortcut = true;
  return pre;
}

// ---- solution packaging ---------------------------------------------------

StepSolution package(const ConicProgram& prog, const InternalForm& f, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& z, const Eigen::VectorXd& y) {
  StepSolution sol;
  sol.x = x;
  sol.u = x.head(prog.num_field_vars);
  sol.aux = x.tail(prog.num_vars - prog.num_field_vars);
  sol.z_linear.resize(f.cones.n_lin);
  for (int r = 0; r < f.cones.n_lin; ++r)
    sol.z_linear[r] = f.obj_scale * f.lin_scale[r] * z[r];
  for (size_t q = 0; q < f.cones.soc_dims.size(); ++q) {
    const int o = f.cones.soc_offsets[q], d = f.cones.soc_dims[q];
    sol.z_soc.push_back(f.obj_scale * f.soc_scale[q] * z.segment(o, d));
  }
  sol.y_eq = Eigen::VectorXd::Zero(prog.equalities.size());
  for (int r = 0; r < f.p; ++r)
    sol.y_eq[f.eq_kept[r]] = f.obj_scale * f.eq_scale[r] * y[r];
  return sol;
}

}  // namespace

StepSolution ConicSolver::solve(const ConicProgram& prog, const SolverConfig& cfg,
                                const Eigen::VectorXd* warm_x) {
  Presolve pre = run_presolve(prog);
  if (pre.infeasible) {
    StepSolution sol;
    sol.status = SolveStatus::Infeasible;
    sol.x = Eigen::VectorXd::Zero(prog.num_vars);
    sol.u = sol.x.head(prog.num_field_vars);
    sol.aux = sol.x.tail(prog.num_vars - prog.num_field_vars);
    sol.kkt = verify_kkt(prog, sol);
    return sol;
  }
  if (pre.shortcut) {
    StepSolution sol;
    sol.x = pre.x;
    sol.u = pre.x.head(prog.num_field_vars);
    sol.aux = pre.x.tail(prog.num_vars - prog.num_field_vars);
    sol.z_linear = pre.z_lin;
    sol.y_eq = pre.y_eq_full;
    sol.iterations = 0;
    sol.kkt = verify_kkt(prog, sol);
    if (sol.kkt.worst() <=
        std::max(cfg.eps_primal, std::max(cfg.eps_dual, cfg.eps_gap))) {
      sol.status = SolveStatus::Optimal;
      return sol;
    }
    // fall through to the interior-point path on any surprise
  }

  InternalForm f = build_internal(prog, pre.eq_kept);
  const ConeLayout& lay = f.cones;
  const int n = f.n, p = f.p, m = f.m;
  const int N = n + p + m;

  if (m == 0) throw std::invalid_argument("conic solve needs at least one inequality or cone");

  double delta = 1e-9;

  // KKT assembly; the sparsity pattern is independent of iteration, so the
  // symbolic factorization is shared across calls with identical structure.
  auto assemble_kkt = [&](const NtScaling& w, double reg) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<size_t>(N) + f.A.nonZeros() + f.G.nonZeros() + 9 * lay.soc_dims.size());
    for (int i = 0; i < n; ++i) trip.emplace_back(i, i, reg);
    for (int k = 0; k < f.A.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(f.A, k); it; ++it)
        trip.emplace_back(n + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    for (int r = 0; r < p; ++r) trip.emplace_back(n + r, n + r, -reg);
    for (int k = 0; k < f.G.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(f.G, k); it; ++it)
        trip.emplace_back(n + p + static_cast<int>(it.row()), static_cast<int>(it.col()),
                          it.value());
    for (int i = 0; i < lay.n_lin; ++i)
      trip.emplace_back(n + p + i, n + p + i, -w.d_lin[i] * w.d_lin[i] - reg);
    for (size_t q = 0; q < lay.soc_dims.size(); ++q) {
      const int o = lay.soc_offsets[q], d = lay.soc_dims[q];
      const double e2 = w.eta[q] * w.eta[q];
      for (int a = 0; a < d; ++a)
        for (int bcol = 0; bcol <= a; ++bcol) {
          double jab = (a == bcol) ? (a == 0 ? 1.0 : -1.0) : 0.0;
          double val = -e2 * (2.0 * w.wbar[q][a] * w.wbar[q][bcol] - jab);
          if (a == bcol) val -= reg;
          trip.emplace_back(n + p + o + a, n + p + o + bcol, val);
        }
    }
    Eigen::SparseMatrix<double> kkt(N, N);
    kkt.setFromTriplets(trip.begin(), trip.end(),
                        [](const double& x, const double& y) { return x + y; });
    return kkt;
  };

  auto factorize = [&](const Eigen::SparseMatrix<double>& kkt) {
    const Eigen::Index nnz = kkt.nonZeros();
    const bool same_pattern =
        pattern_ready_ && cached_outer_.size() == kkt.outerSize() + 1 &&
        cached_inner_.size() == nnz &&
        std::equal(kkt.outerIndexPtr(), kkt.outerIndexPtr() + kkt.outerSize() + 1,
                   cached_outer_.data()) &&
        std::equal(kkt.innerIndexPtr(), kkt.innerIndexPtr() + nnz, cached_inner_.data());
    if (!same_pattern) {
      ldlt_.analyzePattern(kkt);
      cached_outer_ = Eigen::Map<const Eigen::VectorXi>(kkt.outerIndexPtr(), kkt.outerSize() + 1);
      cached_inner_ = Eigen::Map<const Eigen::VectorXi>(kkt.innerIndexPtr(), nnz);
      pattern_ready_ = true;
    }
    ldlt_.factorize(kkt);
    return ldlt_.info() == Eigen::Success;
  };

  // Unregularized KKT product for iterative refinement.
  auto kkt_apply = [&](const NtScaling& w, const Eigen::VectorXd& v) {
    Eigen::VectorXd r(N);
    r.head(n) = f.A.transpose() * v.segment(n, p) + f.G.transpose() * v.tail(m);
    r.segment(n, p) = f.A * v.head(n);
    r.tail(m) = f.G * v.head(n) - apply_w2(w, v.tail(m));
    return r;
  };
  auto kkt_solve = [&](const NtScaling& w, const Eigen::VectorXd& rhs) {
    const double rhs_norm = std::max(rhs.cwiseAbs().maxCoeff(), 1e-300);
    Eigen::VectorXd sol = ldlt_.solve(rhs);
    Eigen::VectorXd best = sol;
    double best_res = kInf;
    for (int it = 0; it < 8; ++it) {
      const Eigen::VectorXd resid = rhs - kkt_apply(w, sol);
      const double rnorm = resid.cwiseAbs().maxCoeff();
      if (rnorm < best_res) {
        best_res = rnorm;
        best = sol;
      }
      if (rnorm <= 1e-14 * rhs_norm) break;
      sol += ldlt_.solve(resid);
    }
    return best;
  };

  const Eigen::VectorXd e = cone_identity(lay);

  // Initialization (cvxopt-style): one solve with W = I for a primal guess,
  // one for a dual guess; shift both into the cone interior.
  Eigen::VectorXd x(n), y(p), s(m), z(m);
  {
    NtScaling wi = identity_scaling(lay);
    Eigen::SparseMatrix<double> kkt = assemble_kkt(wi, delta);
    int tries = 0;
    while (!factorize(kkt) && tries < 3) {
      delta *= 100.0;
      kkt = assemble_kkt(wi, delta);
      ++tries;
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N);

    if (warm_x && cfg.warm_start && warm_x->size() == n) {
      x = *warm_x;
    } else {
      rhs.setZero();
      rhs.segment(n, p) = f.b;
      rhs.tail(m) = f.h;
      const Eigen::VectorXd sol1 = kkt_solve(wi, rhs);
      x = sol1.head(n);
    }
    s = f.h - f.G * x;
    const double ap = cone_violation(lay, s);
    if (ap >= 0.0) add_identity(lay, s, 1.0 + ap);

    rhs.setZero();
    rhs.head(n) = -f.c;
    const Eigen::VectorXd sol2 = kkt_solve(wi, rhs);
    y = sol2.segment(n, p);
    z = sol2.tail(m);
    const double ad = cone_violation(lay, z);
    if (ad >= 0.0) add_identity(lay, z, 1.0 + ad);
  }

  StepSolution best;
  double best_worst = kInf;
  int iters_done = 0;
  int stall_count = 0;

  auto record = [&](int iter) {
    StepSolution cand = package(prog, f, x, z, y);
    cand.iterations = iter;
    cand.kkt = verify_kkt(prog, cand);
    if (cand.kkt.worst() < best_worst) {
      best_worst = cand.kkt.worst();
      best = std::move(cand);
    }
    return best.kkt.primal <= cfg.eps_primal && best.kkt.dual <= cfg.eps_dual &&
           best.kkt.gap <= cfg.eps_gap;
  };

  bool converged = record(0);
  for (int iter = 1; iter <= cfg.max_iters && !converged; ++iter) {
    iters_done = iter;
    const Eigen::VectorXd rx = f.c + f.A.transpose() * y + f.G.transpose() * z;
    const Eigen::VectorXd ry = f.A * x - f.b;
    const Eigen::VectorXd rz = f.G * x + s - f.h;
    const double gap = s.dot(z);
    const double mu = gap / lay.degree;

    NtScaling w = compute_scaling(lay, s, z);
    w.lambda = apply_w(w, z);

    Eigen::SparseMatrix<double> kkt = assemble_kkt(w, delta);
    int tries = 0;
    while (!factorize(kkt) && tries < 3) {
      delta *= 100.0;
      kkt = assemble_kkt(w, delta);
      ++tries;
    }

    const Eigen::VectorXd lam2 = jordan_prod(lay, w.lambda, w.lambda);

    auto direction = [&](const Eigen::VectorXd& ds_target) {
      const Eigen::VectorXd dtil = jordan_solve(lay, w.lambda, ds_target);
      Eigen::VectorXd rhs(N);
      rhs.head(n) = -rx;
      rhs.segment(n, p) = -ry;
      rhs.tail(m) = -rz - apply_w(w, dtil);
      const Eigen::VectorXd sol = kkt_solve(w, rhs);
      struct Dir {
        Eigen::VectorXd dx, dy, dz, ds;
      } dir;
      dir.dx = sol.head(n);
      dir.dy = sol.segment(n, p);
      dir.dz = sol.tail(m);
      dir.ds = -rz - f.G * dir.dx;
      return dir;
    };

    // predictor
    auto aff = direction(-lam2);
    const double a_aff =
        std::min({1.0, max_step(lay, s, aff.ds), max_step(lay, z, aff.dz)});
    const double gap_aff = (s + a_aff * aff.ds).dot(z + a_aff * aff.dz);
    double sigma = std::pow(std::max(0.0, gap_aff / gap), 3.0);
    sigma = std::min(1.0, sigma);

    // corrector
    const Eigen::VectorXd eta_cor =
        jordan_prod(lay, apply_winv(w, aff.ds), apply_w(w, aff.dz));
    auto dir = direction(-lam2 - eta_cor + sigma * mu * e);

    double alpha =
        0.99 * std::min(max_step(lay, s, dir.ds), max_step(lay, z, dir.dz));
    alpha = std::min(alpha, 1.0);
    if (alpha < 1e-9) {
      if (++stall_count >= 3) break;
    } else {
      stall_count = 0;
    }

    x += alpha * dir.dx;
    y += alpha * dir.dy;
    s += alpha * dir.ds;
    z += alpha * dir.dz;

    converged = record(iter);
    if (!std::isfinite(s.sum()) || !std::isfinite(z.sum()) || !std::isfinite(x.sum())) break;
  }

  best.iterations = iters_done;
  best.status = (best.kkt.primal <= cfg.eps_primal && best.kkt.dual <= cfg.eps_dual &&
                 best.kkt.gap <= cfg.eps_gap)
                    ? SolveStatus::Optimal
                    : SolveStatus::MaxIters;
  return best;
}

StepSolution solve_conic(const ConicProgram& program, const SolverConfig& config,
                         const Eigen::VectorXd* warm_x) {
  ConicSolver solver;
  return solver.solve(program, config, warm_x);
}

}  // namespace meshpde
