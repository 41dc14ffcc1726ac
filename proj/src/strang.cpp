#include "meshpde/strang.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "meshpde/fields.hpp"

namespace meshpde {

HeatSolver::HeatSolver(const FemOperators& ops, double epsilon, double h)
    : ops_(&ops), epsilon_(epsilon), h_(h) {
  if (epsilon < 0.0) throw std::invalid_argument("viscosity epsilon must be >= 0");
  if (h <= 0.0) throw std::invalid_argument("time step h must be positive");
  if (epsilon == 0.0) {
    identity_ = true;
    return;
  }

  const Eigen::SparseMatrix<double> full = ops.M - (0.5 * h * epsilon) * ops.L;

  std::vector<char> fixed(ops.nv, 0);
  fixed_values_ = Eigen::VectorXd::Zero(ops.nv);
  if (ops.bc.kind == BoundaryCondition::Kind::Dirichlet) {
    for (size_t k = 0; k < ops.bc.dirichlet_vertices.size(); ++k) {
      fixed[ops.bc.dirichlet_vertices[k]] = 1;
      fixed_values_[ops.bc.dirichlet_vertices[k]] =
          ops.bc.dirichlet_values[static_cast<Eigen::Index>(k)];
    }
  }

  std::vector<int> to_free(ops.nv, -1);
  for (int i = 0; i < ops.nv; ++i) {
    if (!fixed[i]) {
      to_free[i] = static_cast<int>(free_vertices_.size());
      free_vertices_.push_back(i);
    } else {
      fixed_vertices_.push_back(i);
    }
  }

  if (fixed_vertices_.empty()) {
    op_ = full;
  } else {
    std::vector<int> to_fixed(ops.nv, -1);
    for (size_t k = 0; k < fixed_vertices_.size(); ++k)
      to_fixed[fixed_vertices_[k]] = static_cast<int>(k);
    std::vector<Eigen::Triplet<double>> ff, fc;
    for (int k = 0; k < full.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(full, k); it; ++it) {
        const int r = static_cast<int>(it.row()), c = static_cast<int>(it.col());
        if (fixed[r]) continue;
        if (!fixed[c])
          ff.emplace_back(to_free[r], to_free[c], it.value());
        else
          fc.emplace_back(to_free[r], to_fixed[c], it.value());
      }
    op_.resize(static_cast<int>(free_vertices_.size()), static_cast<int>(free_vertices_.size()));
    op_.setFromTriplets(ff.begin(), ff.end());
    coupling_.resize(static_cast<int>(free_vertices_.size()),
                     static_cast<int>(fixed_vertices_.size()));
    coupling_.setFromTriplets(fc.begin(), fc.end());
  }

  ldlt_ = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
  ldlt_->compute(op_);
  if (ldlt_->info() != Eigen::Success)
    throw std::runtime_error(
        "heat operator factorization failed (matrix should be SPD; epsilon=" +
        std::to_string(epsilon) + ", h=" + std::to_string(h) + ", nv=" + std::to_string(ops.nv) +
        ")");
}

Eigen::VectorXd HeatSolver::half_step(const Eigen::VectorXd& u) const {
  if (u.size() != ops_->nv) throw std::invalid_argument("field length does not match operators");
  if (identity_) return u;

  const Eigen::VectorXd mu = ops_->vertex_area.cwiseProduct(u);
  if (fixed_vertices_.empty()) {
    // no elimination: one refinement pass keeps the residual near round-off
    Eigen::VectorXd x = ldlt_->solve(mu);
    x += ldlt_->solve(mu - op_ * x);
    return x;
  }

  const int nfree = static_cast<int>(free_vertices_.size());
  Eigen::VectorXd g(coupling_.cols());
  for (size_t k = 0; k < fixed_vertices_.size(); ++k) g[k] = fixed_values_[fixed_vertices_[k]];
  Eigen::VectorXd rhs(nfree);
  for (int k = 0; k < nfree; ++k) rhs[k] = mu[free_vertices_[k]];
  rhs -= coupling_ * g;
  Eigen::VectorXd xf = ldlt_->solve(rhs);
  xf += ldlt_->solve(rhs - op_ * xf);

  Eigen::VectorXd out = fixed_values_;
  for (int k = 0; k < nfree; ++k) out[free_vertices_[k]] = xf[k];
  return out;
}

namespace {

Eigen::VectorXd warm_start_vector(const ConicProgram& prog, const HamiltonianKind& kind,
                                  const Eigen::VectorXd& u1, const FemOperators& ops) {
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(prog.num_vars);
  x0.head(ops.nv) = u1;
  if (prog.num_vars > ops.nv) {
    const Eigen::VectorXd gu = ops.G * u1;
    for (int f = 0; f < ops.nf; ++f) {
      const double norm = gu.segment<3>(3 * f).norm();
      const double base = kind.tag == HamiltonianKind::Tag::NonlinearDiffusion ? norm * norm : norm;
      x0[ops.nv + f] = base + 0.1 * (1.0 + base);
    }
  }
  return x0;
}

}  // namespace

Eigen::VectorXd strang_step(const PdeProblem& problem, const HeatSolver& heat,
                            const Eigen::VectorXd& u_prev, double h,
                            StepDiagnostics* diagnostics, ConicSolver* solver) {
  if (std::abs(heat.step_size() - h) > 1e-14 * std::max(1.0, h) ||
      heat.epsilon() != problem.epsilon)
    throw std::invalid_argument("heat solver was prefactored for different (epsilon, h)");

  const auto t0 = std::chrono::steady_clock::now();
  const Eigen::VectorXd u1 = heat.half_step(u_prev);

  const ConicProgram prog = assemble_step(problem.kind, u1, h, *problem.ops);
  const Eigen::VectorXd warm = warm_start_vector(prog, problem.kind, u1, *problem.ops);
  ConicSolver local;
  ConicSolver& cs = solver ? *solver : local;
  const StepSolution sol = cs.solve(prog, problem.solver, &warm);
  if (sol.status != SolveStatus::Optimal) {
    throw SolverFailure(
        "conic step did not reach Optimal (status=" +
            std::string(sol.status == SolveStatus::MaxIters ? "MaxIters" : "Infeasible") +
            ", primal=" + std::to_string(sol.kkt.primal) + ", dual=" +
            std::to_string(sol.kkt.dual) + ", gap=" + std::to_string(sol.kkt.gap) + ")",
        sol.kkt, sol.iterations);
  }

  const Eigen::VectorXd u_next = heat.half_step(sol.u);
  if (diagnostics) {
    diagnostics->conic_iterations = sol.iterations;
    diagnostics->kkt = sol.kkt;
    diagnostics->wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return u_next;
}

Trajectory evolve(const PdeProblem& problem, double h, int n_steps, int snapshot_every) {
  if (n_steps < 1) throw std::invalid_argument("evolve needs n_steps >= 1");
  if (snapshot_every < 1) throw std::invalid_argument("snapshot_every must be >= 1");
  if (!problem.ops) throw std::invalid_argument("problem has no operators");
  if (problem.u0.size() != problem.ops->nv)
    throw std::invalid_argument("u0 length does not match mesh");

  const HeatSolver heat(*problem.ops, problem.epsilon, h);
  ConicSolver solver;

  Trajectory traj;
  traj.h = h;
  traj.times.push_back(0.0);
  traj.fields.push_back(problem.u0);

  Eigen::VectorXd u = problem.u0;
  for (int step = 1; step <= n_steps; ++step) {
    StepDiagnostics diag;
    u = strang_step(problem, heat, u, h, &diag, &solver);
    if (!u.allFinite())
      throw NonFiniteField("field became non-finite at step " + std::to_string(step), step);
    traj.diagnostics.push_back(diag);
    if (step % snapshot_every == 0 || step == n_steps) {
      traj.times.push_back(step * h);
      traj.fields.push_back(u);
    }
  }
  return traj;
}

std::vector<double> estimate_order(const std::vector<std::pair<double, double>>& errors) {
  if (errors.size() < 2)
    throw std::invalid_argument("estimate_order needs at least two (N, error) entries");
  std::vector<double> orders;
  for (size_t k = 0; k + 1 < errors.size(); ++k) {
    const double ratio = errors[k].first / errors[k + 1].first;
    if (!(ratio > 1.5 && ratio < 2.5))
      throw std::invalid_argument("resolutions must halve between consecutive entries (ratio " +
                                  std::to_string(ratio) + ")");
    const double e0 = errors[k].second, e1 = errors[k + 1].second;
    if (!(e0 > 0.0) || !(e1 > 0.0) || e0 == e1)
      throw std::domain_error("degenerate consecutive errors (division by zero in order ratio)");
    orders.push_back(std::log2(e0 / e1));
  }
  return orders;
}

void export_trajectory(const Trajectory& traj, const PdeProblem& problem,
                       const std::string& out_dir, const std::string& mesh_file) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  std::vector<std::string> snapshot_files;
  for (size_t k = 0; k < traj.fields.size(); ++k) {
    char name[64];
    std::snprintf(name, sizeof(name), "snapshot_%04zu.txt", k);
    write_vertex_field(traj.fields[k], (fs::path(out_dir) / name).string());
    snapshot_files.emplace_back(name);
  }

  {
    std::ofstream csv(fs::path(out_dir) / "diagnostics.csv");
    csv << "step,time,conic_iterations,kkt_primal,kkt_dual,kkt_gap,wall_seconds\n";
    csv.precision(17);
    for (size_t k = 0; k < traj.diagnostics.size(); ++k) {
      const auto& d = traj.diagnostics[k];
      csv << (k + 1) << ',' << (k + 1) * traj.h << ',' << d.conic_iterations << ',' << d.kkt.primal
          << ',' << d.kkt.dual << ',' << d.kkt.gap << ',' << d.wall_seconds << '\n';
    }
  }

  nlohmann::json manifest;
  manifest["h"] = traj.h;
  manifest["epsilon"] = problem.epsilon;
  switch (problem.kind.tag) {
    case HamiltonianKind::Tag::NonlinearDiffusion: manifest["kind"] = "nonlinear_diffusion"; break;
    case HamiltonianKind::Tag::GEquation: manifest["kind"] = "g_equation"; break;
    case HamiltonianKind::Tag::FokkerPlanck: manifest["kind"] = "fokker_planck"; break;
  }
  manifest["mesh_file"] = mesh_file;
  manifest["times"] = traj.times;
  manifest["snapshots"] = snapshot_files;
  manifest["diagnostics_csv"] = "diagnostics.csv";

  std::ofstream out(fs::path(out_dir) / "manifest.json");
  out << manifest.dump(2) << '\n';
}

}  // namespace meshpde
