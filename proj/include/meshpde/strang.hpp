#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCholesky>

#include <memory>
#include <string>
#include <vector>

#include "meshpde/conic.hpp"
#include "meshpde/fem.hpp"
#include "meshpde/hamiltonian.hpp"

namespace meshpde {

// The Cauchy problem du/dt + H(x, grad u, u) = eps * Lap u, u(0) = u0,
// discretized on the operators' mesh. Boundary handling comes from the
// operators' boundary condition.
struct PdeProblem {
  HamiltonianKind kind;
  double epsilon = 0.0;
  Eigen::VectorXd u0;
  const FemOperators* ops = nullptr;
  SolverConfig solver;
};

class SolverFailure : public std::runtime_error {
public:
  SolverFailure(const std::string& what, KktResiduals kkt, int iterations)
      : std::runtime_error(what), kkt(kkt), iterations(iterations) {}
  KktResiduals kkt;
  int iterations = 0;
};

class NonFiniteField : public std::runtime_error {
public:
  NonFiniteField(const std::string& what, int step) : std::runtime_error(what), step(step) {}
  int step = 0;
};

// Prefactored solve of (M - (h/2) eps L) x = M u, the implicit heat
// half-step shared by steps I and III of the splitting. Dirichlet vertices
// are eliminated (rows/columns dropped, values moved to the right-hand side).
class HeatSolver {
public:
  HeatSolver(const FemOperators& ops, double epsilon, double h);

  Eigen::VectorXd half_step(const Eigen::VectorXd& u) const;

  double epsilon() const { return epsilon_; }
  double step_size() const { return h_; }

private:
  const FemOperators* ops_;
  double epsilon_;
  double h_;
  bool identity_ = false;
  std::vector<int> free_vertices_;
  std::vector<int> fixed_vertices_;
  Eigen::VectorXd fixed_values_;       // full-length, zero at free vertices
  Eigen::SparseMatrix<double> op_;     // factored operator (free block)
  Eigen::SparseMatrix<double> coupling_;  // free x fixed block
  std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> ldlt_;
};

inline HeatSolver prefactor_heat(const FemOperators& ops, double epsilon, double h) {
  return HeatSolver(ops, epsilon, h);
}

struct StepDiagnostics {
  int conic_iterations = 0;
  KktResiduals kkt;
  double wall_seconds = 0.0;
};

struct Trajectory {
  double h = 0.0;
  std::vector<double> times;            // snapshot times, times[0] = 0
  std::vector<Eigen::VectorXd> fields;  // fields[0] = u0
  std::vector<StepDiagnostics> diagnostics;  // one per time step
};

// One Strang-Marchuk step: heat half-step, implicit Hamilton-Jacobi step via
// the conic program, heat half-step. Throws SolverFailure if the conic solve
// does not reach Optimal.
Eigen::VectorXd strang_step(const PdeProblem& problem, const HeatSolver& heat,
                            const Eigen::VectorXd& u_prev, double h,
                            StepDiagnostics* diagnostics = nullptr,
                            ConicSolver* solver = nullptr);

// Time evolution with a single heat prefactorization and a reused conic
// workspace; stores every snapshot_every-th field (plus the final one) and
// all per-step diagnostics. Aborts with NonFiniteField on NaN/Inf.
Trajectory evolve(const PdeProblem& problem, double h, int n_steps, int snapshot_every = 1);

// R = log2(e_N / e_{N/2}) for consecutive resolution/error pairs ordered
// coarse to fine; requires near-halving resolutions and distinct errors.
std::vector<double> estimate_order(const std::vector<std::pair<double, double>>& errors);

// Manifest + per-snapshot scalar files + diagnostics CSV under out_dir.
void export_trajectory(const Trajectory& trajectory, const PdeProblem& problem,
                       const std::string& out_dir, const std::string& mesh_file);

}  // namespace meshpde
