#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <iosfwd>
#include <vector>

#include "meshpde/fem.hpp"
#include "meshpde/hamiltonian.hpp"

namespace meshpde {

// Affine expression sum_k coeffs[k].second * x[coeffs[k].first] + constant.
struct AffineRow {
  std::vector<std::pair<int, double>> coeffs;
  double constant = 0.0;

  double eval(const Eigen::VectorXd& x) const {
    double v = constant;
    for (const auto& [idx, c] : coeffs) v += c * x[idx];
    return v;
  }
};

// ||[rows(x)]||_2 <= bound(x), a second-order cone constraint.
struct SocConstraint {
  std::vector<AffineRow> rows;
  AffineRow bound;
};

// Linear-objective program with affine inequalities (row >= 0), equality rows
// (row == 0) and second-order cones. The leading num_field_vars variables are
// the PDE field u; the rest are per-face auxiliaries.
struct ConicProgram {
  int num_vars = 0;
  int num_field_vars = 0;
  Eigen::VectorXd objective;
  std::vector<AffineRow> linear_inequalities;
  std::vector<SocConstraint> soc_constraints;
  std::vector<AffineRow> equalities;
};

struct SolverConfig {
  // sqrt(machine precision), the tolerance used throughout the experiments
  double eps_primal = 1.4901161193847656e-8;
  double eps_dual = 1.4901161193847656e-8;
  double eps_gap = 1.4901161193847656e-8;
  int max_iters = 100;
  bool warm_start = true;
};

enum class SolveStatus { Optimal, MaxIters, Infeasible };

struct KktResiduals {
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
  double worst() const { return std::max(primal, std::max(dual, gap)); }
};

struct StepSolution {
  Eigen::VectorXd u;        // field block (first num_field_vars entries of x)
  Eigen::VectorXd aux;      // remaining variables (cone epigraph values)
  Eigen::VectorXd x;        // full primal vector
  Eigen::VectorXd z_linear; // multipliers of the linear inequality rows
  std::vector<Eigen::VectorXd> z_soc;  // multipliers per cone (dual cone block)
  Eigen::VectorXd y_eq;     // multipliers of the equality rows
  SolveStatus status = SolveStatus::MaxIters;
  KktResiduals kkt;
  int iterations = 0;
};

// Builds the implicit Hamilton-Jacobi step as a conic program:
//   minimize sum_i u_i subject to, per free vertex i,
//   u_i - u_prev_i + h * H_i(u) >= 0 (in epigraph/SOCP form per kind),
// Dirichlet vertices become equality rows (their inequality is dropped; the
// PDE constraint does not apply where the value is prescribed).
// Feasible by construction: u = u_prev + c*1 satisfies all rows for large c.
ConicProgram assemble_step(const HamiltonianKind& kind, const Eigen::VectorXd& u_prev, double h,
                           const FemOperators& ops);

// Primal-dual interior-point SOCP solver (Nesterov-Todd scaling, Mehrotra
// predictor-corrector, sparse LDLT on the regularized KKT system with
// iterative refinement). Reusable across solves; symbolic factorization is
// cached while the program sparsity pattern stays identical.
class ConicSolver {
public:
  StepSolution solve(const ConicProgram& program, const SolverConfig& config = {},
                     const Eigen::VectorXd* warm_x = nullptr);

private:
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower> ldlt_;
  Eigen::VectorXi cached_outer_;
  Eigen::VectorXi cached_inner_;
  bool pattern_ready_ = false;
};

StepSolution solve_conic(const ConicProgram& program, const SolverConfig& config = {},
                         const Eigen::VectorXd* warm_x = nullptr);

// Recomputes primal/dual/complementarity residuals from the raw program data,
// independent of solver state. Missing duals count as zero.
KktResiduals verify_kkt(const ConicProgram& program, const StepSolution& solution);

// Plain-text program round trip for cross-checks against external solvers.
void dump_program(const ConicProgram& program, std::ostream& out);
ConicProgram load_program(std::istream& in);
void dump_program(const ConicProgram& program, const std::string& path);
ConicProgram load_program(const std::string& path);

}  // namespace meshpde
