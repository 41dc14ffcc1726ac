#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCholesky>

#include <memory>
#include <vector>

#include "meshpde/conic.hpp"
#include "meshpde/fem.hpp"
#include "meshpde/strang.hpp"

namespace meshpde {

// Nonnegative per-vertex masses with unit mass-weighted total, 1^T M mu = 1.
struct Distribution {
  Eigen::VectorXd mu;
};

// Raised by the linear-domain kernel path when iterates develop zeros, signs
// or non-finite entries; the log-domain path never raises it.
class NumericalUnderflow : public std::runtime_error {
public:
  explicit NumericalUnderflow(const std::string& what) : std::runtime_error(what) {}
};

Distribution make_distribution(const FemOperators& ops, const Eigen::VectorXd& raw);
void check_distribution(const FemOperators& ops, const Distribution& d);

struct SinkhornConfig {
  double gamma = 1e-3;     // entropy coefficient == total diffusion time per kernel application
  int outer_iters = 500;
  int n_sub = 1;           // diffusion substeps per kernel application
  enum class Mode { Linear, LogDomain } mode = Mode::LogDomain;
  double tolerance = 1e-6;  // marginal L1 residual
  SolverConfig solver;      // conic settings for the log-domain kernel
};

// Backward-Euler heat semigroup v -> (M - tau L)^{-1} M v applied n_sub times,
// tau = t_total / n_sub. Prefactored.
class ImplicitHeatKernel {
public:
  ImplicitHeatKernel(const FemOperators& ops, double t_total, int n_sub);
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;

private:
  const FemOperators* ops_;
  int n_sub_;
  Eigen::SparseMatrix<double> op_;
  std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> ldlt_;
};

// The same diffusion carried out directly in the logarithmic domain:
// n_sub splitting steps of du/dt - |grad u|^2 = Lap u (viscosity 1,
// nonlinear-diffusion Hamiltonian).
class LogHeatKernel {
public:
  LogHeatKernel(const FemOperators& ops, double t_total, int n_sub, SolverConfig config = {});
  Eigen::VectorXd apply(const Eigen::VectorXd& u_log);

private:
  const FemOperators* ops_;
  int n_sub_;
  double step_;
  SolverConfig config_;
  HeatSolver heat_;
  ConicSolver solver_;
};

Eigen::VectorXd implicit_heat(const Eigen::VectorXd& v, double t_total, int n_sub,
                              const FemOperators& ops);
Eigen::VectorXd log_heat(const Eigen::VectorXd& u_log, double t_total, int n_sub,
                         const FemOperators& ops, const SolverConfig& config = {});

struct BarycenterResult {
  Distribution barycenter;
  std::vector<double> marginal_residuals;  // one per outer iteration
  int iterations = 0;
};

// Iterated Bregman (Sinkhorn) barycenter where every kernel application is
// heat diffusion for total time gamma; mode selects the linear-domain kernel
// (the convolutional method) or the log-domain kernel.
BarycenterResult barycenter(const std::vector<Distribution>& inputs,
                            const Eigen::VectorXd& weights, const SinkhornConfig& config,
                            const FemOperators& ops);

// Barycenter with weights (1-t, t).
BarycenterResult interpolate(const Distribution& mu0, const Distribution& mu1, double t,
                             const SinkhornConfig& config, const FemOperators& ops);

}  // namespace meshpde
