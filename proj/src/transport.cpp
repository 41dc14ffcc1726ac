#include "meshpde/transport.hpp"

#include <cmath>

#include "meshpde/fields.hpp"

namespace meshpde {

namespace {

constexpr double kLogFloor = -690.77552789821368;  // log(1e-300)

Eigen::VectorXd clamped_log(const Eigen::VectorXd& v) {
  Eigen::VectorXd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i)
    out[i] = v[i] > 1e-300 ? std::log(v[i]) : kLogFloor;
  return out;
}

}  // namespace

Distribution make_distribution(const FemOperators& ops, const Eigen::VectorXd& raw) {
  if (raw.size() != ops.nv) throw std::invalid_argument("distribution length does not match mesh");
  if ((raw.array() < 0.0).any())
    throw std::invalid_argument("distribution masses must be nonnegative");
  Distribution d;
  d.mu = normalize_mass(ops, raw);
  return d;
}

void check_distribution(const FemOperators& ops, const Distribution& d) {
  if (d.mu.size() != ops.nv) throw std::invalid_argument("distribution length does not match mesh");
  if ((d.mu.array() < 0.0).any())
    throw std::invalid_argument("distribution masses must be nonnegative");
  const double mass = ops.vertex_area.dot(d.mu);
  if (std::abs(mass - 1.0) > 1e-12)
    throw std::invalid_argument("distribution mass is " + std::to_string(mass) + ", expected 1");
}

ImplicitHeatKernel::ImplicitHeatKernel(const FemOperators& ops, double t_total, int n_sub)
    : ops_(&ops), n_sub_(n_sub) {
  if (t_total <= 0.0) throw std::invalid_argument("diffusion time must be positive");
  if (n_sub < 1) throw std::invalid_argument("need at least one diffusion substep");
  const double tau = t_total / n_sub;
  op_ = ops.M - tau * ops.L;
  ldlt_ = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
  ldlt_->compute(op_);
  if (ldlt_->info() != Eigen::Success)
    throw std::runtime_error("implicit heat factorization failed");
}

Eigen::VectorXd ImplicitHeatKernel::apply(const Eigen::VectorXd& v) const {
  Eigen::VectorXd x = v;
  for (int k = 0; k < n_sub_; ++k) {
    const Eigen::VectorXd rhs = ops_->vertex_area.cwiseProduct(x);
    x = ldlt_->solve(rhs);
    x += ldlt_->solve(rhs - op_ * x);
  }
  return x;
}

LogHeatKernel::LogHeatKernel(const FemOperators& ops, double t_total, int n_sub,
                             SolverConfig config)
    : ops_(&ops),
      n_sub_(n_sub),
      step_(t_total / n_sub),
      config_(config),
      heat_(ops, 1.0, t_total / n_sub) {
  if (t_total <= 0.0) throw std::invalid_argument("diffusion time must be positive");
  if (n_sub < 1) throw std::invalid_argument("need at least one diffusion substep");
}

Eigen::VectorXd LogHeatKernel::apply(const Eigen::VectorXd& u_log) {
  PdeProblem problem;
  problem.kind = HamiltonianKind::nonlinear_diffusion();
  problem.epsilon = 1.0;
  problem.ops = ops_;
  problem.solver = config_;
  Eigen::VectorXd u = u_log;
  for (int k = 0; k < n_sub_; ++k) u = strang_step(problem, heat_, u, step_, nullptr, &solver_);
  return u;
}

Eigen::VectorXd implicit_heat(const Eigen::VectorXd& v, double t_total, int n_sub,
                              const FemOperators& ops) {
  return ImplicitHeatKernel(ops, t_total, n_sub).apply(v);
}

Eigen::VectorXd log_heat(const Eigen::VectorXd& u_log, double t_total, int n_sub,
                         const FemOperators& ops, const SolverConfig& config) {
  return LogHeatKernel(ops, t_total, n_sub, config).apply(u_log);
}

namespace {

// Linear-domain guard: kernel outputs and scaling updates must stay finite
// and positive wherever they are divided into or logarithmed.
void require_positive_finite(const Eigen::VectorXd& v, const char* what) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i]))
      throw NumericalUnderflow(std::string(what) + " became non-finite at vertex " +
                               std::to_string(i));
    if (v[i] <= 0.0)
      throw NumericalUnderflow(std::string(what) + " underflowed to " + std::to_string(v[i]) +
                               " at vertex " + std::to_string(i));
  }
}

}  // namespace

BarycenterResult barycenter(const std::vector<Distribution>& inputs,
                            const Eigen::VectorXd& weights, const SinkhornConfig& config,
                            const FemOperators& ops) {
  const int k = static_cast<int>(inputs.size());
  if (k < 2) throw std::invalid_argument("barycenter needs at least two inputs");
  if (weights.size() != k) throw std::invalid_argument("one weight per input required");
  if ((weights.array() < 0.0).any() || std::abs(weights.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("weights must lie on the simplex");
  for (const auto& d : inputs) check_distribution(ops, d);
  if (config.gamma <= 0.0) throw std::invalid_argument("entropy coefficient gamma must be > 0");
  if (config.outer_iters < 1) throw std::invalid_argument("outer_iters must be >= 1");

  const Eigen::VectorXd area = ops.vertex_area;
  const Eigen::VectorXd log_area = clamped_log(area);
  BarycenterResult result;

  if (config.mode == SinkhornConfig::Mode::LogDomain) {
    LogHeatKernel kernel(ops, config.gamma, config.n_sub, config.solver);
    std::vector<Eigen::VectorXd> log_mu, lam;
    for (const auto& d : inputs) {
      log_mu.push_back(clamped_log(d.mu));
      lam.push_back(Eigen::VectorXd::Zero(ops.nv));
    }
    Eigen::VectorXd log_bary = Eigen::VectorXd::Zero(ops.nv);
    for (int iter = 1; iter <= config.outer_iters; ++iter) {
      std::vector<Eigen::VectorXd> log_d(k);
      for (int i = 0; i < k; ++i) {
        const Eigen::VectorXd log_w = log_mu[i] - kernel.apply(log_area + lam[i]);
        log_d[i] = lam[i] + kernel.apply(log_area + log_w);
      }
      log_bary.setZero();
      for (int i = 0; i < k; ++i) log_bary += weights[i] * log_d[i];
      double residual = 0.0;
      for (int i = 0; i < k; ++i) {
        lam[i] += log_bary - log_d[i];
        double li = 0.0;
        for (int j = 0; j < ops.nv; ++j)
          li += area[j] * std::abs(std::exp(log_d[i][j]) - std::exp(log_bary[j]));
        residual = std::max(residual, li);
      }
      result.marginal_residuals.push_back(residual);
      result.iterations = iter;
      if (residual <= config.tolerance) break;
    }
    result.barycenter = make_distribution(ops, log_bary.array().exp().matrix());
    return result;
  }

  // Linear domain (the convolutional method): scaling vectors are stored as
  // plain products, which is exactly where tiny diffusion times fail.
  ImplicitHeatKernel kernel(ops, config.gamma, config.n_sub);
  std::vector<Eigen::VectorXd> v(k, Eigen::VectorXd::Ones(ops.nv));
  Eigen::VectorXd bary = Eigen::VectorXd::Ones(ops.nv);
  for (int iter = 1; iter <= config.outer_iters; ++iter) {
    std::vector<Eigen::VectorXd> d(k);
    for (int i = 0; i < k; ++i) {
      Eigen::VectorXd kv = kernel.apply(area.cwiseProduct(v[i]));
      for (Eigen::Index j = 0; j < kv.size(); ++j) {
        if (!std::isfinite(kv[j]))
          throw NumericalUnderflow("kernel output became non-finite at vertex " +
                                   std::to_string(j));
        if (kv[j] <= 0.0 && inputs[i].mu[j] > 0.0)
          throw NumericalUnderflow("kernel output underflowed beneath a positive marginal at "
                                   "vertex " +
                                   std::to_string(j));
      }
      Eigen::VectorXd w(ops.nv);
      for (int j = 0; j < ops.nv; ++j) w[j] = kv[j] > 0.0 ? inputs[i].mu[j] / kv[j] : 0.0;
      d[i] = v[i].cwiseProduct(kernel.apply(area.cwiseProduct(w)));
      require_positive_finite(d[i], "marginal iterate");
    }
    Eigen::VectorXd log_bary = Eigen::VectorXd::Zero(ops.nv);
    for (int i = 0; i < k; ++i) log_bary += weights[i] * d[i].array().log().matrix();
    bary = log_bary.array().exp().matrix();
    require_positive_finite(bary, "barycenter iterate");

    double residual = 0.0;
    for (int i = 0; i < k; ++i) {
      double li = 0.0;
      for (int j = 0; j < ops.nv; ++j) li += area[j] * std::abs(d[i][j] - bary[j]);
      residual = std::max(residual, li);
      v[i] = v[i].cwiseProduct(bary).cwiseQuotient(d[i]);
      require_positive_finite(v[i], "scaling vector");
    }
    result.marginal_residuals.push_back(residual);
    result.iterations = iter;
    if (residual <= config.tolerance) break;
  }
  result.barycenter = make_distribution(ops, bary);
  return result;
}

BarycenterResult interpolate(const Distribution& mu0, const Distribution& mu1, double t,
                             const SinkhornConfig& config, const FemOperators& ops) {
  if (t < 0.0 || t > 1.0) throw std::invalid_argument("interpolation parameter t must be in [0,1]");
  Eigen::Vector2d w(1.0 - t, t);
  return barycenter({mu0, mu1}, w, config, ops);
}

}  // namespace meshpde
