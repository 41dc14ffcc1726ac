#include "meshpde/frontprop.hpp"

#include <cmath>
#include <ostream>

#include "meshpde/strang.hpp"

namespace meshpde {

GridField osher_sethian_step(const PeriodicGrid& grid, const GridField& u, double h) {
  if (u.size() != grid.nodes()) throw std::invalid_argument("grid field size mismatch");
  GridField out(u.size());
  const double inv = 1.0 / grid.dx;
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      const double uc = u[grid.index(i, j)];
      const double dmx = (uc - u[grid.index(i - 1, j)]) * inv;
      const double dpx = (u[grid.index(i + 1, j)] - uc) * inv;
      const double dmy = (uc - u[grid.index(i, j - 1)]) * inv;
      const double dpy = (u[grid.index(i, j + 1)] - uc) * inv;
      const double grad = std::sqrt(std::pow(std::max(dmx, 0.0), 2) +
                                    std::pow(std::min(dpx, 0.0), 2) +
                                    std::pow(std::max(dmy, 0.0), 2) +
                                    std::pow(std::min(dpy, 0.0), 2));
      out[grid.index(i, j)] = uc + h * grad;
    }
  }
  return out;
}

GridField lax_friedrichs_step(const PeriodicGrid& grid, const GridField& u, double h,
                              double alpha) {
  if (u.size() != grid.nodes()) throw std::invalid_argument("grid field size mismatch");
  GridField out(u.size());
  const double inv = 1.0 / grid.dx;
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      const double uc = u[grid.index(i, j)];
      const double dmx = (uc - u[grid.index(i - 1, j)]) * inv;
      const double dpx = (u[grid.index(i + 1, j)] - uc) * inv;
      const double dmy = (uc - u[grid.index(i, j - 1)]) * inv;
      const double dpy = (u[grid.index(i, j + 1)] - uc) * inv;
      const double px = 0.5 * (dmx + dpx), py = 0.5 * (dmy + dpy);
      // H(p) = -|p|; numerical flux H(pbar) - alpha/2 * sum (p+ - p-)
      const double flux = -std::sqrt(px * px + py * py) -
                          0.5 * alpha * ((dpx - dmx) + (dpy - dmy));
      out[grid.index(i, j)] = uc - h * flux;
    }
  }
  return out;
}

GridField radial_cone(const PeriodicGrid& grid, double r0) {
  GridField u(grid.nodes());
  const double cx = 0.5 * grid.dx * grid.nx, cy = 0.5 * grid.dx * grid.ny;
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      const double x = i * grid.dx - cx, y = j * grid.dx - cy;
      u[grid.index(i, j)] = std::max(0.0, r0 - std::sqrt(x * x + y * y));
    }
  return u;
}

CompareReport compare_schemes(const CompareConfig& config) {
  if (config.n < 3) throw std::invalid_argument("compare_schemes needs n >= 3");
  if (config.h <= 0.0) throw std::invalid_argument("compare_schemes needs h > 0");
  if (config.steps < 0) throw std::invalid_argument("steps must be >= 0");
  if (2 * config.interior_margin >= config.n)
    throw std::invalid_argument("interior margin leaves no interior nodes");

  CompareReport report;
  report.config = config;
  if (config.steps == 0) return report;

  const PeriodicGrid grid{config.n, config.n, 1.0 / config.n};

  // Triangulated grid with nodes at the same positions/indices as the
  // periodic grid covers (node (i,j) -> vertex j*n+i).
  const TriangleMesh mesh = make_grid(config.n - 1, config.n - 1, grid.dx);
  const FemOperators ops = build_fem_operators(mesh);

  GridField u0 = radial_cone(grid, config.r0);

  PdeProblem problem;
  problem.kind = HamiltonianKind::g_equation(FaceVectorField::Zero(ops.nf, 3));
  problem.epsilon = config.eps_reg;
  problem.u0 = u0;
  problem.ops = &ops;
  problem.solver = config.solver;

  const HeatSolver heat(ops, problem.epsilon, config.h);
  ConicSolver conic;

  Eigen::VectorXd a = u0;
  GridField b = u0, c = u0;

  auto interior_l2 = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& ref) {
    double num = 0.0, den = 0.0;
    for (int j = config.interior_margin; j < config.n - config.interior_margin; ++j)
      for (int i = config.interior_margin; i < config.n - config.interior_margin; ++i) {
        const int idx = grid.index(i, j);
        num += (x[idx] - ref[idx]) * (x[idx] - ref[idx]);
        den += ref[idx] * ref[idx];
      }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
  };

  for (int step = 1; step <= config.steps; ++step) {
    a = strang_step(problem, heat, a, config.h, nullptr, &conic);
    b = osher_sethian_step(grid, b, config.h);
    c = lax_friedrichs_step(grid, c, config.h, 1.0);

    CompareRow row;
    row.step = step;
    row.time = step * config.h;
    row.l2_disc_ab = interior_l2(a, b);
    row.l2_disc_ac = interior_l2(a, c);
    row.sup_a = a.cwiseAbs().maxCoeff();
    row.sup_b = b.cwiseAbs().maxCoeff();
    row.sup_c = c.cwiseAbs().maxCoeff();
    report.rows.push_back(row);
  }
  return report;
}

void write_report_csv(const CompareReport& report, std::ostream& out) {
  out << "step,time,l2_disc_ab,l2_disc_ac,sup_a,sup_b,sup_c\n";
  out.precision(17);
  for (const auto& row : report.rows)
    out << row.step << ',' << row.time << ',' << row.l2_disc_ab << ',' << row.l2_disc_ac << ','
        << row.sup_a << ',' << row.sup_b << ',' << row.sup_c << '\n';
}

}  // namespace meshpde
