#pragma once

#include <Eigen/Core>

#include <iosfwd>
#include <vector>

#include "meshpde/conic.hpp"

namespace meshpde {

// Regular nx x ny node grid with spacing dx and periodic wrap in both axes.
// Fields are stored node-major, index = j * nx + i.
struct PeriodicGrid {
  int nx = 0;
  int ny = 0;
  double dx = 1.0;

  int nodes() const { return nx * ny; }
  int index(int i, int j) const {
    i = ((i % nx) + nx) % nx;
    j = ((j % ny) + ny) % ny;
    return j * nx + i;
  }
};

using GridField = Eigen::VectorXd;

// First-order upwind Godunov update for u_t - |grad u| = 0 (expanding front):
// u += h * sqrt(max(Dmx,0)^2 + min(Dpx,0)^2 + max(Dmy,0)^2 + min(Dpy,0)^2).
GridField osher_sethian_step(const PeriodicGrid& grid, const GridField& u, double h);

// Lax-Friedrichs update with centered differences and per-axis dissipation
// alpha >= max |dH/dq| (alpha = 1 for the unit-speed front).
GridField lax_friedrichs_step(const PeriodicGrid& grid, const GridField& u, double h,
                              double alpha);

// max(0, r0 - r) about the domain center, the stand-in initial front.
GridField radial_cone(const PeriodicGrid& grid, double r0);

struct CompareConfig {
  int n = 50;            // n x n nodes, dx = 1/n
  double h = 0.01;
  int steps = 0;
  double eps_reg = 1e-6;  // viscosity added to the conic G-equation path
  double r0 = 0.25;
  int interior_margin = 5;  // cells excluded near the (mesh) boundary
  SolverConfig solver;
};

struct CompareRow {
  int step = 0;
  double time = 0.0;
  double l2_disc_ab = 0.0;  // conic vs Osher-Sethian, interior-restricted relative L2
  double l2_disc_ac = 0.0;  // conic vs Lax-Friedrichs
  double sup_a = 0.0;
  double sup_b = 0.0;
  double sup_c = 0.0;
};

struct CompareReport {
  CompareConfig config;
  std::vector<CompareRow> rows;
};

// Runs (a) the conic-step G-equation with zero flow and viscosity eps_reg on
// the matching triangulated grid, (b) Osher-Sethian and (c) Lax-Friedrichs on
// the periodic grid, all from the radial-cone front.
CompareReport compare_schemes(const CompareConfig& config);

// CSV columns: step,time,l2_disc_ab,l2_disc_ac,sup_a,sup_b,sup_c
void write_report_csv(const CompareReport& report, std::ostream& out);

}  // namespace meshpde
