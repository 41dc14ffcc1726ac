#pragma once

#include <Eigen/Core>

#include <iosfwd>
#include <string>

#include "meshpde/fem.hpp"
#include "meshpde/mesh.hpp"

namespace meshpde {

// One float per line, vertex order.
void write_vertex_field(const Eigen::VectorXd& u, std::ostream& out);
void write_vertex_field(const Eigen::VectorXd& u, const std::string& path);
Eigen::VectorXd read_vertex_field(std::istream& in);
Eigen::VectorXd read_vertex_field(const std::string& path);

// exp(-|x - center|^2 / sigma^2) sampled at vertices.
Eigen::VectorXd gaussian_bump(const TriangleMesh& mesh, const Eigen::Vector3d& center,
                              double sigma);

// Short implicit diffusion of a one-vertex indicator, normalized to unit
// mass (1^T M u = 1); the default experiment initial condition.
Eigen::VectorXd heat_bump(const FemOperators& ops, int vertex, double time, int substeps = 4);

// Rescales a nonnegative field to unit mass.
Eigen::VectorXd normalize_mass(const FemOperators& ops, const Eigen::VectorXd& u);

}  // namespace meshpde
