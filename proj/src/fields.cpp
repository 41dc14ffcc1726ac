#include "meshpde/fields.hpp"

#include <Eigen/SparseCholesky>

#include <fstream>
#include <sstream>

namespace meshpde {

void write_vertex_field(const Eigen::VectorXd& u, std::ostream& out) {
  out.precision(17);
  for (Eigen::Index i = 0; i < u.size(); ++i) out << u[i] << '\n';
}

void write_vertex_field(const Eigen::VectorXd& u, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write field file: " + path);
  write_vertex_field(u, out);
}

Eigen::VectorXd read_vertex_field(std::istream& in) {
  std::vector<double> vals;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    vals.push_back(std::stod(line));
  }
  return Eigen::Map<Eigen::VectorXd>(vals.data(), vals.size());
}

Eigen::VectorXd read_vertex_field(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open field file: " + path);
  return read_vertex_field(in);
}

Eigen::VectorXd gaussian_bump(const TriangleMesh& mesh, const Eigen::Vector3d& center,
                              double sigma) {
  Eigen::VectorXd u(mesh.num_vertices());
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    const Eigen::Vector3d p = mesh.vertices.row(i);
    u[i] = std::exp(-(p - center).squaredNorm() / (sigma * sigma));
  }
  return u;
}

Eigen::VectorXd normalize_mass(const FemOperators& ops, const Eigen::VectorXd& u) {
  const double mass = ops.vertex_area.dot(u);
  if (mass <= 0.0) throw std::runtime_error("cannot mass-normalize a field with nonpositive mass");
  return u / mass;
}

Eigen::VectorXd heat_bump(const FemOperators& ops, int vertex, double time, int substeps) {
  if (vertex < 0 || vertex >= ops.nv) throw std::runtime_error("heat_bump vertex out of range");
  Eigen::VectorXd u = Eigen::VectorXd::Zero(ops.nv);
  u[vertex] = 1.0 / ops.vertex_area[vertex];

  const double tau = time / substeps;
  Eigen::SparseMatrix<double> op = ops.M - tau * ops.L;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(op);
  if (ldlt.info() != Eigen::Success) throw std::runtime_error("heat_bump factorization failed");
  for (int k = 0; k < substeps; ++k) u = ldlt.solve(ops.M * u);
  return normalize_mass(ops, u);
}

}  // namespace meshpde
