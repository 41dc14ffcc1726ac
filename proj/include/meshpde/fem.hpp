#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <vector>

#include "meshpde/mesh.hpp"

namespace meshpde {

struct BoundaryCondition {
  enum class Kind { Neumann, Dirichlet };
  Kind kind = Kind::Neumann;
  std::vector<int> dirichlet_vertices;   // constrained vertex ids
  Eigen::VectorXd dirichlet_values;      // prescribed u at those vertices

  static BoundaryCondition neumann() { return {}; }
  static BoundaryCondition dirichlet(std::vector<int> vertices, Eigen::VectorXd values);
};

// First-order FEM operators on a triangle mesh.
//
//   M   lumped (mixed Voronoi) vertex-area matrix, diagonal positive
//   L   cotangent Laplacian, symmetric negative semidefinite, L*1 = 0
//   G   per-face gradient, 3|F| x |V|, rows (3j..3j+2) = gradient on face j;
//       each row triple annihilates constants exactly
//   MF  diagonal face areas (stored as the vector face_area)
//   D   divergence, D = G^T * MF, |V| x 3|F|
//   omega one-ring weights, omega_i = 1 / sum of incident face areas
struct FemOperators {
  int nv = 0;
  int nf = 0;
  Eigen::SparseMatrix<double> M;
  Eigen::VectorXd vertex_area;           // diagonal of M
  Eigen::SparseMatrix<double> L;
  Eigen::SparseMatrix<double> G;
  Eigen::VectorXd face_area;             // diagonal of MF (per face, repeated 3x in 3|F| space)
  Eigen::SparseMatrix<double> D;
  Eigen::VectorXd omega;                 // one-ring weights
  std::vector<std::vector<int>> one_ring;  // vertex -> incident face ids, ascending
  BoundaryCondition bc;

  double total_area() const { return vertex_area.sum(); }

  // (Gu) restricted to face j as a 3-vector.
  Eigen::Vector3d face_gradient(const Eigen::VectorXd& Gu, int face) const {
    return Gu.segment<3>(3 * face);
  }
};

// Assembles all operators. Throws MeshError on non-manifold input; Dirichlet
// vertices are recorded for downstream row/column elimination, the assembly
// itself is the natural (Neumann) one.
FemOperators build_fem_operators(const TriangleMesh& mesh,
                                 const BoundaryCondition& bc = BoundaryCondition::neumann());

// out_i = omega_i * sum_{j ~ i} a_j * face_values_j (area-weighted one-ring
// average of face quantities at vertices).
Eigen::VectorXd average_faces_to_vertices(const FemOperators& ops,
                                          const Eigen::VectorXd& face_values);

// Mass-weighted L2 norm, ||v|| = sqrt(v^T M v).
double mass_weighted_l2(const FemOperators& ops, const Eigen::VectorXd& v);

}  // namespace meshpde
