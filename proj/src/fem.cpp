#include "meshpde/fem.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

namespace meshpde {

BoundaryCondition BoundaryCondition::dirichlet(std::vector<int> vertices, Eigen::VectorXd values) {
  if (static_cast<int>(vertices.size()) != values.size())
    throw MeshError("Dirichlet vertex list and value list differ in length");
  BoundaryCondition bc;
  bc.kind = Kind::Dirichlet;
  bc.dirichlet_vertices = std::move(vertices);
  bc.dirichlet_values = std::move(values);
  return bc;
}

namespace {

// Mixed Voronoi corner areas (circumcentric for non-obtuse triangles,
// clamped barycentric split when a corner is obtuse). Keeps M positive on
// poor triangulations.
std::array<double, 3> corner_areas(const Eigen::Vector3d& p0, const Eigen::Vector3d& p1,
                                   const Eigen::Vector3d& p2, double area) {
  const Eigen::Vector3d e0 = p2 - p1, e1 = p0 - p2, e2 = p1 - p0;
  const double l0 = e0.squaredNorm(), l1 = e1.squaredNorm(), l2 = e2.squaredNorm();
  // cot at corner k is opposite edge k
  const double cot0 = (l1 + l2 - l0) / (4.0 * area);
  const double cot1 = (l2 + l0 - l1) / (4.0 * area);
  const double cot2 = (l0 + l1 - l2) / (4.0 * area);

  if (cot0 < 0.0) return {0.5 * area, 0.25 * area, 0.25 * area};
  if (cot1 < 0.0) return {0.25 * area, 0.5 * area, 0.25 * area};
  if (cot2 < 0.0) return {0.25 * area, 0.25 * area, 0.5 * area};
  // circumcentric: corner k gets (|e_{k+1}|^2 cot_{k+1} + |e_{k+2}|^2 cot_{k+2}) / 8
  return {(l1 * cot1 + l2 * cot2) / 8.0, (l2 * cot2 + l0 * cot0) / 8.0,
          (l0 * cot0 + l1 * cot1) / 8.0};
}

// Nudges the per-face gradient coefficients so that summing them in
// ascending-vertex order (Eigen's sparse storage order) yields exactly zero;
// constants then map to an exactly zero gradient.
void zero_sum_fixup(std::array<std::pair<int, double>, 3>& entries) {
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (int iter = 0; iter < 16; ++iter) {
    double s = (entries[0].second + entries[1].second) + entries[2].second;
    if (s == 0.0) return;
    entries[2].second -= s;
  }
}

}  // namespace

FemOperators build_fem_operators(const TriangleMesh& mesh, const BoundaryCondition& bc) {
  // Re-check manifoldness/orientation: callers may hand-build meshes.
  {
    std::map<std::pair<int, int>, int> directed;
    for (int f = 0; f < mesh.num_faces(); ++f)
      for (int k = 0; k < 3; ++k) {
        int a = mesh.faces(f, k), b = mesh.faces(f, (k + 1) % 3);
        if (++directed[{a, b}] > 1)
          throw MeshError("non-manifold or inconsistently oriented edge (" + std::to_string(a) +
                          "," + std::to_string(b) + ")");
      }
  }
  for (int v : bc.dirichlet_vertices)
    if (v < 0 || v >= mesh.num_vertices())
      throw MeshError("Dirichlet vertex " + std::to_string(v) + " out of range");

  FemOperators ops;
  ops.nv = mesh.num_vertices();
  ops.nf = mesh.num_faces();
  ops.bc = bc;
  ops.face_area = face_areas(mesh);
  ops.vertex_area = Eigen::VectorXd::Zero(ops.nv);
  ops.one_ring.assign(ops.nv, {});

  std::vector<Eigen::Triplet<double>> l_trip;
  std::vector<Eigen::Triplet<double>> g_trip;
  l_trip.reserve(12 * ops.nf);
  g_trip.reserve(9 * ops.nf);

  for (int f = 0; f < ops.nf; ++f) {
    const int i0 = mesh.faces(f, 0), i1 = mesh.faces(f, 1), i2 = mesh.faces(f, 2);
    const Eigen::Vector3d p0 = mesh.vertices.row(i0), p1 = mesh.vertices.row(i1),
                          p2 = mesh.vertices.row(i2);
    const double area = ops.face_area[f];

    const auto areas = corner_areas(p0, p1, p2, area);
    ops.vertex_area[i0] += areas[0];
    ops.vertex_area[i1] += areas[1];
    ops.vertex_area[i2] += areas[2];
    ops.one_ring[i0].push_back(f);
    ops.one_ring[i1].push_back(f);
    ops.one_ring[i2].push_back(f);

    // cotangent weights; L_ij += cot/2 across the edge opposite each corner
    const Eigen::Vector3d e0 = p2 - p1, e1 = p0 - p2, e2 = p1 - p0;
    const double cot0 = (e1.squaredNorm() + e2.squaredNorm() - e0.squaredNorm()) / (4.0 * area);
    const double cot1 = (e2.squaredNorm() + e0.squaredNorm() - e1.squaredNorm()) / (4.0 * area);
    const double cot2 = (e0.squaredNorm() + e1.squaredNorm() - e2.squaredNorm()) / (4.0 * area);
    const int idx[3] = {i0, i1, i2};
    const double cot[3] = {cot0, cot1, cot2};
    for (int k = 0; k < 3; ++k) {
      int a = idx[(k + 1) % 3], b = idx[(k + 2) % 3];
      double w = 0.5 * cot[k];
      l_trip.emplace_back(a, b, w);
      l_trip.emplace_back(b, a, w);
      l_trip.emplace_back(a, a, -w);
      l_trip.emplace_back(b, b, -w);
    }

    // hat-function gradients: grad phi_k = n x e_k / (2A); the third is the
    // negated sum of the first two so each row triple cancels exactly
    const Eigen::Vector3d n = e2.cross(-e1).normalized();
    const Eigen::Vector3d g0 = n.cross(e0) / (2.0 * area);
    const Eigen::Vector3d g1 = n.cross(e1) / (2.0 * area);
    const Eigen::Vector3d g2 = -(g0 + g1);
    for (int comp = 0; comp < 3; ++comp) {
      std::array<std::pair<int, double>, 3> entries = {
          std::make_pair(i0, g0[comp]), std::make_pair(i1, g1[comp]),
          std::make_pair(i2, g2[comp])};
      zero_sum_fixup(entries);
      for (const auto& [v, val] : entries) g_trip.emplace_back(3 * f + comp, v, val);
    }
  }

  ops.L.resize(ops.nv, ops.nv);
  ops.L.setFromTriplets(l_trip.begin(), l_trip.end());
  ops.G.resize(3 * ops.nf, ops.nv);
  ops.G.setFromTriplets(g_trip.begin(), g_trip.end());

  ops.M.resize(ops.nv, ops.nv);
  std::vector<Eigen::Triplet<double>> m_trip;
  m_trip.reserve(ops.nv);
  for (int i = 0; i < ops.nv; ++i) {
    if (ops.vertex_area[i] <= 0.0)
      throw MeshError("vertex " + std::to_string(i) + " has nonpositive lumped area");
    m_trip.emplace_back(i, i, ops.vertex_area[i]);
  }
  ops.M.setFromTriplets(m_trip.begin(), m_trip.end());

  // D = G^T * MF
  Eigen::SparseMatrix<double> mf(3 * ops.nf, 3 * ops.nf);
  std::vector<Eigen::Triplet<double>> mf_trip;
  mf_trip.reserve(3 * ops.nf);
  for (int f = 0; f < ops.nf; ++f)
    for (int k = 0; k < 3; ++k) mf_trip.emplace_back(3 * f + k, 3 * f + k, ops.face_area[f]);
  mf.setFromTriplets(mf_trip.begin(), mf_trip.end());
  ops.D = ops.G.transpose() * mf;

  ops.omega.resize(ops.nv);
  for (int i = 0; i < ops.nv; ++i) {
    double ring_area = 0.0;
    for (int f : ops.one_ring[i]) ring_area += ops.face_area[f];
    ops.omega[i] = 1.0 / ring_area;
  }
  return ops;
}

Eigen::VectorXd average_faces_to_vertices(const FemOperators& ops,
                                          const Eigen::VectorXd& face_values) {
  if (face_values.size() != ops.nf)
    throw MeshError("face value vector has length " + std::to_string(face_values.size()) +
                    ", expected " + std::to_string(ops.nf));
  Eigen::VectorXd out(ops.nv);
  for (int i = 0; i < ops.nv; ++i) {
    double acc = 0.0;
    for (int f : ops.one_ring[i]) acc += ops.face_area[f] * face_values[f];
    out[i] = ops.omega[i] * acc;
  }
  return out;
}

double mass_weighted_l2(const FemOperators& ops, const Eigen::VectorXd& v) {
  return std::sqrt(v.dot(ops.vertex_area.asDiagonal() * v));
}

}  // namespace meshpde
