#pragma once

#include <Eigen/Core>

#include <iosfwd>
#include <string>

#include "meshpde/fem.hpp"
#include "meshpde/mesh.hpp"

namespace meshpde {

// One tangent 3-vector per face.
using FaceVectorField = Eigen::Matrix<double, Eigen::Dynamic, 3>;

// First-order term of the parabolic PDE du/dt + H = eps * Lap u, discretized
// per vertex. GEquation and FokkerPlanck carry a per-face drift field.
struct HamiltonianKind {
  enum class Tag { NonlinearDiffusion, GEquation, FokkerPlanck };
  Tag tag = Tag::NonlinearDiffusion;
  FaceVectorField flow;  // |F| x 3; empty for NonlinearDiffusion

  static HamiltonianKind nonlinear_diffusion() { return {Tag::NonlinearDiffusion, {}}; }
  static HamiltonianKind g_equation(FaceVectorField phi) {
    return {Tag::GEquation, std::move(phi)};
  }
  static HamiltonianKind fokker_planck(FaceVectorField phi) {
    return {Tag::FokkerPlanck, std::move(phi)};
  }
  bool needs_flow() const { return tag != Tag::NonlinearDiffusion; }
};

// Per-vertex H_i, the area-weighted one-ring average of the per-face values:
//   NonlinearDiffusion  H_i = -omega_i sum_{j~i} a_j |(Gu)_j|^2
//   GEquation           H_i =  omega_i sum_{j~i} a_j (Phi_j . (Gu)_j - |(Gu)_j|)
//   FokkerPlanck        H_i =  u_i div_i + omega_i sum_{j~i} a_j Phi_j . (Gu)_j
// with div = -M^{-1} G^T MF Phi, the consistent vertex divergence.
Eigen::VectorXd eval_hamiltonian(const HamiltonianKind& kind, const Eigen::VectorXd& u,
                                 const FemOperators& ops);

// div = -M^{-1} G^T MF Phi per vertex.
Eigen::VectorXd vertex_divergence(const FaceVectorField& flow, const FemOperators& ops);

enum class FlowKind { Constant, Shear, Cellular, Kolmogorov };

struct FlowParams {
  Eigen::Vector3d constant_velocity = Eigen::Vector3d(1, 0, 0);
  double shear_rate = 1.0;
  double magnitude = 1.0;  // overall scale applied to all kinds
};

// Samples an analytic flow at face barycenters and projects it into each face
// plane. Coordinates: a generator-provided parameterization (torus angles)
// when available, otherwise (x,y) of the barycenter normalized to the mesh
// bounding box.
FaceVectorField make_flow(FlowKind kind, const TriangleMesh& mesh, const FlowParams& params = {});

FlowKind parse_flow_kind(const std::string& name);

// Plain-text face field I/O: one line per face, three floats.
void write_face_field(const FaceVectorField& field, std::ostream& out);
FaceVectorField read_face_field(std::istream& in);

// Flattens |F| x 3 into the 3|F| layout used by G (row 3j+k = component k of
// face j).
Eigen::VectorXd flatten_face_field(const FaceVectorField& field);

}  // namespace meshpde
