#include "meshpde/hamiltonian.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace meshpde {

namespace {

void check_shapes(const HamiltonianKind& kind, const Eigen::VectorXd& u,
                  const FemOperators& ops) {
  if (u.size() != ops.nv)
    throw MeshError("field has length " + std::to_string(u.size()) + ", expected " +
                    std::to_string(ops.nv));
  if (kind.needs_flow() && kind.flow.rows() != ops.nf)
    throw MeshError("flow has " + std::to_string(kind.flow.rows()) + " faces, expected " +
                    std::to_string(ops.nf));
}

}  // namespace

Eigen::VectorXd flatten_face_field(const FaceVectorField& field) {
  Eigen::VectorXd flat(3 * field.rows());
  for (Eigen::Index f = 0; f < field.rows(); ++f)
    for (int k = 0; k < 3; ++k) flat[3 * f + k] = field(f, k);
  return flat;
}

Eigen::VectorXd vertex_divergence(const FaceVectorField& flow, const FemOperators& ops) {
  // G^T MF Phi integrates grad(phi_i).Phi, i.e. minus the weak divergence;
  // dividing by the lumped areas and negating gives the pointwise value.
  return -(ops.D * flatten_face_field(flow)).cwiseQuotient(ops.vertex_area);
}

Eigen::VectorXd eval_hamiltonian(const HamiltonianKind& kind, const Eigen::VectorXd& u,
                                 const FemOperators& ops) {
  check_shapes(kind, u, ops);
  const Eigen::VectorXd gu = ops.G * u;
  Eigen::VectorXd h = Eigen::VectorXd::Zero(ops.nv);

  switch (kind.tag) {
    case HamiltonianKind::Tag::NonlinearDiffusion:
      for (int i = 0; i < ops.nv; ++i) {
        double acc = 0.0;
        for (int f : ops.one_ring[i]) acc += ops.face_area[f] * gu.segment<3>(3 * f).squaredNorm();
        h[i] = -ops.omega[i] * acc;
      }
      break;
    case HamiltonianKind::Tag::GEquation:
      for (int i = 0; i < ops.nv; ++i) {
        double acc = 0.0;
        for (int f : ops.one_ring[i]) {
          const Eigen::Vector3d g = gu.segment<3>(3 * f);
          acc += ops.face_area[f] * (kind.flow.row(f).dot(g) - g.norm());
        }
        h[i] = ops.omega[i] * acc;
      }
      break;
    case HamiltonianKind::Tag::FokkerPlanck: {
      const Eigen::VectorXd div = vertex_divergence(kind.flow, ops);
      for (int i = 0; i < ops.nv; ++i) {
        double acc = 0.0;
        for (int f : ops.one_ring[i])
          acc += ops.face_area[f] * kind.flow.row(f).dot(gu.segment<3>(3 * f));
        h[i] = u[i] * div[i] + ops.omega[i] * acc;
      }
      break;
    }
  }
  return h;
}

namespace {

Eigen::Vector3d face_normal(const TriangleMesh& mesh, int f) {
  Eigen::Vector3d p0 = mesh.vertices.row(mesh.faces(f, 0));
  Eigen::Vector3d p1 = mesh.vertices.row(mesh.faces(f, 1));
  Eigen::Vector3d p2 = mesh.vertices.row(mesh.faces(f, 2));
  return (p1 - p0).cross(p2 - p0).normalized();
}

Eigen::Vector2d analytic_flow_2d(FlowKind kind, double x, double y, const FlowParams& p) {
  switch (kind) {
    case FlowKind::Constant:
      return {p.constant_velocity.x(), p.constant_velocity.y()};  // z handled by caller
    case FlowKind::Shear:
      return {p.shear_rate * y, 0.0};
    case FlowKind::Cellular:
      return {-std::sin(M_PI * x) * std::cos(M_PI * y), std::cos(M_PI * x) * std::sin(M_PI * y)};
    case FlowKind::Kolmogorov:
      return {std::sin(2.0 * M_PI * y), 0.0};
  }
  return {0.0, 0.0};
}

}  // namespace

FaceVectorField make_flow(FlowKind kind, const TriangleMesh& mesh, const FlowParams& params) {
  const int nf = mesh.num_faces();
  FaceVectorField flow(nf, 3);

  if (mesh.uv.has_value()) {
    // Intrinsic parameterization: flow components ride the (u,v) frame.
    const auto& uv = *mesh.uv;
    for (int f = 0; f < nf; ++f) {
      const int i0 = mesh.faces(f, 0), i1 = mesh.faces(f, 1), i2 = mesh.faces(f, 2);
      // unwrap periodic uv within the face relative to corner 0
      Eigen::Vector2d q0 = uv.row(i0), q1 = uv.row(i1), q2 = uv.row(i2);
      for (int c = 0; c < 2; ++c) {
        q1[c] -= std::round(q1[c] - q0[c]);
        q2[c] -= std::round(q2[c] - q0[c]);
      }
      const Eigen::Vector2d qc = (q0 + q1 + q2) / 3.0;
      const double x = qc[0] - std::floor(qc[0]);
      const double y = qc[1] - std::floor(qc[1]);

      // linear map J : duv -> dp gives the tangent frame
      Eigen::Vector3d p0 = mesh.vertices.row(i0), p1 = mesh.vertices.row(i1),
                      p2 = mesh.vertices.row(i2);
      Eigen::Matrix2d duv;
      duv.col(0) = q1 - q0;
      duv.col(1) = q2 - q0;
      Eigen::Matrix<double, 3, 2> dp;
      dp.col(0) = p1 - p0;
      dp.col(1) = p2 - p0;
      Eigen::Matrix<double, 3, 2> jac = dp * duv.inverse();
      Eigen::Vector3d tu = jac.col(0).normalized();
      Eigen::Vector3d tv = (jac.col(1) - jac.col(1).dot(tu) * tu).normalized();

      const Eigen::Vector2d v2 = analytic_flow_2d(kind, x, y, params);
      flow.row(f) = params.magnitude * (v2[0] * tu + v2[1] * tv);
    }
    return flow;
  }

  const Eigen::Vector3d lo = mesh.vertices.colwise().minCoeff();
  const Eigen::Vector3d hi = mesh.vertices.colwise().maxCoeff();
  const Eigen::Vector3d extent = (hi - lo).cwiseMax(1e-300);
  for (int f = 0; f < nf; ++f) {
    const Eigen::Vector3d bary = (mesh.vertices.row(mesh.faces(f, 0)) +
                                  mesh.vertices.row(mesh.faces(f, 1)) +
                                  mesh.vertices.row(mesh.faces(f, 2))) / 3.0;
    const double x = (bary.x() - lo.x()) / extent.x();
    const double y = (bary.y() - lo.y()) / extent.y();
    Eigen::Vector3d v;
    if (kind == FlowKind::Constant) {
      v = params.constant_velocity;
    } else {
      const Eigen::Vector2d v2 = analytic_flow_2d(kind, x, y, params);
      v = {v2[0], v2[1], 0.0};
    }
    const Eigen::Vector3d n = face_normal(mesh, f);
    flow.row(f) = params.magnitude * (v - v.dot(n) * n);
  }
  return flow;
}

FlowKind parse_flow_kind(const std::string& name) {
  if (name == "constant") return FlowKind::Constant;
  if (name == "shear") return FlowKind::Shear;
  if (name == "cellular") return FlowKind::Cellular;
  if (name == "kolmogorov") return FlowKind::Kolmogorov;
  throw MeshError("unknown flow kind: " + name);
}

void write_face_field(const FaceVectorField& field, std::ostream& out) {
  out.precision(17);
  for (Eigen::Index f = 0; f < field.rows(); ++f)
    out << field(f, 0) << ' ' << field(f, 1) << ' ' << field(f, 2) << '\n';
}

FaceVectorField read_face_field(std::istream& in) {
  std::vector<Eigen::Vector3d> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    std::istringstream ls(line);
    Eigen::Vector3d v;
    if (!(ls >> v[0] >> v[1] >> v[2]))
      throw MeshError("malformed face field line: " + line);
    rows.push_back(v);
  }
  FaceVectorField field(rows.size(), 3);
  for (size_t i = 0; i < rows.size(); ++i) field.row(i) = rows[i];
  return field;
}

}  // namespace meshpde
