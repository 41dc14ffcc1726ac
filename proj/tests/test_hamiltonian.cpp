#include <doctest.h>

#include <Eigen/Geometry>

#include <sstream>

#include "meshpde/hamiltonian.hpp"
#include "test_helpers.hpp"

using namespace meshpde;
using namespace meshpde::testing;

TEST_SUITE_BEGIN("hamiltonian");

namespace {

// Naive per-face summation oracle, written straight from the per-vertex
// formulas with explicit loops and no shared code with eval_hamiltonian.
Eigen::VectorXd naive_hamiltonian(const HamiltonianKind& kind, const Eigen::VectorXd& u,
                                  const FemOperators& ops) {
  Eigen::VectorXd gu = ops.G * u;
  Eigen::VectorXd h = Eigen::VectorXd::Zero(ops.nv);
  for (int i = 0; i < ops.nv; ++i) {
    double ring = 0.0;
    for (int f : ops.one_ring[i]) ring += ops.face_area[f];
    const double w = 1.0 / ring;
    double acc = 0.0;
    for (int f : ops.one_ring[i]) {
      double dot = 0.0, sq = 0.0;
      for (int k = 0; k < 3; ++k) {
        const double g = gu[3 * f + k];
        sq += g * g;
        if (kind.needs_flow()) dot += kind.flow(f, k) * g;
      }
      const double a = ops.face_area[f];
      switch (kind.tag) {
        case HamiltonianKind::Tag::NonlinearDiffusion: acc -= a * sq; break;
        case HamiltonianKind::Tag::GEquation: acc += a * (dot - std::sqrt(sq)); break;
        case HamiltonianKind::Tag::FokkerPlanck: acc += a * dot; break;
      }
    }
    h[i] = w * acc;
  }
  if (kind.tag == HamiltonianKind::Tag::FokkerPlanck) {
    Eigen::VectorXd phi_flat(3 * ops.nf);
    for (int f = 0; f < ops.nf; ++f)
      for (int k = 0; k < 3; ++k) phi_flat[3 * f + k] = kind.flow(f, k);
    const Eigen::VectorXd div = -(ops.D * phi_flat).cwiseQuotient(ops.vertex_area);
    for (int i = 0; i < ops.nv; ++i) h[i] += u[i] * div[i];
  }
  return h;
}

FaceVectorField random_flow(const FemOperators& ops, unsigned seed) {
  FaceVectorField phi(ops.nf, 3);
  for (int f = 0; f < ops.nf; ++f) phi.row(f) = random_field(3, seed + f).transpose();
  return phi;
}

}  // namespace

TEST_CASE("constant u gives zero H for gradient-only Hamiltonians") {
  FemOperators ops = build_fem_operators(make_icosphere(1));
  const Eigen::VectorXd u = Eigen::VectorXd::Ones(ops.nv);
  CHECK(eval_hamiltonian(HamiltonianKind::nonlinear_diffusion(), u, ops).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK(eval_hamiltonian(HamiltonianKind::g_equation(random_flow(ops, 50)), u, ops)
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("Fokker-Planck with zero flow gives zero H") {
  FemOperators ops = build_fem_operators(two_triangle_square());
  const Eigen::VectorXd u = random_field(ops.nv, 3);
  const FaceVectorField phi = FaceVectorField::Zero(ops.nf, 3);
  CHECK(eval_hamiltonian(HamiltonianKind::fokker_planck(phi), u, ops).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("all three kinds match the naive summation oracle") {
  for (const auto& mesh : {two_triangle_square(), make_icosphere(1)}) {
    FemOperators ops = build_fem_operators(mesh);
    const Eigen::VectorXd u = random_field(ops.nv, 11);
    const FaceVectorField phi = random_flow(ops, 100);

    for (const HamiltonianKind& kind :
         {HamiltonianKind::nonlinear_diffusion(), HamiltonianKind::g_equation(phi),
          HamiltonianKind::fokker_planck(phi)}) {
      const Eigen::VectorXd got = eval_hamiltonian(kind, u, ops);
      const Eigen::VectorXd want = naive_hamiltonian(kind, u, ops);
      const double scale = std::max(1.0, want.cwiseAbs().maxCoeff());
      CHECK((got - want).cwiseAbs().maxCoeff() <= 1e-12 * scale);
    }
  }
}

TEST_CASE("G-equation with zero flow is positively 1-homogeneous") {
  FemOperators ops = build_fem_operators(make_icosphere(1));
  const Eigen::VectorXd u = random_field(ops.nv, 5);
  const HamiltonianKind kind = HamiltonianKind::g_equation(FaceVectorField::Zero(ops.nf, 3));
  const Eigen::VectorXd h1 = eval_hamiltonian(kind, u, ops);
  for (double alpha : {0.5, 2.0, 7.25}) {
    const Eigen::VectorXd ha = eval_hamiltonian(kind, alpha * u, ops);
    CHECK((ha - alpha * h1).cwiseAbs().maxCoeff() <=
          1e-12 * std::max(1.0, std::abs(alpha) * h1.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("Fokker-Planck H is linear in u") {
  FemOperators ops = build_fem_operators(make_icosphere(1));
  const HamiltonianKind kind = HamiltonianKind::fokker_planck(random_flow(ops, 200));
  const Eigen::VectorXd u = random_field(ops.nv, 21), w = random_field(ops.nv, 22);
  const double a = 1.7, b = -0.4;
  const Eigen::VectorXd lhs = eval_hamiltonian(kind, a * u + b * w, ops);
  const Eigen::VectorXd rhs =
      a * eval_hamiltonian(kind, u, ops) + b * eval_hamiltonian(kind, w, ops);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, rhs.cwiseAbs().maxCoeff()));
}

TEST_CASE("-H is convex in u for nonlinear diffusion") {
  FemOperators ops = build_fem_operators(two_triangle_square());
  const HamiltonianKind kind = HamiltonianKind::nonlinear_diffusion();
  for (unsigned seed = 0; seed < 20; ++seed) {
    const Eigen::VectorXd u = random_field(ops.nv, 300 + seed);
    const Eigen::VectorXd w = random_field(ops.nv, 400 + seed);
    const double t = (seed + 0.5) / 20.0;
    const Eigen::VectorXd mid = -eval_hamiltonian(kind, t * u + (1 - t) * w, ops);
    const Eigen::VectorXd hull =
        -t * eval_hamiltonian(kind, u, ops) - (1 - t) * eval_hamiltonian(kind, w, ops);
    CHECK((mid - hull).maxCoeff() <= 1e-12);
  }
}

TEST_CASE("G-equation H is Lipschitz in the gradient under perturbations") {
  // discrete (A1)-(A3)-style check: per-vertex change is bounded by the
  // one-ring average of (|Phi| + 1) |G dv|
  FemOperators ops = build_fem_operators(make_icosphere(1));
  const FaceVectorField phi = random_flow(ops, 500);
  const HamiltonianKind kind = HamiltonianKind::g_equation(phi);
  const double phimax = phi.rowwise().norm().maxCoeff();
  const Eigen::VectorXd u = random_field(ops.nv, 31);
  for (unsigned seed = 0; seed < 10; ++seed) {
    const Eigen::VectorXd dv = 1e-3 * random_field(ops.nv, 600 + seed);
    const Eigen::VectorXd dh =
        eval_hamiltonian(kind, u + dv, ops) - eval_hamiltonian(kind, u, ops);
    const Eigen::VectorXd gd = ops.G * dv;
    for (int i = 0; i < ops.nv; ++i) {
      double bound = 0.0;
      for (int f : ops.one_ring[i]) bound += (phimax + 1.0) * gd.segment<3>(3 * f).norm();
      bound *= ops.omega[i];
      CHECK(std::abs(dh[i]) <= bound * (1.0 + 1e-10) + 1e-15);
    }
  }
}

TEST_CASE("constant flow on a flat grid is reproduced exactly") {
  TriangleMesh mesh = make_grid(6, 4, 0.25);
  FlowParams params;
  params.constant_velocity = Eigen::Vector3d(0.3, -1.2, 0.0);
  FaceVectorField flow = make_flow(FlowKind::Constant, mesh, params);
  for (int f = 0; f < mesh.num_faces(); ++f) {
    CHECK(flow(f, 0) == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(flow(f, 1) == doctest::Approx(-1.2).epsilon(1e-14));
    CHECK(flow(f, 2) == doctest::Approx(0.0).epsilon(1e-14));
  }
}

TEST_CASE("cellular flow vanishes at the domain center") {
  const Eigen::Vector2d v(-std::sin(M_PI * 0.5) * std::cos(M_PI * 0.5),
                          std::cos(M_PI * 0.5) * std::sin(M_PI * 0.5));
  CHECK(v.norm() == doctest::Approx(0.0));  // symmetry zero of the stream function

  // faces near the grid center carry nearly zero cellular flow
  TriangleMesh mesh = make_grid(40, 40, 1.0 / 40);
  FaceVectorField flow = make_flow(FlowKind::Cellular, mesh);
  double best = 1e9;
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const Eigen::Vector3d bary =
        (mesh.vertices.row(mesh.faces(f, 0)) + mesh.vertices.row(mesh.faces(f, 1)) +
         mesh.vertices.row(mesh.faces(f, 2))) /
        3.0;
    if ((bary - Eigen::Vector3d(0.5, 0.5, 0)).norm() < 0.02)
      best = std::min(best, flow.row(f).norm());
  }
  CHECK(best < 0.06);
}

TEST_CASE("flows are tangent to their faces") {
  auto check_tangency = [](const TriangleMesh& mesh, const FaceVectorField& flow) {
    for (int f = 0; f < mesh.num_faces(); ++f) {
      Eigen::Vector3d p0 = mesh.vertices.row(mesh.faces(f, 0));
      Eigen::Vector3d p1 = mesh.vertices.row(mesh.faces(f, 1));
      Eigen::Vector3d p2 = mesh.vertices.row(mesh.faces(f, 2));
      Eigen::Vector3d n = (p1 - p0).cross(p2 - p0).normalized();
      const double norm = flow.row(f).norm();
      if (norm > 0.0) CHECK(std::abs(flow.row(f).dot(n)) <= 1e-8 * norm);
    }
  };
  TriangleMesh sphere = make_icosphere(3);
  for (FlowKind kind : {FlowKind::Constant, FlowKind::Shear, FlowKind::Cellular,
                        FlowKind::Kolmogorov})
    check_tangency(sphere, make_flow(kind, sphere));
  // torus path rides the angular parameterization
  TriangleMesh torus = make_torus(1.0, 0.3, 24, 12);
  check_tangency(torus, make_flow(FlowKind::Kolmogorov, torus));
}

TEST_CASE("face field text round trip") {
  FaceVectorField field(3, 3);
  field << 1, 2, 3, -0.5, 0.25, 1e-17, 4, 5, 6;
  std::stringstream buf;
  write_face_field(field, buf);
  FaceVectorField back = read_face_field(buf);
  CHECK((back - field).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("shape mismatches are rejected") {
  FemOperators ops = build_fem_operators(two_triangle_square());
  CHECK_THROWS_AS(
      eval_hamiltonian(HamiltonianKind::nonlinear_diffusion(), Eigen::VectorXd::Ones(3), ops),
      MeshError);
  CHECK_THROWS_AS(eval_hamiltonian(HamiltonianKind::g_equation(FaceVectorField::Zero(5, 3)),
                                   Eigen::VectorXd::Ones(4), ops),
                  MeshError);
}

TEST_SUITE_END();
