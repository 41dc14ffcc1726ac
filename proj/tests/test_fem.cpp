#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "meshpde/fem.hpp"
#include "test_helpers.hpp"

using namespace meshpde;
using namespace meshpde::testing;

TEST_SUITE_BEGIN("fem");

namespace {

double max_abs(const Eigen::SparseMatrix<double>& m) {
  return m.nonZeros() ? m.coeffs().cwiseAbs().maxCoeff() : 0.0;
}

void check_operator_identities(const TriangleMesh& mesh, double area_expected = -1.0) {
  FemOperators ops = build_fem_operators(mesh);

  // L symmetric, exactly by assembly
  CHECK(max_abs(Eigen::SparseMatrix<double>(ops.L.transpose()) - ops.L) == 0.0);

  // L*1 = 0 and G*1 = 0 for constants
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(ops.nv);
  const double lscale = ops.L.coeffs().cwiseAbs().maxCoeff();
  CHECK((ops.L * ones).cwiseAbs().maxCoeff() <= 1e-10 * lscale);
  CHECK((ops.G * ones).cwiseAbs().maxCoeff() == 0.0);  // exact by construction

  // total Voronoi area matches the surface area
  const double total = face_areas(mesh).sum();
  CHECK(ops.vertex_area.sum() == doctest::Approx(total).epsilon(1e-12));
  CHECK(ops.vertex_area.minCoeff() > 0.0);
  if (area_expected > 0.0) CHECK(total == doctest::Approx(area_expected).epsilon(1e-12));

  // D = G^T MF
  Eigen::SparseMatrix<double> mf(3 * ops.nf, 3 * ops.nf);
  std::vector<Eigen::Triplet<double>> trip;
  for (int f = 0; f < ops.nf; ++f)
    for (int k = 0; k < 3; ++k) trip.emplace_back(3 * f + k, 3 * f + k, ops.face_area[f]);
  mf.setFromTriplets(trip.begin(), trip.end());
  CHECK(max_abs(Eigen::SparseMatrix<double>(ops.G.transpose() * mf) - ops.D) == 0.0);

  // divergence theorem: sum_i (D phi)_i = 0
  const Eigen::VectorXd phi = random_field(3 * ops.nf, 99);
  CHECK(std::abs((ops.D * phi).sum()) <= 1e-10 * phi.norm());

  // negative semidefiniteness on small meshes
  if (ops.nv <= 1000) {
    Eigen::MatrixXd dense = -Eigen::MatrixXd(ops.L);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dense);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10 * std::max(1.0, lscale));
  }

  // one-ring weights invert the ring areas
  for (int i = 0; i < ops.nv; ++i) {
    double ring = 0.0;
    for (int f : ops.one_ring[i]) ring += ops.face_area[f];
    CHECK(ops.omega[i] * ring == doctest::Approx(1.0).epsilon(1e-14));
  }
}

}  // namespace

TEST_CASE("operator identities hold on the standard meshes") {
  check_operator_identities(single_triangle(), 0.5);
  check_operator_identities(two_triangle_square(), 1.0);
  check_operator_identities(make_icosphere(2));
  check_operator_identities(make_icosphere(3));
  check_operator_identities(make_grid(20, 20, 0.05), 1.0);
  check_operator_identities(make_unit_line(30));
  check_operator_identities(make_torus(1.0, 0.35, 24, 12));
}

TEST_CASE("cotangent weights match hand computation") {
  // Unit-square diagonal: both opposite angles are right angles, cot = 0,
  // so the (0,2) entry vanishes; boundary edges see a single cot(45)/2 = 1/2.
  FemOperators square = build_fem_operators(two_triangle_square());
  CHECK(square.L.coeff(0, 2) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(square.L.coeff(0, 1) == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(square.L.coeff(1, 2) == doctest::Approx(0.5).epsilon(1e-13));

  // Equilateral rhombus: the shared edge has two 60-degree opposite angles,
  // weight = cot(60)/2 + cot(60)/2 = 1/sqrt(3); off-diagonal positive under
  // the negative-semidefinite convention.
  FemOperators rhomb = build_fem_operators(equilateral_rhombus());
  CHECK(rhomb.L.coeff(1, 2) == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-13));
  CHECK(rhomb.L.coeff(1, 1) < 0.0);
}

TEST_CASE("unit-area equilateral triangle has M entries of 1/3") {
  FemOperators ops = build_fem_operators(unit_area_equilateral());
  for (int i = 0; i < 3; ++i)
    CHECK(ops.vertex_area[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("mixed Voronoi areas stay positive and exact on obtuse triangles") {
  TriangleMesh mesh;
  mesh.vertices.resize(3, 3);
  mesh.vertices << 0, 0, 0, 4, 0, 0, 2, 0.3, 0;  // very obtuse at vertex 2
  mesh.faces.resize(1, 3);
  mesh.faces << 0, 1, 2;
  validate_mesh(mesh);
  FemOperators ops = build_fem_operators(mesh);
  const double area = face_areas(mesh)[0];
  CHECK(ops.vertex_area.minCoeff() > 0.0);
  CHECK(ops.vertex_area.sum() == doctest::Approx(area).epsilon(1e-12));
  // obtuse corner takes half, the others a quarter each
  CHECK(ops.vertex_area[2] == doctest::Approx(area / 2).epsilon(1e-12));
  CHECK(ops.vertex_area[0] == doctest::Approx(area / 4).epsilon(1e-12));
}

TEST_CASE("gradient is exact for linear fields on planar meshes") {
  TriangleMesh mesh = make_grid(7, 5, 0.2);
  FemOperators ops = build_fem_operators(mesh);
  Eigen::VectorXd u(mesh.num_vertices());
  for (int i = 0; i < mesh.num_vertices(); ++i)
    u[i] = 2.0 * mesh.vertices(i, 0) - 3.0 * mesh.vertices(i, 1) + 0.25;
  const Eigen::VectorXd gu = ops.G * u;
  for (int f = 0; f < ops.nf; ++f) {
    CHECK(gu[3 * f + 0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(gu[3 * f + 1] == doctest::Approx(-3.0).epsilon(1e-12));
    CHECK(gu[3 * f + 2] == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("constant fields are annihilated") {
  FemOperators ops = build_fem_operators(make_icosphere(2));
  // exact for the ones vector; a general constant rounds per product
  CHECK((ops.G * Eigen::VectorXd::Ones(ops.nv)).cwiseAbs().maxCoeff() == 0.0);
  const Eigen::VectorXd c = Eigen::VectorXd::Constant(ops.nv, 3.7);
  const double gscale = 3.7 * ops.G.coeffs().cwiseAbs().maxCoeff();
  CHECK((ops.G * c).cwiseAbs().maxCoeff() <= 1e-14 * gscale);
  CHECK((ops.L * c).cwiseAbs().maxCoeff() <= 1e-10 * ops.L.coeffs().cwiseAbs().maxCoeff());
}

TEST_CASE("face-to-vertex averaging") {
  FemOperators ops = build_fem_operators(two_triangle_square());

  SUBCASE("partition of unity") {
    const Eigen::VectorXd out = average_faces_to_vertices(ops, Eigen::VectorXd::Ones(ops.nf));
    for (int i = 0; i < ops.nv; ++i) CHECK(out[i] == 1.0);
  }
  SUBCASE("single triangle carries its value to the corners") {
    FemOperators tri = build_fem_operators(single_triangle());
    Eigen::VectorXd vals(1);
    vals << -2.5;
    const Eigen::VectorXd out = average_faces_to_vertices(tri, vals);
    for (int i = 0; i < 3; ++i) CHECK(out[i] == doctest::Approx(-2.5));
  }
  SUBCASE("matches the explicit weighted sum") {
    const Eigen::VectorXd vals = random_field(ops.nf, 7);
    const Eigen::VectorXd out = average_faces_to_vertices(ops, vals);
    for (int i = 0; i < ops.nv; ++i) {
      double acc = 0.0, ring = 0.0;
      for (int f : ops.one_ring[i]) {
        acc += ops.face_area[f] * vals[f];
        ring += ops.face_area[f];
      }
      CHECK(out[i] == doctest::Approx(acc / ring).epsilon(1e-14));
    }
  }
  SUBCASE("shape mismatch throws") {
    CHECK_THROWS_AS(average_faces_to_vertices(ops, Eigen::VectorXd::Ones(5)), MeshError);
  }
}

TEST_CASE("Dirichlet boundary condition is recorded") {
  BoundaryCondition bc = BoundaryCondition::dirichlet({0, 3}, Eigen::Vector2d(1.0, -1.0));
  FemOperators ops = build_fem_operators(two_triangle_square(), bc);
  CHECK(ops.bc.kind == BoundaryCondition::Kind::Dirichlet);
  CHECK(ops.bc.dirichlet_vertices == std::vector<int>{0, 3});
  CHECK_THROWS_AS(
      build_fem_operators(two_triangle_square(),
                          BoundaryCondition::dirichlet({9}, Eigen::VectorXd::Ones(1))),
      MeshError);
}

TEST_CASE("build rejects inconsistently oriented input") {
  TriangleMesh mesh = two_triangle_square();
  mesh.faces.row(1) = Eigen::RowVector3i(0, 3, 2);
  CHECK_THROWS_AS(build_fem_operators(mesh), MeshError);
}

TEST_SUITE_END();
