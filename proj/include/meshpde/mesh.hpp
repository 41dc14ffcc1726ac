#pragma once

#include <Eigen/Core>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace meshpde {

// Thrown on malformed files, invalid indices, degenerate/non-manifold meshes.
class MeshError : public std::runtime_error {
public:
  explicit MeshError(const std::string& what) : std::runtime_error(what) {}
};

// Triangle surface mesh: vertex positions plus face index triples (0-based).
// `uv`, when present, holds the generator's intrinsic parameters in [0,1)^2
// (torus angles); flows on parameterized surfaces follow those directions.
struct TriangleMesh {
  Eigen::Matrix<double, Eigen::Dynamic, 3> vertices;
  Eigen::Matrix<int, Eigen::Dynamic, 3> faces;
  std::vector<std::uint8_t> boundary_vertex;  // 1 if vertex lies on a boundary edge
  std::optional<Eigen::Matrix<double, Eigen::Dynamic, 2>> uv;

  int num_vertices() const { return static_cast<int>(vertices.rows()); }
  int num_faces() const { return static_cast<int>(faces.rows()); }
};

// Relative area threshold below which a face counts as degenerate.
inline constexpr double kDegenerateAreaFactor = 1e-14;

// Default cap on generated face counts.
inline constexpr int kDefaultFaceCap = 1'000'000;

enum class MeshFormat { OFF, OBJ };

// Checks index validity, degenerate faces (area <= 1e-14 x mean), edge
// manifoldness (<= 2 faces per edge) and consistent orientation; fills
// boundary_vertex. Throws MeshError naming the offending face.
void validate_mesh(TriangleMesh& mesh);

TriangleMesh load_mesh(std::istream& in, MeshFormat format);
TriangleMesh load_mesh(const std::string& path, MeshFormat format);
TriangleMesh load_mesh(const std::string& path);  // format from extension

void save_off(const TriangleMesh& mesh, std::ostream& out);
void save_off(const TriangleMesh& mesh, const std::string& path);

// Unit icosphere: 20*4^level faces, 2 + 10*4^level vertices.
TriangleMesh make_icosphere(int level, int face_cap = kDefaultFaceCap);

// Planar lattice in the z=0 plane, each cell split into two triangles:
// 2*nx*ny faces, (nx+1)*(ny+1) vertices.
TriangleMesh make_grid(int nx, int ny, double spacing, int face_cap = kDefaultFaceCap);

// Torus of major radius R, minor radius r: 2*nu*nv faces, nu*nv vertices.
// Carries angular uv coordinates.
TriangleMesh make_torus(double R, double r, int nu, int nv, int face_cap = kDefaultFaceCap);

// Unit interval [0,1] as a two-row triangle strip of width 1/n: 2n faces,
// 2(n+1) vertices. For fields constant across the width the FEM diffusion
// reduces to the 1D chain.
TriangleMesh make_unit_line(int n, int face_cap = kDefaultFaceCap);

// Per-face doubled areas etc. live in fem.hpp; here only raw area sums used
// by validation.
Eigen::VectorXd face_areas(const TriangleMesh& mesh);

}  // namespace meshpde
