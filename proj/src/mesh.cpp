#include "meshpde/mesh.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace meshpde {

namespace {

std::string lowercase_ext(const std::string& path) {
  auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return {};
  std::string ext = path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

// Next non-empty, non-comment line.
bool next_data_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    auto pos = line.find_first_not_of(" \t\r\n");
    if (pos == std::string::npos) continue;
    if (line[pos] == '#') continue;
    return true;
  }
  return false;
}

void check_face_cap(long long faces, int cap) {
  if (faces > cap) {
    throw MeshError("requested mesh has " + std::to_string(faces) +
                    " faces, exceeding the face-count cap of " + std::to_string(cap));
  }
}

}  // namespace

Eigen::VectorXd face_areas(const TriangleMesh& mesh) {
  Eigen::VectorXd areas(mesh.num_faces());
  for (int f = 0; f < mesh.num_faces(); ++f) {
    Eigen::Vector3d p0 = mesh.vertices.row(mesh.faces(f, 0));
    Eigen::Vector3d e1 = mesh.vertices.row(mesh.faces(f, 1)).transpose() - p0;
    Eigen::Vector3d e2 = mesh.vertices.row(mesh.faces(f, 2)).transpose() - p0;
    areas[f] = 0.5 * e1.cross(e2).norm();
  }
  return areas;
}

void validate_mesh(TriangleMesh& mesh) {
  const int nv = mesh.num_vertices();
  const int nf = mesh.num_faces();
  if (nv < 3 || nf < 1) throw MeshError("mesh needs at least 3 vertices and 1 face");

  for (int f = 0; f < nf; ++f) {
    for (int k = 0; k < 3; ++k) {
      int v = mesh.faces(f, k);
      if (v < 0 || v >= nv)
        throw MeshError("face " + std::to_string(f) + " references vertex " + std::to_string(v) +
                        " outside [0," + std::to_string(nv) + ")");
    }
    if (mesh.faces(f, 0) == mesh.faces(f, 1) || mesh.faces(f, 1) == mesh.faces(f, 2) ||
        mesh.faces(f, 0) == mesh.faces(f, 2))
      throw MeshError("face " + std::to_string(f) + " repeats a vertex");
  }

  Eigen::VectorXd areas = face_areas(mesh);
  const double mean_area = areas.mean();
  for (int f = 0; f < nf; ++f) {
    if (areas[f] <= kDegenerateAreaFactor * mean_area)
      throw MeshError("face " + std::to_string(f) + " is degenerate (area " +
                      std::to_string(areas[f]) + ")");
  }

  // Directed-edge census: a repeated directed edge means either a non-manifold
  // edge or inconsistent winding; an undirected edge with >2 faces is
  // non-manifold; an edge seen once is boundary.
  std::map<std::pair<int, int>, int> undirected_count;
  std::map<std::pair<int, int>, int> directed_count;
  for (int f = 0; f < nf; ++f) {
    for (int k = 0; k < 3; ++k) {
      int a = mesh.faces(f, k), b = mesh.faces(f, (k + 1) % 3);
      if (++directed_count[{a, b}] > 1)
        throw MeshError("directed edge (" + std::to_string(a) + "," + std::to_string(b) +
                        ") appears twice at face " + std::to_string(f) +
                        ": non-manifold or inconsistently oriented");
      ++undirected_count[{std::min(a, b), std::max(a, b)}];
    }
  }
  mesh.boundary_vertex.assign(nv, 0);
  for (const auto& [edge, count] : undirected_count) {
    if (count > 2)
      throw MeshError("edge (" + std::to_string(edge.first) + "," + std::to_string(edge.second) +
                      ") shared by " + std::to_string(count) + " faces");
    if (count == 1) {
      mesh.boundary_vertex[edge.first] = 1;
      mesh.boundary_vertex[edge.second] = 1;
    }
  }
}

namespace {

TriangleMesh load_off(std::istream& in) {
  std::string line;
  if (!next_data_line(in, line)) throw MeshError("OFF: empty file");
  std::istringstream header(line);
  std::string magic;
  header >> magic;
  long long nv = -1, nf = -1, ne = 0;
  if (magic == "OFF") {
    if (!(header >> nv >> nf >> ne)) {
      if (!next_data_line(in, line)) throw MeshError("OFF: missing element counts");
      std::istringstream counts(line);
      if (!(counts >> nv >> nf >> ne)) throw MeshError("OFF: malformed count line: " + line);
    }
  } else {
    // Headerless variant: counts on the first line.
    std::istringstream counts(line);
    if (!(counts >> nv >> nf >> ne)) throw MeshError("OFF: expected OFF header, got: " + line);
  }
  if (nv < 0 || nf < 0) throw MeshError("OFF: negative element counts");

  TriangleMesh mesh;
  mesh.vertices.resize(nv, 3);
  for (long long i = 0; i < nv; ++i) {
    if (!next_data_line(in, line)) throw MeshError("OFF: unexpected end of vertex list");
    std::istringstream ls(line);
    if (!(ls >> mesh.vertices(i, 0) >> mesh.vertices(i, 1) >> mesh.vertices(i, 2)))
      throw MeshError("OFF: malformed vertex line: " + line);
  }
  mesh.faces.resize(nf, 3);
  for (long long f = 0; f < nf; ++f) {
    if (!next_data_line(in, line)) throw MeshError("OFF: unexpected end of face list");
    std::istringstream ls(line);
    int arity = 0;
    if (!(ls >> arity)) throw MeshError("OFF: malformed face line: " + line);
    if (arity != 3)
      throw MeshError("OFF: face " + std::to_string(f) + " has " + std::to_string(arity) +
                      " vertices; only triangles are supported");
    if (!(ls >> mesh.faces(f, 0) >> mesh.faces(f, 1) >> mesh.faces(f, 2)))
      throw MeshError("OFF: malformed face line: " + line);
  }
  validate_mesh(mesh);
  return mesh;
}

int parse_obj_index(const std::string& token, long long nv, long long face) {
  // "f" entries may carry /vt/vn suffixes; the leading field is the index.
  std::string head = token.substr(0, token.find('/'));
  long long idx;
  try {
    idx = std::stoll(head);
  } catch (const std::exception&) {
    throw MeshError("OBJ: malformed face index '" + token + "' at face " + std::to_string(face));
  }
  if (idx < 1 || idx > nv)
    throw MeshError("OBJ: face " + std::to_string(face) + " index " + std::to_string(idx) +
                    " outside the 1-based range [1," + std::to_string(nv) + "]");
  return static_cast<int>(idx - 1);
}

TriangleMesh load_obj(std::istream& in) {
  std::vector<Eigen::Vector3d> verts;
  std::vector<Eigen::Vector3i> faces;
  std::string line;
  long long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Eigen::Vector3d p;
      if (!(ls >> p[0] >> p[1] >> p[2]))
        throw MeshError("OBJ: malformed vertex at line " + std::to_string(lineno));
      verts.push_back(p);
    } else if (tag == "f") {
      std::vector<std::string> tokens;
      std::string tok;
      while (ls >> tok) tokens.push_back(tok);
      if (tokens.size() != 3)
        throw MeshError("OBJ: face at line " + std::to_string(lineno) + " has " +
                        std::to_string(tokens.size()) + " vertices; only triangles are supported");
      Eigen::Vector3i f;
      for (int k = 0; k < 3; ++k)
        f[k] = parse_obj_index(tokens[k], static_cast<long long>(verts.size()),
                               static_cast<long long>(faces.size()));
      faces.push_back(f);
    }
    // all other tags (vn, vt, usemtl, ...) ignored
  }
  TriangleMesh mesh;
  mesh.vertices.resize(verts.size(), 3);
  for (size_t i = 0; i < verts.size(); ++i) mesh.vertices.row(i) = verts[i];
  mesh.faces.resize(faces.size(), 3);
  for (size_t f = 0; f < faces.size(); ++f) mesh.faces.row(f) = faces[f];
  validate_mesh(mesh);
  return mesh;
}

}  // namespace

TriangleMesh load_mesh(std::istream& in, MeshFormat format) {
  return format == MeshFormat::OFF ? load_off(in) : load_obj(in);
}

TriangleMesh load_mesh(const std::string& path, MeshFormat format) {
  std::ifstream in(path);
  if (!in) throw MeshError("cannot open mesh file: " + path);
  return load_mesh(in, format);
}

TriangleMesh load_mesh(const std::string& path) {
  std::string ext = lowercase_ext(path);
  if (ext == "off") return load_mesh(path, MeshFormat::OFF);
  if (ext == "obj") return load_mesh(path, MeshFormat::OBJ);
  throw MeshError("unrecognized mesh extension '." + ext + "' for " + path);
}

void save_off(const TriangleMesh& mesh, std::ostream& out) {
  out << "OFF\n" << mesh.num_vertices() << ' ' << mesh.num_faces() << " 0\n";
  out.precision(17);
  for (int i = 0; i < mesh.num_vertices(); ++i)
    out << mesh.vertices(i, 0) << ' ' << mesh.vertices(i, 1) << ' ' << mesh.vertices(i, 2) << '\n';
  for (int f = 0; f < mesh.num_faces(); ++f)
    out << "3 " << mesh.faces(f, 0) << ' ' << mesh.faces(f, 1) << ' ' << mesh.faces(f, 2) << '\n';
}

void save_off(const TriangleMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw MeshError("cannot write mesh file: " + path);
  save_off(mesh, out);
}

TriangleMesh make_icosphere(int level, int face_cap) {
  if (level < 0) throw MeshError("icosphere level must be >= 0");
  check_face_cap(20LL << (2 * level), face_cap);

  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> verts = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : verts) v.normalize();
  std::vector<Eigen::Vector3i> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},  {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6},  {3, 6, 8},
      {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};

  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      Eigen::Vector3d m = (verts[a] + verts[b]).normalized();
      verts.push_back(m);
      int idx = static_cast<int>(verts.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<Eigen::Vector3i> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      int a = mid(f[0], f[1]), b = mid(f[1], f[2]), c = mid(f[2], f[0]);
      next.push_back({f[0], a, c});
      next.push_back({f[1], b, a});
      next.push_back({f[2], c, b});
      next.push_back({a, b, c});
    }
    faces = std::move(next);
  }

  TriangleMesh mesh;
  mesh.vertices.resize(verts.size(), 3);
  for (size_t i = 0; i < verts.size(); ++i) mesh.vertices.row(i) = verts[i];
  mesh.faces.resize(faces.size(), 3);
  for (size_t f = 0; f < faces.size(); ++f) mesh.faces.row(f) = faces[f];
  validate_mesh(mesh);
  return mesh;
}

TriangleMesh make_grid(int nx, int ny, double spacing, int face_cap) {
  if (nx < 1 || ny < 1 || spacing <= 0) throw MeshError("grid needs nx,ny >= 1 and spacing > 0");
  check_face_cap(2LL * nx * ny, face_cap);

  TriangleMesh mesh;
  mesh.vertices.resize((nx + 1) * (ny + 1), 3);
  auto vid = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      mesh.vertices.row(vid(i, j)) = Eigen::RowVector3d(i * spacing, j * spacing, 0.0);

  mesh.faces.resize(2 * nx * ny, 3);
  int f = 0;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      mesh.faces.row(f++) = Eigen::RowVector3i(vid(i, j), vid(i + 1, j), vid(i + 1, j + 1));
      mesh.faces.row(f++) = Eigen::RowVector3i(vid(i, j), vid(i + 1, j + 1), vid(i, j + 1));
    }
  }
  validate_mesh(mesh);
  return mesh;
}

TriangleMesh make_torus(double R, double r, int nu, int nv, int face_cap) {
  if (R <= 0 || r <= 0 || R <= r) throw MeshError("torus needs R > r > 0");
  if (nu < 3 || nv < 3) throw MeshError("torus needs nu,nv >= 3");
  check_face_cap(2LL * nu * nv, face_cap);

  TriangleMesh mesh;
  mesh.vertices.resize(nu * nv, 3);
  Eigen::Matrix<double, Eigen::Dynamic, 2> uv(nu * nv, 2);
  auto vid = [nv](int i, int j) { return i * nv + j; };
  for (int i = 0; i < nu; ++i) {
    double theta = 2.0 * M_PI * i / nu;
    for (int j = 0; j < nv; ++j) {
      double phi = 2.0 * M_PI * j / nv;
      double w = R + r * std::cos(phi);
      mesh.vertices.row(vid(i, j)) =
          Eigen::RowVector3d(w * std::cos(theta), w * std::sin(theta), r * std::sin(phi));
      uv.row(vid(i, j)) = Eigen::RowVector2d(static_cast<double>(i) / nu, static_cast<double>(j) / nv);
    }
  }
  mesh.uv = std::move(uv);

  mesh.faces.resize(2 * nu * nv, 3);
  int f = 0;
  for (int i = 0; i < nu; ++i) {
    int i1 = (i + 1) % nu;
    for (int j = 0; j < nv; ++j) {
      int j1 = (j + 1) % nv;
      mesh.faces.row(f++) = Eigen::RowVector3i(vid(i, j), vid(i1, j), vid(i1, j1));
      mesh.faces.row(f++) = Eigen::RowVector3i(vid(i, j), vid(i1, j1), vid(i, j1));
    }
  }
  validate_mesh(mesh);
  return mesh;
}

TriangleMesh make_unit_line(int n, int face_cap) {
  if (n < 1) throw MeshError("unit_line needs n >= 1");
  check_face_cap(2LL * n, face_cap);

  const double dx = 1.0 / n;
  TriangleMesh mesh;
  mesh.vertices.resize(2 * (n + 1), 3);
  for (int i = 0; i <= n; ++i) {
    mesh.vertices.row(i) = Eigen::RowVector3d(i * dx, 0.0, 0.0);
    mesh.vertices.row(n + 1 + i) = Eigen::RowVector3d(i * dx, dx, 0.0);
  }
  mesh.faces.resize(2 * n, 3);
  for (int i = 0; i < n; ++i) {
    int b0 = i, b1 = i + 1, t0 = n + 1 + i, t1 = n + 2 + i;
    mesh.faces.row(2 * i) = Eigen::RowVector3i(b0, b1, t1);
    mesh.faces.row(2 * i + 1) = Eigen::RowVector3i(b0, t1, t0);
  }
  validate_mesh(mesh);
  return mesh;
}

}  // namespace meshpde
