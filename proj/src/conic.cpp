#include "meshpde/conic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace meshpde {

namespace {

void append_scaled_row(AffineRow& dst, const Eigen::SparseMatrix<double, Eigen::RowMajor>& mat,
                       int row, double scale) {
  for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(mat, row); it; ++it)
    dst.coeffs.emplace_back(static_cast<int>(it.col()), scale * it.value());
}

// Merges duplicate indices; keeps rows short and deterministic.
void compress_row(AffineRow& row) {
  std::sort(row.coeffs.begin(), row.coeffs.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::pair<int, double>> merged;
  for (const auto& [idx, val] : row.coeffs) {
    if (!merged.empty() && merged.back().first == idx)
      merged.back().second += val;
    else
      merged.emplace_back(idx, val);
  }
  row.coeffs = std::move(merged);
}

}  // namespace

ConicProgram assemble_step(const HamiltonianKind& kind, const Eigen::VectorXd& u_prev, double h,
                           const FemOperators& ops) {
  if (h <= 0.0) throw std::invalid_argument("time step h must be positive");
  if (u_prev.size() != ops.nv)
    throw std::invalid_argument("u_prev has length " + std::to_string(u_prev.size()) +
                                ", expected " + std::to_string(ops.nv));
  if (kind.needs_flow() && kind.flow.rows() != ops.nf)
    throw std::invalid_argument("flow field does not match mesh face count");

  const int nv = ops.nv, nf = ops.nf;
  const Eigen::SparseMatrix<double, Eigen::RowMajor> grm(ops.G);

  std::vector<char> fixed(nv, 0);
  if (ops.bc.kind == BoundaryCondition::Kind::Dirichlet)
    for (int v : ops.bc.dirichlet_vertices) fixed[v] = 1;

  ConicProgram prog;
  prog.num_field_vars = nv;

  switch (kind.tag) {
    case HamiltonianKind::Tag::NonlinearDiffusion: {
      // aux z_j >= |(Gu)_j|^2 via ||[(1-z)/2; Gu]|| <= (1+z)/2, then
      // u_i - u_prev_i - h w_i sum_{j~i} a_j z_j >= 0
      prog.num_vars = nv + nf;
      for (int i = 0; i < nv; ++i) {
        if (fixed[i]) continue;
        AffineRow row;
        row.coeffs.emplace_back(i, 1.0);
        for (int f : ops.one_ring[i])
          row.coeffs.emplace_back(nv + f, -h * ops.omega[i] * ops.face_area[f]);
        row.constant = -u_prev[i];
        prog.linear_inequalities.push_back(std::move(row));
      }
      for (int f = 0; f < nf; ++f) {
        SocConstraint cone;
        AffineRow top;
        top.coeffs.emplace_back(nv + f, -0.5);
        top.constant = 0.5;
        cone.rows.push_back(std::move(top));
        for (int k = 0; k < 3; ++k) {
          AffineRow r;
          append_scaled_row(r, grm, 3 * f + k, 1.0);
          cone.rows.push_back(std::move(r));
        }
        cone.bound.coeffs.emplace_back(nv + f, 0.5);
        cone.bound.constant = 0.5;
        prog.soc_constraints.push_back(std::move(cone));
      }
      break;
    }
    case HamiltonianKind::Tag::GEquation: {
      // aux t_j >= |(Gu)_j|; rows
      // h w_i sum_{j~i} a_j (Phi_j . (Gu)_j - t_j) + u_i - u_prev_i >= 0
      prog.num_vars = nv + nf;
      for (int i = 0; i < nv; ++i) {
        if (fixed[i]) continue;
        AffineRow row;
        row.coeffs.emplace_back(i, 1.0);
        const double hw = h * ops.omega[i];
        for (int f : ops.one_ring[i]) {
          const double hwa = hw * ops.face_area[f];
          for (int k = 0; k < 3; ++k)
            append_scaled_row(row, grm, 3 * f + k, hwa * kind.flow(f, k));
          row.coeffs.emplace_back(nv + f, -hwa);
        }
        row.constant = -u_prev[i];
        compress_row(row);
        prog.linear_inequalities.push_back(std::move(row));
      }
      for (int f = 0; f < nf; ++f) {
        SocConstraint cone;
        for (int k = 0; k < 3; ++k) {
          AffineRow r;
          append_scaled_row(r, grm, 3 * f + k, 1.0);
          cone.rows.push_back(std::move(r));
        }
        cone.bound.coeffs.emplace_back(nv + f, 1.0);
        prog.soc_constraints.push_back(std::move(cone));
      }
      break;
    }
    case HamiltonianKind::Tag::FokkerPlanck: {
      // all linear: h (u_i div_i + w_i sum_{j~i} a_j Phi_j . (Gu)_j) + u_i - u_prev_i >= 0
      prog.num_vars = nv;
      const Eigen::VectorXd div = vertex_divergence(kind.flow, ops);
      for (int i = 0; i < nv; ++i) {
        if (fixed[i]) continue;
        AffineRow row;
        row.coeffs.emplace_back(i, 1.0 + h * div[i]);
        const double hw = h * ops.omega[i];
        for (int f : ops.one_ring[i]) {
          const double hwa = hw * ops.face_area[f];
          for (int k = 0; k < 3; ++k)
            append_scaled_row(row, grm, 3 * f + k, hwa * kind.flow(f, k));
        }
        row.constant = -u_prev[i];
        compress_row(row);
        prog.linear_inequalities.push_back(std::move(row));
      }
      break;
    }
  }

  prog.objective = Eigen::VectorXd::Zero(prog.num_vars);
  prog.objective.head(nv).setOnes();

  if (ops.bc.kind == BoundaryCondition::Kind::Dirichlet) {
    for (size_t k = 0; k < ops.bc.dirichlet_vertices.size(); ++k) {
      AffineRow row;
      row.coeffs.emplace_back(ops.bc.dirichlet_vertices[k], 1.0);
      row.constant = -ops.bc.dirichlet_values[static_cast<Eigen::Index>(k)];
      prog.equalities.push_back(std::move(row));
    }
  }
  return prog;
}

KktResiduals verify_kkt(const ConicProgram& program, const StepSolution& solution) {
  const Eigen::VectorXd& x = solution.x;
  if (x.size() != program.num_vars)
    throw std::invalid_argument("solution variable vector does not match program size");

  const int n = program.num_vars;
  Eigen::VectorXd stationarity = program.objective;
  double comp = 0.0;
  double primal_viol = 0.0;
  double dual_cone_viol = 0.0;
  double rhs_norm = 0.0;

  for (size_t r = 0; r < program.equalities.size(); ++r) {
    const AffineRow& row = program.equalities[r];
    rhs_norm = std::max(rhs_norm, std::abs(row.constant));
    primal_viol = std::max(primal_viol, std::abs(row.eval(x)));
    const double y = r < static_cast<size_t>(solution.y_eq.size()) ? solution.y_eq[r] : 0.0;
    for (const auto& [idx, c] : row.coeffs) stationarity[idx] += y * c;
  }
  for (size_t r = 0; r < program.linear_inequalities.size(); ++r) {
    const AffineRow& row = program.linear_inequalities[r];
    rhs_norm = std::max(rhs_norm, std::abs(row.constant));
    const double slack = row.eval(x);
    primal_viol = std::max(primal_viol, -slack);
    const double z = r < static_cast<size_t>(solution.z_linear.size()) ? solution.z_linear[r] : 0.0;
    dual_cone_viol = std::max(dual_cone_viol, -z);
    comp += z * slack;
    for (const auto& [idx, c] : row.coeffs) stationarity[idx] -= z * c;
  }
  for (size_t q = 0; q < program.soc_constraints.size(); ++q) {
    const SocConstraint& cone = program.soc_constraints[q];
    const double bound = cone.bound.eval(x);
    rhs_norm = std::max(rhs_norm, std::abs(cone.bound.constant));
    double norm2 = 0.0;
    Eigen::VectorXd vals(cone.rows.size());
    for (size_t k = 0; k < cone.rows.size(); ++k) {
      vals[k] = cone.rows[k].eval(x);
      norm2 += vals[k] * vals[k];
      rhs_norm = std::max(rhs_norm, std::abs(cone.rows[k].constant));
    }
    primal_viol = std::max(primal_viol, std::sqrt(norm2) - bound);

    Eigen::VectorXd z;
    if (q < solution.z_soc.size() &&
        solution.z_soc[q].size() == static_cast<Eigen::Index>(cone.rows.size()) + 1)
      z = solution.z_soc[q];
    else
      z = Eigen::VectorXd::Zero(cone.rows.size() + 1);
    dual_cone_viol = std::max(dual_cone_viol, z.tail(z.size() - 1).norm() - z[0]);
    comp += z[0] * bound + z.tail(z.size() - 1).dot(vals);
    for (const auto& [idx, c] : cone.bound.coeffs) stationarity[idx] -= z[0] * c;
    for (size_t k = 0; k < cone.rows.size(); ++k)
      for (const auto& [idx, c] : cone.rows[k].coeffs) stationarity[idx] -= z[k + 1] * c;
  }

  const double pobj = program.objective.dot(x);
  const double dobj = pobj - comp;
  KktResiduals res;
  res.primal = std::max(primal_viol, 0.0) / (1.0 + rhs_norm);
  res.dual = std::max(stationarity.cwiseAbs().maxCoeff(), std::max(dual_cone_viol, 0.0)) /
             (1.0 + program.objective.cwiseAbs().maxCoeff());
  res.gap = std::abs(comp) / (1.0 + std::abs(pobj) + std::abs(dobj));
  (void)n;
  return res;
}

namespace {

void dump_row(const AffineRow& row, std::ostream& out) {
  out << row.coeffs.size();
  for (const auto& [idx, val] : row.coeffs) out << ' ' << idx << ' ' << val;
  out << ' ' << row.constant << '\n';
}

AffineRow parse_row(std::istream& in) {
  AffineRow row;
  size_t nnz;
  if (!(in >> nnz)) throw std::runtime_error("conic program parse: expected row nnz count");
  row.coeffs.resize(nnz);
  for (auto& [idx, val] : row.coeffs)
    if (!(in >> idx >> val)) throw std::runtime_error("conic program parse: malformed row entry");
  if (!(in >> row.constant)) throw std::runtime_error("conic program parse: missing row constant");
  return row;
}

}  // namespace

void dump_program(const ConicProgram& program, std::ostream& out) {
  out.precision(17);
  out << "meshpde-conic-program 1\n";
  out << "vars " << program.num_vars << " field " << program.num_field_vars << "\n";
  out << "objective";
  for (int i = 0; i < program.num_vars; ++i) out << ' ' << program.objective[i];
  out << "\nlinear " << program.linear_inequalities.size() << "\n";
  for (const auto& row : program.linear_inequalities) dump_row(row, out);
  out << "soc " << program.soc_constraints.size() << "\n";
  for (const auto& cone : program.soc_constraints) {
    out << cone.rows.size() << "\n";
    for (const auto& row : cone.rows) dump_row(row, out);
    dump_row(cone.bound, out);
  }
  out << "eq " << program.equalities.size() << "\n";
  for (const auto& row : program.equalities) dump_row(row, out);
  out << "end\n";
}

ConicProgram load_program(std::istream& in) {
  std::string magic;
  int version;
  if (!(in >> magic >> version) || magic != "meshpde-conic-program" || version != 1)
    throw std::runtime_error("not a meshpde conic program (bad header)");
  ConicProgram prog;
  std::string tag;
  if (!(in >> tag >> prog.num_vars) || tag != "vars")
    throw std::runtime_error("conic program parse: expected 'vars'");
  if (!(in >> tag >> prog.num_field_vars) || tag != "field")
    throw std::runtime_error("conic program parse: expected 'field'");
  if (!(in >> tag) || tag != "objective")
    throw std::runtime_error("conic program parse: expected 'objective'");
  prog.objective.resize(prog.num_vars);
  for (int i = 0; i < prog.num_vars; ++i)
    if (!(in >> prog.objective[i])) throw std::runtime_error("conic program parse: bad objective");

  size_t count;
  if (!(in >> tag >> count) || tag != "linear")
    throw std::runtime_error("conic program parse: expected 'linear'");
  prog.linear_inequalities.reserve(count);
  for (size_t i = 0; i < count; ++i) prog.linear_inequalities.push_back(parse_row(in));

  if (!(in >> tag >> count) || tag != "soc")
    throw std::runtime_error("conic program parse: expected 'soc'");
  prog.soc_constraints.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    size_t rows;
    if (!(in >> rows)) throw std::runtime_error("conic program parse: bad cone row count");
    SocConstraint cone;
    cone.rows.reserve(rows);
    for (size_t k = 0; k < rows; ++k) cone.rows.push_back(parse_row(in));
    cone.bound = parse_row(in);
    prog.soc_constraints.push_back(std::move(cone));
  }

  if (!(in >> tag >> count) || tag != "eq")
    throw std::runtime_error("conic program parse: expected 'eq'");
  prog.equalities.reserve(count);
  for (size_t i = 0; i < count; ++i) prog.equalities.push_back(parse_row(in));

  if (!(in >> tag) || tag != "end") throw std::runtime_error("conic program parse: missing 'end'");

  for (const auto& row : prog.linear_inequalities)
    for (const auto& [idx, val] : row.coeffs)
      if (idx < 0 || idx >= prog.num_vars)
        throw std::runtime_error("conic program parse: variable index out of range");
  return prog;
}

void dump_program(const ConicProgram& program, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write program file: " + path);
  dump_program(program, out);
}

ConicProgram load_program(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open program file: " + path);
  return load_program(in);
}

}  // namespace meshpde
