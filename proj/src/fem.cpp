#include "amps/fem.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <unordered_map>

namespace amps {

void Mesh::fix_vertices(std::span<const index_t> vertex_ids) {
  for (index_t v : vertex_ids)
    for (int a = 0; a < 3; ++a) dirichlet.push_back(3 * v + a);
  std::sort(dirichlet.begin(), dirichlet.end());
  dirichlet.erase(std::unique(dirichlet.begin(), dirichlet.end()),
                  dirichlet.end());
}

bool Mesh::is_vertex_fixed(index_t v) const {
  return std::binary_search(dirichlet.begin(), dirichlet.end(), 3 * v) ||
         std::binary_search(dirichlet.begin(), dirichlet.end(), 3 * v + 1) ||
         std::binary_search(dirichlet.begin(), dirichlet.end(), 3 * v + 2);
}

double Mesh::signed_volume(index_t tet) const {
  const Tet& t = tets[tet];
  const Point& x0 = vertices[t[0]];
  Eigen::Matrix3d j;
  j.col(0) = vertices[t[1]] - x0;
  j.col(1) = vertices[t[2]] - x0;
  j.col(2) = vertices[t[3]] - x0;
  return j.determinant() / 6.0;
}

void Mesh::validate() const {
  const index_t nv = num_vertices();
  for (index_t e = 0; e < num_tets(); ++e) {
    for (index_t v : tets[e])
      if (v < 0 || v >= nv)
        throw std::invalid_argument("tet " + std::to_string(e) +
                                    " references missing vertex");
    if (!(signed_volume(e) > 0.0))
      throw std::invalid_argument("tet " + std::to_string(e) +
                                  " has non-positive volume");
  }
  if (!std::is_sorted(dirichlet.begin(), dirichlet.end()) ||
      std::adjacent_find(dirichlet.begin(), dirichlet.end()) != dirichlet.end())
    throw std::invalid_argument("dirichlet DOFs must be sorted and unique");
  if (!dirichlet.empty() && (dirichlet.front() < 0 || dirichlet.back() >= 3 * nv))
    throw std::invalid_argument("dirichlet DOF out of range");
  if (!(material.young_modulus > 0.0) || !(material.poisson_ratio > 0.0) ||
      !(material.poisson_ratio < 0.5))
    throw std::invalid_argument("material constants out of range");
}

bool operator==(const Mesh& a, const Mesh& b) {
  return a.vertices == b.vertices && a.tets == b.tets &&
         a.dirichlet == b.dirichlet &&
         a.material.young_modulus == b.material.young_modulus &&
         a.material.poisson_ratio == b.material.poisson_ratio;
}

DofMap::DofMap(const Mesh& mesh) {
  const index_t total = 3 * mesh.num_vertices();
  global_to_free_.assign(total, -1);
  free_to_global_.reserve(total - mesh.dirichlet.size());
  auto fixed = mesh.dirichlet.begin();
  for (index_t g = 0; g < total; ++g) {
    if (fixed != mesh.dirichlet.end() && *fixed == g) {
      ++fixed;
      continue;
    }
    global_to_free_[g] = static_cast<index_t>(free_to_global_.size());
    free_to_global_.push_back(g);
  }
}

std::array<index_t, 12> DofMap::element_dofs(const Tet& tet) const {
  std::array<index_t, 12> d{};
  for (int a = 0; a < 4; ++a)
    for (int c = 0; c < 3; ++c) d[3 * a + c] = free_dof(tet[a], c);
  return d;
}

ElementMatrix element_stiffness(const std::array<Point, 4>& x,
                                const Material& material) {
  Eigen::Matrix3d jac;
  jac.col(0) = x[1] - x[0];
  jac.col(1) = x[2] - x[0];
  jac.col(2) = x[3] - x[0];
  const double det = jac.determinant();
  double scale = 0.0;
  for (int a = 1; a < 4; ++a) scale = std::max(scale, (x[a] - x[0]).norm());
  if (!(det > 1e-14 * scale * scale * scale))
    throw DegenerateElementError("element has zero or negative volume");
  const double vol = det / 6.0;

  // Rows of J^{-1} are the gradients of the barycentric coordinates 1..3.
  const Eigen::Matrix3d jinv = jac.inverse();
  std::array<Eigen::Vector3d, 4> grad;
  grad[1] = jinv.row(0).transpose();
  grad[2] = jinv.row(1).transpose();
  grad[3] = jinv.row(2).transpose();
  grad[0] = -(grad[1] + grad[2] + grad[3]);

  Eigen::Matrix<double, 6, 12> b = Eigen::Matrix<double, 6, 12>::Zero();
  for (int a = 0; a < 4; ++a) {
    const auto& g = grad[a];
    const int c = 3 * a;
    b(0, c) = g.x();
    b(1, c + 1) = g.y();
    b(2, c + 2) = g.z();
    b(3, c) = g.y();
    b(3, c + 1) = g.x();
    b(4, c + 1) = g.z();
    b(4, c + 2) = g.y();
    b(5, c) = g.z();
    b(5, c + 2) = g.x();
  }

  const double e = material.young_modulus;
  const double nu = material.poisson_ratio;
  const double lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
  const double mu = e / (2.0 * (1.0 + nu));
  Eigen::Matrix<double, 6, 6> c = Eigen::Matrix<double, 6, 6>::Zero();
  c.topLeftCorner<3, 3>().setConstant(lambda);
  c.topLeftCorner<3, 3>().diagonal().array() += 2.0 * mu;
  c.bottomRightCorner<3, 3>().diagonal().setConstant(mu);

  ElementMatrix ke = vol * (b.transpose() * c * b);
  // Exact symmetry so assembled matrices are symmetric bit for bit.
  return 0.5 * (ke + ke.transpose());
}

ElementMatrix element_stiffness(const Mesh& mesh, index_t tet) {
  const Tet& t = mesh.tets[tet];
  return element_stiffness({mesh.vertices[t[0]], mesh.vertices[t[1]],
                            mesh.vertices[t[2]], mesh.vertices[t[3]]},
                           mesh.material);
}

namespace {

void scatter_element(const ElementMatrix& ke, const std::array<index_t, 12>& d,
                     double sign,
                     std::vector<std::tuple<index_t, index_t, double>>& out) {
  for (int j = 0; j < 12; ++j) {
    if (d[j] < 0) continue;
    for (int i = 0; i < 12; ++i) {
      if (d[i] < 0) continue;
      out.emplace_back(d[i], d[j], sign * ke(i, j));
    }
  }
}

}  // namespace

SparseMatrix assemble_elements(const Mesh& mesh, const DofMap& dofs,
                               std::span<const index_t> elements) {
  std::vector<std::tuple<index_t, index_t, double>> trip;
  trip.reserve(elements.size() * 144);
  for (index_t e : elements)
    scatter_element(element_stiffness(mesh, e), dofs.element_dofs(mesh.tets[e]),
                    1.0, trip);
  return SparseMatrix::from_triplets(dofs.num_free(), dofs.num_free(), trip);
}

AssembledSystem assemble_stiffness(const Mesh& mesh) {
  AssembledSystem sys;
  sys.dofs = DofMap(mesh);
  std::vector<index_t> all(mesh.num_tets());
  for (index_t e = 0; e < mesh.num_tets(); ++e) all[e] = e;
  sys.k = assemble_elements(mesh, sys.dofs, all);
  return sys;
}

Vector body_force(const Mesh& mesh, const DofMap& dofs, const Point& g) {
  Vector f(dofs.num_free(), 0.0);
  for (index_t e = 0; e < mesh.num_tets(); ++e) {
    const double w = mesh.signed_volume(e) / 4.0;
    for (index_t v : mesh.tets[e])
      for (int a = 0; a < 3; ++a) {
        const index_t d = dofs.free_dof(v, a);
        if (d >= 0) f[d] += w * g[a];
      }
  }
  return f;
}

StiffnessDelta local_stiffness_diff(const Mesh& before, const Mesh& after,
                                    std::span<const index_t> affected) {
  if (after.num_vertices() < before.num_vertices() ||
      !std::equal(before.vertices.begin(), before.vertices.end(),
                  after.vertices.begin()))
    throw ConsistencyError("vertices may only be appended");
  if (after.num_tets() != before.num_tets())
    throw ConsistencyError("element count changed");
  if (after.dirichlet != before.dirichlet)
    throw ConsistencyError("Dirichlet set changed");
  std::vector<char> is_affected(before.num_tets(), 0);
  for (index_t e : affected) {
    if (e < 0 || e >= before.num_tets())
      throw ConsistencyError("affected element id out of range");
    is_affected[e] = 1;
  }
  for (index_t e = 0; e < before.num_tets(); ++e)
    if (!is_affected[e] && before.tets[e] != after.tets[e])
      throw ConsistencyError("element " + std::to_string(e) +
                             " changed but is not declared affected");

  const DofMap db(before), da(after);
  const index_t n_before = db.num_free();

  std::map<index_t, index_t> local;  // free dof -> dense position
  for (index_t e : affected) {
    for (index_t d : db.element_dofs(before.tets[e]))
      if (d >= 0) local.emplace(d, 0);
    for (index_t d : da.element_dofs(after.tets[e]))
      if (d >= 0) local.emplace(d, 0);
  }
  std::vector<index_t> order;
  order.reserve(local.size());
  for (auto& [dof, pos] : local) {
    pos = static_cast<index_t>(order.size());
    order.push_back(dof);
  }
  DenseMatrix diff = DenseMatrix::Zero(order.size(), order.size());
  auto add = [&](const ElementMatrix& ke, const std::array<index_t, 12>& d,
                 double sign) {
    for (int j = 0; j < 12; ++j) {
      if (d[j] < 0) continue;
      const index_t pj = local[d[j]];
      for (int i = 0; i < 12; ++i)
        if (d[i] >= 0) diff(local[d[i]], pj) += sign * ke(i, j);
    }
  };
  for (index_t e : affected) {
    add(element_stiffness(before, e), db.element_dofs(before.tets[e]), 1.0);
    add(element_stiffness(after, e), da.element_dofs(after.tets[e]), -1.0);
  }

  StiffnessDelta delta;
  delta.new_dof_count = da.num_free() - n_before;
  std::vector<index_t> keep;
  for (index_t p = 0; p < static_cast<index_t>(order.size()); ++p) {
    if (diff.col(p).cwiseAbs().maxCoeff() == 0.0) continue;
    keep.push_back(p);
    delta.dofs.push_back(order[p]);
    if (order[p] < n_before) delta.existing_dofs.push_back(order[p]);
  }
  delta.e.resize(keep.size(), keep.size());
  for (std::size_t j = 0; j < keep.size(); ++j)
    for (std::size_t i = 0; i < keep.size(); ++i)
      delta.e(i, j) = diff(keep[i], keep[j]);
  return delta;
}

}  // namespace amps
