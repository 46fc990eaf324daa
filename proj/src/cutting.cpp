#include "amps/cutting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace amps {

Mesh generate_grid(index_t nx, index_t ny, index_t nz, const Point& spacing,
                   const Material& material) {
  if (nx < 1 || ny < 1 || nz < 1)
    throw std::invalid_argument("grid needs at least one cell per axis");
  Mesh mesh;
  mesh.material = material;
  const index_t px = nx + 1, py = ny + 1, pz = nz + 1;
  mesh.vertices.reserve(px * py * pz);
  for (index_t l = 0; l < pz; ++l)
    for (index_t j = 0; j < py; ++j)
      for (index_t i = 0; i < px; ++i)
        mesh.vertices.emplace_back(i * spacing.x(), j * spacing.y(),
                                   l * spacing.z());
  auto id = [&](index_t i, index_t j, index_t l) { return i + px * (j + py * l); };

  // Freudenthal/Kuhn split: one tet per monotone lattice path from the
  // cell's (0,0,0) corner to its (1,1,1) corner. Every cell uses the same
  // diagonal, so neighbouring cells share conforming face triangulations.
  static constexpr int kPerms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                       {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  mesh.tets.reserve(6 * nx * ny * nz);
  for (index_t l = 0; l < nz; ++l)
    for (index_t j = 0; j < ny; ++j)
      for (index_t i = 0; i < nx; ++i)
        for (const auto& perm : kPerms) {
          index_t c[3] = {i, j, l};
          Tet t{};
          t[0] = id(c[0], c[1], c[2]);
          for (int s = 0; s < 3; ++s) {
            ++c[perm[s]];
            t[s + 1] = id(c[0], c[1], c[2]);
          }
          mesh.tets.push_back(t);
          if (mesh.signed_volume(mesh.num_tets() - 1) < 0.0)
            std::swap(mesh.tets.back()[2], mesh.tets.back()[3]);
        }

  std::vector<index_t> base;
  for (index_t j = 0; j < py; ++j)
    for (index_t i = 0; i < px; ++i) base.push_back(id(i, j, 0));
  mesh.fix_vertices(base);
  return mesh;
}

Mesh generate_beam(index_t h, const Material& material) {
  if (h < 2) throw std::invalid_argument("beam length must be at least 2");
  return generate_grid(4, 4, h - 1, Point(1.0, 1.0, 1.0), material);
}

Mesh generate_brick(index_t level, const Material& material) {
  if (level < 0) throw std::invalid_argument("brick level must be >= 0");
  const index_t cells = 4 * (level + 1);
  const double hstep = 1.0 / static_cast<double>(cells);
  return generate_grid(cells, cells, 2 * cells, Point(hstep, hstep, hstep),
                       material);
}

index_t brick_vertex_count(index_t level) {
  const index_t c = 4 * (level + 1);
  return (c + 1) * (c + 1) * (2 * c + 1);
}

Mesh generate_from_spec(const std::string& spec, const Material& material) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("mesh spec must look like beam:H or brick:L");
  const std::string kind = spec.substr(0, colon);
  index_t value = 0;
  try {
    std::size_t used = 0;
    value = std::stoll(spec.substr(colon + 1), &used);
    if (used != spec.size() - colon - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw std::invalid_argument("bad mesh size in '" + spec + "'");
  }
  if (kind == "beam") return generate_beam(value, material);
  if (kind == "brick") return generate_brick(value, material);
  throw std::invalid_argument("unknown mesh kind '" + kind + "'");
}

namespace {

double mesh_scale(const Mesh& mesh) {
  double s = 0.0;
  for (const Point& p : mesh.vertices) s = std::max(s, p.cwiseAbs().maxCoeff());
  return std::max(s, 1.0);
}

/// Direction pointing away from the Dirichlet support, or zero.
Point away_from_support(const Mesh& mesh) {
  Point all = Point::Zero(), fixed = Point::Zero();
  index_t nf = 0;
  for (index_t v = 0; v < mesh.num_vertices(); ++v) {
    all += mesh.vertices[v];
    if (mesh.is_vertex_fixed(v)) {
      fixed += mesh.vertices[v];
      ++nf;
    }
  }
  if (nf == 0 || mesh.num_vertices() == 0) return Point::Zero();
  Point dir = all / static_cast<double>(mesh.num_vertices()) -
              fixed / static_cast<double>(nf);
  const double len = dir.norm();
  return len > 0.0 ? Point(dir / len) : Point::Zero();
}

std::vector<index_t> order_away_from_support(const Mesh& mesh,
                                             std::vector<index_t> ids) {
  const Point dir = away_from_support(mesh);
  const double tol = 1e-9 * mesh_scale(mesh);
  std::stable_sort(ids.begin(), ids.end(), [&](index_t a, index_t b) {
    const double pa = dir.dot(mesh.vertices[a]);
    const double pb = dir.dot(mesh.vertices[b]);
    if (std::abs(pa - pb) > tol) return pa > pb;
    return a < b;
  });
  return ids;
}

}  // namespace

std::vector<index_t> cut_path(const Mesh& mesh, const CutPlane& plane,
                              index_t vertex_limit) {
  const index_t limit = vertex_limit < 0 ? mesh.num_vertices()
                                         : std::min(vertex_limit, mesh.num_vertices());
  const double tol = 1e-9 * mesh_scale(mesh);
  std::vector<index_t> on_plane;
  for (index_t v = 0; v < limit; ++v)
    if (std::abs(plane.distance(mesh.vertices[v])) <= tol) on_plane.push_back(v);
  return order_away_from_support(mesh, std::move(on_plane));
}

CutResult advance_cut(const Mesh& mesh, const CutPlane& plane, index_t vertex,
                      index_t step) {
  if (vertex < 0 || vertex >= mesh.num_vertices())
    throw std::out_of_range("advance_cut: vertex out of range");
  CutResult out{mesh, {}};
  out.event.step = step;
  out.event.duplicated_vertex = vertex;
  if (mesh.is_vertex_fixed(vertex)) {
    out.event.skipped_fixed = true;
    return out;
  }
  std::vector<index_t> positive;
  bool has_negative = false;
  for (index_t e = 0; e < mesh.num_tets(); ++e) {
    const Tet& t = mesh.tets[e];
    if (std::find(t.begin(), t.end(), vertex) == t.end()) continue;
    Point centroid = Point::Zero();
    for (index_t v : t) centroid += mesh.vertices[v];
    centroid /= 4.0;
    if (plane.distance(centroid) > 0.0)
      positive.push_back(e);
    else
      has_negative = true;
  }
  if (positive.empty() || !has_negative) return out;

  const index_t copy = mesh.num_vertices();
  out.mesh.vertices.push_back(mesh.vertices[vertex]);
  for (index_t e : positive)
    for (index_t& v : out.mesh.tets[e])
      if (v == vertex) v = copy;
  out.event.new_vertex = copy;
  out.event.affected_elements = std::move(positive);
  return out;
}

index_t connected_components(const Mesh& mesh) {
  const index_t nv = mesh.num_vertices();
  std::vector<index_t> parent(nv);
  std::iota(parent.begin(), parent.end(), index_t{0});
  auto find = [&](index_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<char> active(nv, 0);
  for (const Tet& t : mesh.tets) {
    index_t first = -1;
    for (index_t v : t) {
      if (mesh.is_vertex_fixed(v)) continue;
      active[v] = 1;
      if (first < 0)
        first = v;
      else
        parent[find(v)] = find(first);
    }
  }
  index_t count = 0;
  for (index_t v = 0; v < nv; ++v)
    if (active[v] && find(v) == v) ++count;
  return count;
}

ExperimentScript deformation_script(const Mesh& mesh, index_t count,
                                    const Point& displacement) {
  std::vector<char> used(mesh.num_vertices(), 0);
  for (const Tet& t : mesh.tets)
    for (index_t v : t) used[v] = 1;
  std::vector<index_t> free;
  for (index_t v = 0; v < mesh.num_vertices(); ++v)
    if (used[v] && !mesh.is_vertex_fixed(v)) free.push_back(v);
  free = order_away_from_support(mesh, std::move(free));
  if (count > static_cast<index_t>(free.size()))
    throw std::invalid_argument("deformation_script: not enough free nodes");
  ExperimentScript script;
  for (index_t i = 0; i < count; ++i) {
    ScriptAction a;
    a.kind = ScriptAction::Kind::constrain;
    a.vertex = free[i];
    a.value = displacement;
    script.actions.push_back(a);
  }
  return script;
}

ExperimentScript cutting_script(const Mesh& mesh, index_t steps) {
  double lo = mesh.vertices.empty() ? 0.0 : mesh.vertices.front().x(), hi = lo;
  for (const Point& p : mesh.vertices) {
    lo = std::min(lo, p.x());
    hi = std::max(hi, p.x());
  }
  ScriptAction a;
  a.kind = ScriptAction::Kind::cut;
  a.plane.normal = Point(1.0, 0.0, 0.0);
  a.plane.offset = 0.5 * (lo + hi);
  a.steps = steps < 0 ? static_cast<index_t>(cut_path(mesh, a.plane).size()) : steps;
  ExperimentScript script;
  script.actions.push_back(a);
  return script;
}

}  // namespace amps
