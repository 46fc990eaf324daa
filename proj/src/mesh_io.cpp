#include <fstream>
#include <iomanip>
#include <sstream>

#include "amps/fem.hpp"

namespace amps {

void write_mesh(std::ostream& out, const Mesh& mesh) {
  out << "vertices " << mesh.num_vertices() << " tets " << mesh.num_tets()
      << " dirichlet " << mesh.dirichlet.size() << '\n';
  out << std::setprecision(17);
  for (const Point& p : mesh.vertices)
    out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  for (const Tet& t : mesh.tets)
    out << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
  for (index_t d : mesh.dirichlet) out << d << '\n';
}

void write_mesh(const std::string& path, const Mesh& mesh) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_mesh(out, mesh);
  if (!out) throw std::runtime_error("write failed: " + path);
}

Mesh read_mesh(std::istream& in, const Material& material) {
  std::string kv, kt, kd;
  index_t nv = 0, nt = 0, nd = 0;
  if (!(in >> kv >> nv >> kt >> nt >> kd >> nd) || kv != "vertices" ||
      kt != "tets" || kd != "dirichlet" || nv < 0 || nt < 0 || nd < 0)
    throw ParseError("bad mesh header");
  Mesh mesh;
  mesh.material = material;
  mesh.vertices.resize(nv);
  for (auto& p : mesh.vertices)
    if (!(in >> p.x() >> p.y() >> p.z())) throw ParseError("truncated vertices");
  mesh.tets.resize(nt);
  for (auto& t : mesh.tets)
    if (!(in >> t[0] >> t[1] >> t[2] >> t[3])) throw ParseError("truncated tets");
  mesh.dirichlet.resize(nd);
  for (auto& d : mesh.dirichlet)
    if (!(in >> d)) throw ParseError("truncated dirichlet list");
  try {
    mesh.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("invalid mesh: ") + e.what());
  }
  return mesh;
}

Mesh read_mesh(const std::string& path, const Material& material) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_mesh(in, material);
}

}  // namespace amps
