#include <fstream>
#include <iomanip>
#include <sstream>

#include "amps/sparse.hpp"

namespace amps {

void write_matrix_market(std::ostream& out, const SparseMatrix& a,
                         bool symmetric) {
  index_t count = 0;
  for (index_t j = 0; j < a.ncols; ++j)
    for (index_t i : a.rows_of(j))
      if (!symmetric || i >= j) ++count;
  out << "%%MatrixMarket matrix coordinate real "
      << (symmetric ? "symmetric" : "general") << '\n';
  out << a.nrows << ' ' << a.ncols << ' ' << count << '\n';
  out << std::setprecision(17);
  for (index_t j = 0; j < a.ncols; ++j) {
    for (index_t p = a.col_ptr[j]; p < a.col_ptr[j + 1]; ++p) {
      const index_t i = a.row_idx[p];
      if (symmetric && i < j) continue;
      out << i + 1 << ' ' << j + 1 << ' ' << a.values[p] << '\n';
    }
  }
}

void write_matrix_market(const std::string& path, const SparseMatrix& a,
                         bool symmetric) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_matrix_market(out, a, symmetric);
}

SparseMatrix read_matrix_market(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty Matrix Market stream");
  std::istringstream banner(line);
  std::string tag, object, format, field, symmetry;
  banner >> tag >> object >> format >> field >> symmetry;
  if (tag != "%%MatrixMarket" || object != "matrix" || format != "coordinate")
    throw ParseError("unsupported Matrix Market header: " + line);
  if (field != "real" && field != "integer")
    throw ParseError("unsupported Matrix Market field: " + field);
  const bool symmetric = symmetry == "symmetric";
  if (!symmetric && symmetry != "general")
    throw ParseError("unsupported Matrix Market symmetry: " + symmetry);

  do {
    if (!std::getline(in, line)) throw ParseError("missing size line");
  } while (line.empty() || line[0] == '%');
  index_t rows = 0, cols = 0, entries = 0;
  {
    std::istringstream size_line(line);
    if (!(size_line >> rows >> cols >> entries))
      throw ParseError("malformed size line: " + line);
  }
  std::vector<std::tuple<index_t, index_t, double>> triplets;
  triplets.reserve(symmetric ? 2 * entries : entries);
  for (index_t e = 0; e < entries; ++e) {
    index_t i = 0, j = 0;
    double v = 0.0;
    if (!(in >> i >> j >> v))
      throw ParseError("truncated Matrix Market data at entry " +
                       std::to_string(e));
    if (i < 1 || i > rows || j < 1 || j > cols)
      throw ParseError("Matrix Market entry out of range");
    triplets.emplace_back(i - 1, j - 1, v);
    if (symmetric && i != j) triplets.emplace_back(j - 1, i - 1, v);
  }
  return SparseMatrix::from_triplets(rows, cols, triplets);
}

SparseMatrix read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_matrix_market(in);
}

}  // namespace amps
