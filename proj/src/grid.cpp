#include "mstumor/grid.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mstumor/errors.hpp"

namespace mstumor::grid {

void Grid2D::validate() const {
  if (nx < 4 || ny < 4)
    throw ConfigError("grid: nx and ny must be at least 4, got " + std::to_string(nx) + " x " +
                      std::to_string(ny));
  if (!(lx > 0.0) || !(ly > 0.0) || !std::isfinite(lx) || !std::isfinite(ly))
    throw ConfigError("grid: lx and ly must be positive");
}

ScalarField::ScalarField(const Grid2D &g, BoundaryCondition bc, std::vector<double> values)
    : grid_(g), bc_(bc), values_(std::move(values)) {
  if (values_.size() != g.cells())
    throw std::invalid_argument("ScalarField: value count does not match the grid");
}

ScalarField ScalarField::sample(const Grid2D &g, BoundaryCondition bc,
                                const std::function<double(double, double)> &f) {
  ScalarField out(g, bc);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) out(i, j) = f(g.xc(i), g.yc(j));
  return out;
}

namespace {

double ghost(BcKind kind, double interior, double value) {
  switch (kind) {
    case BcKind::NeumannZero:
      return interior;
    case BcKind::Dirichlet:
      return 2.0 * value - interior;
    case BcKind::None:
      break;
  }
  throw std::logic_error("ghost value requested for a field without boundary condition");
}

}  // namespace

double ScalarField::ghosted(int i, int j) const {
  const int nx = grid_.nx, ny = grid_.ny;
  if (i < 0) return ghost(bc_.x, (*this)(0, j), bc_.value);
  if (i >= nx) return ghost(bc_.x, (*this)(nx - 1, j), bc_.value);
  if (j < 0) return ghost(bc_.y, (*this)(i, 0), bc_.value);
  if (j >= ny) return ghost(bc_.y, (*this)(i, ny - 1), bc_.value);
  return (*this)(i, j);
}

double ScalarField::min() const { return *std::min_element(values_.begin(), values_.end()); }
double ScalarField::max() const { return *std::max_element(values_.begin(), values_.end()); }
bool ScalarField::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void VectorField::zero_boundary_normal() {
  for (int j = 0; j < grid_.ny; ++j) {
    x(0, j) = 0.0;
    x(grid_.nx, j) = 0.0;
  }
  for (int i = 0; i < grid_.nx; ++i) {
    y(i, 0) = 0.0;
    y(i, grid_.ny) = 0.0;
  }
}

double VectorField::max_abs() const {
  double m = 0.0;
  for (double v : fx_) m = std::max(m, std::abs(v));
  for (double v : fy_) m = std::max(m, std::abs(v));
  return m;
}

ScalarField laplacian(const ScalarField &f) {
  const Grid2D &g = f.grid();
  const double ix2 = 1.0 / (g.hx() * g.hx()), iy2 = 1.0 / (g.hy() * g.hy());
  ScalarField out(g, BoundaryCondition::none());
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const double c = f(i, j);
      out(i, j) = (f.ghosted(i - 1, j) - 2.0 * c + f.ghosted(i + 1, j)) * ix2 +
                  (f.ghosted(i, j - 1) - 2.0 * c + f.ghosted(i, j + 1)) * iy2;
    }
  return out;
}

VectorField grad_faces(const ScalarField &f) {
  const Grid2D &g = f.grid();
  VectorField out(g);
  const double ihx = 1.0 / g.hx(), ihy = 1.0 / g.hy();
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i <= g.nx; ++i) out.x(i, j) = (f.ghosted(i, j) - f.ghosted(i - 1, j)) * ihx;
  for (int j = 0; j <= g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) out.y(i, j) = (f.ghosted(i, j) - f.ghosted(i, j - 1)) * ihy;
  return out;
}

VectorField face_average(const ScalarField &c) {
  const Grid2D &g = c.grid();
  VectorField out(g);
  for (int j = 0; j < g.ny; ++j) {
    out.x(0, j) = c(0, j);
    out.x(g.nx, j) = c(g.nx - 1, j);
    for (int i = 1; i < g.nx; ++i) out.x(i, j) = 0.5 * (c(i - 1, j) + c(i, j));
  }
  for (int i = 0; i < g.nx; ++i) {
    out.y(i, 0) = c(i, 0);
    out.y(i, g.ny) = c(i, g.ny - 1);
  }
  for (int j = 1; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) out.y(i, j) = 0.5 * (c(i, j - 1) + c(i, j));
  return out;
}

VectorField face_product(const VectorField &a, const VectorField &g) {
  VectorField out(g.grid());
  for (std::size_t k = 0; k < out.xs().size(); ++k) out.xs()[k] = a.xs()[k] * g.xs()[k];
  for (std::size_t k = 0; k < out.ys().size(); ++k) out.ys()[k] = a.ys()[k] * g.ys()[k];
  return out;
}

ScalarField div(const VectorField &f) {
  const Grid2D &g = f.grid();
  ScalarField out(g, BoundaryCondition::none());
  const double ihx = 1.0 / g.hx(), ihy = 1.0 / g.hy();
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      out(i, j) = (f.x(i + 1, j) - f.x(i, j)) * ihx + (f.y(i, j + 1) - f.y(i, j)) * ihy;
  return out;
}

ScalarField div_flux(const VectorField &a, const VectorField &g) { return div(face_product(a, g)); }

double integral(const ScalarField &f) {
  double s = 0.0;
  for (double v : f.values()) s += v;
  return s * f.grid().cell_area();
}

double mean(const ScalarField &f) {
  double s = 0.0;
  for (double v : f.values()) s += v;
  return s / static_cast<double>(f.size());
}

double inner(const ScalarField &f, const ScalarField &g) {
  double s = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) s += f[k] * g[k];
  return s * f.grid().cell_area();
}

double l2_norm(const ScalarField &f) { return std::sqrt(inner(f, f)); }

double face_inner(const VectorField &u, const VectorField &v) {
  const Grid2D &g = u.grid();
  double sx = 0.0, sy = 0.0;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i <= g.nx; ++i) {
      const double w = (i == 0 || i == g.nx) ? 0.5 : 1.0;
      sx += w * u.x(i, j) * v.x(i, j);
    }
  for (int j = 0; j <= g.ny; ++j) {
    const double w = (j == 0 || j == g.ny) ? 0.5 : 1.0;
    for (int i = 0; i < g.nx; ++i) sy += w * u.y(i, j) * v.y(i, j);
  }
  return (sx + sy) * g.cell_area();
}

double face_l2_norm(const VectorField &u) { return std::sqrt(face_inner(u, u)); }

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_csv(std::ostream &os, const ScalarField &f) {
  const Grid2D &g = f.grid();
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      if (i) os << ',';
      os << format_double(f(i, j));
    }
    os << '\n';
  }
}

void write_csv(const std::string &path, const ScalarField &f) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path + " for writing");
  write_csv(os, f);
}

std::vector<double> read_csv_rows(std::istream &is, const Grid2D &g, int rows_to_read,
                                  const std::string &source) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(rows_to_read) * g.nx);
  std::string line;
  int row = 0, lineno = 0;
  while (row < rows_to_read && std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::stringstream ss(line);
    std::string cell;
    int col = 0;
    while (std::getline(ss, cell, ',')) {
      const auto b = cell.find_first_not_of(" \t\r");
      const auto e = cell.find_last_not_of(" \t\r");
      double v = 0.0;
      const char *first = b == std::string::npos ? cell.data() : cell.data() + b;
      const char *last = b == std::string::npos ? cell.data() : cell.data() + e + 1;
      const auto res = std::from_chars(first, last, v);
      if (res.ec != std::errc() || res.ptr != last)
        throw ConfigError(source + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      out.push_back(v);
      ++col;
    }
    if (col != g.nx)
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(g.nx) + " values, got " + std::to_string(col));
    ++row;
  }
  if (row != rows_to_read)
    throw ConfigError(source + ": expected " + std::to_string(rows_to_read) + " rows, got " +
                      std::to_string(row));
  return out;
}

void write_pgm(const std::string &path, const ScalarField &f) {
  const Grid2D &g = f.grid();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path + " for writing");
  os << "P5\n" << g.nx << ' ' << g.ny << "\n255\n";
  const double lo = f.min(), hi = f.max();
  const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
  // Top image row is the largest y.
  for (int j = g.ny - 1; j >= 0; --j)
    for (int i = 0; i < g.nx; ++i) {
      const double v = std::round((f(i, j) - lo) * scale);
      os.put(static_cast<char>(static_cast<unsigned char>(std::clamp(v, 0.0, 255.0))));
    }
}

}  // namespace mstumor::grid
