#pragma once

// Uniform cell-centered 2-D mesh on [0, lx] x [0, ly] with ghost-cell
// finite-difference operators.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace mstumor::grid {

struct Grid2D {
  int nx = 64;
  int ny = 64;
  double lx = 1.0;
  double ly = 1.0;

  double hx() const { return lx / nx; }
  double hy() const { return ly / ny; }
  double cell_area() const { return hx() * hy(); }
  std::size_t cells() const { return static_cast<std::size_t>(nx) * ny; }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx + i; }
  double xc(int i) const { return (i + 0.5) * hx(); }
  double yc(int j) const { return (j + 0.5) * hy(); }

  /// Throws ConfigError unless nx, ny >= 4 and lx, ly > 0.
  void validate() const;
  friend bool operator==(const Grid2D &, const Grid2D &) = default;
};

enum class BcKind { None, NeumannZero, Dirichlet };

/// Ghost-cell rule per axis: mirror for NeumannZero, linear reflection
/// through `value` for Dirichlet. None marks derived fields without a rule.
struct BoundaryCondition {
  BcKind x = BcKind::None;
  BcKind y = BcKind::None;
  double value = 0.0;

  static BoundaryCondition none() { return {}; }
  static BoundaryCondition neumann() { return {BcKind::NeumannZero, BcKind::NeumannZero, 0.0}; }
  static BoundaryCondition dirichlet(double c) { return {BcKind::Dirichlet, BcKind::Dirichlet, c}; }
  /// Dirichlet on the x-sides, mirror on the y-sides (pseudo 1-D strips).
  static BoundaryCondition dirichlet_x(double c) {
    return {BcKind::Dirichlet, BcKind::NeumannZero, c};
  }
  friend bool operator==(const BoundaryCondition &, const BoundaryCondition &) = default;
};

class ScalarField {
 public:
  ScalarField() = default;
  ScalarField(const Grid2D &g, BoundaryCondition bc, double fill = 0.0)
      : grid_(g), bc_(bc), values_(g.cells(), fill) {}
  ScalarField(const Grid2D &g, BoundaryCondition bc, std::vector<double> values);

  static ScalarField sample(const Grid2D &g, BoundaryCondition bc,
                            const std::function<double(double, double)> &f);

  const Grid2D &grid() const { return grid_; }
  const BoundaryCondition &bc() const { return bc_; }
  void set_bc(BoundaryCondition bc) { bc_ = bc; }

  double &operator()(int i, int j) { return values_[grid_.index(i, j)]; }
  double operator()(int i, int j) const { return values_[grid_.index(i, j)]; }
  double &operator[](std::size_t k) { return values_[k]; }
  double operator[](std::size_t k) const { return values_[k]; }
  std::size_t size() const { return values_.size(); }

  std::vector<double> &values() { return values_; }
  const std::vector<double> &values() const { return values_; }

  /// Value at (i, j) where i in [-1, nx] and j in [-1, ny]; out-of-range
  /// indices resolve through the ghost rule.
  double ghosted(int i, int j) const;

  double min() const;
  double max() const;
  bool all_finite() const;

 private:
  Grid2D grid_;
  BoundaryCondition bc_;
  std::vector<double> values_;
};

/// Face-centered vector field: x-components on (nx+1) x ny vertical faces,
/// y-components on nx x (ny+1) horizontal faces.
class VectorField {
 public:
  VectorField() = default;
  explicit VectorField(const Grid2D &g)
      : grid_(g),
        fx_(static_cast<std::size_t>(g.nx + 1) * g.ny, 0.0),
        fy_(static_cast<std::size_t>(g.nx) * (g.ny + 1), 0.0) {}

  const Grid2D &grid() const { return grid_; }
  // x-face i sits between cells (i-1, j) and (i, j).
  double &x(int i, int j) { return fx_[static_cast<std::size_t>(j) * (grid_.nx + 1) + i]; }
  double x(int i, int j) const { return fx_[static_cast<std::size_t>(j) * (grid_.nx + 1) + i]; }
  // y-face j sits between cells (i, j-1) and (i, j).
  double &y(int i, int j) { return fy_[static_cast<std::size_t>(j) * grid_.nx + i]; }
  double y(int i, int j) const { return fy_[static_cast<std::size_t>(j) * grid_.nx + i]; }

  std::vector<double> &xs() { return fx_; }
  std::vector<double> &ys() { return fy_; }
  const std::vector<double> &xs() const { return fx_; }
  const std::vector<double> &ys() const { return fy_; }

  void zero_boundary_normal();
  double max_abs() const;

 private:
  Grid2D grid_;
  std::vector<double> fx_, fy_;
};

ScalarField laplacian(const ScalarField &f);
VectorField grad_faces(const ScalarField &f);
/// Arithmetic mean of adjacent cells on interior faces, the adjacent cell on
/// boundary faces.
VectorField face_average(const ScalarField &c);
/// Conservative divergence of the face flux a * g.
ScalarField div_flux(const VectorField &a, const VectorField &g);
ScalarField div(const VectorField &g);
/// Face-wise product a * g.
VectorField face_product(const VectorField &a, const VectorField &g);

double mean(const ScalarField &f);
double integral(const ScalarField &f);
/// sum f g * cell area
double inner(const ScalarField &f, const ScalarField &g);
double l2_norm(const ScalarField &f);
/// Face inner product with half weight on boundary faces, so that
/// face_inner(u, grad q) = -inner(div u, q) for Dirichlet-zero q.
double face_inner(const VectorField &u, const VectorField &v);
double face_l2_norm(const VectorField &u);

void write_csv(std::ostream &os, const ScalarField &f);
void write_csv(const std::string &path, const ScalarField &f);
/// Reads `ny` rows of `nx` comma-separated values.
std::vector<double> read_csv_rows(std::istream &is, const Grid2D &g, int rows_to_read,
                                  const std::string &source);
/// 8-bit binary PGM after affine rescale of [min, max] to [0, 255].
void write_pgm(const std::string &path, const ScalarField &f);

/// Shortest round-trip decimal representation for CSV output.
std::string format_double(double v);

}  // namespace mstumor::grid
