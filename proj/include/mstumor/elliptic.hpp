#pragma once

// Conjugate-gradient solves for the nutrient, pressure and implicit
// Cahn-Hilliard operators.

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "mstumor/grid.hpp"

namespace mstumor::elliptic {

using grid::BoundaryCondition;
using grid::Grid2D;
using grid::ScalarField;
using grid::VectorField;

using Apply = std::function<void(const std::vector<double> &, std::vector<double> &)>;

struct LinearOperatorSpec {
  Apply apply;
  bool symmetric = true;
  bool definite = true;
  // Optional preconditioner z = P^{-1} r; P must be SPD.
  Apply precondition;
};

struct SolveReport {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

inline constexpr double kDefaultTolerance = 1e-10;

struct CgOptions {
  double tol = kDefaultTolerance;
  // 0 means 10 * n.
  int max_iter = 0;
};

struct CgResult {
  std::vector<double> values;
  SolveReport report;
};

/// Preconditioned CG from the initial guess in `x`. Convergence is measured
/// by the true residual |b - A x| / |b|. Throws NumericalError("cg") when a
/// NaN appears; non-convergence is reported, not thrown.
SolveReport cg_solve(const LinearOperatorSpec &op, const std::vector<double> &rhs,
                     std::vector<double> &x, const CgOptions &opts = {},
                     const char *subsystem = "cg");
CgResult cg_solve(const LinearOperatorSpec &op, const std::vector<double> &rhs,
                  double tol = kDefaultTolerance, int max_iter = 0);

/// y = -Laplacian(x) with homogeneous ghost rules per axis (a Dirichlet axis
/// uses value 0).
void neg_laplacian(const Grid2D &g, BoundaryCondition bc, const std::vector<double> &x,
                   std::vector<double> &y);
/// Diagonal of the operator above.
std::vector<double> neg_laplacian_diagonal(const Grid2D &g, BoundaryCondition bc);

/// Orthonormal eigenbasis of the cell-centered Laplacian with the same ghost
/// rule on every side: DCT-II for NeumannZero, DST-II for homogeneous
/// Dirichlet. Used to apply functions of that Laplacian exactly.
class SpectralLaplacian {
 public:
  explicit SpectralLaplacian(const Grid2D &g, grid::BcKind kind = grid::BcKind::NeumannZero);

  const Grid2D &grid() const { return grid_; }
  grid::BcKind kind() const { return kind_; }
  /// Eigenvalue of the Laplacian (<= 0) for mode (kx, ky).
  double eigenvalue(int kx, int ky) const { return lam_x_[kx] + lam_y_[ky]; }
  void forward(const std::vector<double> &in, std::vector<double> &out) const;
  void inverse(const std::vector<double> &in, std::vector<double> &out) const;
  /// out = f(Laplacian) in, where f acts on the eigenvalue.
  void apply_function(const std::function<double(double)> &f, const std::vector<double> &in,
                      std::vector<double> &out) const;

 private:
  struct Plans;
  Grid2D grid_;
  grid::BcKind kind_;
  std::vector<double> lam_x_, lam_y_;
  // Orthonormalization applied between the unnormalized transforms.
  std::vector<double> scale_fwd_, scale_inv_;
  std::shared_ptr<const Plans> plans_;
};

struct NutrientOptions {
  // n = value on Dirichlet sides; Neumann sides allowed for strip benchmarks.
  BoundaryCondition bc = BoundaryCondition::dirichlet(1.0);
  CgOptions cg;
  // Warm start for n.
  const ScalarField *initial_guess = nullptr;
};

struct NutrientResult {
  ScalarField n;
  SolveReport report;
};

/// Solves -Laplacian n + T(phi_p) n = 0 with n = 1 on the Dirichlet sides.
/// Throws NumericalError("nutrient") on non-convergence.
NutrientResult solve_nutrient(const ScalarField &phi_p, const NutrientOptions &opts = {});

struct PressureResult {
  ScalarField q;
  VectorField u;
  // Korteweg flux T(phi_p) grad mu_p + T(phi_d) grad mu_d on faces, zero on
  // the outer boundary.
  VectorField korteweg;
  SolveReport report;
};

/// Solves -Laplacian q = div K + S_total with q = 0 on the boundary and
/// returns u = -grad q - K. Throws NumericalError("pressure") on
/// non-convergence.
PressureResult solve_pressure(const ScalarField &phi_p, const ScalarField &phi_d,
                              const ScalarField &mu_p, const ScalarField &mu_d,
                              const ScalarField &s_total, const CgOptions &opts = {},
                              const ScalarField *initial_guess = nullptr);

/// q with -Laplacian q = f and q = 0 on the boundary, solved exactly.
ScalarField dirichlet_poisson(const SpectralLaplacian &dirichlet, const ScalarField &f);

/// Face coefficient T(phi) averaged onto faces.
VectorField cutoff_faces(const ScalarField &phi);

}  // namespace mstumor::elliptic
