#include "mstumor/elliptic.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <fftw3.h>

#include "mstumor/errors.hpp"
#include "mstumor/potential.hpp"

namespace mstumor::elliptic {

namespace {

double dotv(const std::vector<double> &a, const std::vector<double> &b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double norm2(const std::vector<double> &a) { return std::sqrt(dotv(a, a)); }

void check_finite(double v, const char *subsystem, int it) {
  if (!std::isfinite(v))
    throw NumericalError(subsystem, "non-finite value in CG at iteration " + std::to_string(it));
}

// Face coefficient of the homogeneous ghost rule: a Dirichlet face couples
// the cell to a ghost of opposite sign, a Neumann face contributes nothing.
double boundary_weight(grid::BcKind kind) {
  switch (kind) {
    case grid::BcKind::Dirichlet:
      return 2.0;
    case grid::BcKind::NeumannZero:
      return 0.0;
    case grid::BcKind::None:
      break;
  }
  throw std::invalid_argument("neg_laplacian: boundary condition required");
}

}  // namespace

SolveReport cg_solve(const LinearOperatorSpec &op, const std::vector<double> &rhs,
                     std::vector<double> &x, const CgOptions &opts, const char *subsystem) {
  const std::size_t n = rhs.size();
  if (x.size() != n) x.assign(n, 0.0);
  const int max_iter = opts.max_iter > 0 ? opts.max_iter : static_cast<int>(10 * n);
  SolveReport rep;

  const double bnorm = norm2(rhs);
  check_finite(bnorm, subsystem, 0);
  if (bnorm == 0.0) {
    x.assign(n, 0.0);
    rep.converged = true;
    return rep;
  }

  std::vector<double> r(n), z(n), p(n), ap(n);
  auto true_residual = [&] {
    op.apply(x, ap);
    for (std::size_t k = 0; k < n; ++k) r[k] = rhs[k] - ap[k];
    return norm2(r) / bnorm;
  };
  auto precondition = [&] {
    if (op.precondition)
      op.precondition(r, z);
    else
      z = r;
  };

  rep.relative_residual = true_residual();
  check_finite(rep.relative_residual, subsystem, 0);
  int it = 0;
  while (rep.relative_residual > opts.tol && it < max_iter) {
    // (Re)start from the true residual.
    precondition();
    p = z;
    double rz = dotv(r, z);
    while (it < max_iter) {
      op.apply(p, ap);
      const double pap = dotv(p, ap);
      check_finite(pap, subsystem, it);
      if (pap <= 0.0) {
        if (op.definite && pap < 0.0)
          throw NumericalError(subsystem, "operator is not positive definite");
        break;
      }
      const double alpha = rz / pap;
      for (std::size_t k = 0; k < n; ++k) {
        x[k] += alpha * p[k];
        r[k] -= alpha * ap[k];
      }
      ++it;
      const double rel = norm2(r) / bnorm;
      check_finite(rel, subsystem, it);
      if (rel <= opts.tol) break;
      precondition();
      const double rz_new = dotv(r, z);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t k = 0; k < n; ++k) p[k] = z[k] + beta * p[k];
    }
    const double prev = rep.relative_residual;
    rep.relative_residual = true_residual();
    check_finite(rep.relative_residual, subsystem, it);
    // Stagnation at round-off: further restarts cannot help.
    if (rep.relative_residual > opts.tol && rep.relative_residual >= 0.5 * prev) break;
  }
  rep.iterations = it;
  rep.converged = rep.relative_residual <= opts.tol;
  return rep;
}

CgResult cg_solve(const LinearOperatorSpec &op, const std::vector<double> &rhs, double tol,
                  int max_iter) {
  CgResult out;
  out.values.assign(rhs.size(), 0.0);
  out.report = cg_solve(op, rhs, out.values, CgOptions{tol, max_iter});
  return out;
}

void neg_laplacian(const Grid2D &g, BoundaryCondition bc, const std::vector<double> &x,
                   std::vector<double> &y) {
  const int nx = g.nx, ny = g.ny;
  const double ix2 = 1.0 / (g.hx() * g.hx()), iy2 = 1.0 / (g.hy() * g.hy());
  const double bx = boundary_weight(bc.x), by = boundary_weight(bc.y);
  y.resize(x.size());
  for (int j = 0; j < ny; ++j) {
    const std::size_t row = static_cast<std::size_t>(j) * nx;
    for (int i = 0; i < nx; ++i) {
      const std::size_t k = row + i;
      const double c = x[k];
      double ax = 0.0, ay = 0.0;
      ax += i > 0 ? c - x[k - 1] : bx * c;
      ax += i < nx - 1 ? c - x[k + 1] : bx * c;
      ay += j > 0 ? c - x[k - nx] : by * c;
      ay += j < ny - 1 ? c - x[k + nx] : by * c;
      y[k] = ax * ix2 + ay * iy2;
    }
  }
}

std::vector<double> neg_laplacian_diagonal(const Grid2D &g, BoundaryCondition bc) {
  const double ix2 = 1.0 / (g.hx() * g.hx()), iy2 = 1.0 / (g.hy() * g.hy());
  const double bx = boundary_weight(bc.x), by = boundary_weight(bc.y);
  std::vector<double> d(g.cells());
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const double dx = (i > 0 ? 1.0 : bx) + (i < g.nx - 1 ? 1.0 : bx);
      const double dy = (j > 0 ? 1.0 : by) + (j < g.ny - 1 ? 1.0 : by);
      d[g.index(i, j)] = dx * ix2 + dy * iy2;
    }
  return d;
}

namespace {

// Per-axis eigenvalues and orthonormal weights. The DCT-II mode k is
// cos(pi k (i+1/2)/n); the DST-II mode k is sin(pi (k+1) (i+1/2)/n), which
// satisfies the ghost rule x_{-1} = -x_0.
void axis_modes(int n, double h, bool dirichlet, std::vector<double> &lam, std::vector<double> &w) {
  lam.assign(n, 0.0);
  w.assign(n, 0.0);
  const double pi = std::numbers::pi;
  for (int k = 0; k < n; ++k) {
    const int m = dirichlet ? k + 1 : k;
    const double sn = std::sin(pi * m / (2.0 * n));
    lam[k] = -4.0 * sn * sn / (h * h);
    const bool single = dirichlet ? k == n - 1 : k == 0;
    w[k] = std::sqrt((single ? 1.0 : 2.0) / n);
  }
}

}  // namespace

struct SpectralLaplacian::Plans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
  ~Plans() {
    if (forward) fftw_destroy_plan(forward);
    if (inverse) fftw_destroy_plan(inverse);
  }
};

SpectralLaplacian::SpectralLaplacian(const Grid2D &g, grid::BcKind kind) : grid_(g), kind_(kind) {
  if (kind != grid::BcKind::NeumannZero && kind != grid::BcKind::Dirichlet)
    throw std::invalid_argument("SpectralLaplacian: boundary rule required");
  const bool dir = kind == grid::BcKind::Dirichlet;
  std::vector<double> wx, wy;
  axis_modes(g.nx, g.hx(), dir, lam_x_, wx);
  axis_modes(g.ny, g.hy(), dir, lam_y_, wy);

  // FFTW's type-II transforms compute 2 sum x_i (basis)_i; its type-III
  // inverses weight the single mode by 1 and the others by 2.
  scale_fwd_.resize(g.cells());
  scale_inv_.resize(g.cells());
  for (int l = 0; l < g.ny; ++l)
    for (int k = 0; k < g.nx; ++k) {
      const bool single_x = dir ? k == g.nx - 1 : k == 0;
      const bool single_y = dir ? l == g.ny - 1 : l == 0;
      const std::size_t idx = g.index(k, l);
      scale_fwd_[idx] = 0.25 * wx[k] * wy[l];
      scale_inv_[idx] = wx[k] * wy[l] * (single_x ? 1.0 : 0.5) * (single_y ? 1.0 : 0.5);
    }

  auto plans = std::make_shared<Plans>();
  std::vector<double> a(g.cells()), b(g.cells());
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  const fftw_r2r_kind fk = dir ? FFTW_RODFT10 : FFTW_REDFT10;
  const fftw_r2r_kind ik = dir ? FFTW_RODFT01 : FFTW_REDFT01;
  plans->forward = fftw_plan_r2r_2d(g.ny, g.nx, a.data(), b.data(), fk, fk, flags);
  plans->inverse = fftw_plan_r2r_2d(g.ny, g.nx, a.data(), b.data(), ik, ik, flags);
  if (!plans->forward || !plans->inverse) throw std::runtime_error("SpectralLaplacian: FFTW planning failed");
  plans_ = std::move(plans);
}

void SpectralLaplacian::forward(const std::vector<double> &in, std::vector<double> &out) const {
  std::vector<double> src(in);
  out.assign(in.size(), 0.0);
  fftw_execute_r2r(plans_->forward, src.data(), out.data());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] *= scale_fwd_[k];
}

void SpectralLaplacian::inverse(const std::vector<double> &in, std::vector<double> &out) const {
  std::vector<double> src(in.size());
  for (std::size_t k = 0; k < in.size(); ++k) src[k] = in[k] * scale_inv_[k];
  out.assign(in.size(), 0.0);
  fftw_execute_r2r(plans_->inverse, src.data(), out.data());
}

void SpectralLaplacian::apply_function(const std::function<double(double)> &f,
                                     const std::vector<double> &in,
                                     std::vector<double> &out) const {
  std::vector<double> hat;
  forward(in, hat);
  for (int l = 0; l < grid_.ny; ++l)
    for (int k = 0; k < grid_.nx; ++k) hat[static_cast<std::size_t>(l) * grid_.nx + k] *= f(eigenvalue(k, l));
  inverse(hat, out);
}

ScalarField dirichlet_poisson(const SpectralLaplacian &dirichlet, const ScalarField &f) {
  if (dirichlet.kind() != grid::BcKind::Dirichlet)
    throw std::invalid_argument("dirichlet_poisson: Dirichlet eigenbasis required");
  std::vector<double> q;
  dirichlet.apply_function([](double lam) { return -1.0 / lam; }, f.values(), q);
  return ScalarField(f.grid(), BoundaryCondition::dirichlet(0.0), std::move(q));
}

VectorField cutoff_faces(const ScalarField &phi) {
  ScalarField t(phi.grid(), BoundaryCondition::none());
  for (std::size_t k = 0; k < phi.size(); ++k) t[k] = potential::cutoff(phi[k]);
  return grid::face_average(t);
}

NutrientResult solve_nutrient(const ScalarField &phi_p, const NutrientOptions &opts) {
  const Grid2D &g = phi_p.grid();
  const BoundaryCondition hom{opts.bc.x, opts.bc.y, 0.0};
  const double nb = opts.bc.value;
  std::vector<double> tcell(g.cells());
  for (std::size_t k = 0; k < tcell.size(); ++k) tcell[k] = potential::cutoff(phi_p[k]);

  // Shifted unknown m = n - nb with homogeneous data:
  // (-Laplacian + T) m = -T nb.
  std::vector<double> diag = neg_laplacian_diagonal(g, hom);
  for (std::size_t k = 0; k < diag.size(); ++k) diag[k] += tcell[k];
  LinearOperatorSpec op;
  op.apply = [&](const std::vector<double> &x, std::vector<double> &y) {
    neg_laplacian(g, hom, x, y);
    for (std::size_t k = 0; k < y.size(); ++k) y[k] += tcell[k] * x[k];
  };
  // All-Dirichlet boxes use the exact inverse of -Laplacian + mean(T);
  // other boundary rules fall back to Jacobi.
  std::optional<SpectralLaplacian> spectral;
  double tmean = 0.0;
  if (hom.x == grid::BcKind::Dirichlet && hom.y == grid::BcKind::Dirichlet) {
    spectral.emplace(g, grid::BcKind::Dirichlet);
    for (double t : tcell) tmean += t;
    tmean /= static_cast<double>(tcell.size());
  }
  op.precondition = [&](const std::vector<double> &r, std::vector<double> &z) {
    if (spectral) {
      spectral->apply_function([tmean](double lam) { return 1.0 / (tmean - lam); }, r, z);
      return;
    }
    z.resize(r.size());
    for (std::size_t k = 0; k < r.size(); ++k) z[k] = r[k] / diag[k];
  };
  std::vector<double> rhs(g.cells());
  for (std::size_t k = 0; k < rhs.size(); ++k) rhs[k] = -tcell[k] * nb;

  std::vector<double> m(g.cells(), 0.0);
  if (opts.initial_guess)
    for (std::size_t k = 0; k < m.size(); ++k) m[k] = (*opts.initial_guess)[k] - nb;

  NutrientResult out;
  out.report = cg_solve(op, rhs, m, opts.cg, "nutrient");
  if (!out.report.converged)
    throw NumericalError("nutrient", "CG did not converge (relative residual " +
                                         std::to_string(out.report.relative_residual) + " after " +
                                         std::to_string(out.report.iterations) + " iterations)");
  out.n = ScalarField(g, opts.bc);
  for (std::size_t k = 0; k < m.size(); ++k) out.n[k] = m[k] + nb;
  return out;
}

PressureResult solve_pressure(const ScalarField &phi_p, const ScalarField &phi_d,
                              const ScalarField &mu_p, const ScalarField &mu_d,
                              const ScalarField &s_total, const CgOptions &opts,
                              const ScalarField *initial_guess) {
  const Grid2D &g = phi_p.grid();
  PressureResult out;

  VectorField kp = grid::face_product(cutoff_faces(phi_p), grid::grad_faces(mu_p));
  const VectorField kd = grid::face_product(cutoff_faces(phi_d), grid::grad_faces(mu_d));
  for (std::size_t k = 0; k < kp.xs().size(); ++k) kp.xs()[k] += kd.xs()[k];
  for (std::size_t k = 0; k < kp.ys().size(); ++k) kp.ys()[k] += kd.ys()[k];
  kp.zero_boundary_normal();
  out.korteweg = kp;

  const ScalarField divk = grid::div(out.korteweg);
  std::vector<double> rhs(g.cells());
  for (std::size_t k = 0; k < rhs.size(); ++k) rhs[k] = divk[k] + s_total[k];

  const BoundaryCondition bc = BoundaryCondition::dirichlet(0.0);
  LinearOperatorSpec op;
  op.apply = [&](const std::vector<double> &x, std::vector<double> &y) { neg_laplacian(g, bc, x, y); };
  const SpectralLaplacian spectral(g, grid::BcKind::Dirichlet);
  op.precondition = [&](const std::vector<double> &r, std::vector<double> &z) {
    spectral.apply_function([](double lam) { return -1.0 / lam; }, r, z);
  };

  std::vector<double> q = initial_guess ? initial_guess->values() : std::vector<double>(g.cells(), 0.0);
  out.report = cg_solve(op, rhs, q, opts, "pressure");
  if (!out.report.converged)
    throw NumericalError("pressure", "CG did not converge (relative residual " +
                                         std::to_string(out.report.relative_residual) + " after " +
                                         std::to_string(out.report.iterations) + " iterations)");
  out.q = ScalarField(g, bc, std::move(q));

  out.u = grid::grad_faces(out.q);
  for (std::size_t k = 0; k < out.u.xs().size(); ++k)
    out.u.xs()[k] = -out.u.xs()[k] - out.korteweg.xs()[k];
  for (std::size_t k = 0; k < out.u.ys().size(); ++k)
    out.u.ys()[k] = -out.u.ys()[k] - out.korteweg.ys()[k];
  return out;
}

}  // namespace mstumor::elliptic
