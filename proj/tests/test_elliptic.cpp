#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "mstumor/elliptic.hpp"
#include "mstumor/errors.hpp"
#include "mstumor/rng.hpp"

using namespace mstumor;
using namespace mstumor::elliptic;

namespace {

const double kPi = std::numbers::pi;

ScalarField random_field(const Grid2D &g, BoundaryCondition bc, Rng &rng, double lo, double hi) {
  ScalarField f(g, bc);
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = rng.uniform(lo, hi);
  return f;
}

// Smooth random field: a few random cosine modes.
ScalarField smooth_field(const Grid2D &g, BoundaryCondition bc, Rng &rng, double amp) {
  double a[4], kx[4], ky[4], ph[4];
  for (int m = 0; m < 4; ++m) {
    a[m] = rng.uniform(-amp, amp);
    kx[m] = std::floor(rng.uniform(0, 4));
    ky[m] = std::floor(rng.uniform(0, 4));
    ph[m] = rng.uniform(0, 2 * kPi);
  }
  return ScalarField::sample(g, bc, [&](double x, double y) {
    double s = 0.0;
    for (int m = 0; m < 4; ++m) s += a[m] * std::cos(kPi * kx[m] * x + ph[m]) * std::cos(kPi * ky[m] * y);
    return s;
  });
}

LinearOperatorSpec dirichlet_laplacian(const Grid2D &g) {
  LinearOperatorSpec op;
  op.apply = [g](const std::vector<double> &x, std::vector<double> &y) {
    neg_laplacian(g, BoundaryCondition::dirichlet(0.0), x, y);
  };
  return op;
}

}  // namespace

TEST_CASE("cg on the identity") {
  LinearOperatorSpec id;
  id.apply = [](const std::vector<double> &x, std::vector<double> &y) { y = x; };
  const std::vector<double> rhs{1.0, -2.0, 3.0};
  const CgResult r = cg_solve(id, rhs);
  CHECK(r.report.converged);
  CHECK(r.report.iterations == 1);
  CHECK(r.values == rhs);

  const CgResult z = cg_solve(id, std::vector<double>(3, 0.0));
  CHECK(z.report.converged);
  CHECK(z.report.iterations == 0);
  for (double v : z.values) CHECK(v == 0.0);
}

TEST_CASE("cg manufactured Poisson solution is second order") {
  double prev = 0.0;
  for (int n : {32, 64}) {
    const Grid2D g{n, n, 1.0, 1.0};
    const auto exact = ScalarField::sample(g, BoundaryCondition::dirichlet(0.0), [](double x, double y) {
      return std::sin(kPi * x) * std::sin(kPi * y);
    });
    std::vector<double> rhs(g.cells());
    for (std::size_t k = 0; k < rhs.size(); ++k) rhs[k] = 2 * kPi * kPi * exact[k];
    const CgResult r = cg_solve(dirichlet_laplacian(g), rhs);
    REQUIRE(r.report.converged);
    CHECK(r.report.relative_residual <= kDefaultTolerance);
    double err = 0.0;
    for (std::size_t k = 0; k < rhs.size(); ++k) err = std::max(err, std::abs(r.values[k] - exact[k]));
    if (prev > 0.0) CHECK(prev / err == doctest::Approx(4.0).epsilon(0.1));
    prev = err;
  }
  CHECK(prev < 1e-3);
}

TEST_CASE("cg reports non-convergence and aborts on NaN") {
  const Grid2D g{32, 32, 1.0, 1.0};
  std::vector<double> rhs(g.cells(), 1.0);
  const CgResult r = cg_solve(dirichlet_laplacian(g), rhs, 1e-10, 3);
  CHECK_FALSE(r.report.converged);
  CHECK(r.report.relative_residual > 1e-10);

  LinearOperatorSpec nan_op;
  nan_op.apply = [](const std::vector<double> &x, std::vector<double> &y) {
    y.assign(x.size(), std::numeric_limits<double>::quiet_NaN());
  };
  CHECK_THROWS_AS(cg_solve(nan_op, rhs), NumericalError);
}

TEST_CASE("operators are linear") {
  Rng rng(1);
  const Grid2D g{12, 10, 1.0, 1.0};
  for (auto bc : {BoundaryCondition::neumann(), BoundaryCondition::dirichlet(0.0),
                  BoundaryCondition::dirichlet_x(0.0)}) {
    std::vector<double> u(g.cells()), v(g.cells()), w(g.cells());
    for (std::size_t k = 0; k < u.size(); ++k) {
      u[k] = rng.uniform(-1, 1);
      v[k] = rng.uniform(-1, 1);
      w[k] = 2.5 * u[k] - 0.75 * v[k];
    }
    std::vector<double> au, av, aw;
    neg_laplacian(g, bc, u, au);
    neg_laplacian(g, bc, v, av);
    neg_laplacian(g, bc, w, aw);
    for (std::size_t k = 0; k < u.size(); ++k)
      CHECK(std::abs(aw[k] - (2.5 * au[k] - 0.75 * av[k])) <= 1e-10 * (1 + std::abs(aw[k])));
    // The matrix-free operator agrees with the ghost-cell Laplacian.
    const ScalarField lu = grid::laplacian(ScalarField(g, bc, u));
    for (std::size_t k = 0; k < u.size(); ++k) CHECK(-lu[k] == doctest::Approx(au[k]).epsilon(1e-12));
    const std::vector<double> d = neg_laplacian_diagonal(g, bc);
    std::vector<double> e(g.cells(), 0.0), ae;
    e[g.index(0, 3)] = 1.0;
    neg_laplacian(g, bc, e, ae);
    CHECK(ae[g.index(0, 3)] == doctest::Approx(d[g.index(0, 3)]));
  }
}

TEST_CASE("spectral basis diagonalizes the Neumann Laplacian") {
  Rng rng(2);
  const Grid2D g{16, 12, 1.0, 0.75};
  const ScalarField f = random_field(g, BoundaryCondition::neumann(), rng, -1, 1);
  const SpectralLaplacian sp(g);
  std::vector<double> hat, back;
  sp.forward(f.values(), hat);
  sp.inverse(hat, back);
  for (std::size_t k = 0; k < back.size(); ++k) CHECK(back[k] == doctest::Approx(f[k]).epsilon(1e-12));
  std::vector<double> lap;
  sp.apply_function([](double l) { return l; }, f.values(), lap);
  const ScalarField ref = grid::laplacian(f);
  for (std::size_t k = 0; k < lap.size(); ++k) CHECK(std::abs(lap[k] - ref[k]) < 1e-9);
  CHECK(sp.eigenvalue(0, 0) == 0.0);
}

TEST_CASE("nutrient examples") {
  const Grid2D g{32, 32, 1.0, 1.0};
  const NutrientResult zero = solve_nutrient(ScalarField(g, BoundaryCondition::neumann(), 0.0));
  for (double v : zero.n.values()) CHECK(v == 1.0);

  const NutrientResult one = solve_nutrient(ScalarField(g, BoundaryCondition::neumann(), 1.0));
  CHECK(one.n.min() > 0.0);
  CHECK(one.n.max() <= 1.0);
  CHECK(one.report.converged);
  CHECK(one.n.bc() == BoundaryCondition::dirichlet(1.0));
}

TEST_CASE("nutrient strip matches the cosh profile to second order") {
  double prev = 0.0;
  for (int n : {32, 64, 128}) {
    const Grid2D g{n, 4, 1.0, 4.0 / n};
    NutrientOptions opts;
    opts.bc = BoundaryCondition::dirichlet_x(1.0);
    const NutrientResult r = solve_nutrient(ScalarField(g, BoundaryCondition::neumann(), 1.0), opts);
    double err = 0.0;
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        err = std::max(err, std::abs(r.n(i, j) - std::cosh(g.xc(i) - 0.5) / std::cosh(0.5)));
    if (prev > 0.0) CHECK(prev / err == doctest::Approx(4.0).epsilon(0.15));
    prev = err;
  }
  CHECK(prev <= 5e-3);
}

TEST_CASE("nutrient maximum principle and monotonicity") {
  Rng rng(3);
  const Grid2D g{32, 32, 1.0, 1.0};
  for (int trial = 0; trial < 20; ++trial) {
    const ScalarField phi = random_field(g, BoundaryCondition::neumann(), rng, -0.5, 1.5);
    ScalarField bigger = phi;
    for (std::size_t k = 0; k < phi.size(); ++k) bigger[k] += rng.uniform(0.0, 0.5);
    const NutrientResult a = solve_nutrient(phi);
    const NutrientResult b = solve_nutrient(bigger);
    CHECK(a.n.min() >= 0.0);
    CHECK(a.n.max() <= 1.0 + 1e-10);
    int bad = 0;
    for (std::size_t k = 0; k < phi.size(); ++k)
      if (b.n[k] > a.n[k] + 1e-10) ++bad;
    CHECK(bad == 0);
  }
}

TEST_CASE("nutrient warm start gives the same answer") {
  Rng rng(4);
  const Grid2D g{32, 32, 1.0, 1.0};
  const ScalarField phi = smooth_field(g, BoundaryCondition::neumann(), rng, 0.5);
  const NutrientResult cold = solve_nutrient(phi);
  NutrientOptions opts;
  opts.initial_guess = &cold.n;
  const NutrientResult warm = solve_nutrient(phi, opts);
  CHECK(warm.report.iterations <= 1);
  for (std::size_t k = 0; k < phi.size(); ++k) CHECK(std::abs(warm.n[k] - cold.n[k]) < 1e-9);
}

TEST_CASE("pressure with zero data") {
  const Grid2D g{16, 16, 1.0, 1.0};
  const ScalarField z(g, BoundaryCondition::neumann(), 0.0);
  const PressureResult r = solve_pressure(z, z, z, z, z);
  CHECK(r.q.max() == 0.0);
  CHECK(r.q.min() == 0.0);
  CHECK(r.u.max_abs() == 0.0);
}

TEST_CASE("pressure matches a fine-grid Poisson reference") {
  const Grid2D g{64, 64, 1.0, 1.0};
  const ScalarField z(g, BoundaryCondition::neumann(), 0.0);
  const ScalarField one(g, BoundaryCondition::none(), 1.0);
  const PressureResult coarse = solve_pressure(z, z, z, z, one);

  const Grid2D fine{256, 256, 1.0, 1.0};
  const CgResult ref = cg_solve(dirichlet_laplacian(fine), std::vector<double>(fine.cells(), 1.0));
  REQUIRE(ref.report.converged);
  double err = 0.0, scale = 0.0;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      // Coarse center = corner shared by four fine cells.
      double v = 0.0;
      for (int dj = 1; dj <= 2; ++dj)
        for (int di = 1; di <= 2; ++di) v += ref.values[fine.index(4 * i + di, 4 * j + dj)];
      v *= 0.25;
      err = std::max(err, std::abs(coarse.q(i, j) - v));
      scale = std::max(scale, std::abs(v));
    }
  CHECK(err <= 0.02 * scale);
}

TEST_CASE("pressure satisfies the discrete divergence identities") {
  Rng rng(5);
  const Grid2D g{48, 48, 1.0, 1.0};
  for (int trial = 0; trial < 3; ++trial) {
    const ScalarField pp = smooth_field(g, BoundaryCondition::neumann(), rng, 0.6);
    const ScalarField pd = smooth_field(g, BoundaryCondition::neumann(), rng, 0.6);
    const ScalarField mp = smooth_field(g, BoundaryCondition::neumann(), rng, 1.0);
    const ScalarField md = smooth_field(g, BoundaryCondition::neumann(), rng, 1.0);
    const ScalarField s = smooth_field(g, BoundaryCondition::none(), rng, 0.5);
    const PressureResult r = solve_pressure(pp, pd, mp, md, s);
    REQUIRE(r.report.converged);
    // Boundary normal Korteweg flux is zero.
    for (int j = 0; j < g.ny; ++j) CHECK(r.korteweg.x(0, j) == 0.0);
    const double total_div = grid::integral(grid::div(r.u));
    // |sum r h^2| <= area * |r|_2 <= area * tol * sqrt(N) * max|b|, with b
    // the assembled right-hand side.
    const ScalarField divk = grid::div(r.korteweg);
    double bmax = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) bmax = std::max(bmax, std::abs(divk[k] + s[k]));
    const double bound = 10 * kDefaultTolerance * std::sqrt(double(g.cells())) * bmax;
    CHECK(std::abs(total_div - grid::integral(s)) <= bound);
    for (int k = 0; k < 20; ++k) {
      const ScalarField xi = random_field(g, BoundaryCondition::dirichlet(0.0), rng, -1, 1);
      const double w = grid::face_inner(r.u, grid::grad_faces(xi)) + grid::inner(s, xi);
      CHECK(std::abs(w) <= 1e-6 * grid::l2_norm(xi));
    }
  }
}
