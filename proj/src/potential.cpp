#include "mstumor/potential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mstumor/errors.hpp"

namespace mstumor::potential {

namespace {

const double kLog3 = std::log(3.0);

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

// Nearest point of the triangle {s >= m, r >= m, s + r <= 1 - m}.
Vec2 project_to_shrunken_simplex(Vec2 x, double m) {
  if (x.p >= m && x.d >= m && x.p + x.d <= 1.0 - m) return x;
  const Vec2 verts[3] = {{m, m}, {1.0 - 2.0 * m, m}, {m, 1.0 - 2.0 * m}};
  Vec2 best = verts[0];
  double best_d2 = std::numeric_limits<double>::infinity();
  for (int e = 0; e < 3; ++e) {
    const Vec2 a = verts[e];
    const Vec2 b = verts[(e + 1) % 3];
    const Vec2 ab = b - a;
    const double t = std::clamp(dot(x - a, ab) / dot(ab, ab), 0.0, 1.0);
    const Vec2 c = a + t * ab;
    const double d2 = dot(x - c, x - c);
    if (d2 < best_d2) {
      best_d2 = d2;
      best = c;
    }
  }
  return best;
}

// Softmax over the logits (a, b, 0). The point of the simplex is
// (exp(a - Z), exp(b - Z)) with host exp(-Z).
struct Barycentric {
  double s, r, h, log_norm;
};

Barycentric barycentric(Vec2 theta) {
  const double m = std::max({0.0, theta.p, theta.d});
  const double z =
      m + std::log(std::exp(-m) + std::exp(theta.p - m) + std::exp(theta.d - m));
  return {std::exp(theta.p - z), std::exp(theta.d - z), std::exp(-z), z};
}

// Dual objective in logit coordinates: Z(theta) - x.theta + eps |theta|^2 / 2.
// Its gradient (p(theta) - x + eps theta) vanishes exactly at the prox.
double dual_objective(Vec2 theta, Vec2 x, double eps, double log_norm) {
  return log_norm - dot(x, theta) + 0.5 * eps * dot(theta, theta);
}

}  // namespace

void PotentialSpec::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw ConfigError("potential.epsilon must be positive, got " + std::to_string(epsilon));
  if (!(chi >= 0.0) || !std::isfinite(chi))
    throw ConfigError("potential.chi must be nonnegative, got " + std::to_string(chi));
}

double f0_value(SimplexPoint p, const PotentialSpec &spec) {
  if (!p.in_closed_simplex()) return std::numeric_limits<double>::infinity();
  const double h = 1.0 - p.s - p.r;
  const double v = xlogx(p.s) + xlogx(p.r) + xlogx(h);
  return spec.offset_log3 ? v + kLog3 : v;
}

Vec2 f0_grad(SimplexPoint p) {
  if (!p.in_open_simplex())
    throw DomainError("f0_grad: point (" + std::to_string(p.s) + ", " + std::to_string(p.r) +
                      ") is not strictly inside the simplex");
  const double lh = std::log(1.0 - p.s - p.r);
  return {std::log(p.s) - lh, std::log(p.r) - lh};
}

double f1_value(SimplexPoint p, const PotentialSpec &spec) {
  const double s = p.s, r = p.r;
  return 0.5 * spec.chi * (r * (1.0 - r) + s * (1.0 - s) + (1.0 - r - s) * (r + s));
}

Vec2 f1_grad(SimplexPoint p, const PotentialSpec &spec) {
  return {spec.chi * (1.0 - 2.0 * p.s - p.r), spec.chi * (1.0 - p.s - 2.0 * p.r)};
}

ProxResult prox(Vec2 x, const PotentialSpec &spec) {
  const double eps = spec.epsilon;
  if (!(eps > 0.0)) throw DomainError("prox: epsilon must be positive");
  if (!std::isfinite(x.p) || !std::isfinite(x.d))
    throw NumericalError("prox", "non-finite input");

  // Warm start: x clamped into the simplex shrunk by 0.9 about its centroid.
  const Vec2 start = project_to_shrunken_simplex(x, 1.0 / 30.0);
  const double h0 = 1.0 - start.p - start.d;
  Vec2 theta{std::log(start.p / h0), std::log(start.d / h0)};

  Barycentric bc = barycentric(theta);
  auto gradient = [&](const Barycentric &b, Vec2 th) {
    return Vec2{b.s - x.p + eps * th.p, b.r - x.d + eps * th.d};
  };
  Vec2 g = gradient(bc, theta);
  double phi = dual_objective(theta, x, eps, bc.log_norm);

  for (int it = 0; it <= kProxMaxIterations; ++it) {
    const double residual = norm(g) / eps;
    // Below this the residual is dominated by rounding in p - x + eps*theta;
    // exp(theta - Z) carries a relative error of order |theta| ulp.
    const double floor = 8.0 * std::numeric_limits<double>::epsilon() *
                         (1.0 + norm(x) + (1.0 + eps) * norm(theta)) / eps;
    if (residual <= std::max(kProxTolerance, floor)) {
      ProxResult out;
      out.point = {bc.s, bc.r};
      out.newton_iters = it;
      out.residual = residual;
      out.host = bc.h;
      out.f0_gradient = theta;
      return out;
    }
    if (it == kProxMaxIterations) break;

    // Hessian diag(p) - p p^T + eps I, solved by Cramer's rule.
    const double hpp = bc.s * (1.0 - bc.s) + eps;
    const double hdd = bc.r * (1.0 - bc.r) + eps;
    const double hpd = -bc.s * bc.r;
    const double det = hpp * hdd - hpd * hpd;
    const Vec2 step{-(hdd * g.p - hpd * g.d) / det, -(hpp * g.d - hpd * g.p) / det};
    const double slope = dot(g, step);

    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      const Vec2 trial = theta + t * step;
      const Barycentric tb = barycentric(trial);
      const double tphi = dual_objective(trial, x, eps, tb.log_norm);
      const Vec2 tg = gradient(tb, trial);
      // Near the solution phi stagnates at round-off; fall back to
      // requiring a smaller gradient there.
      const bool armijo = tphi <= phi + 1e-4 * t * slope;
      const bool flat = std::abs(tphi - phi) <= 1e-13 * (1.0 + std::abs(phi));
      if (armijo || (flat && norm(tg) < norm(g))) {
        theta = trial;
        bc = tb;
        phi = tphi;
        g = tg;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  throw NumericalError("prox", "Newton iteration failed to converge for x = (" +
                                   std::to_string(x.p) + ", " + std::to_string(x.d) +
                                   "), eps = " + std::to_string(eps));
}

YosidaEval feps_eval(Vec2 x, const PotentialSpec &spec) {
  YosidaEval out;
  out.prox = prox(x, spec);
  const ProxResult &pr = out.prox;
  const Vec2 diff = x - pr.point.vec();
  // F0 at the prox from the logits: s log s + r log r + h log h with
  // log s = a - Z etc. keeps full accuracy when h underflows 1 - s - r.
  const Barycentric bc = barycentric(pr.f0_gradient);
  double f0 = bc.s * (pr.f0_gradient.p - bc.log_norm) +
              bc.r * (pr.f0_gradient.d - bc.log_norm) - bc.h * bc.log_norm;
  if (spec.offset_log3) f0 += kLog3;
  out.value = dot(diff, diff) / (2.0 * spec.epsilon) + f0;
  out.gradient = pr.f0_gradient;
  return out;
}

double feps_value(Vec2 x, const PotentialSpec &spec) { return feps_eval(x, spec).value; }

Vec2 feps_grad(Vec2 x, const PotentialSpec &spec) { return feps_eval(x, spec).gradient; }

}  // namespace mstumor::potential
