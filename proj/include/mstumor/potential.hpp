#pragma once

// Multi-species logarithmic potential, its smooth perturbation, and the
// Moreau-Yosida regularization used by the time stepper.

#include <limits>

#include "mstumor/vec2.hpp"

namespace mstumor::potential {

struct PotentialSpec {
  double chi = 1.0;
  double epsilon = 0.1;
  // Adds log 3 to F0 so that F0 >= 0 on the closed simplex.
  bool offset_log3 = true;

  void validate() const;
  friend bool operator==(const PotentialSpec &, const PotentialSpec &) = default;
};

/// A pair (phi_p, phi_d); the host fraction 1 - s - r is implied.
struct SimplexPoint {
  double s = 0.0;
  double r = 0.0;

  bool in_closed_simplex() const { return s >= 0.0 && r >= 0.0 && s + r <= 1.0; }
  bool in_open_simplex() const { return s > 0.0 && r > 0.0 && s + r < 1.0; }
  Vec2 vec() const { return {s, r}; }
  static SimplexPoint from(const Vec2 &v) { return {v.p, v.d}; }
  friend bool operator==(const SimplexPoint &, const SimplexPoint &) = default;
};

struct ProxResult {
  SimplexPoint point;
  int newton_iters = 0;
  // Norm of (point - x)/eps + grad F0(point).
  double residual = 0.0;
  // Host fraction 1 - s - r, computed without cancellation.
  double host = 0.0;
  // grad F0 at `point`, i.e. (log s - log h, log r - log h). At the
  // minimizer this equals (x - point)/eps.
  Vec2 f0_gradient;
};

struct YosidaEval {
  double value = 0.0;
  Vec2 gradient;
  ProxResult prox;
};

inline constexpr double kProxTolerance = 1e-12;
inline constexpr int kProxMaxIterations = 200;

double f0_value(SimplexPoint p, const PotentialSpec &spec);
/// Throws DomainError unless p is strictly inside the simplex.
Vec2 f0_grad(SimplexPoint p);

double f1_value(SimplexPoint p, const PotentialSpec &spec);
Vec2 f1_grad(SimplexPoint p, const PotentialSpec &spec);

/// argmin_y |y - x|^2/(2 eps) + F0(y). Throws NumericalError("prox") if
/// Newton fails to reach kProxTolerance within kProxMaxIterations.
ProxResult prox(Vec2 x, const PotentialSpec &spec);

YosidaEval feps_eval(Vec2 x, const PotentialSpec &spec);
double feps_value(Vec2 x, const PotentialSpec &spec);
Vec2 feps_grad(Vec2 x, const PotentialSpec &spec);

constexpr double cutoff(double r) { return r < 0.0 ? 0.0 : (r > 1.0 ? 1.0 : r); }

}  // namespace mstumor::potential
