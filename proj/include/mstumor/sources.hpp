#pragma once

// Mass source terms S = Sigma + M (phi_p, phi_d), admissible regions for the
// mean values, the inward-pointing check on their boundary, and the ODE
// obeyed by the spatial means.

#include <array>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mstumor/potential.hpp"
#include "mstumor/vec2.hpp"

namespace mstumor::sources {

using potential::SimplexPoint;

/// Axis-aligned box [p_lo, p_hi] x [d_lo, d_hi] containing every value of Sigma.
struct KBox {
  double p_lo = 0.0, p_hi = 0.0;
  double d_lo = 0.0, d_hi = 0.0;

  std::array<Vec2, 4> corners() const {
    return {Vec2{p_lo, d_lo}, Vec2{p_hi, d_lo}, Vec2{p_lo, d_hi}, Vec2{p_hi, d_hi}};
  }
  bool contains(Vec2 x, double slack = 0.0) const {
    return x.p >= p_lo - slack && x.p <= p_hi + slack && x.d >= d_lo - slack &&
           x.d <= d_hi + slack;
  }
  friend bool operator==(const KBox &, const KBox &) = default;
};

/// amplitude * (sin(w.(phi_p, phi_d, n) + phase_p), sin(w.(...) + phase_d)):
/// smooth, globally Lipschitz, bounded by `amplitude` componentwise.
struct Perturbation {
  double amplitude = 0.0;
  std::array<double, 3> wave{0.0, 0.0, 0.0};
  double phase_p = 0.0;
  double phase_d = 0.0;

  Vec2 eval(double n, SimplexPoint p) const;
  friend bool operator==(const Perturbation &, const Perturbation &) = default;
};

struct LinearGrowth {
  double lambda_m = 0.1;
  double lambda_a = 0.5;
  double lambda_l = 0.5;
  double n_c = 0.05;

  /// max(n_c, min(n, 1))
  double g(double n) const;
  friend bool operator==(const LinearGrowth &, const LinearGrowth &) = default;
};

/// M = -lambda I, Sigma = (lambda/3, lambda/3) + Sigma0 with |Sigma0| <= k_bound.
struct CenteredDecay {
  double lambda = 3.0;
  double k_bound = 0.0;
  Perturbation sigma0;
  friend bool operator==(const CenteredDecay &, const CenteredDecay &) = default;
};

/// Arbitrary matrix with Sigma = base + perturbation and declared bounds.
struct Custom {
  Mat2 matrix;
  Vec2 sigma_base;
  Perturbation perturbation;
  KBox k_box;
  friend bool operator==(const Custom &, const Custom &) = default;
};

struct SourceModel {
  std::variant<LinearGrowth, CenteredDecay, Custom> variant;

  Mat2 matrix() const;
  KBox k_box() const;
  /// Throws ConfigError on invalid rates, bounds or an undeclared range.
  void validate() const;
  friend bool operator==(const SourceModel &, const SourceModel &) = default;
};

Vec2 sigma_eval(const SourceModel &model, double n, SimplexPoint p);
Vec2 source_eval(const SourceModel &model, double n, SimplexPoint p);

struct Disk {
  SimplexPoint center;
  double radius = 0.05;
  friend bool operator==(const Disk &, const Disk &) = default;
};

/// {s >= margin, r >= margin, s + r <= 1 - margin} with vertices replaced by
/// circular arcs of radius corner_rounding.
struct ShrunkenSimplex {
  double margin = 0.1;
  double corner_rounding = 0.05;
  friend bool operator==(const ShrunkenSimplex &, const ShrunkenSimplex &) = default;
};

struct BoundarySample {
  Vec2 point;
  Vec2 normal;  // outer unit normal
};

struct AdmissibleRegion {
  std::variant<Disk, ShrunkenSimplex> variant;

  /// Negative inside, zero on the boundary, positive outside.
  double signed_distance(Vec2 y) const;
  bool contains(Vec2 y, double slack = 0.0) const { return signed_distance(y) <= slack; }
  /// max over the region of dir . y
  double support(Vec2 dir) const;
  std::vector<BoundarySample> sample_boundary(int count) const;
  /// True iff the closed region lies in the open simplex.
  bool inside_open_simplex() const;
  friend bool operator==(const AdmissibleRegion &, const AdmissibleRegion &) = default;
};

struct InwardVerdict {
  bool holds = false;
  double worst_margin = 0.0;
  Vec2 witness;        // boundary point attaining worst_margin
  Vec2 witness_sigma;  // box corner attaining worst_margin
  KBox box;            // box that was checked
  int samples = 0;
};

inline constexpr int kDefaultBoundarySamples = 720;

/// Samples (M y + x) . n over y on the region boundary and x over the corners
/// of `sigma_box` (the model's K-box when not given). Throws HypothesisError
/// when the region is not inside the open simplex.
InwardVerdict check_inward(const SourceModel &model, const AdmissibleRegion &region,
                           int n_boundary_samples = kDefaultBoundarySamples,
                           std::optional<KBox> sigma_box = std::nullopt);

/// Stationary point -M^{-1} (lambda_m g_mean, 0).
Vec2 fixed_point(const LinearGrowth &model, double g_mean);

/// Bounds 0 < c1 <= y_p, y_d, y_p + y_d <= c2 < 1 valid on the whole region.
struct ConfinementBounds {
  double c1 = 0.0;
  double c2 = 0.0;
};
ConfinementBounds confinement_bounds(const AdmissibleRegion &region);

struct MeanState {
  double y_p = 0.0;
  double y_d = 0.0;
  double t = 0.0;
  Vec2 vec() const { return {y_p, y_d}; }
};

/// One classical RK4 step of y' = sigma_mean + M y with sigma_mean frozen.
MeanState mean_ode_step(const MeanState &state, const SourceModel &model, Vec2 sigma_mean,
                        double dt);

/// (exp(A) - I) A^{-1}, well defined for singular A.
Mat2 phi1(const Mat2 &a);

std::string describe(const SourceModel &model);
std::string describe(const AdmissibleRegion &region);

}  // namespace mstumor::sources
