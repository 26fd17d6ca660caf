#include "mstumor/sources.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "mstumor/errors.hpp"

namespace mstumor::sources {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

bool finite_all(std::initializer_list<double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

// Rounded triangle = inner triangle (offset inward by the rounding radius)
// dilated by a disk of that radius.
struct RoundedTriangle {
  Vec2 a, b, c;  // counterclockwise vertices of the inner triangle
  double radius;
};

RoundedTriangle rounded_triangle(const ShrunkenSimplex &t) {
  const double lo = t.margin + t.corner_rounding;
  const double hyp = 1.0 - t.margin - std::numbers::sqrt2 * t.corner_rounding;
  return {{lo, lo}, {hyp - lo, lo}, {lo, hyp - lo}, t.corner_rounding};
}

double segment_distance(Vec2 y, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double t = std::clamp(dot(y - a, ab) / dot(ab, ab), 0.0, 1.0);
  return norm(y - (a + t * ab));
}

double triangle_signed_distance(Vec2 y, const RoundedTriangle &tri) {
  const Vec2 v[3] = {tri.a, tri.b, tri.c};
  double inside_depth = std::numeric_limits<double>::infinity();
  bool inside = true;
  for (int e = 0; e < 3; ++e) {
    const Vec2 p = v[e], q = v[(e + 1) % 3];
    const Vec2 edge = q - p;
    const Vec2 outward = Vec2{edge.d, -edge.p} / norm(edge);
    const double off = dot(y - p, outward);
    if (off > 0.0) inside = false;
    inside_depth = std::min(inside_depth, -off);
  }
  if (inside) return -inside_depth;
  double d = std::numeric_limits<double>::infinity();
  for (int e = 0; e < 3; ++e) d = std::min(d, segment_distance(y, v[e], v[(e + 1) % 3]));
  return d;
}

}  // namespace

Vec2 Perturbation::eval(double n, SimplexPoint p) const {
  if (amplitude == 0.0) return {0.0, 0.0};
  const double arg = wave[0] * p.s + wave[1] * p.r + wave[2] * n;
  return {amplitude * std::sin(arg + phase_p), amplitude * std::sin(arg + phase_d)};
}

double LinearGrowth::g(double n) const { return std::max(n_c, std::min(n, 1.0)); }

Mat2 SourceModel::matrix() const {
  return std::visit(
      overloaded{
          [](const LinearGrowth &m) { return Mat2{-m.lambda_a, 0.0, m.lambda_a, -m.lambda_l}; },
          [](const CenteredDecay &m) { return Mat2::scaled_identity(-m.lambda); },
          [](const Custom &m) { return m.matrix; },
      },
      variant);
}

KBox SourceModel::k_box() const {
  return std::visit(overloaded{
                        [](const LinearGrowth &m) { return KBox{0.0, m.lambda_m, 0.0, 0.0}; },
                        [](const CenteredDecay &m) {
                          const double k = m.lambda / 3.0;
                          return KBox{k - m.k_bound, k + m.k_bound, k - m.k_bound,
                                      k + m.k_bound};
                        },
                        [](const Custom &m) { return m.k_box; },
                    },
                    variant);
}

void SourceModel::validate() const {
  std::visit(
      overloaded{
          [](const LinearGrowth &m) {
            if (!finite_all({m.lambda_m, m.lambda_a, m.lambda_l, m.n_c}))
              throw ConfigError("source: non-finite rate");
            if (!(m.lambda_m > 0.0) || !(m.lambda_a > 0.0) || !(m.lambda_l > 0.0))
              throw ConfigError("source: lambda_m, lambda_a, lambda_l must be positive");
            if (!(m.n_c > 0.0 && m.n_c < 1.0))
              throw ConfigError("source: n_c must lie in (0, 1)");
          },
          [](const CenteredDecay &m) {
            if (!finite_all({m.lambda, m.k_bound, m.sigma0.amplitude}))
              throw ConfigError("source: non-finite parameter");
            if (!(m.lambda > 0.0)) throw ConfigError("source: lambda must be positive");
            if (!(m.k_bound >= 0.0)) throw ConfigError("source: k_bound must be nonnegative");
            if (std::abs(m.sigma0.amplitude) > m.k_bound)
              throw ConfigError("source: perturbation amplitude exceeds k_bound");
          },
          [](const Custom &m) {
            const KBox &b = m.k_box;
            const double a = std::abs(m.perturbation.amplitude);
            if (!finite_all({m.matrix.pp, m.matrix.pd, m.matrix.dp, m.matrix.dd, b.p_lo, b.p_hi,
                             b.d_lo, b.d_hi, m.sigma_base.p, m.sigma_base.d, a}))
              throw ConfigError("source: non-finite parameter");
            if (b.p_lo > b.p_hi || b.d_lo > b.d_hi)
              throw ConfigError("source: K bounds must satisfy lo <= hi");
            const double tol = 1e-12;
            if (m.sigma_base.p - a < b.p_lo - tol || m.sigma_base.p + a > b.p_hi + tol ||
                m.sigma_base.d - a < b.d_lo - tol || m.sigma_base.d + a > b.d_hi + tol)
              throw ConfigError("source: sigma range is not contained in the declared K bounds");
          },
      },
      variant);
}

Vec2 sigma_eval(const SourceModel &model, double n, SimplexPoint p) {
  return std::visit(overloaded{
                        [&](const LinearGrowth &m) { return Vec2{m.lambda_m * m.g(n), 0.0}; },
                        [&](const CenteredDecay &m) {
                          const double k = m.lambda / 3.0;
                          return Vec2{k, k} + m.sigma0.eval(n, p);
                        },
                        [&](const Custom &m) { return m.sigma_base + m.perturbation.eval(n, p); },
                    },
                    model.variant);
}

Vec2 source_eval(const SourceModel &model, double n, SimplexPoint p) {
  return sigma_eval(model, n, p) + model.matrix() * p.vec();
}

double AdmissibleRegion::signed_distance(Vec2 y) const {
  return std::visit(overloaded{
                        [&](const Disk &d) { return norm(y - d.center.vec()) - d.radius; },
                        [&](const ShrunkenSimplex &t) {
                          const RoundedTriangle tri = rounded_triangle(t);
                          return triangle_signed_distance(y, tri) - tri.radius;
                        },
                    },
                    variant);
}

double AdmissibleRegion::support(Vec2 dir) const {
  return std::visit(overloaded{
                        [&](const Disk &d) { return dot(dir, d.center.vec()) + d.radius * norm(dir); },
                        [&](const ShrunkenSimplex &t) {
                          const RoundedTriangle tri = rounded_triangle(t);
                          return std::max({dot(dir, tri.a), dot(dir, tri.b), dot(dir, tri.c)}) +
                                 tri.radius * norm(dir);
                        },
                    },
                    variant);
}

bool AdmissibleRegion::inside_open_simplex() const {
  return std::visit(
      overloaded{
          [](const Disk &d) {
            const double c = d.center.s, r = d.center.r;
            return d.radius > 0.0 && c - d.radius > 0.0 && r - d.radius > 0.0 &&
                   (1.0 - c - r) / std::numbers::sqrt2 - d.radius > 0.0;
          },
          [](const ShrunkenSimplex &t) {
            if (!(t.margin > 0.0) || !(t.corner_rounding > 0.0)) return false;
            const RoundedTriangle tri = rounded_triangle(t);
            return tri.b.p > tri.a.p;  // inner triangle not degenerate
          },
      },
      variant);
}

std::vector<BoundarySample> AdmissibleRegion::sample_boundary(int count) const {
  std::vector<BoundarySample> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  const double two_pi = 2.0 * std::numbers::pi;
  if (const auto *d = std::get_if<Disk>(&variant)) {
    for (int k = 0; k < count; ++k) {
      const double th = two_pi * k / count;
      const Vec2 n{std::cos(th), std::sin(th)};
      out.push_back({d->center.vec() + d->radius * n, n});
    }
    return out;
  }
  const RoundedTriangle tri = rounded_triangle(std::get<ShrunkenSimplex>(variant));
  const Vec2 verts[3] = {tri.a, tri.b, tri.c};
  // Outer normals of the edges a->b, b->c, c->a and their polar angles.
  const Vec2 normals[3] = {{0.0, -1.0}, {std::numbers::sqrt2 / 2, std::numbers::sqrt2 / 2}, {-1.0, 0.0}};
  const double angles[3] = {-std::numbers::pi / 2, std::numbers::pi / 4, std::numbers::pi};
  double lengths[6];
  for (int e = 0; e < 3; ++e) {
    lengths[2 * e] = norm(verts[(e + 1) % 3] - verts[e]);
    double sweep = angles[(e + 1) % 3] - angles[e];
    if (sweep < 0) sweep += two_pi;
    lengths[2 * e + 1] = tri.radius * sweep;
  }
  double perimeter = 0.0;
  for (double l : lengths) perimeter += l;
  for (int k = 0; k < count; ++k) {
    double s = perimeter * k / count;
    int piece = 0;
    while (piece < 5 && s > lengths[piece]) s -= lengths[piece++];
    const int e = piece / 2;
    if (piece % 2 == 0) {
      const Vec2 a = verts[e], b = verts[(e + 1) % 3];
      const double t = lengths[piece] > 0 ? s / lengths[piece] : 0.0;
      out.push_back({a + t * (b - a) + tri.radius * normals[e], normals[e]});
    } else {
      const double th = angles[e] + s / tri.radius;
      const Vec2 n{std::cos(th), std::sin(th)};
      out.push_back({verts[(e + 1) % 3] + tri.radius * n, n});
    }
  }
  return out;
}

InwardVerdict check_inward(const SourceModel &model, const AdmissibleRegion &region,
                           int n_boundary_samples, std::optional<KBox> sigma_box) {
  if (!region.inside_open_simplex())
    throw HypothesisError("admissible region " + describe(region) +
                          " is not contained in the open simplex");
  if (n_boundary_samples < 3) throw ConfigError("check_inward needs at least 3 boundary samples");
  InwardVerdict v;
  v.box = sigma_box.value_or(model.k_box());
  v.worst_margin = -std::numeric_limits<double>::infinity();
  const Mat2 m = model.matrix();
  for (const BoundarySample &b : region.sample_boundary(n_boundary_samples)) {
    const Vec2 my = m * b.point;
    for (const Vec2 &x : v.box.corners()) {
      const double margin = dot(my + x, b.normal);
      if (margin > v.worst_margin) {
        v.worst_margin = margin;
        v.witness = b.point;
        v.witness_sigma = x;
      }
    }
    ++v.samples;
  }
  v.holds = v.worst_margin < 0.0;
  return v;
}

Vec2 fixed_point(const LinearGrowth &model, double g_mean) {
  if (model.lambda_a == 0.0 || model.lambda_l == 0.0)
    throw DomainError("fixed_point: source matrix is singular (zero rate)");
  return {model.lambda_m / model.lambda_a * g_mean, model.lambda_m / model.lambda_l * g_mean};
}

ConfinementBounds confinement_bounds(const AdmissibleRegion &region) {
  const Vec2 ep{1.0, 0.0}, ed{0.0, 1.0}, sum{1.0, 1.0};
  ConfinementBounds b;
  b.c1 = std::min({-region.support(-1.0 * ep), -region.support(-1.0 * ed),
                   -region.support(-1.0 * sum)});
  b.c2 = std::max({region.support(ep), region.support(ed), region.support(sum)});
  return b;
}

MeanState mean_ode_step(const MeanState &state, const SourceModel &model, Vec2 sigma_mean,
                        double dt) {
  const Mat2 m = model.matrix();
  auto f = [&](Vec2 y) { return sigma_mean + m * y; };
  const Vec2 y = state.vec();
  const Vec2 k1 = f(y);
  const Vec2 k2 = f(y + 0.5 * dt * k1);
  const Vec2 k3 = f(y + 0.5 * dt * k2);
  const Vec2 k4 = f(y + dt * k3);
  const Vec2 next = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  return {next.p, next.d, state.t + dt};
}

Mat2 phi1(const Mat2 &a) {
  const double size = std::max({std::abs(a.pp), std::abs(a.pd), std::abs(a.dp), std::abs(a.dd)});
  int squarings = 0;
  double scale = 1.0;
  while (size * scale > 0.25) {
    scale *= 0.5;
    ++squarings;
  }
  const Mat2 as = scale * a;
  // Taylor series sum_k as^k / (k+1)!
  Mat2 term = Mat2::identity();
  Mat2 sum = Mat2::identity();
  for (int k = 1; k < 30; ++k) {
    term = (1.0 / (k + 1)) * (term * as);
    sum = sum + term;
  }
  Mat2 expo = Mat2::identity() + as * sum;
  // phi1(2A) = phi1(A) (exp(A) + I) / 2
  for (int i = 0; i < squarings; ++i) {
    sum = 0.5 * (sum * (expo + Mat2::identity()));
    expo = expo * expo;
  }
  return sum;
}

std::string describe(const SourceModel &model) {
  return std::visit(overloaded{
                        [](const LinearGrowth &m) {
                          return "linear_growth(lambda_m=" + fmt_g(m.lambda_m) +
                                 ", lambda_a=" + fmt_g(m.lambda_a) + ", lambda_l=" +
                                 fmt_g(m.lambda_l) + ", n_c=" + fmt_g(m.n_c) + ")";
                        },
                        [](const CenteredDecay &m) {
                          return "centered_decay(lambda=" + fmt_g(m.lambda) +
                                 ", k_bound=" + fmt_g(m.k_bound) + ")";
                        },
                        [](const Custom &) { return std::string("custom"); },
                    },
                    model.variant);
}

std::string describe(const AdmissibleRegion &region) {
  return std::visit(overloaded{
                        [](const Disk &d) {
                          return "disk(center=(" + fmt_g(d.center.s) + ", " + fmt_g(d.center.r) +
                                 "), radius=" + fmt_g(d.radius) + ")";
                        },
                        [](const ShrunkenSimplex &t) {
                          return "shrunken_simplex(margin=" + fmt_g(t.margin) +
                                 ", corner_rounding=" + fmt_g(t.corner_rounding) + ")";
                        },
                    },
                    region.variant);
}

}  // namespace mstumor::sources
