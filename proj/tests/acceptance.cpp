// Acceptance suite: one PASS/FAIL line per criterion, thresholds fixed below.
// Usage: acceptance [criterion numbers...]   (all when none are given)
// Exit status is 0 iff every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mstumor/elliptic.hpp"
#include "mstumor/grid.hpp"
#include "mstumor/potential.hpp"
#include "mstumor/rng.hpp"
#include "mstumor/sources.hpp"
#include "mstumor/stepper.hpp"
#include "support/calibration.hpp"
#include "support/oracles.hpp"

using namespace mstumor;
using grid::BoundaryCondition;
using grid::Grid2D;
using grid::ScalarField;
using stepper::DiagnosticsRecord;
using stepper::SimConfig;
using stepper::Simulation;

namespace {

// Thresholds.
constexpr double kProxError = 1e-5;
constexpr double kProxSeconds = 60.0;
constexpr int kProxPoints = 300;
constexpr double kCkrsFitEps = 0.5;
constexpr double kCkrsCStar = 0.025;
constexpr int kCkrsFitPairs = 100000;
constexpr int kCkrsCheckPairs = 10000;
constexpr double kBarrierC3 = 0.025;
constexpr double kBarrierMargin = 0.1;
constexpr int kBarrierFitPairs = 50000;
constexpr int kBarrierCheckPairs = 10000;
constexpr int kNutrientFields = 100;
constexpr double kNutrientUpper = 1e-10;
constexpr double kCoshError = 5e-3;
constexpr double kMeanIdentity = 1e-9;
constexpr double kMeanOde = 1e-6;
constexpr int kMassSteps = 2000;
constexpr double kMassSeconds = 300.0;
constexpr double kConfinementRadius = 0.05;
constexpr double kConfinementSlack = 1e-8;
constexpr int kConfinementSteps = 6000;
constexpr double kEnergyRatioLo = 0.4;
constexpr double kEnergyRatioHi = 0.6;
constexpr double kEnergyHorizon = 0.4;
constexpr int kPressureTests = 20;
constexpr int kPressureSteps = 50;
constexpr double kPressureIdentity = 1e-6;
constexpr double kContinuationSeconds = 1800.0;
constexpr int kDeterminismSteps = 200;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// LinearGrowth(0.1, 0.5, 0.5), 64 x 64, dt = 1e-3, uniform (0.3, 0.3) plus
// noise of amplitude 1e-3.
SimConfig noise_scenario() {
  SimConfig c;
  c.grid = {64, 64, 1.0, 1.0};
  c.dt = 1e-3;
  c.t_final = kMassSteps * c.dt;
  c.source = {sources::LinearGrowth{0.1, 0.5, 0.5, 0.05}};
  c.region = {sources::Disk{{0.2, 0.2}, 0.15}};
  c.initial = {stepper::UniformWithNoise{{0.3, 0.3}, 1e-3}};
  c.seed = 1;
  return c;
}

Outcome prox_oracle() {
  const auto t0 = Clock::now();
  Rng rng(11);
  double worst = 0.0;
  for (double eps : {0.5, 0.1, 0.02}) {
    potential::PotentialSpec spec;
    spec.epsilon = eps;
    for (int k = 0; k < kProxPoints; ++k) {
      const Vec2 x = oracle::random_in(rng, -2.0, 3.0);
      const potential::ProxResult r = potential::prox(x, spec);
      const Vec2 ref = oracle::grid_search_prox(x, eps);
      worst = std::max({worst, std::abs(r.point.s - ref.p), std::abs(r.point.r - ref.d)});
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= kProxError && secs < kProxSeconds,
          "3 x " + std::to_string(kProxPoints) + " points, max error " + sci(worst) + " (<= " +
              sci(kProxError) + "), " + sci(secs) + " s"};
}

Outcome ckrs_uniformity() {
  const calib::CkrsFit fit =
      calib::fit_ckrs(kCkrsCStar, kCkrsFitEps, calib::ckrs_pairs(101, kCkrsFitPairs));
  int total = 0;
  std::string per;
  std::uint64_t seed = 2501;
  for (double eps : {0.25, 0.1, 0.02}) {
    double worst = 0.0;
    const int bad = calib::ckrs_violations(fit, eps, calib::ckrs_pairs(seed++, kCkrsCheckPairs), &worst);
    total += bad;
    per += " eps=" + sci(eps) + ":" + std::to_string(bad) + " (max defect " + sci(worst) + ")";
  }
  return {total == 0, "c*=" + sci(fit.c_star) + " C*=" + sci(fit.big_c) + ", violations" + per};
}

Outcome interior_barrier() {
  const double c4 = calib::fit_c4(kBarrierC3, calib::barrier_pairs(3301, kBarrierFitPairs, kBarrierMargin));
  double worst = 0.0;
  const int bad = calib::barrier_violations(
      kBarrierC3, c4, calib::barrier_pairs(3302, kBarrierCheckPairs, kBarrierMargin), &worst);
  return {bad == 0 && std::isfinite(c4), "c3=" + sci(kBarrierC3) + " c4=" + sci(c4) + ", " +
                                             std::to_string(bad) + " violations in " +
                                             std::to_string(kBarrierCheckPairs) + " (max defect " +
                                             sci(worst) + ")"};
}

// Cellwise noise, smooth modes of large amplitude, or random rectangles.
ScalarField fuzzed_field(const Grid2D &g, Rng &rng, int kind) {
  ScalarField f(g, BoundaryCondition::neumann());
  if (kind == 0) {
    for (std::size_t k = 0; k < f.size(); ++k) f[k] = rng.uniform(-0.5, 1.5);
  } else if (kind == 1) {
    double a[4], kx[4], ky[4], ph[4];
    for (int m = 0; m < 4; ++m) {
      a[m] = rng.uniform(-2.0, 2.0);
      kx[m] = std::floor(rng.uniform(0.0, 6.0));
      ky[m] = std::floor(rng.uniform(0.0, 6.0));
      ph[m] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
    f = ScalarField::sample(g, BoundaryCondition::neumann(), [&](double x, double y) {
      double s = 0.5;
      for (int m = 0; m < 4; ++m)
        s += a[m] * std::cos(std::numbers::pi * kx[m] * x + ph[m]) * std::cos(std::numbers::pi * ky[m] * y);
      return s;
    });
  } else {
    for (int r = 0; r < 6; ++r) {
      const int i0 = static_cast<int>(rng.uniform(0, g.nx)), j0 = static_cast<int>(rng.uniform(0, g.ny));
      const int w = 1 + static_cast<int>(rng.uniform(0, g.nx / 2)), h = 1 + static_cast<int>(rng.uniform(0, g.ny / 2));
      const double v = rng.uniform(0.0, 1.0);
      for (int j = j0; j < std::min(g.ny, j0 + h); ++j)
        for (int i = i0; i < std::min(g.nx, i0 + w); ++i) f(i, j) = v;
    }
  }
  return f;
}

Outcome nutrient_bounds() {
  // Half of the fields live on a 10 x 10 box, where the nutrient is depleted
  // well below 1 in the interior.
  const Grid2D unit{64, 64, 1.0, 1.0}, wide{64, 64, 10.0, 10.0};
  Rng rng(4401);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  bool all_converged = true;
  for (int k = 0; k < kNutrientFields; ++k) {
    const elliptic::NutrientResult r = elliptic::solve_nutrient(fuzzed_field(k % 2 ? wide : unit, rng, k % 3));
    lo = std::min(lo, r.n.min());
    hi = std::max(hi, r.n.max());
    all_converged = all_converged && r.report.converged;
  }
  const Grid2D strip{128, 4, 1.0, 4.0 / 128};
  elliptic::NutrientOptions opts;
  opts.bc = BoundaryCondition::dirichlet_x(1.0);
  const elliptic::NutrientResult r =
      elliptic::solve_nutrient(ScalarField(strip, BoundaryCondition::neumann(), 1.0), opts);
  double err = 0.0;
  for (int j = 0; j < strip.ny; ++j)
    for (int i = 0; i < strip.nx; ++i)
      err = std::max(err, std::abs(r.n(i, j) - std::cosh(strip.xc(i) - 0.5) / std::cosh(0.5)));
  const bool pass = all_converged && lo >= 0.0 && hi <= 1.0 + kNutrientUpper && err <= kCoshError;
  return {pass, std::to_string(kNutrientFields) + " fields: min n " + sci(lo) + ", max n - 1 = " +
                    sci(hi - 1.0) + "; cosh strip nx=128 error " + sci(err) + " (<= " +
                    sci(kCoshError) + ")"};
}

// Criteria 5 and 6 share one run of the noise scenario.
struct NoiseRun {
  double identity = 0.0, ode = 0.0, mass_seconds = 0.0;
  bool inward = false;
  double entry_time = -1.0, worst_after_entry = -std::numeric_limits<double>::infinity();
  int exits = 0;
  // Signed distance to the configured region over the whole run.
  double worst_configured = -std::numeric_limits<double>::infinity();
  bool done = false;
};

NoiseRun &noise_run() {
  static NoiseRun out;
  if (out.done) return out;
  SimConfig c = noise_scenario();
  c.t_final = kConfinementSteps * c.dt;
  const auto model = std::get<sources::LinearGrowth>(c.source.variant);
  out.inward = sources::check_inward(c.source, c.region, sources::kDefaultBoundarySamples,
                                     stepper::inward_check_box(c))
                   .holds;
  const auto t0 = Clock::now();
  Simulation sim(c);
  sources::MeanState y{sim.initial_record().mean_p, sim.initial_record().mean_d, 0.0};
  auto track = [&](const DiagnosticsRecord &r) {
    out.worst_configured = std::max(out.worst_configured, c.region.signed_distance({r.mean_p, r.mean_d}));
    const sources::Disk disk{potential::SimplexPoint::from(sources::fixed_point(model, r.g_mean)),
                             kConfinementRadius};
    const double d = sources::AdmissibleRegion{disk}.signed_distance({r.mean_p, r.mean_d});
    if (out.entry_time < 0.0 && d <= kConfinementSlack) out.entry_time = r.t;
    if (out.entry_time >= 0.0) {
      out.worst_after_entry = std::max(out.worst_after_entry, d);
      if (d > kConfinementSlack) ++out.exits;
    }
  };
  track(sim.initial_record());
  for (int k = 1; k <= kConfinementSteps; ++k) {
    const DiagnosticsRecord r = sim.step();
    if (k <= kMassSteps) {
      y = sources::mean_ode_step(y, c.source, r.sigma_mean, c.dt);
      out.identity = std::max({out.identity, r.mean_residual_p, r.mean_residual_d});
      out.ode = std::max({out.ode, std::abs(y.y_p - r.mean_p), std::abs(y.y_d - r.mean_d)});
      if (k == kMassSteps) out.mass_seconds = seconds_since(t0);
    }
    track(r);
  }
  out.done = true;
  return out;
}

Outcome mass_bookkeeping() {
  const NoiseRun &r = noise_run();
  const bool pass = r.identity <= kMeanIdentity && r.ode <= kMeanOde && r.mass_seconds <= kMassSeconds;
  return {pass, std::to_string(kMassSteps) + " steps: mean identity " + sci(r.identity) + " (<= " +
                    sci(kMeanIdentity) + "), mean ODE deviation " + sci(r.ode) + " (<= " +
                    sci(kMeanOde) + "), " + sci(r.mass_seconds) + " s"};
}

Outcome confinement() {
  const NoiseRun &r = noise_run();
  const bool pass = r.inward && r.worst_configured <= kConfinementSlack && r.entry_time >= 0.0 &&
                    r.exits == 0;
  std::string detail = "inward check " + std::string(r.inward ? "holds" : "fails") + ", " +
                       std::to_string(kConfinementSteps) + " steps, worst distance to configured region " +
                       sci(r.worst_configured) + "; disk r=" + sci(kConfinementRadius) + " around Y*: ";
  if (r.entry_time < 0.0)
    detail += "means never entered the disk";
  else
    detail += "entered at t=" + sci(r.entry_time) + ", worst signed distance afterwards " +
              sci(r.worst_after_entry) + ", " + std::to_string(r.exits) + " exits";
  return {pass, detail};
}

Outcome energy_order() {
  std::vector<double> averages;
  double worst_increase = -std::numeric_limits<double>::infinity();
  bool monotone = true;
  for (double dt : {4e-3, 2e-3, 1e-3}) {
    SimConfig c = noise_scenario();
    c.dt = dt;
    c.t_final = kEnergyHorizon;
    c.source = {sources::Custom{Mat2{}, Vec2{}, {}, {}}};
    // The zero source sits on the boundary of the strict inward condition, so
    // the run bypasses the pre-run check.
    Simulation sim(c);
    const int n = c.n_steps();
    double e_prev = sim.initial_record().energy, sum = 0.0;
    int count = 0;
    for (int k = 1; k <= n; ++k) {
      const DiagnosticsRecord r = sim.step();
      worst_increase = std::max(worst_increase, r.energy - e_prev);
      if (r.energy - e_prev > dt * r.energy_residual) monotone = false;
      if (2 * k > n) {
        sum += r.energy_residual;
        ++count;
      }
      e_prev = r.energy;
    }
    averages.push_back(sum / count);
  }
  const double r1 = averages[1] / averages[0], r2 = averages[2] / averages[1];
  auto in_band = [](double r) { return r >= kEnergyRatioLo && r <= kEnergyRatioHi; };
  return {in_band(r1) && in_band(r2) && monotone,
          "mean residual over second half " + sci(averages[0]) + ", " + sci(averages[1]) + ", " +
              sci(averages[2]) + "; ratios " + sci(r1) + ", " + sci(r2) + "; largest energy change " +
              sci(worst_increase) + (monotone ? " (non-increasing)" : " (increase beyond slack)")};
}

Outcome pressure_compatibility() {
  SimConfig c = noise_scenario();
  c.t_final = kPressureSteps * c.dt;
  const Grid2D &g = c.grid;
  Rng rng(8801);
  std::vector<ScalarField> tests;
  for (int k = 0; k < kPressureTests; ++k) {
    ScalarField xi(g, BoundaryCondition::dirichlet(0.0));
    if (k % 2 == 0) {
      for (std::size_t m = 0; m < xi.size(); ++m) xi[m] = rng.uniform(-1.0, 1.0);
    } else {
      const int kx = 1 + static_cast<int>(rng.uniform(0, 5)), ky = 1 + static_cast<int>(rng.uniform(0, 5));
      const double a = rng.uniform(0.5, 2.0);
      xi = ScalarField::sample(g, BoundaryCondition::dirichlet(0.0), [&](double x, double y) {
        return a * std::sin(std::numbers::pi * kx * x) * std::sin(std::numbers::pi * ky * y);
      });
    }
    tests.push_back(std::move(xi));
  }
  Simulation sim(c);
  double worst = 0.0;
  auto check = [&] {
    const stepper::SimState &s = sim.state();
    ScalarField total = s.source_p;
    for (std::size_t m = 0; m < total.size(); ++m) total[m] += s.source_d[m];
    for (const ScalarField &xi : tests) {
      const grid::VectorField gxi = grid::grad_faces(xi);
      const double h1 = std::sqrt(grid::inner(xi, xi) + grid::face_inner(gxi, gxi));
      const double defect = std::abs(grid::face_inner(s.u, gxi) + grid::inner(total, xi));
      worst = std::max(worst, defect / h1);
    }
  };
  check();
  for (int k = 0; k < kPressureSteps; ++k) {
    sim.step();
    check();
  }
  return {worst <= kPressureIdentity,
          std::to_string(kPressureTests) + " test functions x " + std::to_string(kPressureSteps + 1) +
              " states: max |<u, grad xi> + <S, xi>| / |xi|_H1 = " + sci(worst) + " (<= " +
              sci(kPressureIdentity) + ")"};
}

Outcome continuation() {
  const auto t0 = Clock::now();
  const std::vector<double> eps{0.1, 0.05, 0.025, 0.0125};
  const stepper::ContinuationTable t = stepper::continuation_study(noise_scenario(), eps);
  const double secs = seconds_since(t0);
  bool decreasing = true, overshoot_ok = true;
  for (std::size_t k = 1; k < t.distances.size(); ++k) decreasing = decreasing && t.distances[k] < t.distances[k - 1];
  for (std::size_t k = 1; k < t.rows.size(); ++k)
    overshoot_ok = overshoot_ok && t.rows[k].overshoot <= t.rows[k - 1].overshoot;
  std::string d, o;
  for (double v : t.distances) d += (d.empty() ? "" : ", ") + sci(v);
  for (const auto &r : t.rows) o += (o.empty() ? "" : ", ") + sci(r.overshoot);
  return {decreasing && overshoot_ok && secs <= kContinuationSeconds,
          "distances " + d + "; overshoot " + o + "; " + sci(secs) + " s"};
}

std::string slurp(const std::filesystem::path &p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Outcome determinism() {
  SimConfig c = noise_scenario();
  c.t_final = kDeterminismSteps * c.dt;
  c.output_every = kDeterminismSteps;
  const auto base = std::filesystem::temp_directory_path() / "mstumor_acceptance_determinism";
  std::vector<std::string> csv;
  for (const char *run : {"a", "b"}) {
    const auto dir = base / run;
    std::filesystem::remove_all(dir);
    stepper::RunOptions opts;
    opts.output_dir = dir.string();
    opts.keep_records = false;
    stepper::run(c, opts);
    csv.push_back(slurp(dir / "diagnostics.csv"));
  }
  std::filesystem::remove_all(base);
  const bool same = !csv[0].empty() && csv[0] == csv[1];
  return {same, std::to_string(kDeterminismSteps) + " steps, " + std::to_string(csv[0].size()) +
                    " bytes, " + (same ? "identical" : "different")};
}

struct Criterion {
  int id;
  const char *name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char **argv) {
  const std::vector<Criterion> all{
      {1, "prox oracle equivalence", prox_oracle},
      {2, "CKRS constants uniform in eps", ckrs_uniformity},
      {3, "interior barrier inequality", interior_barrier},
      {4, "nutrient maximum principle", nutrient_bounds},
      {5, "mass bookkeeping", mass_bookkeeping},
      {6, "mean confinement", confinement},
      {7, "energy identity order", energy_order},
      {8, "pressure compatibility", pressure_compatibility},
      {9, "eps continuation", continuation},
      {10, "determinism", determinism},
  };
  std::set<int> selected;
  for (int k = 1; k < argc; ++k) selected.insert(std::atoi(argv[k]));

  int failed = 0;
  for (const Criterion &c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
