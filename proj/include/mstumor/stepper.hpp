#pragma once

// First-order IMEX time stepping of the regularized tumor model, with the
// diagnostics that monitor mass bookkeeping and the energy balance.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mstumor/elliptic.hpp"
#include "mstumor/grid.hpp"
#include "mstumor/potential.hpp"
#include "mstumor/sources.hpp"

namespace mstumor::stepper {

using grid::Grid2D;
using grid::ScalarField;
using grid::VectorField;
using potential::SimplexPoint;

/// base + amplitude * (uniform noise in [-1, 1]), shifted so that the noise
/// has zero mean in each field.
struct UniformWithNoise {
  SimplexPoint base{0.3, 0.3};
  double amplitude = 1e-3;
  friend bool operator==(const UniformWithNoise &, const UniformWithNoise &) = default;
};

/// Two smoothed disks with their own (phi_p, phi_d) values on a background.
struct TwoBlobs {
  std::array<Vec2, 2> centers{Vec2{0.35, 0.5}, Vec2{0.65, 0.5}};
  std::array<double, 2> radii{0.15, 0.1};
  std::array<SimplexPoint, 2> values{SimplexPoint{0.6, 0.2}, SimplexPoint{0.3, 0.5}};
  SimplexPoint background{0.2, 0.2};
  double width = 0.02;
  friend bool operator==(const TwoBlobs &, const TwoBlobs &) = default;
};

/// CSV with ny rows of phi_p followed by ny rows of phi_d.
struct FromFile {
  std::string path;
  friend bool operator==(const FromFile &, const FromFile &) = default;
};

struct InitialSpec {
  std::variant<UniformWithNoise, TwoBlobs, FromFile> variant;
  friend bool operator==(const InitialSpec &, const InitialSpec &) = default;
};

/// Which Sigma box the inward check uses before a run.
enum class CheckBox {
  // Declared K bounds of the source model.
  Declared,
  // For linear growth: lambda_m * [mean g(n_min), 1], with n_min the
  // nutrient for phi_p = 1 (a lower bound for every state by comparison).
  MeanBound,
};

struct SimConfig {
  Grid2D grid;
  double dt = 1e-3;
  double t_final = 0.2;
  potential::PotentialSpec potential;
  double mobility_p = 0.01;
  double mobility_d = 0.01;
  sources::SourceModel source;
  sources::AdmissibleRegion region{sources::Disk{{0.2, 0.2}, 0.15}};
  // Helmholtz smoothing parameter; unset means h^2.
  std::optional<double> smoothing_delta;
  int output_every = 100;
  std::uint64_t seed = 1;
  InitialSpec initial;
  CheckBox check_box = CheckBox::MeanBound;
  double cfl_limit = 0.5;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  double delta() const;
  int n_steps() const;
  friend bool operator==(const SimConfig &, const SimConfig &) = default;
};

struct SimState {
  ScalarField phi_p, phi_d, mu_p, mu_d, q, n;
  VectorField u;
  double t = 0.0;
  int step = 0;
  // Explicit chemical potential parts grad F_eps + grad F1 at the current
  // phi, and the energy of the current phi; both cached for the next step.
  ScalarField psi_p, psi_d;
  double energy = 0.0;
  // Applied sources of the step that produced this state; div u = sum.
  ScalarField source_p, source_d;
};

struct DiagnosticsRecord {
  int step = 0;
  double t = 0.0;
  double energy = 0.0;
  double mean_p = 0.0, mean_d = 0.0;
  double min_p = 0.0, max_p = 0.0, min_d = 0.0, max_d = 0.0;
  double min_sum = 0.0, max_sum = 0.0;
  double min_n = 0.0, max_n = 0.0;
  double grad_mu_p_l2 = 0.0, grad_mu_d_l2 = 0.0;
  double u_l2 = 0.0;
  double energy_residual = 0.0;
  double mean_residual_p = 0.0, mean_residual_d = 0.0;
  int cg_iters_total = 0;

  // Not written to the CSV.
  Vec2 sigma_mean;   // mean of Sigma over the step
  Vec2 source_mean;  // mean of the applied source over the step
  double g_mean = 0.0;
  double cfl = 0.0;
  double max_abs_psi = 0.0;
  elliptic::SolveReport nutrient, cahn_hilliard, pressure;
};

/// Column names of the diagnostics CSV, in order.
const std::vector<std::string> &diagnostics_columns();
std::string diagnostics_csv_row(const DiagnosticsRecord &r);

/// Solves (I - delta Laplacian_N) f = f0. Mean preserving.
ScalarField smooth_initial(const ScalarField &f0, double delta);

struct InitialReport {
  Vec2 mean;
  double min_p = 0.0, min_d = 0.0, max_sum = 0.0;
  // Signed distance of the mean to the region boundary (negative inside).
  double region_distance = 0.0;
};

/// Realizes the initial fields (before smoothing) and validates them:
/// pointwise in the closed simplex and means in the interior of the region.
/// Throws ConfigError otherwise.
std::pair<ScalarField, ScalarField> realize_initial(const SimConfig &cfg, InitialReport *report = nullptr);

/// Box used by run() for the inward check (see CheckBox).
sources::KBox inward_check_box(const SimConfig &cfg);

class Simulation {
 public:
  explicit Simulation(const SimConfig &cfg);

  const SimConfig &config() const { return cfg_; }
  const SimState &state() const { return state_; }
  const DiagnosticsRecord &initial_record() const { return initial_; }
  const InitialReport &initial_report() const { return initial_report_; }

  /// Advances one step. Inner solver failures throw NumericalError naming
  /// the subsystem.
  DiagnosticsRecord step();

 private:
  SimConfig cfg_;
  elliptic::SpectralLaplacian spectral_;
  elliptic::SpectralLaplacian dirichlet_;
  Mat2 source_propagator_;
  SimState state_;
  DiagnosticsRecord initial_;
  InitialReport initial_report_;
};

/// Energy of (phi_p, phi_d); also fills the explicit potential gradients.
double energy(const ScalarField &phi_p, const ScalarField &phi_d,
              const potential::PotentialSpec &spec, ScalarField *psi_p = nullptr,
              ScalarField *psi_d = nullptr, double *max_abs_psi = nullptr);

struct RunOptions {
  // Empty: no files written.
  std::string output_dir;
  bool keep_records = true;
  std::function<void(const SimState &, const DiagnosticsRecord &)> on_step;
};

struct RunReport {
  sources::InwardVerdict inward;
  InitialReport initial;
  std::vector<DiagnosticsRecord> records;
  std::vector<std::string> files;
  int steps = 0;
  double wall_seconds = 0.0;
};

/// Checks the inward condition (HypothesisError if it fails), initializes and
/// steps to t_final, writing diagnostics.csv every step and field snapshots
/// every output_every steps when an output directory is given.
RunReport run(const SimConfig &cfg, const RunOptions &opts = {});

struct ContinuationRow {
  double epsilon = 0.0;
  double min_p = 0.0, max_p = 0.0, min_d = 0.0, max_d = 0.0;
  double min_sum = 0.0, max_sum = 0.0;
  double overshoot = 0.0;  // max(0, -min phi_p) over the run
  double max_abs_psi = 0.0;
};

struct ContinuationTable {
  std::vector<ContinuationRow> rows;
  // distances[k] = space-time L2 distance between runs k and k+1 (phi_p).
  std::vector<double> distances;
  std::vector<double> ratios;
  int steps = 0;
};

/// Runs the scenario for each epsilon (strictly decreasing, in (0, 1)) in
/// lockstep and accumulates the distances on the fly.
ContinuationTable continuation_study(const SimConfig &cfg, const std::vector<double> &eps_list);

}  // namespace mstumor::stepper
