// Command-line driver: simulate, check-region, mean-ode and continuation.
//
// Exit codes: 0 success, 2 configuration error, 3 hypothesis violation,
// 4 numerical failure, 1 anything else.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mstumor/config.hpp"
#include "mstumor/errors.hpp"
#include "mstumor/grid.hpp"
#include "mstumor/sources.hpp"
#include "mstumor/stepper.hpp"

#ifndef MSTUMOR_VERSION
#define MSTUMOR_VERSION "unknown"
#endif

using namespace mstumor;
using nlohmann::json;

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitHypothesis = 3;
constexpr int kExitNumerical = 4;

std::string output_dir(const std::string &flag) {
  if (!flag.empty()) return flag;
  if (const char *env = std::getenv("MSTUMOR_OUTPUT_DIR"); env && *env) return env;
  return "mstumor_output";
}

json vec_json(Vec2 v) { return json::array({v.p, v.d}); }

json inward_json(const sources::InwardVerdict &v) {
  return {{"holds", v.holds},
          {"worst_margin", v.worst_margin},
          {"witness", vec_json(v.witness)},
          {"witness_sigma", vec_json(v.witness_sigma)},
          {"sigma_box", {v.box.p_lo, v.box.p_hi, v.box.d_lo, v.box.d_hi}},
          {"samples", v.samples}};
}

json initial_json(const stepper::InitialReport &r) {
  return {{"valid", true},
          {"mean", vec_json(r.mean)},
          {"min_p", r.min_p},
          {"min_d", r.min_d},
          {"max_sum", r.max_sum},
          {"region_signed_distance", r.region_distance}};
}

// Writes next to the target and renames, so readers never see a partial file.
void write_atomically(const fs::path &path, const std::string &text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw Error("cannot open " + tmp.string() + " for writing");
    os << text;
    os.flush();
    if (!os) throw Error("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_manifest(const fs::path &dir, const std::string &command, const stepper::SimConfig &cfg,
                    json verdicts, std::vector<std::string> files, double wall_seconds,
                    json extra = json::object()) {
  const std::string cfg_text = config::write_config(cfg);
  write_atomically(dir / "config.cfg", cfg_text);
  files.push_back("config.cfg");
  json m = {{"command", command},
            {"code_version", MSTUMOR_VERSION},
            {"config", cfg_text},
            {"wall_seconds", wall_seconds},
            {"files", files},
            {"verdicts", std::move(verdicts)}};
  for (auto &[k, v] : extra.items()) m[k] = v;
  write_atomically(dir / "manifest.json", m.dump(2) + "\n");
}

std::string fmt(double v) { return grid::format_double(v); }

int cmd_simulate(const std::string &cfg_path, const std::string &out_flag) {
  const stepper::SimConfig cfg = config::parse_config(cfg_path);
  const fs::path dir = output_dir(out_flag);
  stepper::RunOptions opts;
  opts.output_dir = dir.string();
  opts.keep_records = false;
  const int total = cfg.n_steps();
  opts.on_step = [total](const stepper::SimState &s, const stepper::DiagnosticsRecord &r) {
    if (total >= 10 && s.step % (total / 10) == 0 && s.step > 0)
      std::cerr << "step " << s.step << "/" << total << "  t=" << fmt(r.t) << "  E=" << fmt(r.energy)
                << "\n";
  };
  const stepper::RunReport rep = stepper::run(cfg, opts);
  write_manifest(dir, "simulate", cfg,
                 {{"check_inward", inward_json(rep.inward)}, {"initial_data", initial_json(rep.initial)}},
                 rep.files, rep.wall_seconds, {{"steps", rep.steps}});
  std::cout << "wrote " << rep.files.size() << " files to " << dir.string() << " (" << rep.steps
            << " steps, " << fmt(rep.wall_seconds) << " s)\n";
  return 0;
}

int cmd_check_region(const std::string &cfg_path) {
  const stepper::SimConfig cfg = config::parse_config(cfg_path);
  const sources::InwardVerdict v =
      sources::check_inward(cfg.source, cfg.region, sources::kDefaultBoundarySamples,
                            stepper::inward_check_box(cfg));
  const sources::ConfinementBounds b = sources::confinement_bounds(cfg.region);
  std::cout << "source:        " << sources::describe(cfg.source) << "\n"
            << "region:        " << sources::describe(cfg.region) << "\n"
            << "sigma box:     [" << fmt(v.box.p_lo) << ", " << fmt(v.box.p_hi) << "] x ["
            << fmt(v.box.d_lo) << ", " << fmt(v.box.d_hi) << "]\n"
            << "worst margin:  " << fmt(v.worst_margin) << " at (" << fmt(v.witness.p) << ", "
            << fmt(v.witness.d) << ")\n"
            << "confinement:   c1 = " << fmt(b.c1) << ", c2 = " << fmt(b.c2) << "\n"
            << "inward:        " << (v.holds ? "holds" : "FAILS") << "\n";
  return v.holds ? 0 : kExitHypothesis;
}

Vec2 surrogate_sigma(const sources::SourceModel &model, double g_mean) {
  return std::visit(
      [&](const auto &m) -> Vec2 {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, sources::LinearGrowth>)
          return {m.lambda_m * g_mean, 0.0};
        else if constexpr (std::is_same_v<T, sources::CenteredDecay>)
          return {m.lambda / 3.0, m.lambda / 3.0};
        else
          return m.sigma_base;
      },
      model.variant);
}

int cmd_mean_ode(const std::string &cfg_path, double t_final, double g_mean, int every) {
  const stepper::SimConfig cfg = config::parse_config(cfg_path);
  if (!(t_final >= 0.0)) throw ConfigError("--t-final must be nonnegative");
  if (every < 1) throw ConfigError("--every must be at least 1");
  stepper::InitialReport init;
  stepper::realize_initial(cfg, &init);
  const Vec2 sigma = surrogate_sigma(cfg.source, g_mean);
  sources::MeanState y{init.mean.p, init.mean.d, 0.0};
  const int steps = static_cast<int>(std::ceil(t_final / cfg.dt - 1e-9));
  double worst = cfg.region.signed_distance(y.vec());
  std::cout << "t,y_p,y_d,region_signed_distance\n";
  auto emit = [&] {
    std::cout << fmt(y.t) << ',' << fmt(y.y_p) << ',' << fmt(y.y_d) << ','
              << fmt(cfg.region.signed_distance(y.vec())) << '\n';
  };
  emit();
  for (int k = 1; k <= steps; ++k) {
    y = sources::mean_ode_step(y, cfg.source, sigma, cfg.dt);
    y.t = k * cfg.dt;
    worst = std::max(worst, cfg.region.signed_distance(y.vec()));
    if (k % every == 0 || k == steps) emit();
  }
  std::cerr << "sigma mean (" << fmt(sigma.p) << ", " << fmt(sigma.d)
            << "), worst signed distance to the region " << fmt(worst) << "\n";
  return 0;
}

int cmd_continuation(const std::string &cfg_path, const std::vector<double> &eps,
                     const std::string &out_flag) {
  const stepper::SimConfig cfg = config::parse_config(cfg_path);
  const auto t0 = std::chrono::steady_clock::now();
  const stepper::ContinuationTable t = stepper::continuation_study(cfg, eps);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::ostringstream csv;
  csv << "epsilon,min_p,max_p,min_d,max_d,min_sum,max_sum,overshoot,max_abs_psi,distance_to_next\n";
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const auto &r = t.rows[k];
    csv << fmt(r.epsilon) << ',' << fmt(r.min_p) << ',' << fmt(r.max_p) << ',' << fmt(r.min_d) << ','
        << fmt(r.max_d) << ',' << fmt(r.min_sum) << ',' << fmt(r.max_sum) << ',' << fmt(r.overshoot)
        << ',' << fmt(r.max_abs_psi) << ',' << (k < t.distances.size() ? fmt(t.distances[k]) : "")
        << '\n';
  }
  std::cout << csv.str();
  for (std::size_t k = 0; k < t.ratios.size(); ++k)
    std::cout << "ratio d" << k + 1 << "/d" << k << " = " << fmt(t.ratios[k]) << "\n";

  const fs::path dir = output_dir(out_flag);
  fs::create_directories(dir);
  write_atomically(dir / "continuation.csv", csv.str());
  write_manifest(dir, "continuation", cfg, json::object(), {"continuation.csv"}, wall,
                 {{"epsilons", eps}, {"distances", t.distances}, {"steps", t.steps}});
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Multi-species Cahn-Hilliard-Darcy tumor growth simulator"};
  app.set_version_flag("--version", MSTUMOR_VERSION);
  app.require_subcommand(1);

  std::string cfg_path, out_flag;
  double t_final = 1.0, g_mean = 1.0;
  int every = 1;
  std::vector<double> eps{0.1, 0.05, 0.025};

  auto *sim = app.add_subcommand("simulate", "Run a simulation and write diagnostics and snapshots");
  sim->add_option("config", cfg_path, "Configuration file")->required();
  sim->add_option("-o,--output", out_flag, "Output directory (default: $MSTUMOR_OUTPUT_DIR or ./mstumor_output)");

  auto *chk = app.add_subcommand("check-region", "Check the inward-pointing condition for the configured region");
  chk->add_option("config", cfg_path, "Configuration file")->required();

  auto *ode = app.add_subcommand("mean-ode", "Integrate the mean-value ODE with a constant source mean");
  ode->add_option("config", cfg_path, "Configuration file")->required();
  ode->add_option("--t-final", t_final, "Final time")->required();
  ode->add_option("--g-mean", g_mean, "Spatial mean of g(n) for linear growth (default 1)");
  ode->add_option("--every", every, "Print every k-th step (default 1)");

  auto *cont = app.add_subcommand("continuation", "Run the scenario for decreasing epsilon and compare");
  cont->add_option("config", cfg_path, "Configuration file")->required();
  cont->add_option("--eps", eps, "Comma-separated decreasing epsilon values")->delimiter(',');
  cont->add_option("-o,--output", out_flag, "Output directory (default: $MSTUMOR_OUTPUT_DIR or ./mstumor_output)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*sim) return cmd_simulate(cfg_path, out_flag);
    if (*chk) return cmd_check_region(cfg_path);
    if (*ode) return cmd_mean_ode(cfg_path, t_final, g_mean, every);
    if (*cont) return cmd_continuation(cfg_path, eps, out_flag);
  } catch (const ConfigError &e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const HypothesisError &e) {
    std::cerr << "hypothesis violated: " << e.what() << "\n";
    return kExitHypothesis;
  } catch (const NumericalError &e) {
    std::cerr << "numerical failure in " << e.subsystem() << ": " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
