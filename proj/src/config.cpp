#include "mstumor/config.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "mstumor/errors.hpp"

namespace mstumor::config {

using potential::SimplexPoint;
using stepper::CheckBox;
using stepper::FromFile;
using stepper::TwoBlobs;
using stepper::UniformWithNoise;

namespace {

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Entry {
  std::string value;
  int line = 0;
  bool used = false;
};

const std::vector<std::string> kSections{"grid",   "time",   "potential", "mobility",
                                         "source", "region", "initial",   "output"};

class Document {
 public:
  Document(const std::string &text, std::string source) : source_(std::move(source)) {
    std::istringstream is(text);
    std::string raw, section;
    int lineno = 0;
    while (std::getline(is, raw)) {
      ++lineno;
      const std::string line = trim(raw.substr(0, raw.find('#')));
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') fail(lineno, "malformed section header '" + line + "'");
        section = trim(line.substr(1, line.size() - 2));
        if (std::find(kSections.begin(), kSections.end(), section) == kSections.end())
          fail(lineno, "unknown section [" + section + "]");
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) fail(lineno, "expected 'key = value', got '" + line + "'");
      if (section.empty()) fail(lineno, "key outside of any section");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty()) fail(lineno, "empty key");
      if (value.empty()) fail(lineno, "empty value for '" + key + "'");
      auto &slot = entries_[section + "." + key];
      if (slot.line) fail(lineno, "duplicate key '" + section + "." + key + "' (first on line " +
                                      std::to_string(slot.line) + ")");
      slot = {value, lineno, false};
    }
  }

  [[noreturn]] void fail(int line, const std::string &what) const {
    throw ConfigError(source_ + ":" + std::to_string(line) + ": " + what);
  }

  const Entry *find(const std::string &key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return nullptr;
    it->second.used = true;
    return &it->second;
  }

  void number(const std::string &key, double &out) {
    if (const Entry *e = find(key)) out = parse_double(*e, e->value, key);
  }

  template <class Int>
  void integer(const std::string &key, Int &out) {
    const Entry *e = find(key);
    if (!e) return;
    Int v{};
    const char *first = e->value.data(), *last = first + e->value.size();
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last)
      fail(e->line, key + ": expected an integer, got '" + e->value + "'");
    out = v;
  }

  void boolean(const std::string &key, bool &out) {
    const Entry *e = find(key);
    if (!e) return;
    if (e->value == "true")
      out = true;
    else if (e->value == "false")
      out = false;
    else
      fail(e->line, key + ": expected true or false, got '" + e->value + "'");
  }

  void list(const std::string &key, std::size_t count, double *out) {
    const Entry *e = find(key);
    if (!e) return;
    std::vector<double> v;
    std::stringstream ss(e->value);
    std::string item;
    while (std::getline(ss, item, ',')) v.push_back(parse_double(*e, trim(item), key));
    if (v.size() != count)
      fail(e->line, key + ": expected " + std::to_string(count) + " comma-separated numbers, got " +
                        std::to_string(v.size()));
    std::copy(v.begin(), v.end(), out);
  }

  void pair(const std::string &key, Vec2 &out) {
    double v[2] = {out.p, out.d};
    list(key, 2, v);
    out = {v[0], v[1]};
  }

  void point(const std::string &key, SimplexPoint &out) {
    double v[2] = {out.s, out.r};
    list(key, 2, v);
    out = {v[0], v[1]};
  }

  std::string word(const std::string &key, const std::string &fallback) {
    const Entry *e = find(key);
    return e ? e->value : fallback;
  }

  int line_of(const std::string &key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second.line;
  }

  /// Keys of `section` outside `allowed` are rejected, naming `context`.
  void restrict(const std::string &section, const std::vector<std::string> &allowed,
                const std::string &context) const {
    for (const auto &[key, e] : entries_) {
      if (key.rfind(section + ".", 0) != 0) continue;
      const std::string name = key.substr(section.size() + 1);
      if (std::find(allowed.begin(), allowed.end(), name) == allowed.end())
        fail(e.line, "unknown key '" + key + "'" + (context.empty() ? "" : " for " + context));
    }
  }

  void finish() const {
    for (const auto &[key, e] : entries_)
      if (!e.used) fail(e.line, "unknown key '" + key + "'");
  }

 private:
  double parse_double(const Entry &e, const std::string &text, const std::string &key) const {
    double v = 0.0;
    const char *first = text.data(), *last = first + text.size();
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last)
      fail(e.line, key + ": expected a number, got '" + text + "'");
    return v;
  }

  std::string source_;
  std::map<std::string, Entry> entries_;
};

const std::vector<std::string> kPerturbationKeys{"perturbation_amplitude", "perturbation_wave",
                                                 "perturbation_phase_p", "perturbation_phase_d"};

void read_perturbation(Document &doc, sources::Perturbation &p) {
  doc.number("source.perturbation_amplitude", p.amplitude);
  doc.list("source.perturbation_wave", 3, p.wave.data());
  doc.number("source.perturbation_phase_p", p.phase_p);
  doc.number("source.perturbation_phase_d", p.phase_d);
}

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string> &b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

void read_source(Document &doc, SimConfig &c) {
  const std::string model = doc.word("source.model", "linear_growth");
  if (model == "linear_growth") {
    doc.restrict("source", {"model", "lambda_m", "lambda_a", "lambda_l", "n_c"}, "model = linear_growth");
    sources::LinearGrowth m;
    doc.number("source.lambda_m", m.lambda_m);
    doc.number("source.lambda_a", m.lambda_a);
    doc.number("source.lambda_l", m.lambda_l);
    doc.number("source.n_c", m.n_c);
    c.source = {m};
  } else if (model == "centered_decay") {
    doc.restrict("source", with({"model", "lambda", "k_bound"}, kPerturbationKeys),
                 "model = centered_decay");
    sources::CenteredDecay m;
    doc.number("source.lambda", m.lambda);
    doc.number("source.k_bound", m.k_bound);
    read_perturbation(doc, m.sigma0);
    c.source = {m};
  } else if (model == "custom") {
    doc.restrict("source", with({"model", "matrix", "sigma_base", "k_box"}, kPerturbationKeys),
                 "model = custom");
    sources::Custom m;
    double mat[4] = {0, 0, 0, 0};
    doc.list("source.matrix", 4, mat);
    m.matrix = {mat[0], mat[1], mat[2], mat[3]};
    doc.pair("source.sigma_base", m.sigma_base);
    double box[4] = {0, 0, 0, 0};
    doc.list("source.k_box", 4, box);
    m.k_box = {box[0], box[1], box[2], box[3]};
    read_perturbation(doc, m.perturbation);
    c.source = {m};
  } else {
    doc.fail(doc.line_of("source.model"),
             "source.model: expected linear_growth, centered_decay or custom, got '" + model + "'");
  }
}

void read_region(Document &doc, SimConfig &c) {
  const std::string check = doc.word("region.check_box", "mean_bound");
  if (check == "mean_bound")
    c.check_box = CheckBox::MeanBound;
  else if (check == "declared")
    c.check_box = CheckBox::Declared;
  else
    doc.fail(doc.line_of("region.check_box"),
             "region.check_box: expected mean_bound or declared, got '" + check + "'");

  const std::string shape = doc.word("region.shape", "disk");
  if (shape == "disk") {
    doc.restrict("region", {"shape", "check_box", "center", "center_g_mean", "radius"}, "shape = disk");
    sources::Disk d = std::get_if<sources::Disk>(&c.region.variant)
                          ? std::get<sources::Disk>(c.region.variant)
                          : sources::Disk{};
    doc.number("region.radius", d.radius);
    double g_mean = 1.0;
    doc.number("region.center_g_mean", g_mean);
    const Entry *center = doc.find("region.center");
    if (center && center->value == "fixed_point") {
      const auto *lg = std::get_if<sources::LinearGrowth>(&c.source.variant);
      if (!lg) doc.fail(center->line, "region.center = fixed_point requires model = linear_growth");
      d.center = SimplexPoint::from(sources::fixed_point(*lg, g_mean));
    } else {
      if (doc.line_of("region.center_g_mean"))
        doc.fail(doc.line_of("region.center_g_mean"),
                 "region.center_g_mean only applies with center = fixed_point");
      doc.point("region.center", d.center);
    }
    c.region = {d};
  } else if (shape == "shrunken_simplex") {
    doc.restrict("region", {"shape", "check_box", "margin", "corner_rounding"},
                 "shape = shrunken_simplex");
    sources::ShrunkenSimplex t;
    doc.number("region.margin", t.margin);
    doc.number("region.corner_rounding", t.corner_rounding);
    c.region = {t};
  } else {
    doc.fail(doc.line_of("region.shape"),
             "region.shape: expected disk or shrunken_simplex, got '" + shape + "'");
  }
}

void read_initial(Document &doc, SimConfig &c, const std::filesystem::path &base_dir) {
  const std::vector<std::string> common{"kind", "smoothing_delta", "seed"};
  if (doc.line_of("initial.smoothing_delta")) {
    double delta = 0.0;
    doc.number("initial.smoothing_delta", delta);
    c.smoothing_delta = delta;
  }
  doc.integer("initial.seed", c.seed);
  const std::string kind = doc.word("initial.kind", "uniform_noise");
  if (kind == "uniform_noise") {
    doc.restrict("initial", with(common, {"base", "amplitude"}), "kind = uniform_noise");
    UniformWithNoise u;
    doc.point("initial.base", u.base);
    doc.number("initial.amplitude", u.amplitude);
    c.initial = {u};
  } else if (kind == "two_blobs") {
    doc.restrict("initial", with(common, {"centers", "radii", "values", "background", "width"}),
                 "kind = two_blobs");
    TwoBlobs b;
    double centers[4] = {b.centers[0].p, b.centers[0].d, b.centers[1].p, b.centers[1].d};
    doc.list("initial.centers", 4, centers);
    b.centers = {Vec2{centers[0], centers[1]}, Vec2{centers[2], centers[3]}};
    doc.list("initial.radii", 2, b.radii.data());
    double values[4] = {b.values[0].s, b.values[0].r, b.values[1].s, b.values[1].r};
    doc.list("initial.values", 4, values);
    b.values = {SimplexPoint{values[0], values[1]}, SimplexPoint{values[2], values[3]}};
    doc.point("initial.background", b.background);
    doc.number("initial.width", b.width);
    c.initial = {b};
  } else if (kind == "file") {
    doc.restrict("initial", with(common, {"path"}), "kind = file");
    FromFile f;
    f.path = doc.word("initial.path", "");
    if (f.path.empty()) doc.fail(doc.line_of("initial.kind"), "initial.path is required for kind = file");
    std::filesystem::path p(f.path);
    if (p.is_relative() && !base_dir.empty()) f.path = (base_dir / p).lexically_normal().string();
    c.initial = {f};
  } else {
    doc.fail(doc.line_of("initial.kind"),
             "initial.kind: expected uniform_noise, two_blobs or file, got '" + kind + "'");
  }
}

SimConfig parse(const std::string &text, const std::string &source,
                const std::filesystem::path &base_dir) {
  Document doc(text, source);
  SimConfig c;
  doc.integer("grid.nx", c.grid.nx);
  doc.integer("grid.ny", c.grid.ny);
  doc.number("grid.lx", c.grid.lx);
  doc.number("grid.ly", c.grid.ly);
  doc.number("time.dt", c.dt);
  doc.number("time.t_final", c.t_final);
  doc.number("time.cfl_limit", c.cfl_limit);
  doc.number("potential.epsilon", c.potential.epsilon);
  doc.number("potential.chi", c.potential.chi);
  doc.boolean("potential.offset_log3", c.potential.offset_log3);
  doc.number("mobility.m_p", c.mobility_p);
  doc.number("mobility.m_d", c.mobility_d);
  read_source(doc, c);
  read_region(doc, c);
  read_initial(doc, c, base_dir);
  doc.integer("output.every", c.output_every);
  doc.finish();
  try {
    c.validate();
    stepper::realize_initial(c);
  } catch (const ConfigError &e) {
    throw ConfigError(source + ": " + e.what());
  }
  return c;
}

std::string num(double v) { return grid::format_double(v); }

std::string nums(std::initializer_list<double> vs) {
  std::string s;
  for (double v : vs) {
    if (!s.empty()) s += ", ";
    s += num(v);
  }
  return s;
}

void write_perturbation(std::ostream &os, const sources::Perturbation &p) {
  os << "perturbation_amplitude = " << num(p.amplitude) << '\n'
     << "perturbation_wave = " << nums({p.wave[0], p.wave[1], p.wave[2]}) << '\n'
     << "perturbation_phase_p = " << num(p.phase_p) << '\n'
     << "perturbation_phase_d = " << num(p.phase_d) << '\n';
}

}  // namespace

SimConfig parse_config(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str(), path, std::filesystem::path(path).parent_path());
}

SimConfig parse_config_string(const std::string &text, const std::string &source) {
  return parse(text, source, {});
}

std::string write_config(const SimConfig &c) {
  std::ostringstream os;
  os << "[grid]\n"
     << "nx = " << c.grid.nx << "\nny = " << c.grid.ny << "\nlx = " << num(c.grid.lx)
     << "\nly = " << num(c.grid.ly) << "\n\n";
  os << "[time]\n"
     << "dt = " << num(c.dt) << "\nt_final = " << num(c.t_final)
     << "\ncfl_limit = " << num(c.cfl_limit) << "\n\n";
  os << "[potential]\n"
     << "epsilon = " << num(c.potential.epsilon) << "\nchi = " << num(c.potential.chi)
     << "\noffset_log3 = " << (c.potential.offset_log3 ? "true" : "false") << "\n\n";
  os << "[mobility]\n"
     << "m_p = " << num(c.mobility_p) << "\nm_d = " << num(c.mobility_d) << "\n\n";

  os << "[source]\n";
  std::visit(
      [&](const auto &m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, sources::LinearGrowth>) {
          os << "model = linear_growth\nlambda_m = " << num(m.lambda_m)
             << "\nlambda_a = " << num(m.lambda_a) << "\nlambda_l = " << num(m.lambda_l)
             << "\nn_c = " << num(m.n_c) << '\n';
        } else if constexpr (std::is_same_v<T, sources::CenteredDecay>) {
          os << "model = centered_decay\nlambda = " << num(m.lambda)
             << "\nk_bound = " << num(m.k_bound) << '\n';
          write_perturbation(os, m.sigma0);
        } else {
          os << "model = custom\nmatrix = "
             << nums({m.matrix.pp, m.matrix.pd, m.matrix.dp, m.matrix.dd})
             << "\nsigma_base = " << nums({m.sigma_base.p, m.sigma_base.d})
             << "\nk_box = " << nums({m.k_box.p_lo, m.k_box.p_hi, m.k_box.d_lo, m.k_box.d_hi})
             << '\n';
          write_perturbation(os, m.perturbation);
        }
      },
      c.source.variant);

  os << "\n[region]\n"
     << "check_box = " << (c.check_box == CheckBox::MeanBound ? "mean_bound" : "declared") << '\n';
  std::visit(
      [&](const auto &r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, sources::Disk>)
          os << "shape = disk\ncenter = " << nums({r.center.s, r.center.r})
             << "\nradius = " << num(r.radius) << '\n';
        else
          os << "shape = shrunken_simplex\nmargin = " << num(r.margin)
             << "\ncorner_rounding = " << num(r.corner_rounding) << '\n';
      },
      c.region.variant);

  os << "\n[initial]\n";
  if (c.smoothing_delta) os << "smoothing_delta = " << num(*c.smoothing_delta) << '\n';
  os << "seed = " << c.seed << '\n';
  std::visit(
      [&](const auto &init) {
        using T = std::decay_t<decltype(init)>;
        if constexpr (std::is_same_v<T, UniformWithNoise>) {
          os << "kind = uniform_noise\nbase = " << nums({init.base.s, init.base.r})
             << "\namplitude = " << num(init.amplitude) << '\n';
        } else if constexpr (std::is_same_v<T, TwoBlobs>) {
          os << "kind = two_blobs\ncenters = "
             << nums({init.centers[0].p, init.centers[0].d, init.centers[1].p, init.centers[1].d})
             << "\nradii = " << nums({init.radii[0], init.radii[1]}) << "\nvalues = "
             << nums({init.values[0].s, init.values[0].r, init.values[1].s, init.values[1].r})
             << "\nbackground = " << nums({init.background.s, init.background.r})
             << "\nwidth = " << num(init.width) << '\n';
        } else {
          os << "kind = file\npath = " << init.path << '\n';
        }
      },
      c.initial.variant);

  os << "\n[output]\nevery = " << c.output_every << '\n';
  return os.str();
}

}  // namespace mstumor::config
