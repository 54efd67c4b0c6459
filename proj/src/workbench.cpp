#include "mlpt/workbench.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "mlpt/background.hpp"
#include "mlpt/bem.hpp"
#include "mlpt/disks.hpp"
#include "mlpt/errors.hpp"

namespace mlpt {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

using nlohmann::json;

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  fail(ErrorCode::ConfigError, path + ": " + what);
}

const json& member(const json& j, const std::string& path, const char* key) {
  if (!j.is_object()) bad(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) bad(path + "." + key, "missing");
  return *it;
}

double num(const json& j, const std::string& path) {
  if (!j.is_number()) bad(path, "expected a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) bad(path, "expected an integer");
  return j.get<int>();
}

double num_or(const json& j, const std::string& path, const char* key, double dflt) {
  if (!j.is_object()) bad(path, "expected an object");
  auto it = j.find(key);
  return it == j.end() ? dflt : num(*it, path + "." + key);
}

int int_or(const json& j, const std::string& path, const char* key, int dflt) {
  if (!j.is_object()) bad(path, "expected an object");
  auto it = j.find(key);
  return it == j.end() ? dflt : integer(*it, path + "." + key);
}

bool bool_or(const json& j, const std::string& path, const char* key, bool dflt) {
  auto it = j.find(key);
  if (it == j.end()) return dflt;
  if (!it->is_boolean()) bad(path + "." + key, "expected a boolean");
  return it->get<bool>();
}

std::vector<double> num_list(const json& j, const std::string& path) {
  if (!j.is_array()) bad(path, "expected an array of numbers");
  std::vector<double> out;
  for (size_t i = 0; i < j.size(); ++i)
    out.push_back(num(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<int> int_list(const json& j, const std::string& path) {
  if (!j.is_array()) bad(path, "expected an array of integers");
  std::vector<int> out;
  for (size_t i = 0; i < j.size(); ++i)
    out.push_back(integer(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

Point2 point_at(const json& j, const std::string& path) {
  std::vector<double> v = num_list(j, path);
  if (v.size() != 2) bad(path, "expected [x, y]");
  return {v[0], v[1]};
}

SmoothCurve curve_at(const json& j, const std::string& path) {
  if (!j.is_object()) bad(path, "expected a curve object");
  std::string type = j.value("type", "trig");
  if (type == "circle") {
    double radius = num(member(j, path, "radius"), path + ".radius");
    Point2 c = j.contains("center") ? point_at(j["center"], path + ".center")
                                    : Point2{0.0, 0.0};
    return SmoothCurve::circle(radius, c);
  }
  if (type == "ellipse") {
    double a = num(member(j, path, "a"), path + ".a");
    double b = num(member(j, path, "b"), path + ".b");
    Point2 c = j.contains("center") ? point_at(j["center"], path + ".center")
                                    : Point2{0.0, 0.0};
    double rot = num_or(j, path, "rotation", 0.0);
    return SmoothCurve::ellipse(a, b, c, rot);
  }
  if (type == "trig") {
    SmoothCurve c;
    c.cos_x = num_list(member(j, path, "cos_x"), path + ".cos_x");
    c.cos_y = num_list(member(j, path, "cos_y"), path + ".cos_y");
    if (j.contains("sin_x")) c.sin_x = num_list(j["sin_x"], path + ".sin_x");
    if (j.contains("sin_y")) c.sin_y = num_list(j["sin_y"], path + ".sin_y");
    c.sin_x.resize(std::max(c.sin_x.size(), c.cos_x.size()), 0.0);
    c.sin_y.resize(std::max(c.sin_y.size(), c.cos_y.size()), 0.0);
    return c;
  }
  bad(path + ".type", "unknown curve type '" + type + "'");
}

// Largest distance from `from` to any interface point (dense parameter scan).
double extent_from(const LayeredShape& shape, Point2 from) {
  double ext = 0.0;
  const int samples = 720;
  for (const SmoothCurve& c : shape.curves)
    for (int i = 0; i < samples; ++i) {
      Point2 p = c.point(kTwoPi * double(i) / double(samples));
      ext = std::max(ext, std::hypot(p[0] - from[0], p[1] - from[1]));
    }
  return ext;
}

// Deterministic standard normals: explicit Box-Muller over mt19937_64 draws,
// so the stream depends only on the seed, not on library internals.
std::vector<double> gaussian_noise(size_t count, unsigned long long seed) {
  std::mt19937_64 gen(seed);
  auto unit = [&]() { return double(gen() >> 11) * 0x1.0p-53; };
  std::vector<double> out(count);
  for (size_t i = 0; i < count; i += 2) {
    double u1 = 1.0 - unit();  // (0, 1]
    double u2 = unit();
    double rad = std::sqrt(-2.0 * std::log(u1));
    out[i] = rad * std::cos(kTwoPi * u2);
    if (i + 1 < count) out[i + 1] = rad * std::sin(kTwoPi * u2);
  }
  return out;
}

json point_json(Point2 p) { return json::array({p[0], p[1]}); }

json background_to_json(const HarmonicBackground& bg) {
  json terms = json::array();
  for (int n = 1; n <= bg.max_order(); ++n) {
    Complex a = bg.coeff(n);
    if (a == Complex(0.0, 0.0)) continue;
    terms.push_back({{"n", n}, {"ac", a.real()}, {"as", -a.imag()}});
  }
  return json{{"constant", bg.constant}, {"terms", terms}};
}

HarmonicBackground background_from_json(const json& j, const std::string& path) {
  HarmonicBackground bg;
  bg.constant = num_or(j, path, "constant", 0.0);
  if (!j.contains("terms")) return bg;
  const json& terms = j["terms"];
  if (!terms.is_array()) bad(path + ".terms", "expected an array");
  for (size_t i = 0; i < terms.size(); ++i) {
    std::string tp = path + ".terms[" + std::to_string(i) + "]";
    int n = integer(member(terms[i], tp, "n"), tp + ".n");
    if (n < 1) bad(tp + ".n", "order must be >= 1");
    double ac = num_or(terms[i], tp, "ac", 0.0);
    double as = num_or(terms[i], tp, "as", 0.0);
    if (size_t(n) > bg.coeffs.size()) bg.coeffs.resize(size_t(n), Complex(0.0, 0.0));
    bg.coeffs[size_t(n) - 1] += Complex(ac, -as);
  }
  return bg;
}

std::string line_col(const std::string& text, size_t byte) {
  size_t line = 1, col = 1;
  for (size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) fail(ErrorCode::ConfigError, "config root must be an object");
  ExperimentConfig cfg;

  cfg.has_disks = j.contains("structure");
  cfg.has_shape = j.contains("shape");
  if (cfg.has_disks == cfg.has_shape)
    fail(ErrorCode::ConfigError,
         "config must contain exactly one of 'structure' (disks) or 'shape'");

  if (cfg.has_disks) {
    const json& s = j["structure"];
    cfg.disks.radii = num_list(member(s, "structure", "radii"), "structure.radii");
    cfg.disks.sigmas = num_list(member(s, "structure", "sigmas"), "structure.sigmas");
    cfg.disks.center = s.contains("center")
                           ? point_at(s["center"], "structure.center")
                           : Point2{0.0, 0.0};
    require_valid(cfg.disks);
  } else {
    const json& s = j["shape"];
    const json& curves = member(s, "shape", "curves");
    if (!curves.is_array() || curves.empty())
      bad("shape.curves", "expected a non-empty array");
    for (size_t i = 0; i < curves.size(); ++i)
      cfg.shape.curves.push_back(
          curve_at(curves[i], "shape.curves[" + std::to_string(i) + "]"));
    cfg.shape.sigmas = num_list(member(s, "shape", "sigmas"), "shape.sigmas");
    cfg.nodes_per_curve = int_or(s, "shape", "nodes_per_curve", 256);
    require_valid(cfg.shape);
  }

  cfg.background =
      background_from_json(member(j, "config", "background"), "background");

  const json& meas = member(j, "config", "measurement");
  cfg.measurement.kind = meas.value("kind", "circle");
  if (cfg.measurement.kind != "circle" && cfg.measurement.kind != "arc")
    bad("measurement.kind", "expected 'circle' or 'arc'");
  cfg.measurement.radius = num(member(meas, "measurement", "radius"),
                               "measurement.radius");
  cfg.measurement.count = integer(member(meas, "measurement", "count"),
                                  "measurement.count");
  cfg.measurement.theta0 = num_or(meas, "measurement", "theta0", 0.0);
  cfg.measurement.theta1 = num_or(meas, "measurement", "theta1",
                                  cfg.measurement.kind == "arc" ? std::numbers::pi
                                                                : 0.0);
  cfg.measurement.center = meas.contains("center")
                               ? point_at(meas["center"], "measurement.center")
                               : Point2{0.0, 0.0};
  if (cfg.measurement.count < (cfg.measurement.kind == "arc" ? 2 : 4))
    bad("measurement.count", "too few sample points");
  if (!(cfg.measurement.radius > 0.0)) bad("measurement.radius", "must be > 0");
  if (cfg.measurement.kind == "arc" &&
      !(cfg.measurement.theta1 > cfg.measurement.theta0))
    bad("measurement.theta1", "arc range must have theta1 > theta0");

  if (j.contains("noise")) {
    const json& noise = j["noise"];
    cfg.noise.level = num_or(noise, "noise", "level", 0.0);
    if (cfg.noise.level < 0.0) bad("noise.level", "must be >= 0");
    if (noise.contains("seed")) {
      if (!noise["seed"].is_number_integer()) bad("noise.seed", "expected an integer");
      cfg.noise.seed = noise["seed"].get<long long>();
    }
    if (cfg.noise.level > 0.0 && cfg.noise.seed < 0)
      bad("noise.seed", "a seed is required whenever noise.level > 0");
  }

  if (j.contains("inversion")) {
    const json& inv = j["inversion"];
    cfg.inversion.layers = int_or(inv, "inversion", "layers", 1);
    cfg.inversion.n_max = int_or(inv, "inversion", "nmax", 20);
    if (inv.contains("orders"))
      cfg.inversion.orders = int_list(inv["orders"], "inversion.orders");
    if (inv.contains("sigma_orders"))
      cfg.inversion.sigma_orders =
          int_list(inv["sigma_orders"], "inversion.sigma_orders");
    cfg.inversion.refine_center =
        bool_or(inv, "inversion", "refine_center", true);
    cfg.inversion.search_halfwidth =
        num_or(inv, "inversion", "search_halfwidth", 0.0);
    if (cfg.inversion.layers < 1) bad("inversion.layers", "must be >= 1");
    if (cfg.inversion.n_max < 1) bad("inversion.nmax", "must be >= 1");
  }

  if (j.contains("tables")) {
    const json& tables = j["tables"];
    cfg.gpt_degree = int_or(tables, "tables", "gpt_degree", 3);
    cfg.cgpt_order = int_or(tables, "tables", "cgpt_order", 3);
    if (cfg.gpt_degree < 1) bad("tables.gpt_degree", "must be >= 1");
    if (cfg.cgpt_order < 1) bad("tables.cgpt_order", "must be >= 1");
  }

  // Geometry invariant: the measurement surface clears the structure by >= 5%.
  double extent;
  if (cfg.has_disks) {
    extent = std::hypot(cfg.disks.center[0] - cfg.measurement.center[0],
                        cfg.disks.center[1] - cfg.measurement.center[1]) +
             cfg.disks.radii[0];
  } else {
    extent = extent_from(cfg.shape, cfg.measurement.center);
  }
  if (!(cfg.measurement.radius >= 1.05 * extent))
    fail(ErrorCode::GeometryConflict,
         "measurement radius " + format_real(cfg.measurement.radius) +
             " must exceed the structure extent " + format_real(extent) +
             " by at least 5%");
  return cfg;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::IoError,
         path + " (" + line_col(text, e.byte) + "): " + e.what());
  }
}

ExperimentConfig load_config(const std::string& path) {
  return parse_config(load_json_file(path));
}

json config_json(const ExperimentConfig& cfg) {
  json j;
  if (cfg.has_disks) {
    j["structure"] = {{"radii", cfg.disks.radii},
                      {"sigmas", cfg.disks.sigmas},
                      {"center", point_json(cfg.disks.center)}};
  } else {
    json curves = json::array();
    for (const SmoothCurve& c : cfg.shape.curves)
      curves.push_back({{"type", "trig"},
                        {"cos_x", c.cos_x},
                        {"sin_x", c.sin_x},
                        {"cos_y", c.cos_y},
                        {"sin_y", c.sin_y}});
    j["shape"] = {{"curves", curves},
                  {"sigmas", cfg.shape.sigmas},
                  {"nodes_per_curve", cfg.nodes_per_curve}};
  }
  j["background"] = background_to_json(cfg.background);
  json meas = {{"kind", cfg.measurement.kind},
               {"radius", cfg.measurement.radius},
               {"count", cfg.measurement.count},
               {"center", point_json(cfg.measurement.center)}};
  if (cfg.measurement.kind == "arc") {
    meas["theta0"] = cfg.measurement.theta0;
    meas["theta1"] = cfg.measurement.theta1;
  }
  j["measurement"] = meas;
  json noise = {{"level", cfg.noise.level}};
  if (cfg.noise.seed >= 0) noise["seed"] = cfg.noise.seed;
  j["noise"] = noise;
  j["inversion"] = {{"layers", cfg.inversion.layers},
                    {"nmax", cfg.inversion.n_max},
                    {"orders", cfg.inversion.orders},
                    {"sigma_orders", cfg.inversion.sigma_orders},
                    {"refine_center", cfg.inversion.refine_center},
                    {"search_halfwidth", cfg.inversion.search_halfwidth}};
  j["tables"] = {{"gpt_degree", cfg.gpt_degree}, {"cgpt_order", cfg.cgpt_order}};
  return j;
}

MeasurementSet synth(const ExperimentConfig& cfg) {
  const MeasurementGeometry& g = cfg.measurement;
  long M = g.count;
  std::vector<Point2> points(static_cast<size_t>(M));
  for (long jdx = 0; jdx < M; ++jdx) {
    double th = g.kind == "arc"
                    ? g.theta0 + (g.theta1 - g.theta0) * double(jdx) / double(M - 1)
                    : g.theta0 + kTwoPi * double(jdx) / double(M);
    points[size_t(jdx)] = {g.center[0] + g.radius * std::cos(th),
                           g.center[1] + g.radius * std::sin(th)};
  }

  MeasurementSet m;
  m.points = points;
  m.u.resize(size_t(M));
  m.background = cfg.background;

  if (cfg.has_disks) {
    m.enclosing_radius =
        std::hypot(cfg.disks.center[0], cfg.disks.center[1]) + cfg.disks.radii[0];
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long i = 0; i < M; ++i)
      m.u[size_t(i)] = field_eval(cfg.disks, cfg.background, points[size_t(i)]);
  } else {
    m.enclosing_radius = extent_from(cfg.shape, {0.0, 0.0});
    BlockNpSystem system = assemble(cfg.shape, cfg.nodes_per_curve);
    DensityField densities = solve_densities(system, cfg.background);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long i = 0; i < M; ++i)
      m.u[size_t(i)] = background_eval(cfg.background, points[size_t(i)]) +
                       far_field_eval(system, densities, points[size_t(i)]);
  }

  if (cfg.noise.level > 0.0) {
    double ss = 0.0;
    for (long i = 0; i < M; ++i) {
      double d = m.u[size_t(i)] - background_eval(cfg.background, points[size_t(i)]);
      ss += d * d;
    }
    double rms = std::sqrt(ss / double(M));
    double sd = cfg.noise.level * rms;
    std::vector<double> z =
        gaussian_noise(size_t(M), (unsigned long long)cfg.noise.seed);
    for (long i = 0; i < M; ++i) m.u[size_t(i)] += sd * z[size_t(i)];
    m.noise_std = sd;
  }
  return m;
}

json report_json(const InverseReport& rep) {
  json per = json::array();
  for (const OrderResidual& p : rep.per_order)
    per.push_back({{"n", p.n},
                   {"c_hat", p.c_hat},
                   {"c_model", p.c_model},
                   {"std", p.std}});
  return json{{"center", point_json(rep.center)},
              {"radii", rep.radii},
              {"sigmas", rep.sigmas},
              {"lambdas", rep.lambdas},
              {"per_order", per},
              {"sigma_orders", rep.sigma_orders},
              {"detL", rep.detL},
              {"detR", rep.detR},
              {"modes_used", rep.modes_used},
              {"peeled_layers", rep.peeled_layers},
              {"weighted_residual", rep.weighted_residual},
              {"residual_floor", rep.residual_floor},
              {"extraction_cond", rep.extraction_cond},
              {"located", rep.located},
              {"newton_converged", rep.newton_converged},
              {"certificate_ok", rep.certificate_ok},
              {"misfit", rep.misfit}};
}

void emit_report(const InverseReport& rep, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, path + ": cannot open for writing");
  out << report_json(rep).dump(2) << '\n';
  if (!out) fail(ErrorCode::IoError, path + ": write failed");
}

void emit_plotdata(const PlotSeries& series, const std::string& path) {
  if (series.columns.empty())
    fail(ErrorCode::ConfigError, "plot series needs at least one column");
  for (const std::vector<double>& row : series.rows)
    if (row.size() != series.columns.size())
      fail(ErrorCode::ConfigError, "plot row width does not match the header");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, path + ": cannot open for writing");
  for (size_t c = 0; c < series.columns.size(); ++c)
    out << (c ? "," : "") << series.columns[c];
  out << '\n';
  for (const std::vector<double>& row : series.rows) {
    for (size_t c = 0; c < row.size(); ++c)
      out << (c ? "," : "") << format_real(row[c]);
    out << '\n';
  }
  if (!out) fail(ErrorCode::IoError, path + ": write failed");
}

PlotSeries read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, path + ": cannot open for reading");
  PlotSeries out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.eof()) break;
    std::vector<std::string> cells;
    size_t start = 0;
    while (true) {
      size_t comma = line.find(',', start);
      cells.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (lineno == 1) {
      out.columns = cells;
      continue;
    }
    if (cells.size() != out.columns.size())
      fail(ErrorCode::IoError, path + " (line " + std::to_string(lineno) +
                                   "): expected " +
                                   std::to_string(out.columns.size()) +
                                   " columns, found " + std::to_string(cells.size()));
    std::vector<double> row(cells.size());
    for (size_t c = 0; c < cells.size(); ++c) {
      const std::string& cell = cells[c];
      char* end = nullptr;
      row[c] = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size())
        fail(ErrorCode::IoError, path + " (line " + std::to_string(lineno) +
                                     ", column " + std::to_string(c + 1) +
                                     "): cannot parse '" + cell + "' as a number");
    }
    out.rows.push_back(std::move(row));
  }
  if (lineno == 0) fail(ErrorCode::IoError, path + ": empty file");
  return out;
}

void write_measurements(const MeasurementSet& m, const std::string& path) {
  PlotSeries series;
  series.columns = {"x", "y", "u"};
  for (size_t i = 0; i < m.points.size(); ++i)
    series.rows.push_back({m.points[i][0], m.points[i][1], m.u[i]});
  emit_plotdata(series, path);

  json side = {{"background", background_to_json(m.background)},
               {"enclosing_radius", m.enclosing_radius},
               {"noise_std", m.noise_std}};
  std::string spath = path + ".json";
  std::ofstream out(spath, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, spath + ": cannot open for writing");
  out << side.dump(2) << '\n';
  if (!out) fail(ErrorCode::IoError, spath + ": write failed");
}

MeasurementSet read_measurements(const std::string& path) {
  PlotSeries series = read_csv(path);
  if (series.columns != std::vector<std::string>{"x", "y", "u"})
    fail(ErrorCode::IoError, path + ": expected header x,y,u");
  MeasurementSet m;
  for (const std::vector<double>& row : series.rows) {
    m.points.push_back({row[0], row[1]});
    m.u.push_back(row[2]);
  }
  json side = load_json_file(path + ".json");
  m.background = background_from_json(member(side, "sidecar", "background"),
                                      "background");
  m.enclosing_radius =
      num(member(side, "sidecar", "enclosing_radius"), "enclosing_radius");
  m.noise_std = num_or(side, "sidecar", "noise_std", 0.0);
  return m;
}

}  // namespace mlpt
