#include <CLI11.hpp>
#include <climits>
#include <cmath>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <string>
#include <vector>

#include "mlpt/background.hpp"
#include "mlpt/bem.hpp"
#include "mlpt/disks.hpp"
#include "mlpt/errors.hpp"
#include "mlpt/inverse.hpp"
#include "mlpt/workbench.hpp"

namespace {

using nlohmann::json;

struct Common {
  std::string config;
  std::string out;
  std::vector<std::string> sets;
  long long seed = LLONG_MIN;  // LLONG_MIN = not given
  bool verbose = false;
};

void add_common(CLI::App* sub, Common& c, bool out_required) {
  sub->add_option("--config", c.config, "experiment config file (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  CLI::Option* out = sub->add_option("--out", c.out, "output file path");
  if (out_required) out->required();
  sub->add_option("--set", c.sets,
                  "override a config entry, dotted.path=value (value parsed "
                  "as JSON, else taken as a string); repeatable");
  sub->add_option("--seed", c.seed, "override noise.seed");
  sub->add_flag("--verbose", c.verbose, "print the effective config first");
}

void apply_override(json& root, const std::string& kv) {
  size_t eq = kv.find('=');
  if (eq == std::string::npos || eq == 0)
    throw CLI::ValidationError("--set", "expected dotted.path=value, got '" + kv + "'");
  std::string path = kv.substr(0, eq), raw = kv.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;  // unquoted strings pass through verbatim
  }
  try {
    json* p = &root;
    size_t start = 0;
    while (true) {
      size_t dot = path.find('.', start);
      std::string key = path.substr(start, dot - start);
      if (key.empty())
        throw CLI::ValidationError("--set", "empty key in path '" + path + "'");
      if (dot == std::string::npos) {
        (*p)[key] = value;
        break;
      }
      p = &((*p)[key]);
      start = dot + 1;
    }
  } catch (const json::exception& e) {
    throw CLI::ValidationError(
        "--set", "cannot apply '" + kv + "': " + std::string(e.what()));
  }
}

mlpt::ExperimentConfig effective_config(const Common& c) {
  json j = mlpt::load_json_file(c.config);
  for (const std::string& kv : c.sets) apply_override(j, kv);
  if (c.seed != LLONG_MIN) j["noise"]["seed"] = c.seed;
  mlpt::ExperimentConfig cfg = mlpt::parse_config(j);
  if (c.verbose)
    std::cout << "config: " << mlpt::config_json(cfg).dump() << "\n";
  return cfg;
}

mlpt::LayeredShape shape_of(const mlpt::ExperimentConfig& cfg) {
  if (cfg.has_shape) return cfg.shape;
  mlpt::LayeredShape s;
  for (double r : cfg.disks.radii)
    s.curves.push_back(mlpt::SmoothCurve::circle(r, cfg.disks.center));
  s.sigmas = cfg.disks.sigmas;
  return s;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (long i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (long j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

void write_json(const json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) mlpt::fail(mlpt::ErrorCode::IoError, path + ": cannot open for writing");
  out << j.dump(2) << '\n';
  if (!out) mlpt::fail(mlpt::ErrorCode::IoError, path + ": write failed");
}

void run_forward(const Common& c) {
  mlpt::ExperimentConfig cfg = effective_config(c);
  cfg.noise.level = 0.0;  // forward = clean field evaluation
  mlpt::MeasurementSet m = mlpt::synth(cfg);
  mlpt::PlotSeries series;
  series.columns = {"x", "y", "u", "du"};
  for (size_t i = 0; i < m.points.size(); ++i) {
    double h = mlpt::background_eval(m.background, m.points[i]);
    series.rows.push_back({m.points[i][0], m.points[i][1], m.u[i], m.u[i] - h});
  }
  mlpt::emit_plotdata(series, c.out);
  std::cout << "forward: wrote " << series.rows.size() << " samples to " << c.out
            << "\n";
}

void run_gpt(const Common& c) {
  mlpt::ExperimentConfig cfg = effective_config(c);
  mlpt::LayeredShape shape = shape_of(cfg);
  mlpt::BlockNpSystem system = mlpt::assemble(shape, cfg.nodes_per_curve);
  mlpt::GptTable table = mlpt::gpt(system, cfg.gpt_degree);
  mlpt::CgptBlock blocks = mlpt::cgpt(system, cfg.cgpt_order);
  json entries = json::array();
  for (const auto& [key, value] : table.values)
    entries.push_back({{"alpha", {key.first.first, key.first.second}},
                       {"beta", {key.second.first, key.second.second}},
                       {"value", value}});
  json out = {{"max_degree", table.max_degree},
              {"entries", entries},
              {"cgpt",
               {{"order", cfg.cgpt_order},
                {"cc", matrix_json(blocks.cc)},
                {"cs", matrix_json(blocks.cs)},
                {"sc", matrix_json(blocks.sc)},
                {"ss", matrix_json(blocks.ss)}}}};
  write_json(out, c.out);
  std::cout << "gpt: degree " << table.max_degree << ", " << entries.size()
            << " entries, contracted order " << cfg.cgpt_order << " -> " << c.out
            << "\n";
}

void run_spectrum(const Common& c) {
  mlpt::ExperimentConfig cfg = effective_config(c);
  mlpt::BlockNpSystem system = mlpt::assemble(shape_of(cfg), cfg.nodes_per_curve);
  std::vector<mlpt::Complex> ev = mlpt::np_spectrum(system);
  mlpt::PlotSeries series;
  series.columns = {"re", "im"};
  for (const mlpt::Complex& e : ev) series.rows.push_back({e.real(), e.imag()});
  mlpt::emit_plotdata(series, c.out);
  std::cout << "spectrum: " << ev.size() << " eigenvalues, real parts in ["
            << mlpt::format_real(ev.front().real()) << ", "
            << mlpt::format_real(ev.back().real()) << "] -> " << c.out << "\n";
}

void run_multipoles(const Common& c) {
  mlpt::ExperimentConfig cfg = effective_config(c);
  if (!cfg.has_disks)
    mlpt::fail(mlpt::ErrorCode::ConfigError,
               "the multipole table is defined for concentric-disk structures; "
               "use 'gpt' for general shapes");
  mlpt::MultipoleSpectrum spec =
      mlpt::multipole_spectrum(cfg.disks, cfg.inversion.n_max);
  mlpt::PlotSeries series;
  series.columns = {"n", "c_n"};
  for (const auto& [n, cn] : spec.values)
    series.rows.push_back({double(n), cn});
  mlpt::emit_plotdata(series, c.out);
  std::cout << "multipoles: orders 1.." << cfg.inversion.n_max << " -> " << c.out
            << "\n";
}

void run_invert(const Common& c) {
  mlpt::ExperimentConfig cfg = effective_config(c);
  mlpt::MeasurementSet m = mlpt::synth(cfg);
  mlpt::InvertOptions opts;
  opts.n_max = cfg.inversion.n_max;
  opts.refine_center = cfg.inversion.refine_center;
  opts.search_halfwidth = cfg.inversion.search_halfwidth;
  opts.sigma_orders = cfg.inversion.sigma_orders;
  mlpt::InverseReport rep = mlpt::invert(m, cfg.inversion.layers, opts);
  mlpt::emit_report(rep, c.out);
  std::cout << "invert: center (" << mlpt::format_real(rep.center[0]) << ", "
            << mlpt::format_real(rep.center[1]) << ")\n";
  for (size_t k = 0; k < rep.radii.size(); ++k)
    std::cout << "  layer " << k + 1 << ": r = " << mlpt::format_real(rep.radii[k])
              << ", sigma = " << mlpt::format_real(rep.sigmas[k]) << "\n";
  std::cout << "  certificate " << (rep.certificate_ok ? "passed" : "FAILED")
            << ", weighted residual " << mlpt::format_real(rep.weighted_residual)
            << " (floor " << mlpt::format_real(rep.residual_floor) << ")"
            << (rep.misfit ? " [misfit]" : "") << " -> " << c.out << "\n";
}

void run_certify(const Common& c) {
  mlpt::ExperimentConfig cfg = effective_config(c);
  if (!cfg.has_disks)
    mlpt::fail(mlpt::ErrorCode::ConfigError,
               "certificates are defined for concentric-disk structures");
  std::vector<int> orders = cfg.inversion.sigma_orders;
  if (orders.empty())
    for (int n = 1; n <= cfg.disks.layers(); ++n) orders.push_back(n);
  mlpt::CertMatrices cm = mlpt::cert_matrices(cfg.disks, orders);
  std::cout << "certify: orders";
  for (int n : orders) std::cout << " " << n;
  std::cout << "\n  det L = " << mlpt::format_real(cm.detL)
            << "\n  det R = " << mlpt::format_real(cm.detR) << "\n";
  if (!c.out.empty()) {
    write_json(json{{"orders", orders},
                    {"detL", cm.detL},
                    {"detR", cm.detR},
                    {"L", matrix_json(cm.L)},
                    {"R", matrix_json(cm.R)}},
               c.out);
  }
}

void run_synth(const Common& c) {
  mlpt::ExperimentConfig cfg = effective_config(c);
  mlpt::MeasurementSet m = mlpt::synth(cfg);
  mlpt::write_measurements(m, c.out);
  std::cout << "synth: " << m.points.size() << " samples, noise std "
            << mlpt::format_real(m.noise_std) << " -> " << c.out << " (+ sidecar "
            << c.out << ".json)\n";
}

struct NeutralArgs {
  double sigma2 = 0.0;
  double sigma0 = 1.0;
  double f1 = -1.0;
  double r1 = 0.0, r2 = 0.0;
  std::string out;
};

void run_neutral(const NeutralArgs& a) {
  double r1 = a.r1, r2 = a.r2;
  if (a.f1 > 0.0) {
    if (!(a.f1 < 1.0))
      mlpt::fail(mlpt::ErrorCode::ConfigError, "--f1 must lie in (0, 1)");
    r1 = 1.0;
    r2 = std::sqrt(a.f1);
  } else if (!(r1 > 0.0 && r2 > 0.0 && r2 < r1)) {
    mlpt::fail(mlpt::ErrorCode::ConfigError,
               "provide either --f1 in (0,1) or radii 0 < --r2 < --r1");
  }
  double sigma1 = mlpt::neutral_outer_sigma(r1, r2, a.sigma2, a.sigma0);
  double achieved = mlpt::hashin_shtrikman(sigma1, a.sigma2, r1, r2);
  std::cout << "neutral: sigma1 = " << mlpt::format_real(sigma1)
            << "\n  sigma0 = " << mlpt::format_real(a.sigma0)
            << " (achieved " << mlpt::format_real(achieved) << ")\n";
  if (!a.out.empty())
    write_json(json{{"sigma1", sigma1},
                    {"sigma2", a.sigma2},
                    {"sigma0", a.sigma0},
                    {"achieved", achieved},
                    {"f1", (r2 * r2) / (r1 * r1)}},
               a.out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Potential-field toolkit for layered conductivity inclusions"};
  app.require_subcommand(1);

  Common forward_c, gpt_c, spectrum_c, multipoles_c, invert_c, certify_c, synth_c;
  NeutralArgs neutral_a;

  CLI::App* forward =
      app.add_subcommand("forward", "evaluate the field and its perturbation "
                                    "u - H on the measurement geometry (CSV)");
  add_common(forward, forward_c, true);
  forward->callback([&] { run_forward(forward_c); });

  CLI::App* gpt = app.add_subcommand(
      "gpt", "emit polarization-moment and contracted-tensor tables (JSON)");
  add_common(gpt, gpt_c, true);
  gpt->callback([&] { run_gpt(gpt_c); });

  CLI::App* spectrum = app.add_subcommand(
      "spectrum", "emit eigenvalues of the discretized interface operator (CSV)");
  add_common(spectrum, spectrum_c, true);
  spectrum->callback([&] { run_spectrum(spectrum_c); });

  CLI::App* multipoles = app.add_subcommand(
      "multipoles", "emit the (n, c_n) multipole table for disk structures (CSV)");
  add_common(multipoles, multipoles_c, true);
  multipoles->callback([&] { run_multipoles(multipoles_c); });

  CLI::App* invert = app.add_subcommand(
      "invert", "synthesize measurements and run the full reconstruction (JSON report)");
  add_common(invert, invert_c, true);
  invert->callback([&] { run_invert(invert_c); });

  CLI::App* certify = app.add_subcommand(
      "certify", "print the solvability certificate determinants det L, det R");
  add_common(certify, certify_c, false);
  certify->callback([&] { run_certify(certify_c); });

  CLI::App* neutral = app.add_subcommand(
      "neutral", "solve for the coating conductivity that makes a two-layer "
                 "disk neutral");
  neutral->add_option("--sigma2", neutral_a.sigma2, "core conductivity")->required();
  neutral->add_option("--sigma0", neutral_a.sigma0,
                      "target effective background conductivity (default 1)");
  neutral->add_option("--f1", neutral_a.f1, "core area fraction r2^2/r1^2");
  neutral->add_option("--r1", neutral_a.r1, "outer radius (alternative to --f1)");
  neutral->add_option("--r2", neutral_a.r2, "core radius (alternative to --f1)");
  neutral->add_option("--out", neutral_a.out, "optional JSON output path");
  neutral->callback([&] { run_neutral(neutral_a); });

  CLI::App* synth = app.add_subcommand(
      "synth", "write synthetic measurement files (CSV + JSON sidecar)");
  add_common(synth, synth_c, true);
  synth->callback([&] { run_synth(synth_c); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the usage diagnostic to stderr
    return 2;
  } catch (const mlpt::DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
