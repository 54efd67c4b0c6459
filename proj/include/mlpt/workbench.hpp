#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "mlpt/inverse.hpp"
#include "mlpt/types.hpp"

namespace mlpt {

// --------------------------------------------------------------------------
// Experiment plumbing: JSON configs, synthetic measurement generation with
// seeded noise, JSON reports, and CSV plot data.
// --------------------------------------------------------------------------

struct MeasurementGeometry {
  std::string kind = "circle";  // "circle" (full) or "arc"
  double radius = 0.0;
  int count = 0;
  double theta0 = 0.0;  // arc start (radians); ignored for full circles
  double theta1 = 0.0;  // arc end; ignored for full circles
  Point2 center{0.0, 0.0};
};

struct NoiseSpec {
  double level = 0.0;      // relative to RMS of the clean perturbation u - H
  long long seed = -1;     // required when level > 0
};

struct InversionSpec {
  int layers = 1;
  int n_max = 20;
  std::vector<int> orders;        // radii-fit orders (empty = automatic)
  std::vector<int> sigma_orders;  // conductivity mode combination (empty = walk)
  bool refine_center = true;
  double search_halfwidth = 0.0;
};

struct ExperimentConfig {
  bool has_disks = false;
  ConcentricDisks disks;
  bool has_shape = false;
  LayeredShape shape;
  int nodes_per_curve = 256;  // boundary-integral resolution for shapes
  HarmonicBackground background;
  MeasurementGeometry measurement;
  NoiseSpec noise;
  InversionSpec inversion;
  int gpt_degree = 3;   // moment-table degree for the `gpt` command
  int cgpt_order = 3;   // contracted-tensor order for the `gpt` command
};

// Parse/serialize a config.  parse_config rejects malformed JSON with
// line/column diagnostics and checks the schema invariants: exactly one of
// structure/shape, measurement surface outside the structure with >= 5%
// margin (GeometryConflict), and a seed whenever noise level > 0.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json config_json(const ExperimentConfig& config);

// Raw JSON file loader with line/column diagnostics on malformed input.
nlohmann::json load_json_file(const std::string& path);

// Synthetic measurements: sample points from the configured geometry, values
// from the analytic engine (disks) or the boundary-integral engine (shapes),
// plus seeded Gaussian noise of the configured relative level.
MeasurementSet synth(const ExperimentConfig& config);

// Inversion report serialization (17 significant digits for reals).
nlohmann::json report_json(const InverseReport& report);
void emit_report(const InverseReport& report, const std::string& path);

// CSV plot data with a fixed column order; an empty series produces a
// header-only file.  Values are written with 17 significant digits and
// round-trip losslessly through read_csv.
struct PlotSeries {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;  // each row matches columns.size()
};
void emit_plotdata(const PlotSeries& series, const std::string& path);
PlotSeries read_csv(const std::string& path);

// Measurement files: CSV with columns x,y,u plus a JSON sidecar carrying the
// background and geometry so the inverse stage can run from files alone.
void write_measurements(const MeasurementSet& m, const std::string& path);
MeasurementSet read_measurements(const std::string& path);

// 17-significant-digit decimal form that parses back to the same double.
std::string format_real(double v);

}  // namespace mlpt
