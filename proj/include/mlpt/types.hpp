#pragma once

#include <array>
#include <complex>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mlpt/errors.hpp"

namespace mlpt {

using Point2 = std::array<double, 2>;
using Complex = std::complex<double>;

// ---------------------------------------------------------------------------
// Nested concentric disks: radii strictly decreasing, per-layer conductivities
// against a unit background (sigma_0 = 1).
struct ConcentricDisks {
  std::vector<double> radii;   // r_1 > r_2 > ... > r_N > 0
  std::vector<double> sigmas;  // sigma_1..sigma_N, all > 0
  Point2 center{0.0, 0.0};

  int layers() const { return static_cast<int>(radii.size()); }
};

// A smooth closed curve given by trigonometric-polynomial coordinates
//   x(t) = cos_x[0] + sum_m cos_x[m] cos(mt) + sin_x[m] sin(mt)   (same for y)
// with index 0 holding the constant term (sin_*[0] is ignored).
struct SmoothCurve {
  std::vector<double> cos_x, sin_x;
  std::vector<double> cos_y, sin_y;

  Point2 point(double t) const;
  Point2 tangent(double t) const;   // gamma'(t)
  Point2 normal(double t) const;    // outward unit normal (CCW orientation)
  double speed(double t) const;     // |gamma'(t)|
  double curvature(double t) const;

  static SmoothCurve circle(double radius, Point2 center = {0.0, 0.0});
  static SmoothCurve ellipse(double a, double b, Point2 center = {0.0, 0.0},
                             double rotation = 0.0);
};

// General nested layered shape for the boundary-integral route.
struct LayeredShape {
  std::vector<SmoothCurve> curves;  // outer to inner
  std::vector<double> sigmas;

  int layers() const { return static_cast<int>(curves.size()); }
};

// Contrast parameters lambda_k = (sigma_k + sigma_{k-1}) / (2 (sigma_k - sigma_{k-1})).
struct Contrasts {
  std::vector<double> lambdas;
};

// Harmonic background H(x) = constant + sum_n Re(A_n (x1 + i x2)^n) with
// A_n = a_n^c - i a_n^s, so that H = constant + sum_n r^n (a_n^c cos n t + a_n^s sin n t).
struct HarmonicBackground {
  double constant = 0.0;
  std::vector<Complex> coeffs;  // coeffs[m-1] = A_m, m = 1..max_order

  int max_order() const { return static_cast<int>(coeffs.size()); }
  Complex coeff(int n) const {
    return (n >= 1 && n <= max_order()) ? coeffs[n - 1] : Complex(0.0, 0.0);
  }
};

enum class OrderClass { FullOrder, PartialOrder };

// ---------------------------------------------------------------------------
// Validation: returns human-readable violations instead of throwing, so
// callers can report every problem at once.
struct Violation {
  ErrorCode code;
  std::string detail;
};

std::vector<Violation> validate(const ConcentricDisks& d);
std::vector<Violation> validate(const LayeredShape& s);

// Throwing convenience used by operations whose preconditions require validity.
void require_valid(const ConcentricDisks& d);
void require_valid(const LayeredShape& s);

// Contrast parameters; throws AdjacentEqualConductivity on sigma_k == sigma_{k-1}.
Contrasts contrasts_of(const std::vector<double>& sigmas);
Contrasts contrasts_of(const ConcentricDisks& d);
Contrasts contrasts_of(const LayeredShape& s);

// Inverse map: sigma_k = sigma_{k-1} (2 lambda_k + 1) / (2 lambda_k - 1), sigma_0 = 1.
std::vector<double> sigmas_of(const std::vector<double>& lambdas);

// Full-order iff every probed order has both a_n^c != 0 and a_n^s != 0.
OrderClass classify_order(const HarmonicBackground& h, const std::set<int>& probe_orders);

}  // namespace mlpt
