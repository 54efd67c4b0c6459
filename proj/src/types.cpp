#include "mlpt/types.hpp"

#include <cmath>
#include <sstream>

namespace mlpt {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::RadiiNotDecreasing: return "RadiiNotDecreasing";
    case ErrorCode::NonPositiveSigma: return "NonPositiveSigma";
    case ErrorCode::AdjacentEqualConductivity: return "AdjacentEqualConductivity";
    case ErrorCode::CurveInvalid: return "CurveInvalid";
    case ErrorCode::CurveTooCoarse: return "CurveTooCoarse";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::SingularGpm: return "SingularGpm";
    case ErrorCode::PointInsideInclusion: return "PointInsideInclusion";
    case ErrorCode::NonHarmonicCoefficients: return "NonHarmonicCoefficients";
    case ErrorCode::IllConditionedFit: return "IllConditionedFit";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::DegenerateDipole: return "DegenerateDipole";
    case ErrorCode::PeelExhausted: return "PeelExhausted";
    case ErrorCode::NonPhysicalEstimate: return "NonPhysicalEstimate";
    case ErrorCode::NewtonDiverged: return "NewtonDiverged";
    case ErrorCode::CertificateFailed: return "CertificateFailed";
    case ErrorCode::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorCode::GeometryConflict: return "GeometryConflict";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

namespace {

void check_sigmas(const std::vector<double>& sigmas, std::vector<Violation>& out) {
  double prev = 1.0;  // background
  for (size_t k = 0; k < sigmas.size(); ++k) {
    std::ostringstream at;
    at << "layer " << (k + 1);
    if (!(sigmas[k] > 0.0)) {
      out.push_back({ErrorCode::NonPositiveSigma, at.str()});
    }
    if (sigmas[k] == prev) {
      out.push_back({ErrorCode::AdjacentEqualConductivity, at.str()});
    }
    prev = sigmas[k];
  }
}

}  // namespace

std::vector<Violation> validate(const ConcentricDisks& d) {
  std::vector<Violation> out;
  if (d.radii.size() != d.sigmas.size()) {
    out.push_back({ErrorCode::ConfigError, "radii and sigmas lengths differ"});
  }
  for (size_t k = 0; k < d.radii.size(); ++k) {
    if (!(d.radii[k] > 0.0)) {
      out.push_back({ErrorCode::RadiiNotDecreasing, "non-positive radius"});
      break;
    }
    if (k > 0 && !(d.radii[k] < d.radii[k - 1])) {
      std::ostringstream at;
      at << "r[" << (k + 1) << "] >= r[" << k << "]";
      out.push_back({ErrorCode::RadiiNotDecreasing, at.str()});
    }
  }
  check_sigmas(d.sigmas, out);
  return out;
}

std::vector<Violation> validate(const LayeredShape& s) {
  std::vector<Violation> out;
  if (s.curves.size() != s.sigmas.size()) {
    out.push_back({ErrorCode::ConfigError, "curves and sigmas lengths differ"});
  }
  check_sigmas(s.sigmas, out);

  // Sampled geometric checks: positive speed, simplicity, strict nesting with
  // positive clearance.
  const int m = 256;
  std::vector<std::vector<Point2>> pts(s.curves.size());
  for (size_t c = 0; c < s.curves.size(); ++c) {
    pts[c].resize(m);
    for (int i = 0; i < m; ++i) {
      double t = 2.0 * M_PI * i / m;
      pts[c][i] = s.curves[c].point(t);
      if (!(s.curves[c].speed(t) > 0.0)) {
        out.push_back({ErrorCode::CurveInvalid, "vanishing parameterization speed"});
        return out;
      }
    }
    // Self-intersection at sampled resolution: distinct parameters mapping to
    // nearly identical points (excluding near-neighbors along the curve).
    for (int i = 0; i < m; ++i) {
      for (int j = i + 8; j <= i + m - 8; ++j) {
        const Point2& a = pts[c][i];
        const Point2& b = pts[c][j % m];
        double d2 = (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]);
        if (d2 < 1e-16) {
          out.push_back({ErrorCode::CurveInvalid, "self-intersection at sampled resolution"});
          i = m;
          break;
        }
      }
    }
  }

  // Winding-number test: every node of curve c+1 must lie inside curve c, and
  // the curves must keep a positive distance.
  for (size_t c = 0; c + 1 < s.curves.size(); ++c) {
    for (const Point2& q : pts[c + 1]) {
      double winding = 0.0;
      for (int i = 0; i < m; ++i) {
        const Point2& a = pts[c][i];
        const Point2& b = pts[c][(i + 1) % m];
        double a1 = std::atan2(a[1] - q[1], a[0] - q[0]);
        double b1 = std::atan2(b[1] - q[1], b[0] - q[0]);
        double d = b1 - a1;
        if (d > M_PI) d -= 2.0 * M_PI;
        if (d < -M_PI) d += 2.0 * M_PI;
        winding += d;
      }
      if (std::abs(winding) < M_PI) {  // ~0 means outside; ~2*pi inside
        out.push_back({ErrorCode::GeometryConflict, "inner curve node outside outer curve"});
        return out;
      }
    }
    double min_d2 = 1e300;
    for (const Point2& a : pts[c])
      for (const Point2& b : pts[c + 1]) {
        double d2 = (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]);
        min_d2 = std::min(min_d2, d2);
      }
    if (!(min_d2 > 1e-12)) {
      out.push_back({ErrorCode::GeometryConflict, "adjacent curves touch at sampled resolution"});
    }
  }
  return out;
}

void require_valid(const ConcentricDisks& d) {
  auto v = validate(d);
  if (!v.empty()) fail(v.front().code, v.front().detail);
}

void require_valid(const LayeredShape& s) {
  auto v = validate(s);
  if (!v.empty()) fail(v.front().code, v.front().detail);
}

Contrasts contrasts_of(const std::vector<double>& sigmas) {
  Contrasts c;
  double prev = 1.0;
  for (size_t k = 0; k < sigmas.size(); ++k) {
    if (sigmas[k] == prev) {
      std::ostringstream at;
      at << "sigma[" << (k + 1) << "] equals its outer neighbour";
      fail(ErrorCode::AdjacentEqualConductivity, at.str());
    }
    c.lambdas.push_back((sigmas[k] + prev) / (2.0 * (sigmas[k] - prev)));
    prev = sigmas[k];
  }
  return c;
}

Contrasts contrasts_of(const ConcentricDisks& d) { return contrasts_of(d.sigmas); }
Contrasts contrasts_of(const LayeredShape& s) { return contrasts_of(s.sigmas); }

std::vector<double> sigmas_of(const std::vector<double>& lambdas) {
  std::vector<double> out;
  double prev = 1.0;
  for (double l : lambdas) {
    prev = prev * (2.0 * l + 1.0) / (2.0 * l - 1.0);
    out.push_back(prev);
  }
  return out;
}

OrderClass classify_order(const HarmonicBackground& h, const std::set<int>& probe_orders) {
  for (int n : probe_orders) {
    Complex a = h.coeff(n);
    // a = a^c - i a^s: both trigonometric components must be present.
    if (a.real() == 0.0 || a.imag() == 0.0) return OrderClass::PartialOrder;
  }
  return OrderClass::FullOrder;
}

}  // namespace mlpt
