#include <cmath>

#include "mlpt/types.hpp"

namespace mlpt {

namespace {

// Evaluate a trig polynomial and its first two derivatives at t.
struct Trig3 {
  double f = 0.0, df = 0.0, ddf = 0.0;
};

Trig3 eval3(const std::vector<double>& cosc, const std::vector<double>& sinc, double t) {
  Trig3 out;
  if (!cosc.empty()) out.f = cosc[0];
  size_t mmax = std::max(cosc.size(), sinc.size());
  for (size_t m = 1; m < mmax; ++m) {
    double cm = m < cosc.size() ? cosc[m] : 0.0;
    double sm = m < sinc.size() ? sinc[m] : 0.0;
    double c = std::cos(m * t), s = std::sin(m * t);
    out.f += cm * c + sm * s;
    out.df += m * (-cm * s + sm * c);
    out.ddf += m * m * (-cm * c - sm * s);
  }
  return out;
}

}  // namespace

Point2 SmoothCurve::point(double t) const {
  return {eval3(cos_x, sin_x, t).f, eval3(cos_y, sin_y, t).f};
}

Point2 SmoothCurve::tangent(double t) const {
  return {eval3(cos_x, sin_x, t).df, eval3(cos_y, sin_y, t).df};
}

double SmoothCurve::speed(double t) const {
  Point2 d = tangent(t);
  return std::hypot(d[0], d[1]);
}

Point2 SmoothCurve::normal(double t) const {
  Point2 d = tangent(t);
  double sp = std::hypot(d[0], d[1]);
  // Counter-clockwise parameterization: outward normal is the tangent rotated
  // clockwise by ninety degrees.
  return {d[1] / sp, -d[0] / sp};
}

double SmoothCurve::curvature(double t) const {
  Trig3 x = eval3(cos_x, sin_x, t);
  Trig3 y = eval3(cos_y, sin_y, t);
  double sp = std::hypot(x.df, y.df);
  return (x.df * y.ddf - y.df * x.ddf) / (sp * sp * sp);
}

SmoothCurve SmoothCurve::circle(double radius, Point2 center) {
  SmoothCurve c;
  c.cos_x = {center[0], radius};
  c.sin_x = {0.0, 0.0};
  c.cos_y = {center[1], 0.0};
  c.sin_y = {0.0, radius};
  return c;
}

SmoothCurve SmoothCurve::ellipse(double a, double b, Point2 center, double rotation) {
  SmoothCurve c;
  double cr = std::cos(rotation), sr = std::sin(rotation);
  c.cos_x = {center[0], a * cr};
  c.sin_x = {0.0, -b * sr};
  c.cos_y = {center[1], a * sr};
  c.sin_y = {0.0, b * cr};
  return c;
}

}  // namespace mlpt
