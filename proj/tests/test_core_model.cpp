// Tests for domain types, validation, contrast parameters, and background
// order classification.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>
#include <set>

#include "mlpt/types.hpp"

using namespace mlpt;

TEST_CASE("single layer sigma=3 gives contrast exactly 1") {
  Contrasts c = contrasts_of(std::vector<double>{3.0});
  REQUIRE(c.lambdas.size() == 1);
  CHECK(c.lambdas[0] == 1.0);
}

TEST_CASE("near-perfect conductor stays above the half threshold") {
  Contrasts c = contrasts_of(std::vector<double>{1e6});
  REQUIRE(c.lambdas.size() == 1);
  CHECK(c.lambdas[0] > 0.5);
  CHECK(c.lambdas[0] < 0.5 + 1e-5);  // asymptote: lambda -> 1/2 from above
}

TEST_CASE("three-layer contrasts match hand-evaluated values") {
  Contrasts c = contrasts_of(std::vector<double>{2.0, 5.0, 0.5});
  REQUIRE(c.lambdas.size() == 3);
  CHECK(c.lambdas[0] == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(c.lambdas[1] == doctest::Approx(7.0 / 6.0).epsilon(1e-15));
  CHECK(c.lambdas[2] == doctest::Approx(-11.0 / 18.0).epsilon(1e-15));
}

TEST_CASE("equal adjacent conductivities are rejected when forming contrasts") {
  CHECK_THROWS_AS(contrasts_of(std::vector<double>{2.0, 2.0}), DomainError);
  // sigma_1 equal to the unit background is just as fictitious an interface.
  CHECK_THROWS_AS(contrasts_of(std::vector<double>{1.0}), DomainError);
  try {
    contrasts_of(std::vector<double>{2.0, 2.0});
  } catch (const DomainError& e) {
    CHECK(e.code() == ErrorCode::AdjacentEqualConductivity);
  }
}

TEST_CASE("contrast magnitude exceeds one half for random positive distinct sigmas") {
  std::mt19937_64 gen(20240815ULL);
  std::uniform_real_distribution<double> unif(0.05, 20.0);
  for (int trial = 0; trial < 200; ++trial) {
    int layers = 1 + static_cast<int>(gen() % 6);
    std::vector<double> sigmas;
    double prev = 1.0;
    for (int k = 0; k < layers; ++k) {
      double s = unif(gen);
      while (s == prev) s = unif(gen);
      sigmas.push_back(s);
      prev = s;
    }
    Contrasts c = contrasts_of(sigmas);
    for (double l : c.lambdas) CHECK(std::abs(l) > 0.5);
  }
}

TEST_CASE("contrasts depend only on conductivities, not on radii") {
  ConcentricDisks a{{1.0, 0.6, 0.3}, {2.0, 5.0, 0.5}, {0.0, 0.0}};
  ConcentricDisks b{{7.0, 4.2, 2.1}, {2.0, 5.0, 0.5}, {3.0, -1.0}};
  Contrasts ca = contrasts_of(a);
  Contrasts cb = contrasts_of(b);
  REQUIRE(ca.lambdas.size() == cb.lambdas.size());
  for (size_t k = 0; k < ca.lambdas.size(); ++k)
    CHECK(ca.lambdas[k] == cb.lambdas[k]);
}

TEST_CASE("conductivities round-trip through contrasts") {
  std::mt19937_64 gen(77ULL);
  std::uniform_real_distribution<double> unif(0.05, 20.0);
  for (int trial = 0; trial < 100; ++trial) {
    int layers = 1 + static_cast<int>(gen() % 5);
    std::vector<double> sigmas;
    double prev = 1.0;
    for (int k = 0; k < layers; ++k) {
      double s = unif(gen);
      while (std::abs(s - prev) < 1e-3) s = unif(gen);
      sigmas.push_back(s);
      prev = s;
    }
    std::vector<double> back = sigmas_of(contrasts_of(sigmas).lambdas);
    REQUIRE(back.size() == sigmas.size());
    for (size_t k = 0; k < sigmas.size(); ++k)
      CHECK(back[k] == doctest::Approx(sigmas[k]).epsilon(1e-12));
  }
}

TEST_CASE("pure cosine background is partial order") {
  HarmonicBackground h;      // H = r cos(theta) = x
  h.coeffs = {Complex(1.0, 0.0)};
  CHECK(classify_order(h, {1, 2}) == OrderClass::PartialOrder);
}

TEST_CASE("background with both trig components at every probed order is full order") {
  HarmonicBackground h;
  double fact = 1.0;
  for (int n = 1; n <= 12; ++n) {
    fact *= n;
    h.coeffs.push_back(Complex(1.0 / fact, 1.0 / fact));
  }
  std::set<int> probe;
  for (int n = 1; n <= 12; ++n) probe.insert(n);
  CHECK(classify_order(h, probe) == OrderClass::FullOrder);
}

TEST_CASE("sum of real and imaginary exponential parts is full order") {
  // H = Re(e^zeta) + Im(e^zeta) has degree-n coefficient pair
  // (a_n^c, a_n^s) = (1/n!, -1/n!), i.e. A_n = (1 + i)/n!.
  HarmonicBackground h;
  h.constant = 1.0;
  double fact = 1.0;
  for (int n = 1; n <= 10; ++n) {
    fact *= n;
    h.coeffs.push_back(Complex(1.0 / fact, 1.0 / fact));
  }
  std::set<int> probe;
  for (int n = 1; n <= 10; ++n) probe.insert(n);
  CHECK(classify_order(h, probe) == OrderClass::FullOrder);
}

TEST_CASE("probing beyond the coefficient support forces partial order") {
  HarmonicBackground h;
  h.coeffs = {Complex(1.0, -1.0)};
  CHECK(classify_order(h, {1}) == OrderClass::FullOrder);
  CHECK(classify_order(h, {1, 2}) == OrderClass::PartialOrder);
}

TEST_CASE("full-order classification implies every probed coefficient pair is nonzero") {
  std::mt19937_64 gen(5150ULL);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    HarmonicBackground h;
    for (int n = 1; n <= 6; ++n) {
      double re = (gen() % 3 == 0) ? 0.0 : unif(gen);
      double im = (gen() % 3 == 0) ? 0.0 : unif(gen);
      h.coeffs.push_back(Complex(re, im));
    }
    std::set<int> probe{1, 2, 3, 4, 5, 6};
    bool all_nonzero = true;
    for (int n : probe) {
      Complex a = h.coeff(n);
      if (a.real() == 0.0 || a.imag() == 0.0) all_nonzero = false;
    }
    OrderClass cls = classify_order(h, probe);
    CHECK((cls == OrderClass::FullOrder) == all_nonzero);
  }
}

TEST_CASE("well-formed disks pass validation") {
  ConcentricDisks d{{1.0, 0.5, 0.2}, {2.0, 3.0, 4.0}, {0.0, 0.0}};
  CHECK(validate(d).empty());
  CHECK_NOTHROW(require_valid(d));
}

TEST_CASE("increasing radii are reported") {
  ConcentricDisks d{{0.5, 1.0}, {2.0, 3.0}, {0.0, 0.0}};
  auto v = validate(d);
  REQUIRE(!v.empty());
  bool found = false;
  for (const auto& viol : v)
    if (viol.code == ErrorCode::RadiiNotDecreasing) found = true;
  CHECK(found);
  CHECK_THROWS_AS(require_valid(d), DomainError);
}

TEST_CASE("conductivity equal to the background is reported at the first layer") {
  ConcentricDisks d{{1.0, 0.5}, {1.0, 2.0}, {0.0, 0.0}};
  auto v = validate(d);
  REQUIRE(!v.empty());
  bool found = false;
  for (const auto& viol : v)
    if (viol.code == ErrorCode::AdjacentEqualConductivity &&
        viol.detail.find("1") != std::string::npos)
      found = true;
  CHECK(found);
}

TEST_CASE("non-positive conductivity is reported") {
  ConcentricDisks d{{1.0}, {-2.0}, {0.0, 0.0}};
  auto v = validate(d);
  bool found = false;
  for (const auto& viol : v)
    if (viol.code == ErrorCode::NonPositiveSigma) found = true;
  CHECK(found);
}

TEST_CASE("mismatched radii and sigma lengths are reported") {
  ConcentricDisks d{{1.0, 0.5}, {2.0}, {0.0, 0.0}};
  auto v = validate(d);
  bool found = false;
  for (const auto& viol : v)
    if (viol.code == ErrorCode::ConfigError) found = true;
  CHECK(found);
}

TEST_CASE("nested circles with distinct sigmas pass shape validation") {
  LayeredShape s;
  s.curves = {SmoothCurve::circle(1.0), SmoothCurve::circle(0.5)};
  s.sigmas = {2.0, 3.0};
  CHECK(validate(s).empty());
}

TEST_CASE("rotated ellipse nest passes shape validation") {
  LayeredShape s;
  s.curves = {SmoothCurve::ellipse(1.0, 0.8, {0.0, 0.0}, 0.3),
              SmoothCurve::circle(0.4, {0.1, 0.05})};
  s.sigmas = {3.0, 0.5};
  CHECK(validate(s).empty());
}

TEST_CASE("inner curve outside the outer curve is a geometry conflict") {
  LayeredShape s;
  s.curves = {SmoothCurve::circle(1.0), SmoothCurve::circle(0.5, {3.0, 0.0})};
  s.sigmas = {2.0, 3.0};
  auto v = validate(s);
  REQUIRE(!v.empty());
  CHECK(v.front().code == ErrorCode::GeometryConflict);
}

TEST_CASE("curves that nearly touch are a geometry conflict") {
  LayeredShape s;
  s.curves = {SmoothCurve::circle(1.0), SmoothCurve::circle(1.0 - 1e-9)};
  s.sigmas = {2.0, 3.0};
  auto v = validate(s);
  bool found = false;
  for (const auto& viol : v)
    if (viol.code == ErrorCode::GeometryConflict) found = true;
  CHECK(found);
}

TEST_CASE("self-intersecting parameterization is an invalid curve") {
  // Figure-eight: x = cos t, y = sin 2t crosses itself at the origin.
  SmoothCurve fig8;
  fig8.cos_x = {0.0, 1.0};
  fig8.sin_x = {0.0, 0.0};
  fig8.cos_y = {0.0, 0.0, 0.0};
  fig8.sin_y = {0.0, 0.0, 1.0};
  LayeredShape s;
  s.curves = {fig8};
  s.sigmas = {2.0};
  auto v = validate(s);
  REQUIRE(!v.empty());
  CHECK(v.front().code == ErrorCode::CurveInvalid);
}

TEST_CASE("degenerate point curve has vanishing speed") {
  SmoothCurve dot;
  dot.cos_x = {0.3};
  dot.sin_x = {0.0};
  dot.cos_y = {0.1};
  dot.sin_y = {0.0};
  LayeredShape s;
  s.curves = {dot};
  s.sigmas = {2.0};
  auto v = validate(s);
  REQUIRE(!v.empty());
  CHECK(v.front().code == ErrorCode::CurveInvalid);
}

TEST_CASE("curve factories produce consistent geometry") {
  SmoothCurve e = SmoothCurve::ellipse(1.0, 0.5, {0.2, -0.1}, 0.7);
  for (int i = 0; i < 16; ++i) {
    double t = 2.0 * M_PI * i / 16;
    Point2 p = e.point(t);
    Point2 tan = e.tangent(t);
    Point2 nrm = e.normal(t);
    // Unit normal orthogonal to the tangent.
    CHECK(std::abs(nrm[0] * nrm[0] + nrm[1] * nrm[1] - 1.0) < 1e-12);
    CHECK(std::abs(tan[0] * nrm[0] + tan[1] * nrm[1]) < 1e-12);
    CHECK(e.speed(t) == doctest::Approx(std::hypot(tan[0], tan[1])).epsilon(1e-14));
    // Point lies on the rotated ellipse: pull back to axis-aligned frame.
    double dx = p[0] - 0.2, dy = p[1] + 0.1;
    double c = std::cos(0.7), sgn = std::sin(0.7);
    double u = c * dx + sgn * dy, w = -sgn * dx + c * dy;
    CHECK(u * u / 1.0 + w * w / 0.25 == doctest::Approx(1.0).epsilon(1e-12));
  }
  // A circle has constant curvature 1/r.
  SmoothCurve cir = SmoothCurve::circle(2.5);
  for (int i = 0; i < 8; ++i) {
    double t = 2.0 * M_PI * i / 8;
    CHECK(cir.curvature(t) == doctest::Approx(1.0 / 2.5).epsilon(1e-12));
  }
}
