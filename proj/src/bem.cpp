#include "mlpt/bem.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mlpt/background.hpp"
#include "mlpt/errors.hpp"

namespace mlpt {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double ipow(double x, int p) {
  double r = 1.0;
  for (int i = 0; i < p; ++i) r *= x;
  return r;
}

InterfaceGrid make_grid(const SmoothCurve& c, int m) {
  InterfaceGrid g;
  g.t.resize(size_t(m));
  g.x.resize(size_t(m));
  g.normal.resize(size_t(m));
  g.speed.resize(size_t(m));
  g.weight.resize(size_t(m));
  double h = kTwoPi / double(m);
  for (int i = 0; i < m; ++i) {
    double t = h * double(i);
    g.t[size_t(i)] = t;
    g.x[size_t(i)] = c.point(t);
    g.normal[size_t(i)] = c.normal(t);
    g.speed[size_t(i)] = c.speed(t);
    g.weight[size_t(i)] = h * g.speed[size_t(i)];
  }
  return g;
}

// Richardson estimate of the periodic-trapezoid error on this grid: integrate
// smooth geometry-driven functions (total curvature and scaled position
// moments) with all m nodes and with every other node, and compare.
double quadrature_error_estimate(const SmoothCurve& c, const InterfaceGrid& g) {
  size_t m = g.t.size();
  double scale = 1.0;
  for (size_t i = 0; i < m; ++i)
    scale = std::max({scale, std::abs(g.x[i][0]), std::abs(g.x[i][1])});
  double worst = 0.0;
  for (int which = 0; which < 3; ++which) {
    double full = 0.0, half = 0.0;
    for (size_t i = 0; i < m; ++i) {
      double s1 = g.x[i][0] / scale, s2 = g.x[i][1] / scale;
      double f;
      if (which == 0)
        f = c.curvature(g.t[i]);
      else if (which == 1)
        f = s1 * s2;
      else
        f = std::exp(0.7 * s1 - 0.4 * s2);
      full += g.weight[i] * f;
      if (i % 2 == 0) half += 2.0 * g.weight[i] * f;
    }
    worst = std::max(worst, std::abs(full - half) / (1.0 + std::abs(full)));
  }
  return worst;
}

double kappa_star(Point2 x, Point2 nux, Point2 y) {
  double d0 = x[0] - y[0], d1 = x[1] - y[1];
  double r2 = d0 * d0 + d1 * d1;
  return (d0 * nux[0] + d1 * nux[1]) / (kTwoPi * r2);
}

BlockNpSystem assemble_impl(const LayeredShape& shape, int nodes_per_curve,
                            bool parallel) {
  require_valid(shape);
  if (nodes_per_curve < 16 || nodes_per_curve % 2 != 0)
    fail(ErrorCode::CurveTooCoarse, "nodes per curve must be even and at least 16");

  BlockNpSystem sys;
  sys.shape = shape;
  sys.lambdas = contrasts_of(shape).lambdas;
  int nc = int(shape.curves.size());
  sys.offset.assign(size_t(nc) + 1, 0);
  std::vector<std::vector<double>> kappa(static_cast<size_t>(nc));
  for (int k = 0; k < nc; ++k) {
    sys.grids.push_back(make_grid(shape.curves[size_t(k)], nodes_per_curve));
    double err = quadrature_error_estimate(shape.curves[size_t(k)], sys.grids.back());
    if (err > 1e-8)
      fail(ErrorCode::CurveTooCoarse,
           "quadrature error estimate " + std::to_string(err) + " on interface " +
               std::to_string(k + 1) + " exceeds 1e-8; increase node count");
    kappa[size_t(k)].resize(size_t(nodes_per_curve));
    for (int i = 0; i < nodes_per_curve; ++i)
      kappa[size_t(k)][size_t(i)] =
          shape.curves[size_t(k)].curvature(sys.grids[size_t(k)].t[size_t(i)]);
    sys.offset[size_t(k) + 1] = sys.offset[size_t(k)] + nodes_per_curve;
  }

  long total = sys.offset[size_t(nc)];
  sys.K.resize(total, total);
  sys.A.resize(total, total);

  auto fill_row = [&](long row) {
    int k = 0;
    while (sys.offset[size_t(k) + 1] <= row) ++k;
    long i = row - sys.offset[size_t(k)];
    const InterfaceGrid& gk = sys.grids[size_t(k)];
    Point2 xi = gk.x[size_t(i)];
    Point2 ni = gk.normal[size_t(i)];
    for (int l = 0; l < nc; ++l) {
      const InterfaceGrid& gl = sys.grids[size_t(l)];
      long base = sys.offset[size_t(l)];
      for (long j = 0; j < long(gl.x.size()); ++j) {
        double entry;
        if (l == k && j == i)
          entry = kappa[size_t(k)][size_t(i)] / (4.0 * kPi) * gk.weight[size_t(i)];
        else
          entry = kappa_star(xi, ni, gl.x[size_t(j)]) * gl.weight[size_t(j)];
        sys.K(row, base + j) = entry;
        sys.A(row, base + j) =
            (base + j == row ? sys.lambdas[size_t(k)] : 0.0) - entry;
      }
    }
  };

  if (parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long row = 0; row < total; ++row) fill_row(row);
  } else {
    for (long row = 0; row < total; ++row) fill_row(row);
  }
  return sys;
}

Eigen::PartialPivLU<Eigen::MatrixXd> guarded_lu(const Eigen::MatrixXd& m) {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
  Eigen::VectorXd d = lu.matrixLU().diagonal().cwiseAbs();
  double scale = std::max(m.cwiseAbs().maxCoeff(), d.maxCoeff());
  if (!(d.minCoeff() > 1e-13 * scale))
    fail(ErrorCode::SingularSystem,
         "transmission system pivot collapsed (contrast or geometry degenerate)");
  return lu;
}

// Project each interface block of a stacked solution to zero quadrature mean.
void project_zero_mean(const BlockNpSystem& sys, Eigen::MatrixXd& phi) {
  for (int k = 0; k < sys.interfaces(); ++k) {
    const InterfaceGrid& g = sys.grids[size_t(k)];
    long base = sys.offset[size_t(k)];
    long m = long(g.x.size());
    double wsum = 0.0;
    for (long i = 0; i < m; ++i) wsum += g.weight[size_t(i)];
    for (long col = 0; col < phi.cols(); ++col) {
      double mean = 0.0;
      for (long i = 0; i < m; ++i) mean += g.weight[size_t(i)] * phi(base + i, col);
      mean /= wsum;
      for (long i = 0; i < m; ++i) phi(base + i, col) -= mean;
    }
  }
}

DensityField unstack(const BlockNpSystem& sys, const Eigen::VectorXd& v) {
  DensityField out;
  out.phi.resize(size_t(sys.interfaces()));
  for (int k = 0; k < sys.interfaces(); ++k) {
    long base = sys.offset[size_t(k)];
    long m = long(sys.grids[size_t(k)].x.size());
    out.phi[size_t(k)].assign(v.data() + base, v.data() + base + m);
  }
  return out;
}

// Winding number of the sampled interface around x (0 outside, +-2pi inside).
double winding_angle(const InterfaceGrid& g, Point2 x) {
  double total = 0.0;
  size_t m = g.x.size();
  for (size_t i = 0; i < m; ++i) {
    size_t j = (i + 1) % m;
    double ax = g.x[i][0] - x[0], ay = g.x[i][1] - x[1];
    double bx = g.x[j][0] - x[0], by = g.x[j][1] - x[1];
    total += std::atan2(ax * by - ay * bx, ax * bx + ay * by);
  }
  return total;
}

std::vector<MultiIndex> indices_up_to(int max_degree) {
  std::vector<MultiIndex> out;
  for (int d = 1; d <= max_degree; ++d)
    for (int i = d; i >= 0; --i) out.push_back({i, d - i});
  return out;
}

// RHS vector for a polynomial background f: entries nu_k . grad f at nodes.
Eigen::VectorXd poly_rhs(const BlockNpSystem& sys, const PolyCoeffs& f) {
  Eigen::VectorXd g(sys.total());
  for (int k = 0; k < sys.interfaces(); ++k) {
    const InterfaceGrid& grid = sys.grids[size_t(k)];
    long base = sys.offset[size_t(k)];
    for (size_t i = 0; i < grid.x.size(); ++i) {
      Point2 gr = poly_grad(f, grid.x[i]);
      g[base + long(i)] = grid.normal[i][0] * gr[0] + grid.normal[i][1] * gr[1];
    }
  }
  return g;
}

// Quadrature of f against a stacked density column: sum_k int f phi_k ds.
double pair_integral(const BlockNpSystem& sys, const PolyCoeffs& f,
                     const Eigen::VectorXd& phi) {
  double s = 0.0;
  for (int k = 0; k < sys.interfaces(); ++k) {
    const InterfaceGrid& grid = sys.grids[size_t(k)];
    long base = sys.offset[size_t(k)];
    for (size_t i = 0; i < grid.x.size(); ++i)
      s += grid.weight[i] * poly_eval(f, grid.x[i]) * phi[base + long(i)];
  }
  return s;
}

}  // namespace

double GptTable::value(MultiIndex alpha, MultiIndex beta) const {
  auto it = values.find({alpha, beta});
  if (it == values.end())
    fail(ErrorCode::IndexOutOfRange, "polarization entry outside tabulated degrees");
  return it->second;
}

BlockNpSystem assemble(const LayeredShape& shape, int nodes_per_curve) {
  return assemble_impl(shape, nodes_per_curve, true);
}

BlockNpSystem assemble_serial(const LayeredShape& shape, int nodes_per_curve) {
  return assemble_impl(shape, nodes_per_curve, false);
}

DensityField solve_densities(const BlockNpSystem& system, const HarmonicBackground& bg) {
  Eigen::VectorXd g(system.total());
  for (int k = 0; k < system.interfaces(); ++k) {
    const InterfaceGrid& grid = system.grids[size_t(k)];
    long base = system.offset[size_t(k)];
    for (size_t i = 0; i < grid.x.size(); ++i) {
      Point2 gr = background_grad(bg, grid.x[i]);
      g[base + long(i)] = grid.normal[i][0] * gr[0] + grid.normal[i][1] * gr[1];
    }
  }
  Eigen::MatrixXd phi = guarded_lu(system.A).solve(g);
  project_zero_mean(system, phi);
  return unstack(system, phi.col(0));
}

GptTable gpt(const BlockNpSystem& system, int max_degree) {
  if (max_degree < 1) fail(ErrorCode::ConfigError, "max degree must be >= 1");
  std::vector<MultiIndex> idx = indices_up_to(max_degree);
  long nb = long(idx.size());

  Eigen::MatrixXd rhs(system.total(), nb);
  for (long b = 0; b < nb; ++b) {
    PolyCoeffs mono{{idx[size_t(b)], 1.0}};
    rhs.col(b) = poly_rhs(system, mono);
  }
  Eigen::MatrixXd phi = guarded_lu(system.A).solve(rhs);
  project_zero_mean(system, phi);

  GptTable table;
  table.max_degree = max_degree;
  for (long a = 0; a < nb; ++a) {
    PolyCoeffs mono{{idx[size_t(a)], 1.0}};
    for (long b = 0; b < nb; ++b)
      table.values[{idx[size_t(a)], idx[size_t(b)]}] =
          pair_integral(system, mono, phi.col(b));
  }
  return table;
}

CgptBlock cgpt(const BlockNpSystem& system, int order) {
  if (order < 1) fail(ErrorCode::ConfigError, "order must be >= 1");
  GptTable table = gpt(system, order);
  CgptBlock out;
  out.cc = Eigen::MatrixXd::Zero(order, order);
  out.cs = Eigen::MatrixXd::Zero(order, order);
  out.sc = Eigen::MatrixXd::Zero(order, order);
  out.ss = Eigen::MatrixXd::Zero(order, order);
  std::vector<PolyCoeffs> cosc(static_cast<size_t>(order)), sinc(static_cast<size_t>(order));
  for (int n = 1; n <= order; ++n) {
    cosc[size_t(n) - 1] = harmonic_monomial(n, true);
    sinc[size_t(n) - 1] = harmonic_monomial(n, false);
  }
  auto contract = [&](const PolyCoeffs& a, const PolyCoeffs& b) {
    double s = 0.0;
    for (const auto& [al, av] : a)
      for (const auto& [be, bv] : b) s += av * bv * table.value(al, be);
    return s;
  };
  for (int m = 1; m <= order; ++m)
    for (int n = 1; n <= order; ++n) {
      out.cc(m - 1, n - 1) = contract(cosc[size_t(m) - 1], cosc[size_t(n) - 1]);
      out.cs(m - 1, n - 1) = contract(cosc[size_t(m) - 1], sinc[size_t(n) - 1]);
      out.sc(m - 1, n - 1) = contract(sinc[size_t(m) - 1], cosc[size_t(n) - 1]);
      out.ss(m - 1, n - 1) = contract(sinc[size_t(m) - 1], sinc[size_t(n) - 1]);
    }
  return out;
}

double far_field_eval(const BlockNpSystem& system, const DensityField& densities,
                      Point2 x) {
  if (std::abs(winding_angle(system.grids[0], x)) > 1.0)
    fail(ErrorCode::PointInsideInclusion,
         "evaluation point is not strictly outside the outer interface");
  double u = 0.0;
  for (int k = 0; k < system.interfaces(); ++k) {
    const InterfaceGrid& g = system.grids[size_t(k)];
    const std::vector<double>& phi = densities.phi[size_t(k)];
    for (size_t i = 0; i < g.x.size(); ++i) {
      double d0 = x[0] - g.x[i][0], d1 = x[1] - g.x[i][1];
      u += g.weight[i] * phi[i] * std::log(d0 * d0 + d1 * d1);
    }
  }
  return u / (4.0 * kPi);  // log(r^2)/(4 pi) = log(r)/(2 pi)
}

std::vector<Complex> np_spectrum(const BlockNpSystem& system) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(system.K);
  std::vector<Complex> ev(static_cast<size_t>(system.total()));
  for (long i = 0; i < system.total(); ++i) ev[size_t(i)] = es.eigenvalues()[i];
  std::sort(ev.begin(), ev.end(), [](Complex a, Complex b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  return ev;
}

double check_symmetry(const BlockNpSystem& system,
                      const std::vector<PolyCoeffs>& harmonic_coeff_sets) {
  for (const PolyCoeffs& f : harmonic_coeff_sets) require_harmonic(f);
  long ns = long(harmonic_coeff_sets.size());
  Eigen::MatrixXd rhs(system.total(), ns);
  for (long b = 0; b < ns; ++b)
    rhs.col(b) = poly_rhs(system, harmonic_coeff_sets[size_t(b)]);
  Eigen::MatrixXd phi = guarded_lu(system.A).solve(rhs);
  project_zero_mean(system, phi);

  double worst = 0.0;
  for (long a = 0; a < ns; ++a)
    for (long b = a + 1; b < ns; ++b) {
      double sab = pair_integral(system, harmonic_coeff_sets[size_t(a)], phi.col(b));
      double sba = pair_integral(system, harmonic_coeff_sets[size_t(b)], phi.col(a));
      worst = std::max(worst, std::abs(sab - sba));
    }
  return worst;
}

std::pair<double, double> check_positivity(const BlockNpSystem& system,
                                           const PolyCoeffs& harmonic_coeff_set) {
  require_harmonic(harmonic_coeff_set);
  Eigen::MatrixXd rhs = poly_rhs(system, harmonic_coeff_set);
  Eigen::MatrixXd phi = guarded_lu(system.A).solve(rhs);
  project_zero_mean(system, phi);
  double s = pair_integral(system, harmonic_coeff_set, phi.col(0));

  // Dirichlet energy of f over each layer by the Green identity:
  // int_layer |grad f|^2 = boundary flux through the outer curve minus the
  // flux through the inner curve (f is harmonic, so no volume term).
  int nc = system.interfaces();
  std::vector<double> flux(size_t(nc) + 1, 0.0);
  for (int k = 0; k < nc; ++k) {
    const InterfaceGrid& g = system.grids[size_t(k)];
    double b = 0.0;
    for (size_t i = 0; i < g.x.size(); ++i) {
      Point2 gr = poly_grad(harmonic_coeff_set, g.x[i]);
      double dn = g.normal[i][0] * gr[0] + g.normal[i][1] * gr[1];
      b += g.weight[i] * poly_eval(harmonic_coeff_set, g.x[i]) * dn;
    }
    flux[size_t(k)] = b;
  }
  double lower = 0.0, upper = 0.0;
  for (int k = 0; k < nc; ++k) {
    double energy = flux[size_t(k)] - flux[size_t(k) + 1];
    double sk = system.shape.sigmas[size_t(k)];
    lower += (sk - 1.0) / sk * energy;
    upper += (sk - 1.0) * energy;
  }
  return {s - lower, upper - s};
}

double poly_eval(const PolyCoeffs& coeffs, Point2 x) {
  double s = 0.0;
  for (const auto& [mi, c] : coeffs) s += c * ipow(x[0], mi.first) * ipow(x[1], mi.second);
  return s;
}

Point2 poly_grad(const PolyCoeffs& coeffs, Point2 x) {
  Point2 g{0.0, 0.0};
  for (const auto& [mi, c] : coeffs) {
    int i = mi.first, j = mi.second;
    if (i > 0) g[0] += c * double(i) * ipow(x[0], i - 1) * ipow(x[1], j);
    if (j > 0) g[1] += c * double(j) * ipow(x[0], i) * ipow(x[1], j - 1);
  }
  return g;
}

void require_harmonic(const PolyCoeffs& coeffs) {
  double scale = 0.0;
  for (const auto& [mi, c] : coeffs) scale = std::max(scale, std::abs(c));
  std::map<MultiIndex, double> lap;
  for (const auto& [mi, c] : coeffs) {
    int i = mi.first, j = mi.second;
    if (i >= 2) lap[{i - 2, j}] += c * double(i) * double(i - 1);
    if (j >= 2) lap[{i, j - 2}] += c * double(j) * double(j - 1);
  }
  for (const auto& [mi, c] : lap)
    if (std::abs(c) > 1e-10 * (1.0 + scale) * double((mi.first + 2) * (mi.second + 2)))
      fail(ErrorCode::NonHarmonicCoefficients,
           "coefficient set has a nonvanishing Laplacian term at x^" +
               std::to_string(mi.first) + " y^" + std::to_string(mi.second));
}

PolyCoeffs harmonic_monomial(int n, bool cosine) {
  if (n < 1) fail(ErrorCode::ConfigError, "order must be >= 1");
  PolyCoeffs out;
  // (x + i y)^n = sum_k binom(n,k) x^{n-k} (i y)^k; real part collects even k,
  // imaginary part odd k.
  double binom = 1.0;
  for (int k = 0; k <= n; ++k) {
    if (cosine && k % 2 == 0)
      out[{n - k, k}] = binom * ((k / 2) % 2 == 0 ? 1.0 : -1.0);
    else if (!cosine && k % 2 == 1)
      out[{n - k, k}] = binom * (((k - 1) / 2) % 2 == 0 ? 1.0 : -1.0);
    binom = binom * double(n - k) / double(k + 1);
  }
  return out;
}

}  // namespace mlpt
