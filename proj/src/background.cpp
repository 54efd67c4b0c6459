#include "mlpt/background.hpp"

#include <cmath>

namespace mlpt {

double background_eval(const HarmonicBackground& bg, Point2 x) {
  Complex zeta(x[0], x[1]);
  // Horner evaluation of F(zeta) = sum_m A_m zeta^m, m >= 1.
  Complex f(0.0, 0.0);
  for (size_t m = bg.coeffs.size(); m-- > 0;) f = (f + bg.coeffs[m]) * zeta;
  return bg.constant + f.real();
}

Point2 background_grad(const HarmonicBackground& bg, Point2 x) {
  Complex zeta(x[0], x[1]);
  // F'(zeta) = sum_m m A_m zeta^{m-1}; grad(Re F) = (Re F', -Im F').
  Complex df(0.0, 0.0);
  for (size_t m = bg.coeffs.size(); m-- > 1;) df = df * zeta + double(m + 1) * bg.coeffs[m];
  if (!bg.coeffs.empty()) df = df * zeta + bg.coeffs[0];
  return {df.real(), -df.imag()};
}

std::vector<Complex> shift_coeffs(const std::vector<Complex>& coeffs, Complex z) {
  int mx = int(coeffs.size());
  std::vector<Complex> b(size_t(mx) + 1, Complex(0.0, 0.0));
  for (int m = 1; m <= mx; ++m) {
    Complex am = coeffs[size_t(m) - 1];
    if (am == Complex(0.0, 0.0)) continue;
    // binom(m, j) z^{m-j} built incrementally from j = m downward.
    Complex term = am;  // j = m: binom(m,m) z^0 * A_m
    b[size_t(m)] += term;
    for (int j = m - 1; j >= 0; --j) {
      // binom(m,j) = binom(m,j+1) * (j+1) / (m-j)
      term *= z * (double(j + 1) / double(m - j));
      b[size_t(j)] += term;
    }
  }
  return b;
}

HarmonicBackground recenter(const HarmonicBackground& bg, Point2 z) {
  std::vector<Complex> b = shift_coeffs(bg.coeffs, Complex(z[0], z[1]));
  HarmonicBackground out;
  out.constant = bg.constant + b[0].real();
  out.coeffs.assign(b.begin() + 1, b.end());
  while (!out.coeffs.empty() && out.coeffs.back() == Complex(0.0, 0.0)) out.coeffs.pop_back();
  return out;
}

}  // namespace mlpt
