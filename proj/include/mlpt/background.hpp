#pragma once

#include <vector>

#include "mlpt/types.hpp"

namespace mlpt {

// Value of the background field at a point.
double background_eval(const HarmonicBackground& bg, Point2 x);

// Gradient of the background field at a point.
Point2 background_grad(const HarmonicBackground& bg, Point2 x);

// Re-express the background about a new expansion point z.  The returned
// object satisfies background_eval(out, x) == background_eval(bg, x) for all x
// (up to roundoff), with out.coeffs[j-1] holding the degree-j coefficient of
// the expansion in powers of (zeta - z).
HarmonicBackground recenter(const HarmonicBackground& bg, Point2 z);

// Complex Taylor coefficients B_0..B_max of the analytic completion about z:
// sum_m A_m zeta^m = sum_j B_j (zeta - z)^j.  B_0 excludes the real constant.
std::vector<Complex> shift_coeffs(const std::vector<Complex>& coeffs, Complex z);

}  // namespace mlpt
