#pragma once

#include <Eigen/Dense>
#include <map>
#include <utility>
#include <vector>

#include "mlpt/types.hpp"

namespace mlpt {

// --------------------------------------------------------------------------
// Nystrom discretization of the block transmission system for a nested
// family of smooth interfaces.  The unknown interface densities phi_k solve
//   (Lambda - K) phi = g,   g_k = nu_k . grad H on interface k,
// where Lambda is block-diagonal with contrast lambda_k on block k and K is
// the block Neumann-Poincare-type matrix: diagonal blocks are the adjoint
// single-layer normal-derivative operator on each curve, off-diagonal block
// (k,l) is the normal derivative across interface k of the single layer on
// interface l.  Quadrature: periodic trapezoid; the diagonal kernel limit is
// curvature/(4 pi).
// --------------------------------------------------------------------------

struct InterfaceGrid {
  std::vector<double> t;       // parameter values (equispaced on [0, 2pi))
  std::vector<Point2> x;       // node positions
  std::vector<Point2> normal;  // outward unit normals
  std::vector<double> speed;   // |gamma'(t)|
  std::vector<double> weight;  // trapezoid weights h * speed
};

struct BlockNpSystem {
  LayeredShape shape;
  std::vector<double> lambdas;
  std::vector<InterfaceGrid> grids;
  std::vector<long> offset;  // block start indices; offset.back() = total size
  Eigen::MatrixXd K;         // discretized block NP matrix
  Eigen::MatrixXd A;         // Lambda - K (the system matrix)

  long total() const { return offset.back(); }
  int interfaces() const { return int(grids.size()); }
};

struct DensityField {
  std::vector<std::vector<double>> phi;  // per interface, per node
};

// Multi-index (i, j) represents the monomial x^i y^j.
using MultiIndex = std::pair<int, int>;
// Sparse polynomial in two variables: multi-index -> coefficient.
using PolyCoeffs = std::map<MultiIndex, double>;

struct GptTable {
  int max_degree = 0;
  std::map<std::pair<MultiIndex, MultiIndex>, double> values;
  double value(MultiIndex alpha, MultiIndex beta) const;
};

struct CgptBlock {
  Eigen::MatrixXd cc, cs, sc, ss;  // (m, n) entries at 0-based (m-1, n-1)
};

// Build the dense system.  nodes_per_curve must be even and >= 16; a
// per-curve Richardson estimate on a smooth test integrand must pass 1e-8,
// otherwise CurveTooCoarse is thrown.  The OpenMP build parallelizes the row
// loop; assemble_serial is the plain-loop reference and produces bit-identical
// matrices.
BlockNpSystem assemble(const LayeredShape& shape, int nodes_per_curve);
BlockNpSystem assemble_serial(const LayeredShape& shape, int nodes_per_curve);

// Direct dense solve for the interface densities driven by a background
// field; each block is projected to zero quadrature mean afterwards.
DensityField solve_densities(const BlockNpSystem& system, const HarmonicBackground& bg);

// Polarization tensor table M_{alpha beta} for 1 <= |alpha|, |beta| <= max_degree.
GptTable gpt(const BlockNpSystem& system, int max_degree);

// Contraction of the table with the harmonic coefficients of r^n cos(n theta)
// and r^n sin(n theta).
CgptBlock cgpt(const BlockNpSystem& system, int order);

// (u - H)(x) by direct quadrature of the single-layer sums; x must lie
// strictly outside the outer interface.
double far_field_eval(const BlockNpSystem& system, const DensityField& densities,
                      Point2 x);

// Eigenvalues of the discretized block NP matrix, sorted by real part.
std::vector<Complex> np_spectrum(const BlockNpSystem& system);

// Max over pairs (a, b) of |S(a,b) - S(b,a)| where S(a,b) contracts the
// polarization table with harmonic polynomials f_a, f_b.  Each coefficient
// set must pass an exact coefficient-space Laplacian check
// (NonHarmonicCoefficients otherwise).
double check_symmetry(const BlockNpSystem& system,
                      const std::vector<PolyCoeffs>& harmonic_coeff_sets);

// Two-sided energy bound gaps for one harmonic polynomial f:
//   s := sum a_alpha a_beta M_{alpha beta},
//   L := sum_k ((sigma_k-1)/sigma_k) * int_{layer k} |grad f|^2,
//   U := sum_k  (sigma_k-1)          * int_{layer k} |grad f|^2.
// Returns (s - L, U - s); both are >= -tolerance for valid systems.  Layer
// area integrals are reduced to boundary integrals by the Green identity.
std::pair<double, double> check_positivity(const BlockNpSystem& system,
                                           const PolyCoeffs& harmonic_coeff_set);

// Polynomial helpers shared with tests and the symmetry checks.
double poly_eval(const PolyCoeffs& coeffs, Point2 x);
Point2 poly_grad(const PolyCoeffs& coeffs, Point2 x);
// Throws NonHarmonicCoefficients unless the Laplacian vanishes identically in
// coefficient space.
void require_harmonic(const PolyCoeffs& coeffs);
// Coefficients of r^n cos(n theta) (cosine = true) or r^n sin(n theta).
PolyCoeffs harmonic_monomial(int n, bool cosine);

}  // namespace mlpt
