#pragma once

#include <Eigen/Dense>
#include <map>
#include <vector>

#include "mlpt/types.hpp"

namespace mlpt {

// --------------------------------------------------------------------------
// Closed-form engine for N-layer concentric disks.
//
// Conventions.  Layer k (1-based) has radius radii[k-1] and conductivity
// sigmas[k-1]; radii strictly decrease; the background conductivity is 1.
// The contrast of interface k is lambdas[k-1] = (s_k + s_{k-1}) / (2 (s_k -
// s_{k-1})) with s_0 = 1.  For a background field H(x) = const +
// sum_n Re(A_n zeta^n) centered at the structure, the exterior perturbation is
//   (u - H)(x) = sum_n c_n Re(A_n e^{i n theta}) / rho^n,
// with rho = |x - center| and real multipole coefficients c_n.
// --------------------------------------------------------------------------

struct Gpm {
  int order = 1;                // mode index n
  Eigen::MatrixXd matrix;       // N x N polarization matrix for that mode
};

struct MultipoleSpectrum {
  Point2 center{0.0, 0.0};
  std::map<int, double> values;  // n -> c_n
};

// Mode-n polarization matrix: diagonal -2*lambda_i, strictly-lower entries -1,
// upper entry (i,j) = (r_j/r_i)^{2n} computed in log space (flushed to zero
// below 1e-300 so the large-n limit is exactly lower-triangular).
Eigen::MatrixXd gpm_matrix(const std::vector<double>& radii,
                           const std::vector<double>& lambdas, int n);
Gpm gpm(const ConcentricDisks& structure, int n);

// c_n = e^T Ups (M)^{-1} e with Ups = diag(r_k^{2n}).  Throws SingularGpm if
// the LU pivots collapse.
double multipole_rl(const std::vector<double>& radii,
                    const std::vector<double>& lambdas, int n);
double multipole(const ConcentricDisks& structure, int n);
MultipoleSpectrum multipole_spectrum(const ConcentricDisks& structure, int n_max);

// c_n together with its gradient in the contrasts and the radii (used by the
// Gauss-Newton refinement in the inverse pipeline).
struct MultipoleGrad {
  double c = 0.0;
  Eigen::VectorXd dc_dlambda;
  Eigen::VectorXd dc_dradius;
};
MultipoleGrad multipole_grad(const std::vector<double>& radii,
                             const std::vector<double>& lambdas, int n);

// Interface densities for mode n with background coefficient a_n: solves the
// interface system E phi = 2 n a_n e, where E has diagonal 2 lambda_k
// r_k^{1-n}, upper entries -r_j^{n+1} r_i^{-2n}, and lower entries r_j^{1-n}.
// Satisfies c_n = -sum_k r_k^{n+1} phi_k / (2 n a_n).
std::vector<Complex> density_coefficients(const ConcentricDisks& structure, int n,
                                          Complex a_n);

// Total field u(x) at an exterior point (throws PointInsideInclusion when
// |x - center| <= r_1).  The background expansion is about the origin; it is
// recentered to the structure internally, so the series is finite and exact.
double field_eval(const ConcentricDisks& structure, const HarmonicBackground& bg,
                  Point2 x);

// Backward-recursion building blocks for the adjugate general terms.
// Valid for 1 <= i < j <= M+1 (throws IndexOutOfRange otherwise).
double k_term(int M, int i, int j, int n, const std::vector<double>& lambdas,
              const std::vector<double>& radii);
double l_term(int M, int i, int j, int n, const std::vector<double>& lambdas,
              const std::vector<double>& radii);

// Adjugate general terms: column (M* e) and row (e^T Ups M*) of the mode-n
// polarization matrix, assembled from k_term / l_term.
Eigen::VectorXd adjugate_col(const ConcentricDisks& structure, int n);
Eigen::VectorXd adjugate_row(const ConcentricDisks& structure, int n);
Eigen::VectorXd adjugate_col_rl(const std::vector<double>& radii,
                                const std::vector<double>& lambdas, int n);
Eigen::VectorXd adjugate_row_rl(const std::vector<double>& radii,
                                const std::vector<double>& lambdas, int n);

// Certificate matrices over a strictly increasing list of N mode indices:
// row k of L is the adjugate row at order orders[k]; column k of R is the
// adjugate column at order orders[k].  Their determinants certify solvability
// of the conductivity recovery at those orders.
struct CertMatrices {
  Eigen::MatrixXd L, R;
  double detL = 0.0, detR = 0.0;
};
CertMatrices cert_matrices(const ConcentricDisks& structure,
                           const std::vector<int>& orders);
CertMatrices cert_matrices_rl(const std::vector<double>& radii,
                              const std::vector<double>& lambdas,
                              const std::vector<int>& orders);

// Effective conductivity of a coated disk (outer layer sigma1 in r2<r<r1,
// core sigma2): sigma0 = sigma1 + 2 sigma1 f1 (sigma2-sigma1) /
// (2 sigma1 + f2 (sigma2-sigma1)), f1 = r2^2/r1^2 = 1 - f2.  Throws
// DegenerateDenominator when the denominator vanishes.
double hashin_shtrikman(double sigma1, double sigma2, double r1, double r2);

// Outer-layer conductivity that renders the coated disk neutral in a
// background of conductivity sigma0 (positive root of the Hashin-Shtrikman
// quadratic).  Throws DegenerateDenominator when no positive root exists.
double neutral_outer_sigma(double r1, double r2, double sigma2, double sigma0);

// Diagonal contracted-tensor entry of order n for disks (both cosine-cosine
// and sine-sine): equals -2*pi*n*c_n; off-diagonal entries vanish by symmetry.
double disk_cgpt_diag(const ConcentricDisks& structure, int n);

}  // namespace mlpt
