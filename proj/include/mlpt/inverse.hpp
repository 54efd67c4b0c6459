#pragma once

#include <limits>
#include <map>
#include <vector>

#include "mlpt/disks.hpp"
#include "mlpt/types.hpp"

namespace mlpt {

// --------------------------------------------------------------------------
// Reconstruction pipeline: boundary measurements -> center -> multipole
// coefficients -> layer radii -> layer conductivities with solvability
// certificates.
// --------------------------------------------------------------------------

struct MeasurementSet {
  std::vector<Point2> points;   // sample locations
  std::vector<double> u;        // measured potential values
  HarmonicBackground background;
  double enclosing_radius = 0.0;  // declared circle containing the structure
  double noise_std = 0.0;         // absolute std of additive noise (0 = none)
};

// Checks the declared geometry: sizes match and every sample lies strictly
// outside the enclosing circle.
void validate(const MeasurementSet& m);

// Multipole coefficients with uncertainty and fit diagnostics.
struct MultipoleEstimate {
  MultipoleSpectrum spectrum;    // n -> estimated c_n
  std::map<int, double> stds;    // n -> coefficient std estimate
  double residual_rms = 0.0;     // RMS of the fit residual
  double condition = 0.0;        // design-matrix condition number
};

// Least-squares fit of the exterior series about `center` for orders up to
// n_max (orders whose background coefficient vanishes are unobservable and
// are skipped).  Throws InsufficientSamples (< 2 n_max + 1 samples) and
// IllConditionedFit (condition > 1e12).
MultipoleEstimate extract_multipoles(const MeasurementSet& m, Point2 center,
                                     int n_max);

// Center estimate from the leading dipole model
//   (u - H)(x) ~ -grad G(x - z)^T Mtilde grad H(z),
// fitted by Gauss-Newton over z (symmetric 2x2 Mtilde solved linearly inside)
// with a multi-start grid.  Throws NoConvergence / DegenerateDipole.
Point2 locate(const MeasurementSet& m, const HarmonicBackground& bg);

struct RadiiOptions {
  std::vector<int> orders;  // orders to fit against (empty = all usable)
  double outer_radius_cap = std::numeric_limits<double>::infinity();
  bool multistart = true;   // deep-layer restart grid around the peel output
};

struct RadiiRecovery {
  std::vector<double> radii;
  std::vector<double> lambdas;  // contrast estimates after refinement
  std::vector<double> sigmas;   // conductivities implied by lambdas
  int peeled_layers = 0;        // layers resolved by ratio peeling
  double weighted_residual = 0.0;
  std::vector<int> orders_used;
};

// Stage 1: ratio peeling of the decay series (r_k^2 from consecutive-order
// ratios, amplitudes give initial contrasts, subtract and repeat).  Stage 2:
// Gauss-Newton refinement of all radii and contrasts against the provided
// orders, weighted by the coefficient stds.  Throws PeelExhausted when no
// layer rises above the noise floor and NonPhysicalEstimate when the final
// estimates violate ordering or positivity.
RadiiRecovery recover_radii(const MultipoleEstimate& est, int N,
                            const RadiiOptions& options = {});

struct SigmaRecovery {
  std::vector<double> sigmas;
  std::vector<double> lambdas;
  std::vector<int> orders;  // mode combination actually used
  double detL = 0.0, detR = 0.0;
  double scaleL = 0.0, scaleR = 0.0;  // Hadamard row/column scale bounds
  bool newton_converged = false;
  bool certificate_ok = false;
};

// Newton solve of c_{i_k}(lambda) = chat_{i_k} at N mode indices, starting
// from lambda_init (or a +-1 grid when empty).  The solvability certificate
// requires |det L| and |det R| above 1e-10 of their Hadamard scales; on
// failure the next combination of N out of the available orders is tried
// (first 20, lexicographic).  Throws CertificateFailed / NewtonDiverged /
// NonPhysicalEstimate.
SigmaRecovery recover_sigmas(const MultipoleEstimate& est,
                             const std::vector<double>& radii,
                             const std::vector<int>& orders = {},
                             const std::vector<double>& lambda_init = {});

struct InvertOptions {
  int n_max = 20;
  bool refine_center = true;       // mode-space center refinement (full circles)
  double search_halfwidth = 0.0;   // multi-start grid half-width; 0 = auto
  std::vector<int> sigma_orders;   // fixed combination; empty = certificate walk
};

struct OrderResidual {
  int n;
  double c_hat, c_model, std;
};

struct InverseReport {
  Point2 center{0.0, 0.0};
  std::vector<double> radii, sigmas, lambdas;
  std::vector<OrderResidual> per_order;
  std::vector<int> sigma_orders;
  double detL = 0.0, detR = 0.0;
  int modes_used = 0;        // highest order carried into the fit
  int peeled_layers = 0;
  double weighted_residual = 0.0;  // whitened refinement residual norm
  double residual_floor = 0.0;     // expected scale of that residual
  double extraction_cond = 0.0;
  bool located = false;
  bool newton_converged = false;
  bool certificate_ok = false;
  bool misfit = false;  // residual > 100x floor: model/N mismatch suspected
};

// Full pipeline: locate -> (optional mode-space center refinement on full
// equispaced circles) -> multipole extraction -> radii -> conductivities.
InverseReport invert(const MeasurementSet& m, int N, const InvertOptions& options = {});

}  // namespace mlpt
