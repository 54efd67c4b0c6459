#include "mlpt/disks.hpp"

#include <cmath>
#include <numbers>

#include "mlpt/background.hpp"
#include "mlpt/errors.hpp"

namespace mlpt {

namespace {

constexpr double kFlushBelow = 1e-300;

// (rj/ri)^(2n) in log space; flushed to exact zero once it underflows, which
// makes the large-n polarization matrix exactly lower-triangular.
double ratio_pow2n(double rj, double ri, int n) {
  double e = 2.0 * double(n) * (std::log(rj) - std::log(ri));
  double v = std::exp(e);
  return v < kFlushBelow ? 0.0 : v;
}

double pow2n(double r, int n) { return std::exp(2.0 * double(n) * std::log(r)); }

Eigen::VectorXd radii_pow2n(const std::vector<double>& radii, int n) {
  Eigen::VectorXd ups(radii.size());
  for (size_t k = 0; k < radii.size(); ++k) ups[long(k)] = pow2n(radii[k], n);
  return ups;
}

// LU solve with a pivot-collapse guard.
struct GuardedLu {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  explicit GuardedLu(const Eigen::MatrixXd& m, ErrorCode code) : lu(m) {
    Eigen::VectorXd d = lu.matrixLU().diagonal().cwiseAbs();
    double scale = std::max(m.cwiseAbs().maxCoeff(), d.maxCoeff());
    if (!(d.minCoeff() > 1e-13 * scale))
      fail(code, "pivot " + std::to_string(d.minCoeff()) + " below 1e-13 of scale " +
                     std::to_string(scale));
  }
};

std::vector<double> lambdas_of(const ConcentricDisks& s) {
  return contrasts_of(s).lambdas;
}

}  // namespace

Eigen::MatrixXd gpm_matrix(const std::vector<double>& radii,
                           const std::vector<double>& lambdas, int n) {
  if (n < 1) fail(ErrorCode::ConfigError, "mode index must be >= 1");
  long N = long(radii.size());
  Eigen::MatrixXd m(N, N);
  for (long i = 0; i < N; ++i)
    for (long j = 0; j < N; ++j) {
      if (i == j)
        m(i, j) = -2.0 * lambdas[size_t(i)];
      else if (i < j)
        m(i, j) = ratio_pow2n(radii[size_t(j)], radii[size_t(i)], n);
      else
        m(i, j) = -1.0;
    }
  return m;
}

Gpm gpm(const ConcentricDisks& structure, int n) {
  require_valid(structure);
  return Gpm{n, gpm_matrix(structure.radii, lambdas_of(structure), n)};
}

double multipole_rl(const std::vector<double>& radii,
                    const std::vector<double>& lambdas, int n) {
  Eigen::MatrixXd m = gpm_matrix(radii, lambdas, n);
  GuardedLu g(m, ErrorCode::SingularGpm);
  Eigen::VectorXd x = g.lu.solve(Eigen::VectorXd::Ones(m.rows()));
  return radii_pow2n(radii, n).dot(x);
}

double multipole(const ConcentricDisks& structure, int n) {
  require_valid(structure);
  return multipole_rl(structure.radii, lambdas_of(structure), n);
}

MultipoleSpectrum multipole_spectrum(const ConcentricDisks& structure, int n_max) {
  require_valid(structure);
  std::vector<double> lam = lambdas_of(structure);
  MultipoleSpectrum out;
  out.center = structure.center;
  for (int n = 1; n <= n_max; ++n) out.values[n] = multipole_rl(structure.radii, lam, n);
  return out;
}

MultipoleGrad multipole_grad(const std::vector<double>& radii,
                             const std::vector<double>& lambdas, int n) {
  long N = long(radii.size());
  Eigen::MatrixXd m = gpm_matrix(radii, lambdas, n);
  GuardedLu g(m, ErrorCode::SingularGpm);
  Eigen::VectorXd ups = radii_pow2n(radii, n);
  Eigen::VectorXd v = g.lu.solve(Eigen::VectorXd::Ones(N));
  Eigen::VectorXd u = m.transpose().partialPivLu().solve(ups);

  MultipoleGrad out;
  out.c = ups.dot(v);
  // dC/dlambda_k = -u^T (dM/dlambda_k) v with dM/dlambda_k = -2 E_kk.
  out.dc_dlambda = 2.0 * u.cwiseProduct(v);
  // dC/dr_k collects the Ups derivative plus the row-k and column-k ratio
  // derivatives of M.
  out.dc_dradius.resize(N);
  double two_n = 2.0 * double(n);
  for (long k = 0; k < N; ++k) {
    double rk = radii[size_t(k)];
    double upper = 0.0;  // sum_{j>k} M(k,j) v_j
    for (long j = k + 1; j < N; ++j) upper += m(k, j) * v[j];
    double lower = 0.0;  // sum_{i<k} u_i M(i,k)
    for (long i = 0; i < k; ++i) lower += u[i] * m(i, k);
    out.dc_dradius[k] =
        two_n * ups[k] / rk * v[k] + (two_n / rk) * (u[k] * upper - lower * v[k]);
  }
  return out;
}

std::vector<Complex> density_coefficients(const ConcentricDisks& structure, int n,
                                          Complex a_n) {
  require_valid(structure);
  if (n < 1) fail(ErrorCode::ConfigError, "mode index must be >= 1");
  std::vector<double> lam = lambdas_of(structure);
  const std::vector<double>& r = structure.radii;
  long N = long(r.size());
  Eigen::MatrixXd E(N, N);
  for (long i = 0; i < N; ++i)
    for (long j = 0; j < N; ++j) {
      double rj = r[size_t(j)];
      if (i == j)
        E(i, j) = 2.0 * lam[size_t(i)] * std::pow(rj, 1 - n);
      else if (i < j)
        E(i, j) = -std::pow(rj, n + 1) * std::pow(r[size_t(i)], -2 * n);
      else
        E(i, j) = std::pow(rj, 1 - n);
    }
  GuardedLu g(E, ErrorCode::SingularSystem);
  Eigen::VectorXd psi = g.lu.solve(Eigen::VectorXd::Constant(N, 2.0 * double(n)));
  std::vector<Complex> phi(static_cast<size_t>(N));
  for (long k = 0; k < N; ++k) phi[size_t(k)] = a_n * psi[k];
  return phi;
}

double field_eval(const ConcentricDisks& structure, const HarmonicBackground& bg,
                  Point2 x) {
  require_valid(structure);
  Complex zeta(x[0] - structure.center[0], x[1] - structure.center[1]);
  double rho = std::abs(zeta);
  if (rho <= structure.radii[0])
    fail(ErrorCode::PointInsideInclusion,
         "evaluation point at distance " + std::to_string(rho) +
             " from center is not outside the outer radius " +
             std::to_string(structure.radii[0]));

  std::vector<Complex> b = shift_coeffs(
      bg.coeffs, Complex(structure.center[0], structure.center[1]));
  std::vector<double> lam = lambdas_of(structure);
  Complex w = 1.0 / std::conj(zeta);  // e^{i theta} / rho
  Complex wp(1.0, 0.0);
  double pert = 0.0;
  for (size_t m = 1; m < b.size(); ++m) {
    wp *= w;
    if (b[m] == Complex(0.0, 0.0)) continue;
    double cm = multipole_rl(structure.radii, lam, int(m));
    pert += (b[m] * cm * wp).real();
  }
  return background_eval(bg, x) + pert;
}

namespace {

void check_kl_indices(int M, int i, int j, const std::vector<double>& lambdas,
                      const std::vector<double>& radii) {
  if (M < 1 || i < 1 || !(i < j) || j > M + 1)
    fail(ErrorCode::IndexOutOfRange,
         "need 1 <= i < j <= M+1, got M=" + std::to_string(M) + " i=" +
             std::to_string(i) + " j=" + std::to_string(j));
  if (int(lambdas.size()) < M || int(radii.size()) < M)
    fail(ErrorCode::IndexOutOfRange, "need at least M contrasts and radii");
}

// Shared backward recursion for the K and L tables.  Entry (i,j) is stored at
// table[i-1][j-1]; only i < j is populated.
enum class KlKind { K, L };

double kl_value(KlKind kind, int M, int i0, int j0, int n,
                const std::vector<double>& lambdas, const std::vector<double>& radii) {
  std::vector<std::vector<double>> t(size_t(M) + 1, std::vector<double>(size_t(M) + 2, 0.0));
  for (int i = 1; i <= M; ++i)
    t[size_t(i) - 1][size_t(M) + 1 - 1] =
        kind == KlKind::K ? 1.0 : pow2n(radii[size_t(i) - 1], n);
  for (int j = M; j >= 2; --j) {
    for (int i = j - 1; i >= 1; --i) {
      double lam_j = lambdas[size_t(j) - 1];
      double head = t[size_t(j) - 1][size_t(j + 1) - 1];   // (j, j+1) entry
      double next = t[size_t(i) - 1][size_t(j + 1) - 1];   // (i, j+1) entry
      if (kind == KlKind::K) {
        double tij = ratio_pow2n(radii[size_t(j) - 1], radii[size_t(i) - 1], n);
        t[size_t(i) - 1][size_t(j) - 1] = (tij + 1.0) * head - (-2.0 * lam_j + 1.0) * next;
      } else {
        double tji = ratio_pow2n(radii[size_t(i) - 1], radii[size_t(j) - 1], n);
        t[size_t(i) - 1][size_t(j) - 1] = (tji + 1.0) * head + (-2.0 * lam_j - 1.0) * next;
      }
    }
  }
  return t[size_t(i0) - 1][size_t(j0) - 1];
}

}  // namespace

double k_term(int M, int i, int j, int n, const std::vector<double>& lambdas,
              const std::vector<double>& radii) {
  check_kl_indices(M, i, j, lambdas, radii);
  return kl_value(KlKind::K, M, i, j, n, lambdas, radii);
}

double l_term(int M, int i, int j, int n, const std::vector<double>& lambdas,
              const std::vector<double>& radii) {
  check_kl_indices(M, i, j, lambdas, radii);
  return kl_value(KlKind::L, M, i, j, n, lambdas, radii);
}

Eigen::VectorXd adjugate_col_rl(const std::vector<double>& radii,
                                const std::vector<double>& lambdas, int n) {
  int N = int(radii.size());
  Eigen::VectorXd col(N);
  for (int i = 1; i <= N; ++i) {
    double prefix = (((N - i) % 2) == 0) ? 1.0 : -1.0;
    for (int j = 1; j < i; ++j) prefix *= (-2.0 * lambdas[size_t(j) - 1] + 1.0);
    col[i - 1] = prefix * kl_value(KlKind::K, N, i, i + 1, n, lambdas, radii);
  }
  return col;
}

Eigen::VectorXd adjugate_row_rl(const std::vector<double>& radii,
                                const std::vector<double>& lambdas, int n) {
  int N = int(radii.size());
  Eigen::VectorXd row(N);
  for (int i = 1; i <= N; ++i) {
    double prefix = 1.0;
    for (int j = 1; j < i; ++j) prefix *= (-2.0 * lambdas[size_t(j) - 1] - 1.0);
    row[i - 1] = prefix * kl_value(KlKind::L, N, i, i + 1, n, lambdas, radii);
  }
  return row;
}

Eigen::VectorXd adjugate_col(const ConcentricDisks& structure, int n) {
  require_valid(structure);
  return adjugate_col_rl(structure.radii, lambdas_of(structure), n);
}

Eigen::VectorXd adjugate_row(const ConcentricDisks& structure, int n) {
  require_valid(structure);
  return adjugate_row_rl(structure.radii, lambdas_of(structure), n);
}

CertMatrices cert_matrices_rl(const std::vector<double>& radii,
                              const std::vector<double>& lambdas,
                              const std::vector<int>& orders) {
  int N = int(radii.size());
  if (int(orders.size()) != N)
    fail(ErrorCode::ConfigError, "need exactly one mode index per layer");
  for (size_t k = 0; k < orders.size(); ++k) {
    if (orders[k] < 1 || (k > 0 && orders[k] <= orders[k - 1]))
      fail(ErrorCode::ConfigError, "mode indices must be strictly increasing and >= 1");
  }
  CertMatrices out;
  out.L.resize(N, N);
  out.R.resize(N, N);
  for (int k = 0; k < N; ++k) {
    out.L.row(k) = adjugate_row_rl(radii, lambdas, orders[size_t(k)]).transpose();
    out.R.col(k) = adjugate_col_rl(radii, lambdas, orders[size_t(k)]);
  }
  out.detL = out.L.determinant();
  out.detR = out.R.determinant();
  return out;
}

CertMatrices cert_matrices(const ConcentricDisks& structure,
                           const std::vector<int>& orders) {
  require_valid(structure);
  return cert_matrices_rl(structure.radii, lambdas_of(structure), orders);
}

double hashin_shtrikman(double sigma1, double sigma2, double r1, double r2) {
  if (!(sigma1 > 0.0) || !(sigma2 > 0.0) || !(r1 > r2) || !(r2 > 0.0))
    fail(ErrorCode::ConfigError, "need positive conductivities and r1 > r2 > 0");
  double f1 = (r2 * r2) / (r1 * r1);
  double f2 = 1.0 - f1;
  double den = 2.0 * sigma1 + f2 * (sigma2 - sigma1);
  if (std::abs(den) <= 1e-14 * (2.0 * sigma1 + f2 * (sigma2 + sigma1)))
    fail(ErrorCode::DegenerateDenominator, "effective-conductivity denominator vanishes");
  return sigma1 + 2.0 * sigma1 * f1 * (sigma2 - sigma1) / den;
}

double neutral_outer_sigma(double r1, double r2, double sigma2, double sigma0) {
  if (!(sigma0 > 0.0) || !(sigma2 > 0.0) || !(r1 > r2) || !(r2 > 0.0))
    fail(ErrorCode::ConfigError, "need positive conductivities and r1 > r2 > 0");
  double f1 = (r2 * r2) / (r1 * r1);
  double f2 = 1.0 - f1;
  double a = f2;
  double b = (1.0 + f1) * sigma2 - 2.0 * sigma0 + sigma0 * f2;
  double c = -sigma0 * f2 * sigma2;
  double disc = b * b - 4.0 * a * c;
  if (!(disc > 0.0) || !(a > 0.0))
    fail(ErrorCode::DegenerateDenominator, "no positive neutral-shell conductivity");
  double root = (-b + std::sqrt(disc)) / (2.0 * a);
  if (!(root > 0.0))
    fail(ErrorCode::DegenerateDenominator, "no positive neutral-shell conductivity");
  return root;
}

double disk_cgpt_diag(const ConcentricDisks& structure, int n) {
  return -2.0 * std::numbers::pi * double(n) * multipole(structure, n);
}

}  // namespace mlpt
