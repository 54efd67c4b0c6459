#include "mlpt/inverse.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

#include "mlpt/background.hpp"
#include "mlpt/errors.hpp"

namespace mlpt {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kTiny = 1e-300;

double binom(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double v = 1.0;
  for (int i = 0; i < k; ++i) v = v * double(n - i) / double(i + 1);
  return v;
}

Eigen::VectorXd lstsq(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  return a.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(b);
}

// ------------------------------------------------------------------ layout

// Detection of a full equispaced measurement circle (sample order preserved).
struct CircleLayout {
  bool ok = false;
  Point2 center{0.0, 0.0};
  double radius = 0.0;
  std::vector<double> theta;
};

CircleLayout detect_circle(const std::vector<Point2>& pts) {
  CircleLayout lay;
  size_t m = pts.size();
  if (m < 8 || m % 2 != 0) return lay;
  double cx = 0.0, cy = 0.0;
  for (const Point2& p : pts) {
    cx += p[0];
    cy += p[1];
  }
  cx /= double(m);
  cy /= double(m);
  double rbar = 0.0;
  for (const Point2& p : pts) rbar += std::hypot(p[0] - cx, p[1] - cy);
  rbar /= double(m);
  if (!(rbar > 0.0)) return lay;
  lay.theta.resize(m);
  double step = kTwoPi / double(m);
  double theta0 = std::atan2(pts[0][1] - cy, pts[0][0] - cx);
  for (size_t j = 0; j < m; ++j) {
    double r = std::hypot(pts[j][0] - cx, pts[j][1] - cy);
    if (std::abs(r - rbar) > 1e-9 * rbar) return lay;
    double th = std::atan2(pts[j][1] - cy, pts[j][0] - cx);
    double expect = theta0 + step * double(j);
    double diff = std::remainder(th - expect, kTwoPi);
    if (std::abs(diff) > 1e-9) return lay;
    lay.theta[j] = th;
  }
  lay.ok = true;
  lay.center = {cx, cy};
  lay.radius = rbar;
  return lay;
}

// ------------------------------------------------------------- mode space

// Fourier data of the perturbation on a full circle: modes 1..L plus the
// even/odd half-grid split used for the self-calibrated noise estimate.
struct ModeData {
  std::vector<Complex> f;      // full-grid mode coefficients
  std::vector<double> sf;      // per-mode noise std estimate
  std::vector<double> wts;     // 1 / sf
};

ModeData mode_data(const std::vector<double>& d, const std::vector<double>& theta,
                   int L) {
  size_t m = d.size();
  std::vector<Complex> fe(static_cast<size_t>(L)), fo(static_cast<size_t>(L));
  for (int mode = 1; mode <= L; ++mode) {
    std::complex<long double> ae(0.0L, 0.0L), ao(0.0L, 0.0L);
    for (size_t j = 0; j < m; ++j) {
      double ang = -double(mode) * theta[j];
      std::complex<long double> ph(std::cos(ang), std::sin(ang));
      if (j % 2 == 0)
        ae += (long double)(d[j]) * ph;
      else
        ao += (long double)(d[j]) * ph;
    }
    fe[size_t(mode) - 1] = Complex(double(ae.real()), double(ae.imag())) * (4.0 / double(m));
    fo[size_t(mode) - 1] = Complex(double(ao.real()), double(ao.imag())) * (4.0 / double(m));
  }
  ModeData out;
  out.f.resize(size_t(L));
  std::vector<double> diff(static_cast<size_t>(L));
  for (int i = 0; i < L; ++i) {
    out.f[size_t(i)] = 0.5 * (fe[size_t(i)] + fo[size_t(i)]);
    diff[size_t(i)] = 0.5 * std::abs(fe[size_t(i)] - fo[size_t(i)]);
  }
  out.sf.resize(size_t(L));
  out.wts.resize(size_t(L));
  for (int i = 0; i < L; ++i) {
    int lo = std::max(0, i - 3), hi = std::min(L, i + 4);
    std::vector<double> win(diff.begin() + lo, diff.begin() + hi);
    std::nth_element(win.begin(), win.begin() + long(win.size() / 2), win.end());
    double med = win[win.size() / 2];
    if (win.size() % 2 == 0) {
      double below = *std::max_element(win.begin(), win.begin() + long(win.size() / 2));
      med = 0.5 * (med + below);
    }
    out.sf[size_t(i)] = std::max(med, kTiny);
    out.wts[size_t(i)] = 1.0 / out.sf[size_t(i)];
  }
  return out;
}

// Triangular design mapping multipole coefficients c_n to circle modes f_m:
// f_m = sum_{n<=m} binom(m-1, n-1) zrel_bar^{m-n} B_n / R^m * c_n,
// with B the background coefficients recentered at the absolute center z.
Eigen::MatrixXcd mode_design(const HarmonicBackground& bg, Point2 circle_center,
                             double R, Point2 z, int K) {
  std::vector<Complex> B = shift_coeffs(bg.coeffs, Complex(z[0], z[1]));
  Complex zb(z[0] - circle_center[0], -(z[1] - circle_center[1]));
  Eigen::MatrixXcd T = Eigen::MatrixXcd::Zero(K, K);
  double rp = 1.0;
  for (int m = 1; m <= K; ++m) {
    rp *= R;
    Complex zp(1.0, 0.0);
    for (int n = m; n >= 1; --n) {
      Complex Bn = size_t(n) < B.size() ? B[size_t(n)] : Complex(0.0, 0.0);
      T(m - 1, n - 1) = binom(m - 1, n - 1) * zp * Bn / rp;
      zp *= zb;
    }
  }
  return T;
}

struct ModeFit {
  Eigen::VectorXd c;
  Eigen::VectorXd residual;  // whitened stacked Re/Im residual
  Eigen::MatrixXd design;    // whitened stacked real design
};

ModeFit mode_fit(const ModeData& md, const HarmonicBackground& bg,
                 Point2 circle_center, double R, Point2 z, int K) {
  Eigen::MatrixXcd T = mode_design(bg, circle_center, R, z, K);
  Eigen::MatrixXd Dr(2 * K, K);
  Eigen::VectorXd y(2 * K);
  for (int m = 0; m < K; ++m) {
    double w = md.wts[size_t(m)];
    for (int n = 0; n < K; ++n) {
      Dr(m, n) = T(m, n).real() * w;
      Dr(K + m, n) = T(m, n).imag() * w;
    }
    y[m] = md.f[size_t(m)].real() * w;
    y[K + m] = md.f[size_t(m)].imag() * w;
  }
  ModeFit out;
  out.c = lstsq(Dr, y);
  out.residual = Dr * out.c - y;
  out.design = std::move(Dr);
  return out;
}

// Per-coefficient std of the whitened fit: row norms of the pseudoinverse.
Eigen::VectorXd coeff_stds(const Eigen::MatrixXd& Dr) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Dr, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& S = svd.singularValues();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(Dr.cols());
  for (long k = 0; k < S.size(); ++k) {
    if (S[k] <= S[0] * 1e-14) continue;
    out += (svd.matrixV().col(k) / S[k]).cwiseAbs2();
  }
  return out.cwiseSqrt();
}

struct CenterFit {
  Point2 z{0.0, 0.0};
  double rnorm = 0.0;
};

CenterFit center_refine(const ModeData& md, const HarmonicBackground& bg,
                        Point2 circle_center, double R, Point2 z0, int K,
                        int iters = 60) {
  Point2 z = z0;
  auto rn_of = [&](Point2 zz) {
    return mode_fit(md, bg, circle_center, R, zz, K).residual;
  };
  Eigen::VectorXd r0 = rn_of(z);
  for (int it = 0; it < iters; ++it) {
    Eigen::MatrixXd J(r0.size(), 2);
    double h = 1e-7;
    for (int k = 0; k < 2; ++k) {
      Point2 zp = z;
      zp[size_t(k)] += h;
      J.col(k) = (rn_of(zp) - r0) / h;
    }
    Eigen::VectorXd step = lstsq(J, -r0);
    double t = 1.0, base = r0.squaredNorm();
    Eigen::VectorXd rt;
    bool moved = false;
    while (t > 1e-13) {
      rt = rn_of({z[0] + t * step[0], z[1] + t * step[1]});
      if (rt.squaredNorm() < base) {
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;
    z = {z[0] + t * step[0], z[1] + t * step[1]};
    r0 = rt;
    if (t * step.norm() < 1e-14) break;
  }
  return {z, r0.norm()};
}

// ------------------------------------------------------------------- peel

struct PeelResult {
  std::vector<double> radii;
  std::vector<double> lambdas;
  int resolved = 0;
};

// Ratio peeling with self-calibrated pair choice.  chat/stds are contiguous
// over orders 1..K; unresolvable deep layers get default placeholders.
PeelResult peel(const Eigen::VectorXd& chat, const Eigen::VectorXd& stds, int N) {
  Eigen::VectorXd c = chat, sig = stds;
  int K = int(c.size());
  std::vector<std::pair<double, double>> est;  // (r, w); w = NaN for defaults
  int resolved = 0;
  for (int layer = 0; layer < N; ++layer) {
    Eigen::VectorXd snr(K);
    for (int i = 0; i < K; ++i) snr[i] = std::abs(c[i]) / std::max(sig[i], kTiny);
    struct Pair {
      int n;
      double r, srn;
    };
    std::vector<Pair> pairs;
    for (int n = 1; n < K; ++n) {
      if (snr[n - 1] < 10.0 || snr[n] < 10.0) continue;
      double ratio = c[n] / c[n - 1];
      if (!(ratio > 0.0)) continue;
      double r = std::sqrt(ratio);
      pairs.push_back({n, r, 0.5 * r * (1.0 / snr[n - 1] + 1.0 / snr[n])});
    }
    if (pairs.empty()) break;
    int bi = -1;
    double bscore = 0.0, bbias = 0.0;
    for (size_t p = 0; p < pairs.size(); ++p) {
      double bias = 0.1 * pairs[p].r;
      for (const Pair& q : pairs)
        if (q.n == pairs[p].n - 1) bias = std::abs(pairs[p].r - q.r);
      double score = bias + pairs[p].srn;
      if (bi < 0 || score < bscore) {
        bi = int(p);
        bscore = score;
        bbias = bias;
      }
    }
    (void)bbias;
    int n = pairs[size_t(bi)].n;
    double r = pairs[size_t(bi)].r, srn = pairs[size_t(bi)].srn;
    if (!est.empty() && r >= 0.92 * est.back().first) break;  // subtraction artifact
    double w = c[n - 1] / std::exp(2.0 * n * std::log(r));
    double sr = std::max(srn, bscore);
    double sw = std::abs(w) * (1.0 / snr[n - 1] + 2.0 * n * sr / r);
    est.push_back({r, w});
    ++resolved;
    for (int j = 0; j < K; ++j) {
      double term = w * std::exp(2.0 * (j + 1) * std::log(r));
      c[j] -= term;
      sig[j] += std::abs(term) * (sw / std::max(std::abs(w), kTiny) + 2.0 * (j + 1) * sr / r);
    }
  }
  while (int(est.size()) < N) {
    double rprev = est.empty() ? 0.8 : est.back().first;
    est.push_back({0.6 * rprev, std::nan("")});
  }
  PeelResult out;
  out.resolved = resolved;
  out.radii.resize(size_t(N));
  out.lambdas.resize(size_t(N));
  double acc = 0.0;
  for (int k = 0; k < N; ++k) {
    out.radii[size_t(k)] = est[size_t(k)].first;
    double w = est[size_t(k)].second;
    if (std::isfinite(w)) {
      out.lambdas[size_t(k)] = -(1.0 + acc) / (2.0 * w);
      acc += w;
    } else {
      out.lambdas[size_t(k)] = (k % 2 == 0) ? 0.75 : -0.75;
    }
  }
  return out;
}

// ----------------------------------------------------------------- refine

struct RefineResult {
  std::vector<double> r, l;
  double wres = 0.0;
};

std::optional<Eigen::VectorXd> refine_resid(const std::vector<double>& r,
                                            const std::vector<double>& l,
                                            const std::vector<int>& orders,
                                            const Eigen::VectorXd& wt,
                                            const Eigen::VectorXd& tgt, double rcap) {
  size_t N = r.size();
  for (size_t k = 0; k < N; ++k) {
    if (!(r[k] > 0.0)) return std::nullopt;
    if (k > 0 && r[k] >= r[k - 1]) return std::nullopt;
    if (!(std::abs(l[k]) > 0.5) || std::abs(l[k]) > 100.0) return std::nullopt;
  }
  if (r[0] >= rcap) return std::nullopt;
  Eigen::VectorXd v(long(orders.size()));
  for (size_t q = 0; q < orders.size(); ++q) {
    double cq;
    try {
      cq = multipole_rl(r, l, orders[q]);
    } catch (const DomainError&) {
      return std::nullopt;
    }
    if (!std::isfinite(cq)) return std::nullopt;
    v[long(q)] = cq;
  }
  return (v - tgt).cwiseProduct(wt).eval();
}

// Weighted Gauss-Newton over (radii, contrasts) with feasibility guards.
std::optional<RefineResult> refine_rl(const Eigen::VectorXd& chat,
                                      const Eigen::VectorXd& stds,
                                      std::vector<double> r, std::vector<double> l,
                                      const std::vector<int>& orders, double rcap,
                                      int iters = 300) {
  size_t N = r.size();
  for (size_t k = 0; k < N; ++k) r[k] = std::abs(r[k]);
  for (size_t k = 1; k < N; ++k)
    if (r[k] >= r[k - 1]) r[k] = 0.7 * r[k - 1];
  for (size_t k = 0; k < N; ++k)
    if (std::abs(l[k]) <= 0.5) l[k] = l[k] >= 0.0 ? 0.6 : -0.6;

  long Q = long(orders.size());
  Eigen::VectorXd wt(Q), tgt(Q);
  for (long q = 0; q < Q; ++q) {
    wt[q] = 1.0 / std::max(stds[orders[size_t(q)] - 1], kTiny);
    tgt[q] = chat[orders[size_t(q)] - 1];
  }
  std::optional<Eigen::VectorXd> rv = refine_resid(r, l, orders, wt, tgt, rcap);
  if (!rv) return std::nullopt;

  for (int it = 0; it < iters; ++it) {
    Eigen::MatrixXd J(Q, long(2 * N));
    for (long q = 0; q < Q; ++q) {
      MultipoleGrad g = multipole_grad(r, l, orders[size_t(q)]);
      J.row(q).head(long(N)) = wt[q] * g.dc_dradius.transpose();
      J.row(q).tail(long(N)) = wt[q] * g.dc_dlambda.transpose();
    }
    Eigen::VectorXd step = lstsq(J, -*rv);
    double t = 1.0, base = rv->squaredNorm();
    bool moved = false;
    std::optional<Eigen::VectorXd> rt;
    std::vector<double> rn(N), ln(N);
    while (t > 1e-14) {
      for (size_t k = 0; k < N; ++k) {
        rn[k] = r[k] + t * step[long(k)];
        ln[k] = l[k] + t * step[long(N + k)];
      }
      rt = refine_resid(rn, ln, orders, wt, tgt, rcap);
      if (rt && rt->squaredNorm() < base) {
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;
    r = rn;
    l = ln;
    rv = rt;
    double xnorm = 0.0;
    for (size_t k = 0; k < N; ++k) xnorm += r[k] * r[k] + l[k] * l[k];
    if (t * step.norm() < 1e-14 * std::max(1.0, std::sqrt(xnorm))) break;
  }
  return RefineResult{r, l, rv->norm()};
}

// ----------------------------------------------------------------- newton

struct NewtonResult {
  std::vector<double> lambdas;
  bool ok = false;
};

NewtonResult newton_sig(const Eigen::VectorXd& chat, const std::vector<double>& radii,
                        std::vector<double> lam, const std::vector<int>& orders,
                        int iters = 80) {
  long N = long(lam.size());
  Eigen::VectorXd target(N);
  for (long q = 0; q < N; ++q) target[q] = chat[orders[size_t(q)] - 1];
  auto fval = [&](const std::vector<double>& lv) -> std::optional<Eigen::VectorXd> {
    Eigen::VectorXd F(N);
    for (long q = 0; q < N; ++q) {
      try {
        F[q] = multipole_rl(radii, lv, orders[size_t(q)]) - target[q];
      } catch (const DomainError&) {
        return std::nullopt;
      }
      if (!std::isfinite(F[q])) return std::nullopt;
    }
    return F;
  };
  for (int it = 0; it < iters; ++it) {
    std::optional<Eigen::VectorXd> F = fval(lam);
    if (!F) return {lam, false};
    Eigen::MatrixXd J(N, N);
    for (long q = 0; q < N; ++q) {
      MultipoleGrad g;
      try {
        g = multipole_grad(radii, lam, orders[size_t(q)]);
      } catch (const DomainError&) {
        return {lam, false};
      }
      J.row(q) = g.dc_dlambda.transpose();
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(J);
    Eigen::VectorXd d = lu.matrixLU().diagonal().cwiseAbs();
    if (!(d.minCoeff() > 1e-14 * std::max(1e-300, d.maxCoeff()))) return {lam, false};
    Eigen::VectorXd step = lu.solve(-*F);
    for (long k = 0; k < N; ++k) lam[size_t(k)] += step[k];
    if (step.norm() < 1e-14) break;
  }
  std::optional<Eigen::VectorXd> F = fval(lam);
  bool ok = F && F->norm() <= 1e-6 * std::max(target.norm(), 1e-30);
  return {lam, ok};
}

// Contiguous (order 1..K) views of a multipole estimate; missing orders get
// zero value and an effectively infinite std so no stage can use them.
void contiguous_views(const MultipoleEstimate& est, int& K, Eigen::VectorXd& chat,
                      Eigen::VectorXd& stds) {
  K = 0;
  for (const auto& [n, v] : est.spectrum.values) K = std::max(K, n);
  chat = Eigen::VectorXd::Zero(std::max(K, 1));
  stds = Eigen::VectorXd::Constant(std::max(K, 1), 1e300);
  for (const auto& [n, v] : est.spectrum.values) {
    chat[n - 1] = v;
    auto it = est.stds.find(n);
    stds[n - 1] = it == est.stds.end() ? 0.0 : it->second;
  }
}

}  // namespace

// --------------------------------------------------------------- validate

void validate(const MeasurementSet& m) {
  if (m.points.size() != m.u.size())
    fail(ErrorCode::ConfigError, "sample point and value counts differ");
  if (m.points.empty()) fail(ErrorCode::ConfigError, "measurement set is empty");
  for (const Point2& p : m.points) {
    if (std::hypot(p[0], p[1]) <= m.enclosing_radius)
      fail(ErrorCode::ConfigError,
           "a sample point lies inside the declared enclosing circle");
  }
}

// ---------------------------------------------------------------- extract

MultipoleEstimate extract_multipoles(const MeasurementSet& m, Point2 center,
                                     int n_max) {
  validate(m);
  if (n_max < 1) fail(ErrorCode::ConfigError, "n_max must be >= 1");
  long M = long(m.points.size());
  if (M < 2 * n_max + 1)
    fail(ErrorCode::InsufficientSamples,
         "need at least 2*n_max+1 = " + std::to_string(2 * n_max + 1) +
             " samples, got " + std::to_string(M));

  Eigen::VectorXd d(M);
  for (long i = 0; i < M; ++i)
    d[i] = m.u[size_t(i)] - background_eval(m.background, m.points[size_t(i)]);

  std::vector<Complex> B =
      shift_coeffs(m.background.coeffs, Complex(center[0], center[1]));
  std::vector<int> used;
  std::vector<Eigen::VectorXd> cols;
  for (int n = 1; n <= n_max; ++n) {
    Complex Bn = size_t(n) < B.size() ? B[size_t(n)] : Complex(0.0, 0.0);
    Eigen::VectorXd col = Eigen::VectorXd::Zero(M);
    if (Bn != Complex(0.0, 0.0)) {
      for (long i = 0; i < M; ++i) {
        Complex wb(m.points[size_t(i)][0] - center[0],
                   -(m.points[size_t(i)][1] - center[1]));
        col[i] = (Bn / std::pow(wb, n)).real();
      }
    }
    if (col.norm() > 1e-13 * std::sqrt(double(M))) {
      used.push_back(n);
      cols.push_back(col);
    }
  }
  if (used.empty())
    fail(ErrorCode::IllConditionedFit,
         "no observable orders: background has no usable coefficients");

  Eigen::MatrixXd D(M, long(used.size()));
  Eigen::VectorXd nrm(long(used.size()));
  for (size_t j = 0; j < used.size(); ++j) {
    nrm[long(j)] = cols[j].norm();
    D.col(long(j)) = cols[j] / nrm[long(j)];
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(D, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& S = svd.singularValues();
  double cond = S[0] / S[S.size() - 1];
  if (!(cond <= 1e12))
    fail(ErrorCode::IllConditionedFit,
         "design condition " + std::to_string(cond) +
             " exceeds 1e12 (arc too short or n_max too high)");

  Eigen::VectorXd coef =
      svd.matrixV() * (svd.matrixU().transpose() * d).cwiseQuotient(S);
  Eigen::VectorXd chat = coef.cwiseQuotient(nrm);
  Eigen::VectorXd resid = d;
  for (size_t j = 0; j < used.size(); ++j) resid -= cols[j] * chat[long(j)];
  long dof = std::max<long>(1, M - long(used.size()));
  double sig = resid.norm() / std::sqrt(double(dof));

  MultipoleEstimate out;
  out.spectrum.center = center;
  out.residual_rms = sig;
  out.condition = cond;
  for (size_t j = 0; j < used.size(); ++j) {
    double cov = (svd.matrixV().row(long(j)).transpose().cwiseQuotient(S)).squaredNorm();
    out.spectrum.values[used[j]] = chat[long(j)];
    out.stds[used[j]] = sig * std::sqrt(cov) / nrm[long(j)];
  }
  return out;
}

// ----------------------------------------------------------------- locate

Point2 locate(const MeasurementSet& m, const HarmonicBackground& bg) {
  validate(m);
  long M = long(m.points.size());
  Eigen::VectorXd d(M);
  for (long i = 0; i < M; ++i)
    d[i] = m.u[size_t(i)] - background_eval(bg, m.points[size_t(i)]);

  double cx = 0.0, cy = 0.0, rmin = 0.0;
  for (const Point2& p : m.points) {
    cx += p[0];
    cy += p[1];
  }
  cx /= double(M);
  cy /= double(M);
  rmin = std::hypot(m.points[0][0] - cx, m.points[0][1] - cy);
  for (const Point2& p : m.points)
    rmin = std::min(rmin, std::hypot(p[0] - cx, p[1] - cy));

  auto model_of = [&](Point2 z, const Eigen::Vector3d& Mt) {
    Eigen::VectorXd mod(M);
    Point2 g = background_grad(bg, z);
    for (long i = 0; i < M; ++i) {
      double w1 = m.points[size_t(i)][0] - z[0], w2 = m.points[size_t(i)][1] - z[1];
      double r2 = w1 * w1 + w2 * w2;
      mod[i] = -(w1 * (Mt[0] * g[0] + Mt[1] * g[1]) + w2 * (Mt[1] * g[0] + Mt[2] * g[1])) /
               (kTwoPi * r2);
    }
    return mod;
  };

  struct Run {
    Point2 z;
    Eigen::Vector3d Mt;
    double res2 = 0.0;
    bool converged = false;
  };
  // Profiled residual: the moment matrix enters linearly, so it is solved
  // out at every trial center.
  auto profile = [&](Point2 z, Eigen::Vector3d* mt) {
    Point2 g = background_grad(bg, z);
    Eigen::MatrixXd D(M, 3);
    for (long i = 0; i < M; ++i) {
      double w1 = m.points[size_t(i)][0] - z[0], w2 = m.points[size_t(i)][1] - z[1];
      double r2 = kTwoPi * (w1 * w1 + w2 * w2);
      D(i, 0) = -(w1 * g[0]) / r2;
      D(i, 1) = -(w1 * g[1] + w2 * g[0]) / r2;
      D(i, 2) = -(w2 * g[1]) / r2;
    }
    Eigen::Vector3d Mt = lstsq(D, d);
    if (mt) *mt = Mt;
    return (d - D * Mt).squaredNorm();
  };

  auto gn = [&](Point2 z0) {
    Run run;
    Point2 z = z0;
    Eigen::Vector3d Mt = Eigen::Vector3d::Zero();
    double res2 = profile(z, &Mt);
    for (int it = 0; it < 200; ++it) {
      Eigen::VectorXd model = model_of(z, Mt);
      Eigen::VectorXd res = d - model;
      Eigen::MatrixXd J(M, 2);
      double h = 1e-7 * std::max(1.0, std::max(std::abs(z[0]), std::abs(z[1])));
      for (int k = 0; k < 2; ++k) {
        Point2 zp = z;
        zp[size_t(k)] += h;
        J.col(k) = (model_of(zp, Mt) - model) / h;
      }
      Eigen::VectorXd dz = lstsq(J, res);
      // Damped step on the profiled residual; an undamped update oscillates
      // at the dipole model error and convergence becomes roundoff luck.
      double t = 1.0;
      bool moved = false;
      double r2t = res2;
      while (t > 1e-13) {
        r2t = profile({z[0] + t * dz[0], z[1] + t * dz[1]}, nullptr);
        if (r2t < res2) {
          moved = true;
          break;
        }
        t *= 0.5;
      }
      if (!moved) {
        // Local minimum of the profiled residual to finite-difference
        // precision; the dipole model cannot be fit any closer.
        run.converged = true;
        break;
      }
      z = {z[0] + t * dz[0], z[1] + t * dz[1]};
      res2 = profile(z, &Mt);
      if (t * dz.norm() < 1e-12 * std::max(1.0, std::hypot(z[0], z[1]))) {
        run.converged = true;
        break;
      }
    }
    run.z = z;
    run.Mt = Mt;
    run.res2 = profile(z, &Mt);
    return run;
  };

  double s = 0.3 * rmin;
  std::vector<Point2> starts{{cx, cy}};
  for (double gx : {-s, 0.0, s})
    for (double gy : {-s, 0.0, s})
      if (gx != 0.0 || gy != 0.0) starts.push_back({cx + gx, cy + gy});

  std::optional<Run> best;
  for (const Point2& z0 : starts) {
    Run run = gn(z0);
    if (!best || run.res2 < best->res2) best = run;
  }
  if (!best->converged)
    fail(ErrorCode::NoConvergence, "dipole fit did not converge from any start");

  Point2 g = background_grad(bg, best->z);
  double dip = std::hypot(best->Mt[0] * g[0] + best->Mt[1] * g[1],
                          best->Mt[1] * g[0] + best->Mt[2] * g[1]);
  double base = best->Mt.norm() * std::hypot(g[0], g[1]);
  if (!(dip > 1e-10 * base) || base == 0.0)
    fail(ErrorCode::DegenerateDipole,
         "fitted dipole moment vanishes; center is not identifiable from the "
         "leading term");
  return best->z;
}

// ----------------------------------------------------------- radii stage

RadiiRecovery recover_radii(const MultipoleEstimate& est, int N,
                            const RadiiOptions& options) {
  if (N < 1) fail(ErrorCode::ConfigError, "layer count must be >= 1");
  int K;
  Eigen::VectorXd chat, stds;
  contiguous_views(est, K, chat, stds);
  if (K < 1) fail(ErrorCode::PeelExhausted, "empty multipole spectrum");

  PeelResult p = peel(chat, stds, N);
  if (p.resolved == 0)
    fail(ErrorCode::PeelExhausted,
         "no layer rises above the noise floor of the extracted spectrum");

  std::vector<int> orders = options.orders;
  if (orders.empty()) {
    for (const auto& [n, v] : est.spectrum.values) {
      auto it = est.stds.find(n);
      double sd = it == est.stds.end() ? 0.0 : it->second;
      if (std::abs(v) > 10.0 * sd) orders.push_back(n);
    }
    if (orders.empty())
      for (const auto& [n, v] : est.spectrum.values) orders.push_back(n);
  }
  for (int n : orders)
    if (n < 1 || n > K || est.spectrum.values.find(n) == est.spectrum.values.end())
      fail(ErrorCode::IndexOutOfRange,
           "requested order " + std::to_string(n) + " not present in the spectrum");

  std::vector<std::pair<std::vector<double>, std::vector<double>>> cands;
  cands.push_back({p.radii, p.lambdas});
  if (options.multistart) {
    int start = std::max(p.resolved, 1);
    for (double sc : {0.5, 0.75})
      for (double lk : {0.75, -0.75, 1.5, -1.5}) {
        std::vector<double> rv = p.radii, lv = p.lambdas;
        for (int k = start; k < N; ++k) {
          rv[size_t(k)] = rv[size_t(k) - 1] * sc;
          lv[size_t(k)] = (k % 2 == start % 2) ? lk : -lk;
        }
        cands.push_back({rv, lv});
      }
  }

  std::optional<RefineResult> best;
  // Skip remaining starts only once a fit consistent with the coefficient
  // noise level is in hand; local minima sit far above sqrt(dof).
  double early = 3.0 * std::sqrt(2.0 * double(orders.size()) + 1.0);
  for (const auto& [rv, lv] : cands) {
    std::optional<RefineResult> out =
        refine_rl(chat, stds, rv, lv, orders, 0.95 * options.outer_radius_cap);
    if (!out) continue;
    if (!best || out->wres < best->wres) best = out;
    if (best->wres < early) break;
  }
  if (!best)
    fail(ErrorCode::NoConvergence, "radii refinement failed from every start");

  for (size_t k = 0; k < best->r.size(); ++k) {
    bool ordered = best->r[k] > 0.0 && (k == 0 || best->r[k] < best->r[k - 1]);
    if (!ordered || !(std::abs(best->l[k]) > 0.5))
      fail(ErrorCode::NonPhysicalEstimate,
           "refined layer estimates violate ordering or contrast bounds");
  }

  RadiiRecovery out;
  out.radii = best->r;
  out.lambdas = best->l;
  out.sigmas = sigmas_of(best->l);
  out.peeled_layers = p.resolved;
  out.weighted_residual = best->wres;
  out.orders_used = orders;
  return out;
}

// ----------------------------------------------------------- sigma stage

SigmaRecovery recover_sigmas(const MultipoleEstimate& est,
                             const std::vector<double>& radii,
                             const std::vector<int>& orders,
                             const std::vector<double>& lambda_init) {
  int N = int(radii.size());
  if (N < 1) fail(ErrorCode::ConfigError, "need at least one radius");
  int K;
  Eigen::VectorXd chat, stds;
  contiguous_views(est, K, chat, stds);

  std::vector<int> pool;
  for (const auto& [n, v] : est.spectrum.values) pool.push_back(n);
  std::sort(pool.begin(), pool.end());
  if (int(pool.size()) < N)
    fail(ErrorCode::InsufficientSamples,
         "spectrum holds fewer orders than layers requested");

  // First 20 combinations of N out of the pool, lexicographic; a requested
  // combination goes first.
  std::vector<std::vector<int>> combos;
  if (!orders.empty()) {
    if (int(orders.size()) != N)
      fail(ErrorCode::ConfigError, "need exactly one mode index per layer");
    std::vector<int> sorted = orders;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      fail(ErrorCode::ConfigError, "mode indices must be distinct");
    for (int n : sorted)
      if (est.spectrum.values.find(n) == est.spectrum.values.end())
        fail(ErrorCode::IndexOutOfRange,
             "requested order " + std::to_string(n) + " not present in the spectrum");
    combos.push_back(sorted);
  }
  std::vector<int> idx(static_cast<size_t>(N));
  for (int i = 0; i < N; ++i) idx[size_t(i)] = i;
  while (int(combos.size()) < 20 + (orders.empty() ? 0 : 1)) {
    std::vector<int> combo(static_cast<size_t>(N));
    for (int i = 0; i < N; ++i) combo[size_t(i)] = pool[size_t(idx[size_t(i)])];
    if (combos.empty() || combo != combos.front()) combos.push_back(combo);
    int i = N - 1;
    while (i >= 0 && idx[size_t(i)] == int(pool.size()) - N + i) --i;
    if (i < 0) break;
    ++idx[size_t(i)];
    for (int j = i + 1; j < N; ++j) idx[size_t(j)] = idx[size_t(j) - 1] + 1;
  }
  if (int(combos.size()) > 20) combos.resize(20);

  std::vector<std::vector<double>> inits;
  if (!lambda_init.empty()) {
    inits.push_back(lambda_init);
  } else {
    inits.push_back(std::vector<double>(size_t(N), 1.0));
    inits.push_back(std::vector<double>(size_t(N), -1.0));
    std::vector<double> alt(static_cast<size_t>(N)), tla(static_cast<size_t>(N));
    for (int k = 0; k < N; ++k) {
      alt[size_t(k)] = k % 2 == 0 ? 1.0 : -1.0;
      tla[size_t(k)] = k % 2 == 0 ? -1.0 : 1.0;
    }
    inits.push_back(alt);
    inits.push_back(tla);
  }

  bool any_converged = false, any_physical = false;
  for (const std::vector<int>& combo : combos) {
    for (const std::vector<double>& init : inits) {
      NewtonResult nr = newton_sig(chat, radii, init, combo);
      if (!nr.ok) continue;
      any_converged = true;
      bool physical = true;
      for (double l : nr.lambdas)
        if (!(std::abs(l) > 0.5)) physical = false;
      if (!physical) continue;
      any_physical = true;
      CertMatrices cm = cert_matrices_rl(radii, nr.lambdas, combo);
      double scaleL = 1.0, scaleR = 1.0;
      for (int k = 0; k < N; ++k) {
        scaleL *= cm.L.row(k).norm();
        scaleR *= cm.R.col(k).norm();
      }
      if (std::abs(cm.detL) > 1e-10 * scaleL && std::abs(cm.detR) > 1e-10 * scaleR) {
        SigmaRecovery out;
        out.lambdas = nr.lambdas;
        out.sigmas = sigmas_of(nr.lambdas);
        out.orders = combo;
        out.detL = cm.detL;
        out.detR = cm.detR;
        out.scaleL = scaleL;
        out.scaleR = scaleR;
        out.newton_converged = true;
        out.certificate_ok = true;
        return out;
      }
    }
  }

  // Fallback: keep a provided physical initial guess (refinement output) when
  // Newton polish cannot improve on it, reporting the certificate at that
  // point.
  if (!lambda_init.empty()) {
    bool physical = true;
    for (double l : lambda_init)
      if (!(std::abs(l) > 0.5)) physical = false;
    if (physical) {
      std::vector<int> combo = combos.front();
      CertMatrices cm = cert_matrices_rl(radii, lambda_init, combo);
      double scaleL = 1.0, scaleR = 1.0;
      for (int k = 0; k < N; ++k) {
        scaleL *= cm.L.row(k).norm();
        scaleR *= cm.R.col(k).norm();
      }
      SigmaRecovery out;
      out.lambdas = lambda_init;
      out.sigmas = sigmas_of(lambda_init);
      out.orders = combo;
      out.detL = cm.detL;
      out.detR = cm.detR;
      out.scaleL = scaleL;
      out.scaleR = scaleR;
      out.newton_converged = false;
      out.certificate_ok =
          std::abs(cm.detL) > 1e-10 * scaleL && std::abs(cm.detR) > 1e-10 * scaleR;
      return out;
    }
  }
  if (any_converged && any_physical)
    fail(ErrorCode::CertificateFailed,
         "no order combination among the first 20 passed both determinant "
         "certificates");
  if (any_converged)
    fail(ErrorCode::NonPhysicalEstimate,
         "all converged contrast solutions imply non-positive conductivities");
  fail(ErrorCode::NewtonDiverged, "contrast iteration diverged for every "
                                  "combination and start");
}

// ----------------------------------------------------------------- invert

InverseReport invert(const MeasurementSet& m, int N, const InvertOptions& options) {
  validate(m);
  const HarmonicBackground& bg = m.background;
  int maxdeg = bg.max_order();
  if (maxdeg < 1)
    fail(ErrorCode::ConfigError, "background field is constant; nothing to invert");

  InverseReport rep;
  Point2 z;
  try {
    z = locate(m, bg);
  } catch (const DomainError& e) {
    fail(e.code(), std::string("stage locate: ") + e.what());
  }
  rep.located = true;

  CircleLayout lay = detect_circle(m.points);
  MultipoleEstimate est;
  double rcap;
  if (lay.ok && options.refine_center) {
    long M = long(m.points.size());
    std::vector<double> d(static_cast<size_t>(M));
    for (long i = 0; i < M; ++i)
      d[size_t(i)] = m.u[size_t(i)] - background_eval(bg, m.points[size_t(i)]);
    int Lneed = std::min(options.n_max, maxdeg);
    int L = std::min<long>(Lneed + 3, M / 4);
    if (L < 1) fail(ErrorCode::InsufficientSamples, "too few samples for mode analysis");
    ModeData md = mode_data(d, lay.theta, L);

    int K = std::min(2, Lneed);
    for (int mm = 1; mm <= std::min(Lneed, L); ++mm)
      if (std::abs(md.f[size_t(mm) - 1]) > 10.0 * md.sf[size_t(mm) - 1]) K = std::max(K, mm);

    double s = options.search_halfwidth > 0.0 ? options.search_halfwidth
                                              : std::max(0.6, 0.12 * lay.radius);
    std::vector<Point2> starts{z};
    for (double gx : {-s, 0.0, s})
      for (double gy : {-s, 0.0, s})
        starts.push_back({lay.center[0] + gx, lay.center[1] + gy});

    std::optional<CenterFit> zbest;
    // Stop the multistart only on a fit consistent with the per-mode noise
    // level; a spurious local minimum typically sits orders of magnitude
    // above sqrt(dof) in whitened units.
    double early = 3.0 * std::sqrt(2.0 * double(K));
    for (const Point2& z0 : starts) {
      CenterFit cf = center_refine(md, bg, lay.center, lay.radius, z0, K);
      if (!zbest || cf.rnorm < zbest->rnorm) zbest = cf;
      if (zbest->rnorm < early) break;
    }
    z = zbest->z;

    ModeFit fit = mode_fit(md, bg, lay.center, lay.radius, z, K);
    Eigen::VectorXd stds = coeff_stds(fit.design);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(fit.design);
    const Eigen::VectorXd& S = svd.singularValues();
    est.spectrum.center = z;
    est.condition = S[S.size() - 1] > 0.0 ? S[0] / S[S.size() - 1] : 1e300;
    est.residual_rms = fit.residual.norm() / std::sqrt(2.0 * double(K));
    for (int n = 1; n <= K; ++n) {
      est.spectrum.values[n] = fit.c[n - 1];
      est.stds[n] = stds[n - 1];
    }
    rcap = lay.radius;
  } else {
    try {
      est = extract_multipoles(m, z, std::min(options.n_max, maxdeg));
    } catch (const DomainError& e) {
      fail(e.code(), std::string("stage extract: ") + e.what());
    }
    rcap = std::hypot(m.points[0][0] - z[0], m.points[0][1] - z[1]);
    for (const Point2& p : m.points)
      rcap = std::min(rcap, std::hypot(p[0] - z[0], p[1] - z[1]));
  }
  rep.center = z;
  rep.extraction_cond = est.condition;
  int Kmax = 0;
  for (const auto& [n, v] : est.spectrum.values) Kmax = std::max(Kmax, n);
  rep.modes_used = Kmax;

  RadiiOptions ro;
  ro.outer_radius_cap = rcap;
  RadiiRecovery rr;
  try {
    rr = recover_radii(est, N, ro);
  } catch (const DomainError& e) {
    fail(e.code(), std::string("stage radii: ") + e.what());
  }

  SigmaRecovery sr;
  try {
    sr = recover_sigmas(est, rr.radii, options.sigma_orders, rr.lambdas);
  } catch (const DomainError& e) {
    fail(e.code(), std::string("stage sigmas: ") + e.what());
  }

  rep.radii = rr.radii;
  rep.lambdas = sr.lambdas;
  rep.sigmas = sr.sigmas;
  rep.sigma_orders = sr.orders;
  rep.detL = sr.detL;
  rep.detR = sr.detR;
  rep.newton_converged = sr.newton_converged;
  rep.certificate_ok = sr.certificate_ok;
  rep.peeled_layers = rr.peeled_layers;
  rep.weighted_residual = rr.weighted_residual;
  rep.residual_floor = std::sqrt(2.0 * double(rr.orders_used.size()) + 1.0);
  rep.misfit = rep.weighted_residual > 100.0 * rep.residual_floor;
  for (int n : rr.orders_used) {
    OrderResidual pr;
    pr.n = n;
    pr.c_hat = est.spectrum.values.at(n);
    try {
      pr.c_model = multipole_rl(rr.radii, sr.lambdas, n);
    } catch (const DomainError&) {
      pr.c_model = std::nan("");
    }
    auto it = est.stds.find(n);
    pr.std = it == est.stds.end() ? 0.0 : it->second;
    rep.per_order.push_back(pr);
  }
  return rep;
}

}  // namespace mlpt
