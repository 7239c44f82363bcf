#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "raman/errors.hpp"

namespace raman {

struct FitResult {
  std::vector<double> params;
  std::vector<double> sigmas; // 1-sigma from local curvature at the optimum
  double rss = 0.0;
  bool converged = false;
  int iterations = 0;
};

namespace detail {

// Solve A x = b for a small symmetric positive-definite system (Cholesky).
inline bool cholesky_solve(std::vector<double> A, std::vector<double> b, int n, std::vector<double>& x) {
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = A[i * n + j];
      for (int k = 0; k < j; ++k) s -= A[i * n + k] * A[j * n + k];
      if (i == j) {
        if (s <= 0.0) return false;
        A[i * n + i] = std::sqrt(s);
      } else {
        A[i * n + j] = s / A[j * n + j];
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= A[i * n + k] * b[k];
    b[i] = s / A[i * n + i];
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int k = i + 1; k < n; ++k) s -= A[k * n + i] * b[k];
    b[i] = s / A[i * n + i];
  }
  x = b;
  return true;
}

// Invert a small SPD matrix via Cholesky; returns false if not SPD.
inline bool spd_inverse(const std::vector<double>& A, int n, std::vector<double>& inv) {
  inv.assign(n * n, 0.0);
  std::vector<double> col(n), e(n);
  for (int j = 0; j < n; ++j) {
    std::fill(e.begin(), e.end(), 0.0);
    e[j] = 1.0;
    if (!cholesky_solve(A, e, n, col)) return false;
    for (int i = 0; i < n; ++i) inv[i * n + j] = col[i];
  }
  return true;
}

} // namespace detail

using ResidualFn = std::function<void(const std::vector<double>& params, std::vector<double>& residuals)>;

struct LMOptions {
  int max_iterations = 200;
  double gradient_tol = 1e-10; // relative to max(1, rss)
  double step_tol = 1e-14;
};

// Damped least squares with numeric Jacobian. Residuals may carry weights
// (scale them by 1/sigma before returning); sigmas are reported with the
// reduced-chi-square scaling so they stay meaningful either way.
inline FitResult levenberg_marquardt(const ResidualFn& fn, std::vector<double> p,
                                     int n_residuals, const LMOptions& opt = {}) {
  const int np = static_cast<int>(p.size());
  std::vector<double> r(n_residuals), r_trial(n_residuals);
  std::vector<double> J(static_cast<std::size_t>(n_residuals) * np);

  auto rss_of = [](const std::vector<double>& res) {
    double s = 0.0;
    for (double v : res) s += v * v;
    return s;
  };

  fn(p, r);
  double rss = rss_of(r);
  double lambda = 1e-3;

  FitResult out;
  std::vector<double> jtj(np * np), jtr(np), step(np), p_trial(np), pp(np);

  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    // Numeric Jacobian, central differences.
    for (int k = 0; k < np; ++k) {
      const double h = std::max(1e-7 * std::abs(p[k]), 1e-10);
      pp = p;
      pp[k] = p[k] + h;
      fn(pp, r_trial);
      std::vector<double> rp = r_trial;
      pp[k] = p[k] - h;
      fn(pp, r_trial);
      for (int i = 0; i < n_residuals; ++i) J[static_cast<std::size_t>(i) * np + k] = (rp[i] - r_trial[i]) / (2.0 * h);
    }

    std::fill(jtj.begin(), jtj.end(), 0.0);
    std::fill(jtr.begin(), jtr.end(), 0.0);
    for (int i = 0; i < n_residuals; ++i) {
      const double* Ji = &J[static_cast<std::size_t>(i) * np];
      for (int a = 0; a < np; ++a) {
        jtr[a] += Ji[a] * r[i];
        for (int b = 0; b <= a; ++b) jtj[a * np + b] += Ji[a] * Ji[b];
      }
    }
    for (int a = 0; a < np; ++a)
      for (int b = a + 1; b < np; ++b) jtj[a * np + b] = jtj[b * np + a];

    double gmax = 0.0;
    for (int a = 0; a < np; ++a) gmax = std::max(gmax, std::abs(jtr[a]));
    if (gmax <= opt.gradient_tol * std::max(1.0, rss)) {
      out.converged = true;
      break;
    }

    bool stepped = false;
    for (int tries = 0; tries < 12 && !stepped; ++tries) {
      std::vector<double> damped = jtj;
      for (int a = 0; a < np; ++a) damped[a * np + a] += lambda * std::max(jtj[a * np + a], 1e-12);
      std::vector<double> neg_g(np);
      for (int a = 0; a < np; ++a) neg_g[a] = -jtr[a];
      if (!detail::cholesky_solve(damped, neg_g, np, step)) {
        lambda *= 10.0;
        continue;
      }
      for (int a = 0; a < np; ++a) p_trial[a] = p[a] + step[a];
      fn(p_trial, r_trial);
      const double rss_trial = rss_of(r_trial);
      if (std::isfinite(rss_trial) && rss_trial <= rss) {
        double step_norm = 0.0, p_norm = 0.0;
        for (int a = 0; a < np; ++a) {
          step_norm += step[a] * step[a];
          p_norm += p[a] * p[a];
        }
        p = p_trial;
        r = r_trial;
        const double improvement = rss - rss_trial;
        rss = rss_trial;
        lambda = std::max(lambda / 3.0, 1e-12);
        stepped = true;
        if (step_norm <= opt.step_tol * (p_norm + opt.step_tol) &&
            improvement <= opt.step_tol * std::max(1.0, rss)) {
          out.converged = true;
        }
      } else {
        lambda *= 10.0;
      }
    }
    if (!stepped || out.converged) {
      if (!stepped) out.converged = (gmax <= 1e-6 * std::max(1.0, rss));
      break;
    }
  }

  // Curvature-based 1-sigma: cov = s^2 (J^T J)^-1, s^2 = rss / (n - p).
  out.params = p;
  out.rss = rss;
  out.iterations = it;
  out.sigmas.assign(np, 0.0);
  const int dof = std::max(n_residuals - np, 1);
  std::vector<double> cov;
  if (detail::spd_inverse(jtj, np, cov)) {
    const double s2 = rss / dof;
    for (int a = 0; a < np; ++a) {
      const double v = cov[a * np + a] * s2;
      out.sigmas[a] = v > 0.0 ? std::sqrt(v) : 0.0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model fits
// ---------------------------------------------------------------------------

struct GaussianRadialFit {
  double amplitude = 0.0, width = 0.0, offset = 0.0; // width = 1/e^2 intensity radius
  double sigma_amplitude = 0.0, sigma_width = 0.0, sigma_offset = 0.0;
  double rss = 0.0;
  bool converged = false;
  int iterations = 0;
};

// Fit y = A exp(-2 theta^2 / w^2) + offset.
inline GaussianRadialFit fit_gaussian_radial(const std::vector<double>& theta, const std::vector<double>& y,
                                             const std::vector<double>& sigma = {}) {
  const int n = static_cast<int>(theta.size());
  if (n < 6 || y.size() != theta.size()) throw estimator_error("fit_gaussian_radial: need at least 6 bins");

  const double ymin = *std::min_element(y.begin(), y.end());
  const double ymax = *std::max_element(y.begin(), y.end());
  if (!(ymax > ymin)) throw estimator_error("fit_gaussian_radial: peak not above offset");

  // Second-moment start: for samples of A exp(-2 t^2/w^2), <t^2> = w^2/4.
  double wsum = 0.0, wt2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double wgt = std::max(y[i] - ymin, 0.0);
    wsum += wgt;
    wt2 += wgt * theta[i] * theta[i];
  }
  double w_init = wsum > 0.0 ? 2.0 * std::sqrt(wt2 / wsum) : std::abs(theta[n - 1]);
  if (w_init <= 0.0) w_init = std::abs(theta[n - 1]) + 1e-12;

  auto resid = [&](const std::vector<double>& p, std::vector<double>& r) {
    const double A = p[0], w = p[1], off = p[2];
    for (int i = 0; i < n; ++i) {
      const double model = A * std::exp(-2.0 * theta[i] * theta[i] / (w * w)) + off;
      r[i] = model - y[i];
      if (!sigma.empty()) r[i] /= sigma[i];
    }
  };
  FitResult fr = levenberg_marquardt(resid, {ymax - ymin, w_init, ymin}, n);

  GaussianRadialFit out;
  out.amplitude = fr.params[0];
  out.width = std::abs(fr.params[1]);
  out.offset = fr.params[2];
  out.sigma_amplitude = fr.sigmas[0];
  out.sigma_width = fr.sigmas[1];
  out.sigma_offset = fr.sigmas[2];
  out.rss = fr.rss;
  out.converged = fr.converged;
  out.iterations = fr.iterations;
  return out;
}

struct Gaussian2DFit {
  double amplitude = 0.0, x0 = 0.0, y0 = 0.0, width = 0.0, offset = 0.0;
  double sigma_width = 0.0;
  double rss = 0.0;
  bool converged = false;
};

// Fit z = A exp(-2 ((x-x0)^2+(y-y0)^2) / w^2) + offset on scattered samples.
// A sample may be masked (skipped) by passing weight 0.
inline Gaussian2DFit fit_gaussian_2d(const std::vector<double>& x, const std::vector<double>& y,
                                     const std::vector<double>& z, const std::vector<double>& mask,
                                     double A0, double x0, double y0, double w0_init, double off0) {
  const int n = static_cast<int>(x.size());
  auto resid = [&](const std::vector<double>& p, std::vector<double>& r) {
    const double A = p[0], cx = p[1], cy = p[2], w = p[3], off = p[4];
    for (int i = 0; i < n; ++i) {
      if (!mask.empty() && mask[i] == 0.0) {
        r[i] = 0.0;
        continue;
      }
      const double dx = x[i] - cx, dy = y[i] - cy;
      r[i] = A * std::exp(-2.0 * (dx * dx + dy * dy) / (w * w)) + off - z[i];
    }
  };
  FitResult fr = levenberg_marquardt(resid, {A0, x0, y0, w0_init, off0}, n);
  Gaussian2DFit out;
  out.amplitude = fr.params[0];
  out.x0 = fr.params[1];
  out.y0 = fr.params[2];
  out.width = std::abs(fr.params[3]);
  out.offset = fr.params[4];
  out.sigma_width = fr.sigmas[3];
  out.rss = fr.rss;
  out.converged = fr.converged;
  return out;
}

enum class ExpSign { decay, growth };

struct ExponentialFit {
  double amplitude = 0.0, rate = 0.0, offset = 0.0; // rate >= 0 by parameterization
  double sigma_amplitude = 0.0, sigma_rate = 0.0, sigma_offset = 0.0;
  double rss = 0.0;
  bool converged = false;
  int iterations = 0;
};

// Fit y = A exp(+-rate t) + offset with rate = exp(u) enforcing positivity.
// with_offset=false pins the offset at zero; use it for background-subtracted
// decay data, where a free offset is degenerate with slow rates.
inline ExponentialFit fit_exponential(const std::vector<double>& t, const std::vector<double>& y,
                                      ExpSign sign, const std::vector<double>& sigma = {},
                                      bool with_offset = true) {
  const int n = static_cast<int>(t.size());
  if (n < 4 || y.size() != t.size()) throw estimator_error("fit_exponential: need at least 4 points");
  const double ymin = *std::min_element(y.begin(), y.end());
  const double ymax = *std::max_element(y.begin(), y.end());
  const double s = (sign == ExpSign::decay) ? -1.0 : 1.0;

  ExponentialFit out;
  if (!(ymax > ymin)) {
    // Flat data cannot determine a rate.
    out.amplitude = 0.0;
    out.offset = ymin;
    out.converged = false;
    return out;
  }

  // Log-linear start on y - offset guess.
  const double off0 = with_offset ? ymin : 0.0;
  const double span = ymax - ymin;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int m = 0;
  for (int i = 0; i < n; ++i) {
    const double v = y[i] - off0 + 1e-3 * span;
    if (v <= 0.0) continue;
    const double ly = std::log(v);
    sx += t[i];
    sy += ly;
    sxx += t[i] * t[i];
    sxy += t[i] * ly;
    ++m;
  }
  double slope = 0.0;
  if (m >= 2 && m * sxx - sx * sx > 0.0) slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  double rate0 = std::abs(slope);
  if (!(rate0 > 0.0) || !std::isfinite(rate0)) {
    const double tspan = *std::max_element(t.begin(), t.end()) - *std::min_element(t.begin(), t.end());
    rate0 = tspan > 0.0 ? 1.0 / tspan : 1.0;
  }
  double A0 = span;

  auto resid = [&](const std::vector<double>& p, std::vector<double>& r) {
    const double A = p[0], rate = std::exp(p[1]);
    const double off = with_offset ? p[2] : 0.0;
    for (int i = 0; i < n; ++i) {
      r[i] = A * std::exp(s * rate * t[i]) + off - y[i];
      if (!sigma.empty()) r[i] /= sigma[i];
    }
  };
  std::vector<double> p0 = {A0, std::log(rate0)};
  if (with_offset) p0.push_back(off0);
  FitResult fr = levenberg_marquardt(resid, p0, n);

  out.amplitude = fr.params[0];
  out.rate = std::exp(fr.params[1]);
  out.offset = with_offset ? fr.params[2] : 0.0;
  out.sigma_amplitude = fr.sigmas[0];
  out.sigma_rate = out.rate * fr.sigmas[1]; // delta method through rate = exp(u)
  out.sigma_offset = with_offset ? fr.sigmas[2] : 0.0;
  out.rss = fr.rss;
  out.converged = fr.converged;
  out.iterations = fr.iterations;
  return out;
}

// True when a sampled decay series still carries rate information past the
// first time step. Two requirements: the second sample must stand above the
// tail noise floor, and it must retain a non-negligible fraction of the
// initial value (a real decay slower than ~3.5 inverse steps keeps
// y1/y0 > e^-3.5; a series that dies within one step cannot). Series that
// die within one step produce fits that track noise wiggles with deceptively
// small uncertainties; callers should drop them.
inline bool decay_rate_resolvable(const std::vector<double>& y) {
  if (y.size() < 5) return true;
  const std::size_t k = y.size() - 3;
  double m = 0.0;
  for (std::size_t i = k; i < y.size(); ++i) m += y[i];
  m /= 3.0;
  double s2 = 0.0;
  for (std::size_t i = k; i < y.size(); ++i) s2 += (y[i] - m) * (y[i] - m);
  if (!(y[1] > m + 3.0 * std::sqrt(s2 / 2.0))) return false;
  return y[0] > 0.0 && y[1] > 0.03 * y[0];
}

struct RateVsAngleFit {
  double D = 0.0;        // m^2/s
  double constant = 0.0; // 1/s
  double sigma_D = 0.0;
  double sigma_constant = 0.0;
  double rss = 0.0;
  bool converged = false;
};

// Weighted linear least squares for gamma = D k_s^2 theta^2 + const.
inline RateVsAngleFit fit_rate_vs_angle(const std::vector<double>& theta, const std::vector<double>& gamma,
                                        double k_s, const std::vector<double>& weights = {}) {
  const int n = static_cast<int>(theta.size());
  if (n < 3) throw estimator_error("fit_rate_vs_angle: need at least 3 angles");

  double sw = 0.0, swx = 0.0, swxx = 0.0, swy = 0.0, swxy = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = k_s * k_s * theta[i] * theta[i];
    const double w = weights.empty() ? 1.0 : weights[i];
    sw += w;
    swx += w * x;
    swxx += w * x * x;
    swy += w * gamma[i];
    swxy += w * x * gamma[i];
  }
  const double det = sw * swxx - swx * swx;
  if (!(std::abs(det) > 1e-30 * std::max(1.0, sw * swxx)))
    throw estimator_error("fit_rate_vs_angle: rank-deficient design (angles not distinct)");

  RateVsAngleFit out;
  out.D = (sw * swxy - swx * swy) / det;
  out.constant = (swxx * swy - swx * swxy) / det;

  double rss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = k_s * k_s * theta[i] * theta[i];
    const double w = weights.empty() ? 1.0 : weights[i];
    const double r = out.D * x + out.constant - gamma[i];
    rss += w * r * r;
  }
  out.rss = rss;
  const double s2 = rss / std::max(n - 2, 1);
  out.sigma_D = std::sqrt(std::max(sw / det, 0.0) * s2);
  out.sigma_constant = std::sqrt(std::max(swxx / det, 0.0) * s2);
  out.converged = true;
  return out;
}

// Weighted quadratic fit with iterative outlier rejection. With weights of
// 1/sigma^2 the weighted residual |r|*sqrt(w) is in units of sigma; points
// whose residual exceeds `reject_sigma` are removed one at a time (worst
// first) and the fit repeated while more than 3 points remain. This guards
// the diffusion estimate against rate fits that latch onto noise at angles
// where the signal decays faster than the sampling can resolve: such fits
// report small uncertainties but sit many sigma away from the trend set by
// the well-resolved angles.
inline RateVsAngleFit fit_rate_vs_angle_robust(std::vector<double> theta, std::vector<double> gamma,
                                               double k_s, std::vector<double> weights,
                                               double reject_sigma = 4.0) {
  if (weights.size() != theta.size())
    throw estimator_error("fit_rate_vs_angle_robust: weights required for every angle");
  for (;;) {
    RateVsAngleFit fit = fit_rate_vs_angle(theta, gamma, k_s, weights);
    if (theta.size() <= 3) return fit;
    // leave-one-out residuals: predict each point from a fit that excludes it,
    // so a high-weight outlier cannot shield itself by dragging the fit
    std::size_t worst = 0;
    double worst_r = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      std::vector<double> th2, g2, w2;
      for (std::size_t j = 0; j < theta.size(); ++j) {
        if (j == i) continue;
        th2.push_back(theta[j]);
        g2.push_back(gamma[j]);
        w2.push_back(weights[j]);
      }
      double r = 0.0;
      try {
        const RateVsAngleFit loo = fit_rate_vs_angle(th2, g2, k_s, w2);
        const double x = k_s * k_s * theta[i] * theta[i];
        r = std::abs(loo.D * x + loo.constant - gamma[i]) * std::sqrt(weights[i]);
      } catch (const estimator_error&) {
        continue; // removing this point would leave a degenerate design
      }
      if (r > worst_r) {
        worst_r = r;
        worst = i;
      }
    }
    if (worst_r <= reject_sigma) return fit;
    theta.erase(theta.begin() + static_cast<std::ptrdiff_t>(worst));
    gamma.erase(gamma.begin() + static_cast<std::ptrdiff_t>(worst));
    weights.erase(weights.begin() + static_cast<std::ptrdiff_t>(worst));
  }
}

} // namespace raman
