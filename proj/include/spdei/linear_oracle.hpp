#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace spdei {

/// Closed-form Gaussian law of the scheme and of the mild solution for the
/// linear diagonal model b(x) = -c x with additive per-mode gains g_i.  Every
/// mode evolves independently:
///   scheme: y_{k+1} = e^{-lambda dt} ((1 - c dt) y_k + g dW_k)
///   mild:   dX = -(lambda + c) X dt + g dW.
namespace linear_oracle {

/// Per-step contraction factor r = e^{-lambda dt}(1 - c dt) of one mode.
inline double scheme_factor(double lambda, double c, double dt) {
  return std::exp(-lambda * dt) * (1.0 - c * dt);
}

inline double scheme_mean(double lambda, double c, double dt, std::uint64_t k,
                          double x0) {
  return std::pow(scheme_factor(lambda, c, dt), static_cast<double>(k)) * x0;
}

/// Var y_k = g^2 e^{-2 lambda dt} dt (1 - r^{2k}) / (1 - r^2).
inline double scheme_variance(double lambda, double c, double g, double dt,
                              std::uint64_t k) {
  const double r = scheme_factor(lambda, c, dt);
  const double r2 = r * r;
  const double pref = g * g * std::exp(-2.0 * lambda * dt) * dt;
  if (r2 == 1.0) return pref * static_cast<double>(k);
  return pref * (1.0 - std::pow(r2, static_cast<double>(k))) / (1.0 - r2);
}

/// k -> infinity limit of scheme_variance; requires |r| < 1.
inline double scheme_stationary_variance(double lambda, double c, double g,
                                         double dt) {
  const double r = scheme_factor(lambda, c, dt);
  if (!(std::abs(r) < 1.0))
    throw std::domain_error("scheme_stationary_variance: |r| >= 1, no limit");
  return g * g * std::exp(-2.0 * lambda * dt) * dt / (1.0 - r * r);
}

inline double mild_mean(double lambda, double c, double t, double x0) {
  return std::exp(-(lambda + c) * t) * x0;
}

/// Var X(t) = g^2 (1 - e^{-2(lambda+c)t}) / (2(lambda+c)).
inline double mild_variance(double lambda, double c, double g, double t) {
  const double a = lambda + c;
  return g * g * (-std::expm1(-2.0 * a * t)) / (2.0 * a);
}

/// dt -> 0 stationary variance g^2 / (2(lambda + c)).
inline double mild_stationary_variance(double lambda, double c, double g) {
  return g * g / (2.0 * (lambda + c));
}

/// Exact mean-square error at horizon T = K dt between one scheme mode and
/// the corresponding mild-solution mode driven by the same Brownian motion:
///   E (X(T) - y_K)^2
///     = (e^{-aT} - r^K)^2 x0^2
///       + g^2 [ int_0^T f(s)^2 ds - 2 sum_k h_k int_{I_k} f + dt sum_k h_k^2 ]
/// with a = lambda + c, f(s) = e^{-a(T-s)}, and h_k = e^{-lambda dt} r^{K-1-k}
/// the scheme's total propagation weight of dW_k into y_K.
inline double coupled_mode_mse(double lambda, double c, double g, double dt,
                               std::uint64_t steps, double x0) {
  const double a = lambda + c;
  const double T = dt * static_cast<double>(steps);
  const double r = scheme_factor(lambda, c, dt);
  const double K = static_cast<double>(steps);

  const double det = std::exp(-a * T) - std::pow(r, K);
  double mse = det * det * x0 * x0;
  if (g == 0.0) return mse;

  const double int_f2 = (-std::expm1(-2.0 * a * T)) / (2.0 * a);

  // sum_k h_k int_{I_k} f = e^{-lambda dt} (1 - e^{-a dt})/a * (1-q^K)/(1-q),
  // q = r e^{-a dt} (substituting j = K-1-k turns the sum geometric).
  const double q = r * std::exp(-a * dt);
  const double geo_q =
      q == 1.0 ? K : (1.0 - std::pow(q, K)) / (1.0 - q);
  const double cross = std::exp(-lambda * dt) * (-std::expm1(-a * dt)) / a * geo_q;

  const double r2 = r * r;
  const double geo_r2 =
      r2 == 1.0 ? K : (1.0 - std::pow(r2, K)) / (1.0 - r2);
  const double quad = std::exp(-2.0 * lambda * dt) * dt * geo_r2;

  mse += g * g * (int_f2 - 2.0 * cross + quad);
  return mse;
}

/// Mean-square error between the n-mode scheme and the full mild solution of
/// the infinite model with gains g(i) (1-based), at horizon steps*dt from
/// x0 = 0: resolved modes use the coupled formula, unresolved modes
/// contribute their full mild variance.  The tail beyond tail_modes is
/// refused rather than silently truncated; callers pass an analytic tail.
inline double full_mse_vs_mild(std::size_t n_scheme,
                               const std::vector<double>& lambdas,
                               const std::vector<double>& gains, double c,
                               double dt, std::uint64_t steps) {
  if (n_scheme > lambdas.size() || lambdas.size() != gains.size())
    throw std::invalid_argument("full_mse_vs_mild: inconsistent mode lists");
  const double T = dt * static_cast<double>(steps);
  double mse = 0.0;
  for (std::size_t i = 0; i < n_scheme; ++i)
    mse += coupled_mode_mse(lambdas[i], c, gains[i], dt, steps, 0.0);
  for (std::size_t i = n_scheme; i < lambdas.size(); ++i)
    mse += mild_variance(lambdas[i], c, gains[i], T);
  return mse;
}

}  // namespace linear_oracle
}  // namespace spdei
