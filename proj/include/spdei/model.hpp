#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "spdei/spectral.hpp"

namespace spdei {

// ---------------------------------------------------------------------------
// Coefficients
// ---------------------------------------------------------------------------

enum class DriftKind { linear_diagonal, nemytskii_lipschitz, custom };
enum class Sigma1Kind { zero, tanh_diagonal, custom };

/// Drift b : H_n -> H_n together with its declared Lipschitz constant.
/// Built-in kinds:
///   linear_diagonal      b(x) = -c x
///   nemytskii_lipschitz  b_i(x) = -c x_i + a tanh(x_i)
struct DriftSpec {
  DriftKind kind = DriftKind::linear_diagonal;
  double c = 1.0;
  double a = 0.0;
  double L1 = 1.0;
  std::function<SpectralVector(const SpectralVector&)> evaluator;  // custom only

  void evaluate_into(const SpectralVector& x, SpectralVector& out) const {
    switch (kind) {
      case DriftKind::linear_diagonal:
        out.resize(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = -c * x[i];
        return;
      case DriftKind::nemytskii_lipschitz:
        out.resize(x.size());
        for (std::size_t i = 0; i < x.size(); ++i)
          out[i] = -c * x[i] + a * std::tanh(x[i]);
        return;
      case DriftKind::custom:
        out = evaluator(x);
        return;
    }
  }

  SpectralVector evaluate(const SpectralVector& x) const {
    SpectralVector out;
    evaluate_into(x, out);
    return out;
  }
};

/// Diffusion sigma(x) = sigma0 + sigma1(x), both mode-diagonal.
/// sigma0 is a fixed per-mode gain; sigma1 maps the state to a per-mode
/// diagonal Hilbert-Schmidt factor.  theta1/delta1 quantify the (H2)
/// regularity of sigma0 and theta2/delta2 its small-time integrability.
struct DiffusionSpec {
  std::vector<double> sigma0_gains;
  Sigma1Kind sigma1_kind = Sigma1Kind::zero;
  double sigma1_gain = 0.0;
  std::function<std::vector<double>(const SpectralVector&)> sigma1_evaluator;
  double L2 = 0.0;
  double theta1 = 0.2;
  double delta1 = 0.0;
  double theta2 = 0.4;
  double delta2 = 0.0;

  void sigma1_diag_into(const SpectralVector& x, std::vector<double>& out) const {
    switch (sigma1_kind) {
      case Sigma1Kind::zero:
        out.assign(x.size(), 0.0);
        return;
      case Sigma1Kind::tanh_diagonal:
        out.resize(x.size());
        for (std::size_t i = 0; i < x.size(); ++i)
          out[i] = sigma1_gain * std::tanh(x[i]);
        return;
      case Sigma1Kind::custom:
        out = sigma1_evaluator(x);
        return;
    }
  }

  std::vector<double> sigma1_diag(const SpectralVector& x) const {
    std::vector<double> out;
    sigma1_diag_into(x, out);
    return out;
  }

  double sigma1_hs_norm_sq(const SpectralVector& x) const {
    std::vector<double> d;
    sigma1_diag_into(x, d);
    double s = 0.0;
    for (double v : d) s += v * v;
    return s;
  }
};

/// Full model: dX = {AX + b(X)} dt + (sigma0 + sigma1(X)) dW on H_n.
struct ModelSpec {
  SpectralSpace space;
  DriftSpec drift;
  DiffusionSpec diffusion;
  double gamma = 0.0;  // dissipativity rate of (H4)
  double mu = 0.0;     // ||b(0)||^2 + ||sigma1(0)||^2_HS

  double recompute_mu() const {
    SpectralVector zero(space.dim(), 0.0);
    SpectralVector b0;
    drift.evaluate_into(zero, b0);
    return norm_sq(b0) + diffusion.sigma1_hs_norm_sq(zero);
  }

  void validate() const {
    if (diffusion.sigma0_gains.size() != space.dim())
      throw std::invalid_argument("ModelSpec: sigma0 gain count != space dimension");
    const double mu0 = recompute_mu();
    if (std::abs(mu0 - mu) > 1e-12 * (1.0 + std::abs(mu)))
      throw std::invalid_argument("ModelSpec: stored mu does not match coefficients at 0");
  }
};

// ---------------------------------------------------------------------------
// Series constants of the canonical Laplacian example
// ---------------------------------------------------------------------------

namespace detail {

// sum_{k>=1} k^p for p < -1, via partial sum plus Euler-Maclaurin tail
// (integral, half-term and derivative corrections).  The neglected remainder
// is O(N^{p-3}).
inline double power_series(double p, double tail_tol) {
  if (!(p < -1.0)) throw std::invalid_argument("power_series: divergent exponent");
  std::size_t n_terms = 1024;
  auto remainder_bound = [&](double n) {
    return std::abs(p * (p - 1.0) * (p - 2.0)) * std::pow(n, p - 3.0) / 720.0;
  };
  while (remainder_bound(static_cast<double>(n_terms)) > 0.5 * tail_tol &&
         n_terms < (1u << 22))
    n_terms *= 2;
  double s = 0.0;
  for (std::size_t k = n_terms; k >= 1; --k)  // ascending magnitude
    s += std::pow(static_cast<double>(k), p);
  const double n = static_cast<double>(n_terms);
  s += std::pow(n, p + 1.0) / (-p - 1.0);  // integral_N^inf x^p dx
  s -= 0.5 * std::pow(n, p);
  s -= (p / 12.0) * std::pow(n, p - 1.0);
  return s;
}

}  // namespace detail

/// delta_1 = 1/2 sum_k (k^2)^{2 theta1 - 1} for the Laplacian with
/// sigma0 = id; converges for theta1 in (0, 1/4).
inline double delta1_series(double theta1, double tail_tol = 1e-10) {
  if (!(theta1 > 0.0) || theta1 >= 0.25)
    throw std::invalid_argument("delta1_series: require theta1 in (0, 1/4)");
  return 0.5 * detail::power_series(2.0 * (2.0 * theta1 - 1.0), tail_tol);
}

/// delta_2 = 2^{delta-1} sum_k k^{-2(1-delta)} with theta2 = delta in (0, 1/2).
inline double delta2_series(double delta, double tail_tol = 1e-10) {
  if (!(delta > 0.0) || delta >= 0.5)
    throw std::invalid_argument("delta2_series: require delta in (0, 1/2)");
  return std::pow(2.0, delta - 1.0) *
         detail::power_series(-2.0 * (1.0 - delta), tail_tol);
}

// ---------------------------------------------------------------------------
// Derived constants and the stepsize gate
// ---------------------------------------------------------------------------

/// Every derived constant of the stationarity and convergence theory, plus
/// the admissibility verdict for a given stepsize.
struct ConstantsReport {
  double alpha = 0.0;
  double gamma = 0.0;
  double L1 = 0.0;
  double L2 = 0.0;
  double mu = 0.0;
  double lambda_n = 0.0;
  double theta1 = 0.0;
  double theta2 = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double Lbar = 0.0;
  double beta1 = 0.0;
  double rho1 = 0.0;
  double rho2 = 0.0;
  double tau = 0.0;
  double stepsize_bound_p1 = 0.0;
  double stepsize_bound_p2 = 0.0;

  bool admissible(double dt) const {
    return dt < std::min({stepsize_bound_p1, stepsize_bound_p2, 1.0});
  }
};

/// Lbar = 2((L1^2 + L2^2) v mu)
/// beta1 = 3{(lambda_n^2 + 2 Lbar) v (2 Lbar (1 + ||(-A)^{-theta1}||^2 delta1))}
/// rho1  = 2 + (|14a-g|^2/64 + 2 Lbar + |14a-g|/8) beta1 + 2(1 + beta1 + lambda_n^2 Lbar)
/// rho2  = 6(lambda_n^2 + Lbar)(|2a-g| + 1) + 3 + 7 Lbar + lambda_n^2 Lbar + 6 lambda_n^2
/// tau   = L1/a + L2/sqrt(2a)
/// with ||(-A)^{-theta1}|| = lambda_1^{-theta1} on the ordered spectrum.
inline ConstantsReport compute_constants(const ModelSpec& model) {
  ConstantsReport r;
  r.alpha = model.space.alpha();
  r.gamma = model.gamma;
  r.L1 = model.drift.L1;
  r.L2 = model.diffusion.L2;
  r.mu = model.mu;
  r.lambda_n = model.space.lambda_max();
  r.theta1 = model.diffusion.theta1;
  r.theta2 = model.diffusion.theta2;
  r.delta1 = model.diffusion.delta1;
  r.delta2 = model.diffusion.delta2;

  const double two_ag = 2.0 * r.alpha + r.gamma;
  if (!(two_ag > 0.0))
    throw std::domain_error(
        "compute_constants: 2*alpha + gamma <= 0, no stationary guarantee");

  r.Lbar = 2.0 * std::max(r.L1 * r.L1 + r.L2 * r.L2, r.mu);

  const double lam_n_sq = r.lambda_n * r.lambda_n;
  const double op_norm_sq = std::pow(model.space.lambda_min(), -2.0 * r.theta1);
  r.beta1 = 3.0 * std::max(lam_n_sq + 2.0 * r.Lbar,
                           2.0 * r.Lbar * (1.0 + op_norm_sq * r.delta1));

  const double q1 = std::abs(14.0 * r.alpha - r.gamma);
  r.rho1 = 2.0 + (q1 * q1 / 64.0 + 2.0 * r.Lbar + q1 / 8.0) * r.beta1 +
           2.0 * (1.0 + r.beta1 + lam_n_sq * r.Lbar);

  const double q2 = std::abs(2.0 * r.alpha - r.gamma);
  r.rho2 = 6.0 * (lam_n_sq + r.Lbar) * (q2 + 1.0) + 3.0 + 7.0 * r.Lbar +
           lam_n_sq * r.Lbar + 6.0 * lam_n_sq;

  r.tau = r.L1 / r.alpha + r.L2 / std::sqrt(2.0 * r.alpha);

  r.stepsize_bound_p1 = std::min(1.0, two_ag * two_ag / (4.0 * r.rho1 * r.rho1));
  r.stepsize_bound_p2 = std::min(1.0, two_ag * two_ag / (4.0 * r.rho2 * r.rho2));
  return r;
}

// ---------------------------------------------------------------------------
// Randomized falsification of (H3)/(H4)
// ---------------------------------------------------------------------------

struct H3Report {
  double max_drift_ratio = 0.0;
  double max_sigma1_ratio = 0.0;
  double declared_L1 = 0.0;
  double declared_L2 = 0.0;
  bool drift_ok = true;
  bool sigma1_ok = true;
  bool pass() const { return drift_ok && sigma1_ok; }
};

struct H4Report {
  double max_quotient = 0.0;
  double declared_gamma = 0.0;
  bool pass_flag = true;
  bool pass() const { return pass_flag; }
};

namespace detail {

inline SpectralVector sample_in_ball(std::mt19937_64& rng, std::size_t n,
                                     double radius) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  SpectralVector x(n);
  double nrm2 = 0.0;
  for (auto& v : x) {
    v = gauss(rng);
    nrm2 += v * v;
  }
  const double nrm = std::sqrt(nrm2);
  const double scale =
      nrm > 0.0 ? radius * std::pow(unif(rng), 1.0 / static_cast<double>(n)) / nrm
                : 0.0;
  for (auto& v : x) v *= scale;
  return x;
}

}  // namespace detail

/// Sampling check of the Lipschitz bounds in (H3).  Report-only: it can
/// falsify a declared constant but never certify it.
inline H3Report validate_h3(const ModelSpec& model, std::size_t samples,
                            double radius, std::uint64_t rng_seed) {
  if (samples == 0) throw std::invalid_argument("validate_h3: samples >= 1");
  std::mt19937_64 rng(rng_seed);
  H3Report rep;
  rep.declared_L1 = model.drift.L1;
  rep.declared_L2 = model.diffusion.L2;
  const std::size_t n = model.space.dim();
  SpectralVector bx, by;
  std::vector<double> sx, sy;
  for (std::size_t s = 0; s < samples; ++s) {
    const auto x = detail::sample_in_ball(rng, n, radius);
    const auto y = detail::sample_in_ball(rng, n, radius);
    double dxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) dxy += (x[i] - y[i]) * (x[i] - y[i]);
    if (dxy == 0.0) continue;
    dxy = std::sqrt(dxy);
    model.drift.evaluate_into(x, bx);
    model.drift.evaluate_into(y, by);
    double db = 0.0;
    for (std::size_t i = 0; i < n; ++i) db += (bx[i] - by[i]) * (bx[i] - by[i]);
    rep.max_drift_ratio = std::max(rep.max_drift_ratio, std::sqrt(db) / dxy);
    model.diffusion.sigma1_diag_into(x, sx);
    model.diffusion.sigma1_diag_into(y, sy);
    double ds = 0.0;
    for (std::size_t i = 0; i < n; ++i) ds += (sx[i] - sy[i]) * (sx[i] - sy[i]);
    rep.max_sigma1_ratio = std::max(rep.max_sigma1_ratio, std::sqrt(ds) / dxy);
  }
  rep.drift_ok = rep.max_drift_ratio <= rep.declared_L1 * (1.0 + 1e-9) + 1e-300;
  rep.sigma1_ok = rep.max_sigma1_ratio <= rep.declared_L2 * (1.0 + 1e-9) + 1e-300;
  return rep;
}

/// Sampling check of the dissipativity quotient in (H4):
/// (2<x-y, b(x)-b(y)> + ||s1(x)-s1(y)||^2_HS) / ||x-y||^2 <= -gamma.
inline H4Report validate_h4(const ModelSpec& model, std::size_t samples,
                            double radius, std::uint64_t rng_seed) {
  if (samples == 0) throw std::invalid_argument("validate_h4: samples >= 1");
  std::mt19937_64 rng(rng_seed);
  H4Report rep;
  rep.declared_gamma = model.gamma;
  const std::size_t n = model.space.dim();
  bool any = false;
  SpectralVector bx, by;
  std::vector<double> sx, sy;
  for (std::size_t s = 0; s < samples; ++s) {
    const auto x = detail::sample_in_ball(rng, n, radius);
    const auto y = detail::sample_in_ball(rng, n, radius);
    double dxy2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) dxy2 += (x[i] - y[i]) * (x[i] - y[i]);
    if (dxy2 == 0.0) continue;
    model.drift.evaluate_into(x, bx);
    model.drift.evaluate_into(y, by);
    model.diffusion.sigma1_diag_into(x, sx);
    model.diffusion.sigma1_diag_into(y, sy);
    double inner = 0.0, hs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      inner += (x[i] - y[i]) * (bx[i] - by[i]);
      hs += (sx[i] - sy[i]) * (sx[i] - sy[i]);
    }
    const double q = (2.0 * inner + hs) / dxy2;
    rep.max_quotient = any ? std::max(rep.max_quotient, q) : q;
    any = true;
  }
  rep.pass_flag = !any || rep.max_quotient <= -rep.declared_gamma + 1e-9;
  return rep;
}

// ---------------------------------------------------------------------------
// Built-in model factories
// ---------------------------------------------------------------------------

/// b(x) = -c x with additive diagonal noise; L1 = c, L2 = 0, gamma = 2c.
inline ModelSpec make_linear_diagonal_model(SpectralSpace space, double c,
                                            std::vector<double> sigma0_gains,
                                            double theta1, double delta1,
                                            double theta2, double delta2) {
  if (!(c > 0.0))
    throw std::invalid_argument("make_linear_diagonal_model: c must be positive");
  ModelSpec m{std::move(space), {}, {}, 0.0, 0.0};
  m.drift.kind = DriftKind::linear_diagonal;
  m.drift.c = c;
  m.drift.L1 = c;
  m.diffusion.sigma0_gains = std::move(sigma0_gains);
  m.diffusion.sigma1_kind = Sigma1Kind::zero;
  m.diffusion.L2 = 0.0;
  m.diffusion.theta1 = theta1;
  m.diffusion.delta1 = delta1;
  m.diffusion.theta2 = theta2;
  m.diffusion.delta2 = delta2;
  m.gamma = 2.0 * c;
  m.mu = 0.0;
  m.validate();
  return m;
}

/// b_i(x) = -c x_i + a tanh(x_i), sigma1_i(x) = s tanh(x_i).
/// L1 = max(c, |a-c|), L2 = |s|, gamma = 2(c-a) - s^2  (a >= 0 assumed).
inline ModelSpec make_nemytskii_model(SpectralSpace space, double c, double a,
                                      double sigma1_gain,
                                      std::vector<double> sigma0_gains,
                                      double theta1, double delta1,
                                      double theta2, double delta2) {
  if (!(c > 0.0) || a < 0.0)
    throw std::invalid_argument("make_nemytskii_model: require c > 0, a >= 0");
  ModelSpec m{std::move(space), {}, {}, 0.0, 0.0};
  m.drift.kind = DriftKind::nemytskii_lipschitz;
  m.drift.c = c;
  m.drift.a = a;
  m.drift.L1 = std::max(c, std::abs(a - c));
  m.diffusion.sigma0_gains = std::move(sigma0_gains);
  m.diffusion.sigma1_kind =
      sigma1_gain == 0.0 ? Sigma1Kind::zero : Sigma1Kind::tanh_diagonal;
  m.diffusion.sigma1_gain = sigma1_gain;
  m.diffusion.L2 = std::abs(sigma1_gain);
  m.diffusion.theta1 = theta1;
  m.diffusion.delta1 = delta1;
  m.diffusion.theta2 = theta2;
  m.diffusion.delta2 = delta2;
  m.gamma = 2.0 * (c - a) - sigma1_gain * sigma1_gain;
  m.mu = 0.0;
  m.validate();
  return m;
}

}  // namespace spdei
