#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace spdei {

/// Coefficients of a vector of H_n on the eigenbasis of -A.
using SpectralVector = std::vector<double>;

inline double dot(const SpectralVector& a, const SpectralVector& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm_sq(const SpectralVector& x) { return dot(x, x); }
inline double norm(const SpectralVector& x) { return std::sqrt(norm_sq(x)); }

/// Truncated Hilbert space H_n = span{e_1,...,e_n} for a self-adjoint
/// negative operator A with -A e_i = lambda_i e_i.  All operator calculus
/// (semigroup, fractional powers, projections) is diagonal on this basis.
class SpectralSpace {
 public:
  SpectralSpace(std::vector<double> eigenvalues, double alpha)
      : eigenvalues_(std::move(eigenvalues)), alpha_(alpha) {
    if (eigenvalues_.empty())
      throw std::invalid_argument("SpectralSpace: need at least one mode");
    double prev = 0.0;
    for (double lam : eigenvalues_) {
      if (!(lam > 0.0))
        throw std::invalid_argument("SpectralSpace: eigenvalues must be positive");
      if (lam < prev)
        throw std::invalid_argument("SpectralSpace: eigenvalues must be non-decreasing");
      prev = lam;
    }
    if (!(alpha_ > 0.0) || alpha_ > eigenvalues_.front())
      throw std::invalid_argument("SpectralSpace: require 0 < alpha <= lambda_1");
  }

  std::size_t dim() const { return eigenvalues_.size(); }
  const std::vector<double>& eigenvalues() const { return eigenvalues_; }
  double eigenvalue(std::size_t i) const { return eigenvalues_.at(i); }
  double lambda_min() const { return eigenvalues_.front(); }
  double lambda_max() const { return eigenvalues_.back(); }
  double alpha() const { return alpha_; }

  void check_vector(const SpectralVector& x) const {
    if (x.size() != dim())
      throw std::invalid_argument("SpectralVector: length " +
                                  std::to_string(x.size()) +
                                  " does not match space dimension " +
                                  std::to_string(dim()));
  }

 private:
  std::vector<double> eigenvalues_;
  double alpha_;
};

/// Dirichlet Laplacian on (0, pi): lambda_k = k^2, alpha = 1.
inline SpectralSpace laplacian_space(std::size_t n) {
  if (n == 0) throw std::invalid_argument("laplacian_space: n must be >= 1");
  std::vector<double> lam(n);
  for (std::size_t k = 0; k < n; ++k) {
    double kk = static_cast<double>(k + 1);
    lam[k] = kk * kk;
  }
  return SpectralSpace(std::move(lam), 1.0);
}

/// e^{tA} x, computed mode by mode as coord_i -> e^{-lambda_i t} coord_i.
inline SpectralVector semigroup_apply(const SpectralSpace& space, double t,
                                      const SpectralVector& x) {
  if (t < 0.0) throw std::invalid_argument("semigroup_apply: t must be >= 0");
  space.check_vector(x);
  SpectralVector y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] = std::exp(-space.eigenvalue(i) * t) * x[i];
  return y;
}

/// (-A)^theta x; theta may be negative since all eigenvalues are positive.
inline SpectralVector fractional_power_apply(const SpectralSpace& space,
                                             double theta,
                                             const SpectralVector& x) {
  space.check_vector(x);
  SpectralVector y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] = std::pow(space.eigenvalue(i), theta) * x[i];
  return y;
}

/// pi_n: truncation of x in space_big onto space_small (shared eigenvalue
/// prefix required).
inline SpectralVector project(const SpectralSpace& space_big,
                              const SpectralSpace& space_small,
                              const SpectralVector& x) {
  if (space_small.dim() > space_big.dim())
    throw std::invalid_argument("project: target space is larger than source");
  space_big.check_vector(x);
  for (std::size_t i = 0; i < space_small.dim(); ++i)
    if (space_small.eigenvalue(i) != space_big.eigenvalue(i))
      throw std::invalid_argument("project: eigenvalue prefixes do not match");
  return SpectralVector(x.begin(), x.begin() + space_small.dim());
}

/// Physical-space rendering of the Laplacian eigenfunctions,
/// e_k(xi) = sqrt(2/pi) sin(k xi).  Only used for output; the dynamics
/// never leave eigen-coordinates.
inline double laplacian_eigenfunction(std::size_t k, double xi) {
  return std::sqrt(2.0 / std::numbers::pi) * std::sin(static_cast<double>(k) * xi);
}

inline double evaluate_on_interval(const SpectralVector& x, double xi) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    s += x[i] * laplacian_eigenfunction(i + 1, xi);
  return s;
}

}  // namespace spdei
