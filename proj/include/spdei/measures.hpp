#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "spdei/spectral.hpp"

namespace spdei {

/// Uniformly weighted sample cloud in spectral coordinates.
struct EmpiricalMeasure {
  std::vector<SpectralVector> atoms;
  std::size_t dimension = 0;

  static EmpiricalMeasure from_ensemble(std::vector<SpectralVector> samples) {
    if (samples.empty())
      throw std::invalid_argument("EmpiricalMeasure: need at least one atom");
    EmpiricalMeasure m;
    m.dimension = samples.front().size();
    for (const auto& a : samples)
      if (a.size() != m.dimension)
        throw std::invalid_argument("EmpiricalMeasure: atom dimension mismatch");
    m.atoms = std::move(samples);
    return m;
  }
};

/// (1/M) sum ||atom||^2.
inline double second_moment(const EmpiricalMeasure& m) {
  if (m.atoms.empty())
    throw std::invalid_argument("second_moment: empty measure");
  double s = 0.0;
  for (const auto& a : m.atoms) s += norm_sq(a);
  return s / static_cast<double>(m.atoms.size());
}

namespace detail {

// Concave piecewise-linear function on [lo, hi], represented by breakpoints
// xs[0..p] and slopes[0..p-1] (strictly decreasing after merging) plus the
// value y_left at xs[0].  Used as the value function of the dynamic program
// below; concavity is preserved by both of its update steps.
struct ConcavePwl {
  std::vector<double> xs;
  std::vector<double> slopes;
  double y_left = 0.0;

  static ConcavePwl linear(double lo, double hi, double slope) {
    ConcavePwl f;
    f.xs = {lo, hi};
    f.slopes = {slope};
    f.y_left = slope * lo;
    return f;
  }

  double max_value() const {
    double y = y_left;
    double best = y;
    for (std::size_t i = 0; i < slopes.size(); ++i) {
      y += slopes[i] * (xs[i + 1] - xs[i]);
      best = std::max(best, y);
    }
    return best;
  }

  // Sliding-window maximum of radius d, then restriction to [-1, 1]:
  // g(v) = max_{|u-v| <= d, u in old domain} f(u).  For a concave f this
  // shifts the increasing part left by d, the decreasing part right by d,
  // and inserts a flat piece of width 2d at the peak.
  void window_and_clip(double d) {
    if (d < 0.0) throw std::logic_error("ConcavePwl: negative window");
    // Peak span [x_lo, x_hi]: slopes > 0 before it, < 0 after it.
    std::size_t i_pos = 0;
    while (i_pos < slopes.size() && slopes[i_pos] > 0.0) ++i_pos;
    std::size_t i_neg = i_pos;
    while (i_neg < slopes.size() && slopes[i_neg] == 0.0) ++i_neg;

    std::vector<double> nx, ns;
    nx.reserve(xs.size() + 2);
    ns.reserve(slopes.size() + 1);
    for (std::size_t i = 0; i < i_pos; ++i) {
      nx.push_back(xs[i] - d);
      ns.push_back(slopes[i]);
    }
    nx.push_back(xs[i_pos] - d);
    ns.push_back(0.0);
    nx.push_back(xs[i_neg] + d);
    for (std::size_t i = i_neg; i < slopes.size(); ++i) {
      ns.push_back(slopes[i]);
      nx.push_back(xs[i + 1] + d);
    }
    double ny = y_left;  // left endpoint value is preserved by the shift
    xs = std::move(nx);
    slopes = std::move(ns);
    y_left = ny;

    // Restrict the domain to [-1, 1] (window widens it, so [-1,1] is inside).
    std::size_t lo = 0;
    while (lo + 1 < xs.size() && xs[lo + 1] <= -1.0) {
      y_left += slopes[lo] * (xs[lo + 1] - xs[lo]);
      ++lo;
    }
    y_left += slopes[lo] * (-1.0 - xs[lo]);
    xs.erase(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(lo));
    slopes.erase(slopes.begin(), slopes.begin() + static_cast<std::ptrdiff_t>(lo));
    xs.front() = -1.0;
    std::size_t hi = xs.size() - 1;
    while (hi > 1 && xs[hi - 1] >= 1.0) --hi;
    xs.resize(hi + 1);
    slopes.resize(hi);
    xs.back() = 1.0;
  }

  // f(v) += c*v, merging breakpoints whose slopes become equal.
  void tilt(double c) {
    y_left += c * xs.front();
    for (auto& s : slopes) s += c;
    std::vector<double> nx{xs.front()}, ns;
    for (std::size_t i = 0; i < slopes.size(); ++i) {
      if (!ns.empty() && ns.back() == slopes[i]) {
        nx.back() = xs[i + 1];
      } else {
        ns.push_back(slopes[i]);
        nx.push_back(xs[i + 1]);
      }
    }
    xs = std::move(nx);
    slopes = std::move(ns);
  }
};

struct WeightedPoint {
  double u;
  double c;
};

// Pooled, sorted, duplicate-merged support with signed weights
// +1/|a| for a-atoms and -1/|b| for b-atoms.
inline std::vector<WeightedPoint> pooled_support(
    const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("dL_distance_1d: empty sample list");
  std::vector<WeightedPoint> pts;
  pts.reserve(a.size() + b.size());
  const double wa = 1.0 / static_cast<double>(a.size());
  const double wb = 1.0 / static_cast<double>(b.size());
  for (double v : a) pts.push_back({v, wa});
  for (double v : b) pts.push_back({v, -wb});
  std::sort(pts.begin(), pts.end(),
            [](const WeightedPoint& p, const WeightedPoint& q) { return p.u < q.u; });
  std::vector<WeightedPoint> merged;
  for (const auto& p : pts) {
    if (!merged.empty() && merged.back().u == p.u)
      merged.back().c += p.c;
    else
      merged.push_back(p);
  }
  return merged;
}

}  // namespace detail

/// Exact bounded-Lipschitz distance between two 1-D empirical measures:
/// the supremum of sum_i c_i f(u_i) over f with |f| <= 1 and
/// |f(u) - f(v)| <= |u - v|.  On the sorted pooled support only adjacent
/// Lipschitz constraints bind, and the maximisation is solved exactly by a
/// right-to-left dynamic program whose value function
///   V_i(f_i) = c_i f_i + max_{|f_{i+1} - f_i| <= u_{i+1} - u_i} V_{i+1}(f_{i+1})
/// stays concave piecewise-linear throughout.
inline double dL_distance_1d(const std::vector<double>& samples_a,
                             const std::vector<double>& samples_b) {
  const auto pts = detail::pooled_support(samples_a, samples_b);
  const std::size_t m = pts.size();
  auto v = detail::ConcavePwl::linear(-1.0, 1.0, pts[m - 1].c);
  for (std::size_t i = m - 1; i-- > 0;) {
    v.window_and_clip(pts[i + 1].u - pts[i].u);
    v.tilt(pts[i].c);
  }
  return std::max(v.max_value(), 0.0);
}

/// Sliced lower-bound estimator of d_L in n dimensions: the maximum of the
/// exact 1-D distance over random unit directions.  Each sliced test function
/// lifts to a valid bounded-Lipschitz function on H_n, so the estimate never
/// exceeds the true distance (and never exceeds 2).
inline double dL_distance_sliced(const EmpiricalMeasure& a,
                                 const EmpiricalMeasure& b,
                                 std::size_t directions, std::uint64_t rng_seed) {
  if (a.dimension != b.dimension)
    throw std::invalid_argument("dL_distance_sliced: dimension mismatch");
  if (directions == 0)
    throw std::invalid_argument("dL_distance_sliced: directions >= 1");
  const std::size_t n = a.dimension;
  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> dir(n), pa(a.atoms.size()), pb(b.atoms.size());
  double best = 0.0;
  for (std::size_t d = 0; d < directions; ++d) {
    double nrm2 = 0.0;
    for (auto& v : dir) {
      v = gauss(rng);
      nrm2 += v * v;
    }
    const double inv = 1.0 / std::sqrt(nrm2);
    for (auto& v : dir) v *= inv;
    for (std::size_t i = 0; i < a.atoms.size(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += dir[j] * a.atoms[i][j];
      pa[i] = s;
    }
    for (std::size_t i = 0; i < b.atoms.size(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += dir[j] * b.atoms[i][j];
      pb[i] = s;
    }
    best = std::max(best, dL_distance_1d(pa, pb));
  }
  return best;
}

/// Cauchy-style convergence diagnostic: sliced distance between the empirical
/// laws of the same run at two horizons.
inline double stationarity_gap(const EmpiricalMeasure& at_k,
                               const EmpiricalMeasure& at_k_plus_j,
                               std::size_t directions, std::uint64_t rng_seed) {
  return dL_distance_sliced(at_k, at_k_plus_j, directions, rng_seed);
}

}  // namespace spdei
