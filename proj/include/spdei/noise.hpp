#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

#include "spdei/spectral.hpp"

namespace spdei {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_key(std::uint64_t seed, std::uint64_t path,
                             std::uint64_t mode, std::uint64_t index,
                             std::uint64_t word) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ path);
  h = splitmix64(h ^ mode);
  h = splitmix64(h ^ index);
  h = splitmix64(h ^ word);
  return h;
}

// Uniform in the open interval (0,1): 53 significant bits shifted by 1/2 ulp.
inline double to_unit(std::uint64_t h) {
  return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace detail

/// Cylindrical Wiener increments in spectral coordinates.  Every base
/// increment is a pure function of (seed, path_id, mode, base index), so
/// replays are exact and trajectories at different stepsizes or truncation
/// dimensions see the same underlying Brownian path.
class NoiseStream {
 public:
  NoiseStream(std::uint64_t seed, std::int64_t path_id, double base_dt,
              std::size_t max_modes)
      : seed_(seed), path_id_(path_id), base_dt_(base_dt),
        max_modes_(max_modes) {
    if (!(base_dt > 0.0))
      throw std::invalid_argument("NoiseStream: base_dt must be positive");
    if (max_modes == 0)
      throw std::invalid_argument("NoiseStream: max_modes must be >= 1");
  }

  std::uint64_t seed() const { return seed_; }
  std::int64_t path_id() const { return path_id_; }
  double base_dt() const { return base_dt_; }
  std::size_t max_modes() const { return max_modes_; }

  /// N(0, base_dt) increment for 1-based mode k over base interval j.
  double base_increment(std::size_t mode, std::uint64_t base_index) const {
    if (mode == 0 || mode > max_modes_)
      throw std::invalid_argument("NoiseStream: mode out of range");
    const std::uint64_t h1 = detail::mix_key(seed_, static_cast<std::uint64_t>(path_id_),
                                             mode, base_index, 0);
    const std::uint64_t h2 = detail::mix_key(seed_, static_cast<std::uint64_t>(path_id_),
                                             mode, base_index, 1);
    const double u1 = detail::to_unit(h1);
    const double u2 = detail::to_unit(h2);
    const double z = std::sqrt(-2.0 * std::log(u1)) *
                     std::cos(2.0 * std::numbers::pi * u2);
    return std::sqrt(base_dt_) * z;
  }

  /// Number of base intervals per step of size dt; rejects unaligned dt.
  std::uint64_t ratio(double dt) const {
    if (!(dt > 0.0)) throw std::invalid_argument("NoiseStream: dt must be positive");
    const double q = dt / base_dt_;
    const auto m = static_cast<std::uint64_t>(std::llround(q));
    if (m == 0 || std::abs(q - static_cast<double>(m)) > 1e-9 * q)
      throw std::invalid_argument(
          "NoiseStream: dt is not an integer multiple of base_dt");
    return m;
  }

  /// W_k((j+1)dt) - W_k(j dt) for grid index j at stepsize dt.
  double increment(std::size_t mode, std::uint64_t grid_index, double dt) const {
    const std::uint64_t m = ratio(dt);
    double s = 0.0;
    for (std::uint64_t j = grid_index * m; j < (grid_index + 1) * m; ++j)
      s += base_increment(mode, j);
    return s;
  }

  /// Increments for modes 1..n; the result for n' < n is exactly the
  /// coordinate prefix of the result for n.
  void coupled_vector_increment_into(std::size_t n, std::uint64_t grid_index,
                                     double dt, SpectralVector& w) const {
    if (n > max_modes_)
      throw std::invalid_argument("NoiseStream: n exceeds max_modes");
    const std::uint64_t m = ratio(dt);
    w.assign(n, 0.0);
    for (std::uint64_t j = grid_index * m; j < (grid_index + 1) * m; ++j)
      for (std::size_t k = 0; k < n; ++k)
        w[k] += base_increment(k + 1, j);
  }

  SpectralVector coupled_vector_increment(std::size_t n,
                                          std::uint64_t grid_index,
                                          double dt) const {
    SpectralVector w;
    coupled_vector_increment_into(n, grid_index, dt, w);
    return w;
  }

 private:
  std::uint64_t seed_;
  std::int64_t path_id_;
  double base_dt_;
  std::size_t max_modes_;
};

}  // namespace spdei
