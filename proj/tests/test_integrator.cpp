#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "spdei/integrator.hpp"
#include "spdei/linear_oracle.hpp"
#include "spdei/model.hpp"
#include "spdei/noise.hpp"

using namespace spdei;

namespace {

// n-mode model with zero drift and unit additive gains.
ModelSpec drift_free_model(std::size_t n, double sigma0 = 1.0) {
  ModelSpec m{laplacian_space(n), {}, {}, 0.0, 0.0};
  m.drift.kind = DriftKind::custom;
  m.drift.L1 = 0.0;
  m.drift.evaluator = [n](const SpectralVector&) {
    return SpectralVector(n, 0.0);
  };
  m.diffusion.sigma0_gains.assign(n, sigma0);
  m.diffusion.theta1 = 0.2;
  m.diffusion.delta1 = 1.0;
  m.diffusion.theta2 = 0.4;
  m.diffusion.delta2 = 1.0;
  m.validate();
  return m;
}

ModelSpec linear_model(std::size_t n, double c) {
  return make_linear_diagonal_model(laplacian_space(n), c,
                                    std::vector<double>(n, 1.0), 0.2, 1.0, 0.4,
                                    1.0);
}

}  // namespace

TEST_CASE("ei_step one-step arithmetic") {
  const auto m = drift_free_model(1);
  const auto y = ei_step(m, {1.0}, {0.2}, 0.5);
  CHECK(y[0] == Catch::Approx(std::exp(-0.5) * 1.2).epsilon(1e-12));
  CHECK(y[0] == Catch::Approx(0.7278370).margin(1e-7));

  // dw = 0: pure semigroup decay.
  const auto m3 = drift_free_model(3);
  const auto z = ei_step(m3, {1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}, 0.25);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(z[i] == Catch::Approx(std::exp(-m3.space.eigenvalue(i) * 0.25)));

  CHECK_THROWS_AS(ei_step(m3, {1.0}, {0.0, 0.0, 0.0}, 0.1),
                  std::invalid_argument);
}

TEST_CASE("zero is a fixed point when all coefficients vanish at 0") {
  const auto m = drift_free_model(2, 0.0);
  const NoiseStream stream(1, 0, 0.125, 2);
  const auto traj = simulate(m, {0.125, 64, 1}, {0.0, 0.0}, stream);
  for (const auto& s : traj.states) {
    CHECK(s[0] == 0.0);
    CHECK(s[1] == 0.0);
  }
}

TEST_CASE("simulate with zero steps returns the start") {
  const auto m = drift_free_model(2);
  const NoiseStream stream(1, 0, 0.125, 2);
  const auto traj = simulate(m, {0.125, 0, 1}, {0.5, -0.5}, stream);
  REQUIRE(traj.states.size() == 1);
  CHECK(traj.states[0] == SpectralVector{0.5, -0.5});
}

TEST_CASE("simulate is deterministic in (seed, path_id)") {
  const auto m = linear_model(3, 1.0);
  const SpectralVector x0{1.0, 0.5, -0.25};
  const NoiseStream s1(42, 7, 0.0625, 3), s2(42, 7, 0.0625, 3);
  const auto a = simulate(m, {0.0625, 32, 4}, x0, s1);
  const auto b = simulate(m, {0.0625, 32, 4}, x0, s2);
  REQUIRE(a.states.size() == b.states.size());
  for (std::size_t j = 0; j < a.states.size(); ++j)
    CHECK(a.states[j] == b.states[j]);
}

TEST_CASE("scheme params are validated") {
  const auto m = drift_free_model(1);
  const NoiseStream s(1, 0, 0.5, 1);
  CHECK_THROWS_AS(simulate(m, {1.5, 4, 1}, {0.0}, s), std::invalid_argument);
  CHECK_THROWS_AS(simulate(m, {0.0, 4, 1}, {0.0}, s), std::invalid_argument);
  CHECK_THROWS_AS(simulate(m, {0.5, 4, 0}, {0.0}, s), std::invalid_argument);
}

TEST_CASE("Monte Carlo endpoint law matches the scalar recursion") {
  // Drift-free scalar mode: y_{k+1} = e^{-dt}(y_k + dW), x0 = 1.
  const auto m = drift_free_model(1);
  const double dt = 0.25;
  const std::uint64_t K = 16;
  const std::size_t M = 100000;
  double sum = 0.0, sum2 = 0.0;
  SchemeParams params{dt, K, K};
  for (std::size_t i = 0; i < M; ++i) {
    const NoiseStream stream(555, static_cast<std::int64_t>(i), dt, 1);
    const auto traj = simulate(m, params, {1.0}, stream);
    const double v = traj.states.back()[0];
    sum += v;
    sum2 += v * v;
  }
  const auto mm = static_cast<double>(M);
  const double emp_mean = sum / mm;
  const double emp_var = sum2 / mm - emp_mean * emp_mean;

  // Independent recursion: mean_{k+1} = a mean_k, var_{k+1} = a^2 (var_k + dt).
  const double a = std::exp(-dt);
  double mean = 1.0, var = 0.0;
  for (std::uint64_t k = 0; k < K; ++k) {
    mean *= a;
    var = a * a * (var + dt);
  }
  CHECK(std::abs(emp_mean - mean) <= 3.0 * std::sqrt(var / mm));
  CHECK(std::abs(emp_var - var) <= 3.0 * var * std::sqrt(2.0 / (mm - 1.0)));

  // The closed-form helpers agree with the recursion (c = 0 model).
  CHECK(linear_oracle::scheme_mean(1.0, 0.0, dt, K, 1.0) ==
        Catch::Approx(mean).epsilon(1e-12));
  CHECK(linear_oracle::scheme_variance(1.0, 0.0, 1.0, dt, K) ==
        Catch::Approx(var).epsilon(1e-12));
}

TEST_CASE("coupled pair: collapse, determinism of the difference") {
  const auto m = linear_model(2, 0.5);
  const SpectralVector x0{1.0, -1.0};
  const NoiseStream s(9, 0, 0.125, 2);
  SchemeParams params{0.125, 40, 4};

  // Same start: identically zero difference.
  const auto [a0, b0] = simulate_coupled_pair(m, params, x0, x0, s);
  for (std::size_t j = 0; j < a0.states.size(); ++j)
    CHECK(a0.states[j] == b0.states[j]);

  // Additive noise: the difference is deterministic across seeds and decays
  // mode-by-mode with factor r_i = e^{-lambda_i dt}(1 - c dt).
  const SpectralVector y0{-1.0, 0.5};
  const auto [a1, b1] = simulate_coupled_pair(m, params, x0, y0, s);
  const NoiseStream s_other(1234, 5, 0.125, 2);
  const auto [a2, b2] = simulate_coupled_pair(m, params, x0, y0, s_other);
  for (std::size_t j = 0; j < a1.states.size(); ++j) {
    const auto k = a1.grid_indices[j];
    for (std::size_t i = 0; i < 2; ++i) {
      const double d1 = a1.states[j][i] - b1.states[j][i];
      const double d2 = a2.states[j][i] - b2.states[j][i];
      const double expected =
          std::pow(linear_oracle::scheme_factor(m.space.eigenvalue(i), 0.5,
                                                params.dt),
                   static_cast<double>(k)) *
          (x0[i] - y0[i]);
      CHECK(d1 == Catch::Approx(expected).epsilon(1e-12).margin(1e-15));
      CHECK(d2 == Catch::Approx(expected).epsilon(1e-12).margin(1e-15));
    }
  }
}

TEST_CASE("continuous interpolant coincides with the scheme at gridpoints") {
  const auto m = make_nemytskii_model(laplacian_space(3), 1.0, 0.4, 0.3,
                                      {1.0, 0.8, 0.6}, 0.2, 1.0, 0.4, 1.0);
  const SpectralVector x0{0.7, -0.2, 0.1};
  SchemeParams params{0.03125, 100, 10};
  const NoiseStream s(2718, 1, 0.03125, 3);
  const auto discrete = simulate(m, params, x0, s);
  const auto interp = continuous_interpolant_at_grid(m, params, x0, s);
  REQUIRE(discrete.states.size() == interp.states.size());
  for (std::size_t j = 0; j < discrete.states.size(); ++j)
    for (std::size_t i = 0; i < 3; ++i)
      CHECK(interp.states[j][i] ==
            Catch::Approx(discrete.states[j][i]).epsilon(1e-12).margin(1e-13));
}

TEST_CASE("interpolant reduces to one ei_step at K=1") {
  const auto m = linear_model(2, 1.0);
  const SpectralVector x0{1.0, 2.0};
  const NoiseStream s(3, 0, 0.25, 2);
  const auto interp = continuous_interpolant_at_grid(m, {0.25, 1, 1}, x0, s);
  const auto one = ei_step(m, x0, s.coupled_vector_increment(2, 0, 0.25), 0.25);
  for (std::size_t i = 0; i < 2; ++i)
    CHECK(interp.states[1][i] == Catch::Approx(one[i]).epsilon(1e-14));
}

TEST_CASE("interpolant with zero noise and zero drift is the semigroup flow") {
  const auto m = drift_free_model(2, 0.0);
  const SpectralVector x0{1.0, -2.0};
  SchemeParams params{0.125, 8, 1};
  const NoiseStream s(1, 0, 0.125, 2);
  const auto traj = continuous_interpolant_at_grid(m, params, x0, s);
  for (std::size_t j = 0; j < traj.states.size(); ++j) {
    const double t = traj.time_at(j);
    for (std::size_t i = 0; i < 2; ++i)
      CHECK(traj.states[j][i] ==
            Catch::Approx(std::exp(-m.space.eigenvalue(i) * t) * x0[i])
                .epsilon(1e-12));
  }
}

TEST_CASE("admissible stepsizes give |r| < 1 on the linear model") {
  const auto m = linear_model(4, 1.0);
  const auto constants = compute_constants(m);
  const double dt = 0.5 * std::min(constants.stepsize_bound_p1,
                                   constants.stepsize_bound_p2);
  REQUIRE(constants.admissible(dt));
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(std::abs(linear_oracle::scheme_factor(m.space.eigenvalue(i), 1.0,
                                                dt)) < 1.0);
}
