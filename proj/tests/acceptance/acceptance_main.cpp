// End-to-end acceptance suite.  Each numbered check prints one PASS/FAIL
// line; the process exit code is the number of failures.  Expects:
//   argv[1] = path to the spdei CLI binary
//   argv[2] = path to the bundled configs directory

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "spdei/experiments.hpp"
#include "spdei/integrator.hpp"
#include "spdei/linear_oracle.hpp"
#include "spdei/measures.hpp"
#include "spdei/model.hpp"
#include "spdei/noise.hpp"
#include "support/simplex_lp.hpp"

using namespace spdei;

namespace {

std::string g_cli;
std::string g_configs;
int g_failures = 0;

void report(int number, bool ok, const std::string& what,
            const std::string& detail = "") {
  std::cout << "criterion " << number << ": " << (ok ? "PASS" : "FAIL")
            << " - " << what;
  if (!detail.empty()) std::cout << " (" << detail << ")";
  std::cout << std::endl;
  if (!ok) ++g_failures;
}

void run_criterion(int number, const std::string& what,
                   const std::function<std::pair<bool, std::string>()>& fn) {
  const auto start = std::chrono::steady_clock::now();
  bool ok = false;
  std::string detail;
  try {
    std::tie(ok, detail) = fn();
  } catch (const std::exception& e) {
    ok = false;
    detail = std::string("exception: ") + e.what();
  }
  const auto secs = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - start)
                        .count();
  std::ostringstream d;
  d << detail << (detail.empty() ? "" : ", ") << std::fixed;
  d.precision(1);
  d << secs << "s";
  report(number, ok, what, d.str());
}

// Brute-force sum_{k=1}^{1e7} k^p plus the Euler-Maclaurin tail
// (integral + endpoint + first derivative correction), accurate to ~1e-15.
double brute_power_sum(double p) {
  const double N = 10000000.0;
  double s = 0.0;
  for (std::size_t k = 10000000; k >= 1; --k)
    s += std::pow(static_cast<double>(k), p);
  s += std::pow(N, p + 1.0) / (-p - 1.0) - 0.5 * std::pow(N, p) -
       p * std::pow(N, p - 1.0) / 12.0;
  return s;
}

bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({std::abs(a), std::abs(b), 1e-300});
}

// --------------------------------------------------------------------------
// 1. Constants against an independent hand evaluation
// --------------------------------------------------------------------------
std::pair<bool, std::string> criterion1() {
  const auto setup = ExperimentSetup(
      Config::parse_file(g_configs + "/laplacian_n16.cfg"), 1, 1, "");
  if (!setup.constants) return {false, "constants unavailable"};
  const auto& r = *setup.constants;

  // Hand arithmetic, written out from scratch: n = 16, alpha = 1, c = 1,
  // L1 = 1, L2 = 0, gamma = 2, mu = 0, theta1 = 0.2, theta2 = 0.4.
  const double sum_12 = brute_power_sum(-1.2);  // both series need k^-1.2
  const double delta1_hand = 0.5 * sum_12;
  const double delta2_hand = std::pow(2.0, 0.4 - 1.0) * sum_12;
  const double lam_n = 256.0;
  const double Lbar_hand = 2.0 * std::max(1.0 * 1.0 + 0.0 * 0.0, 0.0);
  const double beta1_hand =
      3.0 * std::max(lam_n * lam_n + 2.0 * Lbar_hand,
                     2.0 * Lbar_hand * (1.0 + 1.0 * delta1_hand));
  const double q1 = std::abs(14.0 * 1.0 - 2.0);
  const double rho1_hand =
      2.0 + (q1 * q1 / 64.0 + 2.0 * Lbar_hand + q1 / 8.0) * beta1_hand +
      2.0 * (1.0 + beta1_hand + lam_n * lam_n * Lbar_hand);
  const double q2 = std::abs(2.0 * 1.0 - 2.0);
  const double rho2_hand = 6.0 * (lam_n * lam_n + Lbar_hand) * (q2 + 1.0) +
                           3.0 + 7.0 * Lbar_hand + lam_n * lam_n * Lbar_hand +
                           6.0 * lam_n * lam_n;
  const double tau_hand = 1.0 / 1.0 + 0.0 / std::sqrt(2.0);

  const double tol = 1e-10;
  const bool ok = close_rel(r.Lbar, Lbar_hand, tol) &&
                  close_rel(r.beta1, beta1_hand, tol) &&
                  close_rel(r.rho1, rho1_hand, tol) &&
                  close_rel(r.rho2, rho2_hand, tol) &&
                  close_rel(r.tau, tau_hand, tol) &&
                  close_rel(r.delta1, delta1_hand, tol) &&
                  close_rel(r.delta2, delta2_hand, tol);
  std::ostringstream d;
  d << "beta1=" << r.beta1 << " rho1=" << r.rho1 << " rho2=" << r.rho2;
  return {ok, d.str()};
}

// --------------------------------------------------------------------------
// 2. Series values against 1e7-term brute-force sums
// --------------------------------------------------------------------------
std::pair<bool, std::string> criterion2() {
  const double d1 = delta1_series(0.1, 1e-10);
  const double d1_brute = 0.5 * brute_power_sum(2.0 * (2.0 * 0.1 - 1.0));
  const double d2 = delta2_series(0.25, 1e-10);
  const double d2_brute =
      std::pow(2.0, 0.25 - 1.0) * brute_power_sum(-2.0 * (1.0 - 0.25));
  const bool ok =
      std::abs(d1 - d1_brute) <= 1e-8 && std::abs(d2 - d2_brute) <= 1e-8;
  std::ostringstream d;
  d << "delta1=" << d1 << " vs " << d1_brute << ", delta2=" << d2 << " vs "
    << d2_brute;
  return {ok, d.str()};
}

// --------------------------------------------------------------------------
// 3. Linear endpoint law vs the per-mode recursion, M = 1e5
// --------------------------------------------------------------------------
std::pair<bool, std::string> criterion3() {
  const auto cfg = Config::parse_file(g_configs + "/linear_n8.cfg");
  const auto model = build_model(cfg);
  const std::size_t n = model.space.dim();
  const double dt = 0.015625;
  const std::uint64_t K = 2048;
  const std::size_t M = 100000;
  SpectralVector x0(n, 0.0);
  x0[0] = 2.0;

  const auto decay = spdei::detail::semigroup_factors(model.space, dt);
  std::vector<double> sum(n, 0.0), sum2(n, 0.0);
  SpectralVector y, dw, b_buf;
  std::vector<double> s1_buf;
  for (std::size_t i = 0; i < M; ++i) {
    const NoiseStream stream(424242, static_cast<std::int64_t>(i), dt, n);
    y = x0;
    for (std::uint64_t k = 0; k < K; ++k) {
      stream.coupled_vector_increment_into(n, k, dt, dw);
      spdei::detail::ei_step_inplace(model, decay, y, dw, dt, b_buf, s1_buf);
    }
    for (std::size_t j = 0; j < n; ++j) {
      sum[j] += y[j];
      sum2[j] += y[j] * y[j];
    }
  }

  bool ok = true;
  std::ostringstream d;
  const auto m = static_cast<double>(M);
  for (std::size_t j = 0; j < n; ++j) {
    // Independent recursion oracle: mean_{k+1} = r mean_k,
    // var_{k+1} = r^2 var_k + e^{-2 lambda dt} dt, r = e^{-lambda dt}(1-dt).
    const double lam = static_cast<double>((j + 1) * (j + 1));
    const double r = std::exp(-lam * dt) * (1.0 - dt);
    double mean = x0[j], var = 0.0;
    for (std::uint64_t k = 0; k < K; ++k) {
      mean *= r;
      var = r * r * var + std::exp(-2.0 * lam * dt) * dt;
    }
    const double emp_mean = sum[j] / m;
    const double emp_var = sum2[j] / m - emp_mean * emp_mean;
    const bool mean_ok = std::abs(emp_mean - mean) <= 4.0 * std::sqrt(var / m);
    const bool var_ok =
        std::abs(emp_var - var) <= 4.0 * var * std::sqrt(2.0 / (m - 1.0));
    if (!(mean_ok && var_ok)) {
      ok = false;
      d << "mode " << (j + 1) << (mean_ok ? " var" : " mean") << " off; ";
    }
  }
  if (ok) d << "all 8 modes within 4 SE";
  return {ok, d.str()};
}

// --------------------------------------------------------------------------
// 4. (P1) statistics on the linear model
// --------------------------------------------------------------------------
std::pair<bool, std::string> criterion4() {
  const auto setup = ExperimentSetup(
      Config::parse_file(g_configs + "/linear_n8.cfg"), 20260823, 1, "");
  const auto rep = run_p1(setup);
  const bool slope_ok = rep.at("checks").at("trailing_slope_ok");
  const bool sup_ok = rep.at("checks").at("sup_ok");
  const bool oracle_ok = rep.at("checks").at("oracle_sup_ok");
  std::ostringstream d;
  d << "sup=" << rep.at("sup_m2").get<double>()
    << " oracle=" << rep.at("sup_m2_oracle").get<double>()
    << " label=" << rep.at("label").get<std::string>();
  return {slope_ok && sup_ok && oracle_ok, d.str()};
}

// --------------------------------------------------------------------------
// 5. (P2): exact deterministic decay, then multiplicative-noise decay
// --------------------------------------------------------------------------
std::pair<bool, std::string> criterion5() {
  const auto lin_setup = ExperimentSetup(
      Config::parse_file(g_configs + "/p2_linear.cfg"), 20260823, 1, "");
  const auto lin = run_p2(lin_setup);
  const double rel = lin.at("max_relative_error_vs_oracle").get<double>();
  const bool lin_ok = lin.at("deterministic_oracle") == true && rel < 1e-12;

  const auto mult_setup = ExperimentSetup(
      Config::parse_file(g_configs + "/p2_multiplicative.cfg"), 20260823, 1, "");
  const auto mult = run_p2(mult_setup);
  const bool mult_ok = mult.at("checks").at("decayed_below_1e3") == true &&
                       mult.at("checks").at("rate_positive") == true;

  std::ostringstream d;
  d << "deterministic rel err=" << rel
    << ", multiplicative final/initial="
    << mult.at("final_m2").get<double>() / mult.at("initial_m2").get<double>();
  return {lin_ok && mult_ok, d.str()};
}

// --------------------------------------------------------------------------
// 6./7. Strong-error rate fits (exact Gaussian computation, no Monte Carlo)
// --------------------------------------------------------------------------
nlohmann::json g_rate_report;

std::pair<bool, std::string> criterion6() {
  const auto setup = ExperimentSetup(
      Config::parse_file(g_configs + "/rate_powerlaw.cfg"), 1, 1, "");
  g_rate_report = run_strong_error(setup);
  const double slope =
      g_rate_report.at("temporal").at("fit").at("slope").get<double>();
  std::ostringstream d;
  d << "temporal slope=" << slope << ", window [0.14, 0.34]";
  return {slope >= 0.14 && slope <= 0.34, d.str()};
}

std::pair<bool, std::string> criterion7() {
  const double slope =
      g_rate_report.at("spatial").at("fit").at("slope").get<double>();
  std::ostringstream d;
  d << "spatial slope=" << slope << ", window [-0.34, -0.14]";
  return {slope >= -0.34 && slope <= -0.14, d.str()};
}

// --------------------------------------------------------------------------
// 8. Metric correctness: point masses, LP cross-check, metric axioms
// --------------------------------------------------------------------------
std::pair<bool, std::string> criterion8() {
  std::mt19937_64 rng(2026);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  bool ok = true;
  std::ostringstream d;

  for (int rep = 0; rep < 500 && ok; ++rep) {
    const double a = u(rng), b = u(rng);
    if (std::abs(dL_distance_1d({a}, {b}) - std::min(std::abs(a - b), 2.0)) >
        1e-9)
      ok = false;
  }
  if (!ok) return {false, "point-mass formula violated"};

  std::uniform_int_distribution<std::size_t> len(1, 50);
  std::normal_distribution<double> gauss(0.0, 1.3);
  auto draw = [&]() {
    std::vector<double> s(len(rng));
    for (auto& v : s) v = gauss(rng);
    return s;
  };
  double max_gap = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const auto a = draw();
    const auto b = draw();
    const double fast = dL_distance_1d(a, b);
    const double lp = test_support::dl_distance_1d_lp(a, b);
    max_gap = std::max(max_gap, std::abs(fast - lp));
  }
  if (max_gap > 1e-9) return {false, "LP cross-check gap " + std::to_string(max_gap)};

  for (int rep = 0; rep < 100; ++rep) {
    const auto a = draw();
    const auto b = draw();
    const auto c = draw();
    const double dab = dL_distance_1d(a, b);
    if (std::abs(dab - dL_distance_1d(b, a)) > 1e-12 ||
        dL_distance_1d(a, c) > dab + dL_distance_1d(b, c) + 1e-12 ||
        dL_distance_1d(a, a) > 1e-12)
      return {false, "metric axiom violated"};
  }
  d << "LP max gap=" << max_gap;
  return {true, d.str()};
}

// --------------------------------------------------------------------------
// 9. Weak-limit ladder with exact-law anchor
// --------------------------------------------------------------------------
std::pair<bool, std::string> criterion9() {
  const auto setup = ExperimentSetup(
      Config::parse_file(g_configs + "/weak_limit.cfg"), 20260823, 1, "");
  const auto rep = run_weak_limit(setup);
  const double gap = rep.at("final_gap").get<double>();
  const double floor = rep.at("noise_floor").get<double>();
  const bool non_inc = rep.at("checks").at("non_increasing");
  std::ostringstream d;
  d << "final gap=" << gap << " vs 2x floor=" << 2.0 * floor;
  return {gap <= 2.0 * floor && non_inc, d.str()};
}

// --------------------------------------------------------------------------
// 10. Byte-identical CSV outputs for identical config and seed
// --------------------------------------------------------------------------
std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing output file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::pair<bool, std::string> criterion10() {
  const std::string out_a = "acceptance_run_a", out_b = "acceptance_run_b";
  for (const auto& dir : {out_a, out_b}) {
    const std::string cmd_sim = "\"" + g_cli + "\" simulate --config \"" +
                                g_configs + "/linear_n8.cfg\" --seed 777 "
                                "--out-dir " + dir + " > /dev/null";
    const std::string cmd_p2 = "\"" + g_cli + "\" p2 --config \"" + g_configs +
                               "/p2_linear.cfg\" --seed 777 --out-dir " + dir +
                               " > /dev/null 2>&1";
    if (std::system(cmd_sim.c_str()) != 0)
      return {false, "simulate subcommand failed"};
    const int p2_rc = std::system(cmd_p2.c_str());
    if (p2_rc != 0 && (p2_rc >> 8) != 2)  // 2 = out-of-theory label, still OK
      return {false, "p2 subcommand failed"};
  }
  const bool traj_ok =
      slurp(out_a + "/trajectory.csv") == slurp(out_b + "/trajectory.csv");
  const bool curve_ok =
      slurp(out_a + "/p2_curve.csv") == slurp(out_b + "/p2_curve.csv");
  const bool report_ok =
      slurp(out_a + "/p2_report.json") == slurp(out_b + "/p2_report.json");
  std::ostringstream d;
  d << "trajectory=" << traj_ok << " p2_curve=" << curve_ok << " p2_report="
    << report_ok;
  return {traj_ok && curve_ok && report_ok, d.str()};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: acceptance <spdei-cli-path> <configs-dir>\n";
    return 64;
  }
  g_cli = argv[1];
  g_configs = argv[2];

  run_criterion(1, "derived constants match hand evaluation to 1e-10",
                criterion1);
  run_criterion(2, "series match 1e7-term brute-force sums to 1e-8",
                criterion2);
  run_criterion(3, "linear endpoint law matches recursion within 4 SE",
                criterion3);
  run_criterion(4, "second-moment boundedness statistics (P1)", criterion4);
  run_criterion(5, "two-point contraction (P2), exact and multiplicative",
                criterion5);
  run_criterion(6, "temporal strong rate slope in [0.14, 0.34]", criterion6);
  run_criterion(7, "spatial strong rate slope in [-0.34, -0.14]", criterion7);
  run_criterion(8, "bounded-Lipschitz metric: point masses, LP, axioms",
                criterion8);
  run_criterion(9, "weak-limit ladder gap below 2x noise floor", criterion9);
  run_criterion(10, "byte-identical outputs for identical config and seed",
                criterion10);

  std::cout << (g_failures == 0 ? "ALL CRITERIA PASSED"
                                : std::to_string(g_failures) + " CRITERIA FAILED")
            << std::endl;
  return g_failures;
}
