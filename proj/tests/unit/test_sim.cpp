#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "dlf/sim/ode.hpp"
#include "dlf/sim/systems.hpp"

using namespace dlf::sim;

namespace {

MultiFreqSignal constant(double c) {
  MultiFreqSignal s;
  s.offset = c;
  return s;
}

double cstr_root(const CstrParams& p, double c_in) {
  // k C^2 + F/V C - F/V C_in = 0, positive root
  const double a = p.k, b = p.F_over_V, c = -p.F_over_V * c_in;
  return (-b + std::sqrt(b * b - 4 * a * c)) / (2 * a);
}

double rms(const std::vector<double>& a) {
  double s = 0;
  for (double x : a) s += x * x;
  return std::sqrt(s / a.size());
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("multifreq evaluation") {
  MultiFreqSignal s = constant(3.0);
  CHECK(multifreq(s, 12.3) == 3.0);
  s.terms.push_back({1.0, 0.0, 4.0});
  CHECK(s(1.0) == doctest::Approx(4.0).epsilon(1e-15));

  auto cin = MultiFreqSignal::seeded(2.0, 0.15, {500, 750, 1000, 1500, 2000, 3000}, 7);
  REQUIRE(cin.terms.size() == 6);
  for (std::size_t n = 0; n < 6; ++n) {
    CHECK(std::abs(cin.terms[n].a) <= 0.15 / (n + 1));
    CHECK(std::abs(cin.terms[n].b) <= 0.15 / (n + 1));
  }
  CHECK(cin.lower_bound() > 0.0);
  for (double t : {0.0, 17.5, 123.4, 999.0}) CHECK(std::abs(cin(t) - cin(t + 6000.0)) < 1e-12);
  CHECK_THROWS(MultiFreqSignal::seeded(0.01, 1.0, {10, 20}, 1));

  auto again = MultiFreqSignal::seeded(2.0, 0.15, {500, 750, 1000, 1500, 2000, 3000}, 7);
  CHECK(again(42.0) == cin(42.0));
}

TEST_CASE("dopri5 against exponential and harmonic oscillator") {
  Dopri5 solver;
  std::vector<double> y{1.0};
  Rhs decay = [](double, const std::vector<double>& x, std::vector<double>& dx) { dx[0] = -x[0]; };
  solver.integrate(decay, 0.0, 3.0, y);
  CHECK(std::abs(y[0] - std::exp(-3.0)) < 1e-9);

  std::vector<double> z{1.0, 0.0};
  Rhs osc = [](double, const std::vector<double>& x, std::vector<double>& dx) {
    dx[0] = x[1];
    dx[1] = -x[0];
  };
  Dopri5 s2;
  s2.integrate(osc, 0.0, 10.0, z);
  CHECK(std::abs(z[0] - std::cos(10.0)) < 1e-8);
  CHECK(std::abs(z[1] + std::sin(10.0)) < 1e-8);
}

TEST_CASE("cstr steady state matches quadratic root") {
  CstrParams p;
  for (double c_in : {2.0, 1.0}) {
    auto ds = simulate_cstr(constant(c_in), p, 200, 1.0);
    CHECK(ds.output("C").back() == doctest::Approx(cstr_root(p, c_in)).epsilon(1e-9));
  }
  CHECK(cstr_root(p, 2.0) == doctest::Approx(0.848386).epsilon(1e-6));
  CHECK(cstr_root(p, 1.0) == doctest::Approx(0.537592).epsilon(1e-6));
}

TEST_CASE("cstr linear decay without reaction") {
  CstrParams p;
  p.k = 0.0;
  auto ds = simulate_cstr(constant(0.0), p, 50, 1.0);
  CHECK(ds.rows() == 50);
  CHECK(ds.output("C")[0] == 1.05);
  double worst = 0.0;
  for (std::size_t r = 0; r < ds.rows(); ++r)
    worst = std::max(worst, std::abs(ds.output("C")[r] - 1.05 * std::exp(-0.2 * ds.times[r])));
  CHECK(worst < 1e-8);
}

TEST_CASE("cstr zero-amplitude signal monotone after transient") {
  auto ds = simulate_cstr(constant(2.0), CstrParams{}, 100, 1.0);
  const auto& c = ds.output("C");
  for (std::size_t r = 1; r < c.size(); ++r) CHECK(c[r] <= c[r - 1] + 1e-12);
}

TEST_CASE("cstr adaptive integrator matches fixed-step RK4") {
  CstrParams p;
  auto cin = MultiFreqSignal::seeded(2.0, 0.15, {500, 750, 1000, 1500, 2000, 3000}, 3);
  auto ds = simulate_cstr(cin, p, 301, 1.0);
  Rhs f = [&](double t, const std::vector<double>& y, std::vector<double>& dy) {
    dy[0] = p.F_over_V * (cin(t) - y[0]) - p.k * y[0] * y[0];
  };
  std::vector<double> y{p.C0};
  std::vector<double> diff{0.0};
  for (std::size_t r = 1; r < ds.rows(); ++r) {
    rk4(f, r - 1.0, static_cast<double>(r), y, 1000);
    diff.push_back(ds.output("C")[r] - y[0]);
  }
  CHECK(rms(diff) < 1e-6);
}

TEST_CASE("adpfr zero field stays zero") {
  PfrParams p;
  p.nodes = 50;
  p.k = 0.0;
  auto ds = simulate_adpfr(constant(0.0), constant(0.0), p, 20, 0.5);
  for (const auto& ch : ds.outputs)
    for (double c : ch) CHECK(c == 0.0);
}

TEST_CASE("adpfr transport delay") {
  PfrParams p;
  p.nodes = 200;
  p.k = 0.0;
  p.D = 1e-4;
  const double v = 0.1;  // L/v = 10 s
  auto ds = simulate_adpfr(constant(1.0), constant(v), p, 61, 0.5);
  const auto& out = ds.outputs.back();
  CHECK(out[10] < 1e-3);   // t = 5 s, half the travel time
  CHECK(out[60] > 0.999);  // t = 30 s, three travel times
  // 50% crossing close to L/v
  std::size_t cross = 0;
  while (cross < out.size() && out[cross] < 0.5) ++cross;
  CHECK(std::abs(ds.times[cross] - 10.0) <= 1.0);
}

TEST_CASE("adpfr mass balance with k = 0") {
  PfrParams p;
  p.nodes = 400;
  p.k = 0.0;
  const double v = 0.05;
  const auto cin = MultiFreqSignal::seeded(1.0, 0.15, {50, 75, 100, 150, 200, 300}, 11);
  auto ds = simulate_adpfr(cin, constant(v), p, 121, 0.5);
  const double dz = p.L / (p.nodes - 1);
  auto mass = [&](std::size_t r) {
    double m = 0.0;
    for (int i = 0; i < p.nodes; ++i) m += (i == 0 || i == p.nodes - 1 ? 0.5 : 1.0) * dz * ds.outputs[i][r];
    return m;
  };
  // d/dt of mass equals inflow v C_in minus outflow v C(L); trapezoid in time
  double flux = 0.0;
  const auto& out = ds.outputs.back();
  for (std::size_t r = 1; r < ds.rows(); ++r) {
    flux += 0.25 * v * ((cin(ds.times[r]) - out[r]) + (cin(ds.times[r - 1]) - out[r - 1]));
  }
  const double dm = mass(ds.rows() - 1) - mass(0);
  CHECK(std::abs(dm - flux) < 0.01 * std::abs(dm));
}

TEST_CASE("adpfr grid refinement changes the outlet by under 1% RMS") {
  auto cin = MultiFreqSignal::seeded(1.0, 0.15, {50, 75, 100, 150, 200, 300}, 5);
  auto v = MultiFreqSignal::seeded(0.05, 0.0075, {50, 75, 100, 150, 200, 300}, 6);
  PfrParams coarse;
  coarse.nodes = 500;
  PfrParams fine;
  fine.nodes = 999;  // halves dz: (999-1) = 2 (500-1)
  auto a = simulate_adpfr(cin, v, coarse, 601, 0.5);
  auto b = simulate_adpfr(cin, v, fine, 601, 0.5);
  std::vector<double> diff(a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) diff[r] = a.outputs.back()[r] - b.outputs.back()[r];
  CHECK(rms(diff) < 0.01 * rms(b.outputs.back()));
}

TEST_CASE("adpfr profile stride keeps the outlet node") {
  PfrParams p;
  p.nodes = 101;
  p.profile_stride = 10;
  auto ds = simulate_adpfr(constant(1.0), constant(0.05), p, 3, 0.5);
  REQUIRE(ds.output_names.size() == 11);
  CHECK(ds.output_names.front() == "C@0");
  CHECK(ds.output_names.back() == "C@1");
}

TEST_CASE("flotation without transfer") {
  FlotationParams p;
  FlotationInputs in{constant(1.0), constant(4.0), constant(3.6), constant(0.0)};
  RateFn none = [](double, double) { return 0.0; };
  auto ds = simulate_flotation(in, p, none, 200, 1.0, {0.3, 0.7});
  for (double c : ds.output("C_f")) CHECK(c == doctest::Approx(0.7).epsilon(1e-12));

  // C_p' = a - b C_p with constant flows
  const double a = 1.0 * (p.rho_feed / p.rho_p) * (4.0 / p.V_p);
  const double b = 3.6 / p.V_p;
  double worst = 0.0;
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    const double ref = a / b + (0.3 - a / b) * std::exp(-b * ds.times[r]);
    worst = std::max(worst, std::abs(ds.output("C_p")[r] - ref));
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("flotation steady state") {
  FlotationParams p;
  FlotationInputs in{constant(1.0), constant(4.0), constant(3.6), constant(0.4)};
  auto ds = simulate_flotation(in, p, default_rate(p), 50, 1.0);
  const double a = 1.0 * (p.rho_feed / p.rho_p) * (4.0 / p.V_p);
  const double b = 3.6 / p.V_p;
  const double cp = a / (b + p.kappa / p.rho_p);
  const double R = p.kappa * cp * p.V_p;
  CHECK(ds.output("C_p")[0] == doctest::Approx(cp).epsilon(1e-8));
  CHECK(ds.output("C_f")[0] == doctest::Approx(R / (p.rho_f * 0.4)).epsilon(1e-8));
  CHECK(ds.output("C_f").back() == doctest::Approx(R / (p.rho_f * 0.4)).epsilon(1e-8));
  CHECK(ds.warnings == 0);
}

TEST_CASE("flotation clamps negative concentrations") {
  FlotationParams p;
  FlotationInputs in{constant(0.0), constant(4.0), constant(3.6), constant(0.4)};
  RateFn sink = [](double, double) { return 5.0; };  // removes material regardless of content
  auto ds = simulate_flotation(in, p, sink, 20, 1.0, {0.1, 0.1});
  CHECK(ds.warnings > 0);
  for (double c : ds.output("C_p")) CHECK(c >= 0.0);
}

TEST_CASE("dataset file round trip and determinism") {
  auto cin = MultiFreqSignal::seeded(2.0, 0.15, {500, 750, 1000, 1500, 2000, 3000}, 1);
  auto ds = simulate_cstr(cin, CstrParams{}, 100, 1.0);
  ds.set_split(70, 15, 15);
  CHECK_THROWS(ds.set_split(70, 15, 10));
  const auto dir = std::filesystem::temp_directory_path();
  write_dataset(dir / "dlf_ds_a.csv", ds);
  auto back = read_dataset(dir / "dlf_ds_a.csv");
  CHECK(back.system == "cstr");
  CHECK(back.n_train == 70);
  CHECK(back.n_test == 15);
  CHECK(back.times == ds.times);
  CHECK(back.inputs == ds.inputs);
  CHECK(back.outputs == ds.outputs);
  // regenerated from the same signal: identical bytes
  auto again = simulate_cstr(cin, CstrParams{}, 100, 1.0);
  again.set_split(70, 15, 15);
  write_dataset(dir / "dlf_ds_b.csv", again);
  CHECK(slurp(dir / "dlf_ds_a.csv") == slurp(dir / "dlf_ds_b.csv"));
  std::filesystem::remove(dir / "dlf_ds_a.csv");
  std::filesystem::remove(dir / "dlf_ds_b.csv");
}
