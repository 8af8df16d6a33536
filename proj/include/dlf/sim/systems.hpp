#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace dlf::sim {

/// offset + sum_n a_n sin(2 n pi t / T_n) + b_n cos(2 n pi t / T_n), n = 1..N.
struct MultiFreqSignal {
  struct Term {
    double a = 0.0;
    double b = 0.0;
    double period = 1.0;
  };
  double offset = 0.0;
  std::vector<Term> terms;

  double operator()(double t) const;
  /// offset minus the sum of |a_n| + |b_n|: a lower bound on the signal.
  double lower_bound() const;

  /// a_n, b_n ~ uniform(-scale/n, scale/n) from a seeded stream. Throws if the
  /// resulting signal can reach zero or below.
  static MultiFreqSignal seeded(double offset, double scale, std::vector<double> periods, std::uint64_t seed);
};

double multifreq(const MultiFreqSignal& s, double t);

/// Column-oriented time series with a temporal train/val/test split.
struct Dataset {
  std::string system;
  std::vector<double> times;
  std::vector<std::string> input_names;
  std::vector<std::vector<double>> inputs;
  std::vector<std::string> output_names;
  std::vector<std::vector<double>> outputs;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  std::size_t n_test = 0;
  long warnings = 0;  // e.g. clamped negative concentrations

  std::size_t rows() const { return times.size(); }
  const std::vector<double>& input(const std::string& name) const;
  const std::vector<double>& output(const std::string& name) const;
  void set_split(std::size_t train, std::size_t val, std::size_t test);
};

/// Delimited text: '# key=value' header lines, then a CSV header row and one row per sample.
void write_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset read_dataset(const std::filesystem::path& path);

struct CstrParams {
  double F_over_V = 0.2;  // 1/min
  double k = 0.32;        // m^3/(kmol min)
  double C0 = 1.05;       // kmol/m^3
};

/// dC/dt = F/V (C_in - C) - k C^2, sampled every dt_sample from t = 0.
Dataset simulate_cstr(const MultiFreqSignal& c_in, const CstrParams& p, std::size_t samples, double dt_sample,
                      double tol = 1e-9);

struct PfrParams {
  double L = 1.0;
  double D = 0.01;
  double k = 0.2;
  int nodes = 1000;
  double dt_internal = 0.01;
  int profile_stride = 1;  // store every n-th node (last node always kept)
};

/// Node coordinates z_i = i L / (nodes - 1).
std::vector<double> pfr_grid(const PfrParams& p);

/// Semi-discrete ADPFR right-hand side on the node grid (Danckwerts ghosts).
void pfr_rhs(const PfrParams& p, double c_in, double v, std::span<const double> C, std::span<double> dCdt);

/// Method of lines with the implicit trapezoidal rule. Output channels are
/// named "C@<z>" for the stored nodes.
Dataset simulate_adpfr(const MultiFreqSignal& c_in, const MultiFreqSignal& v, const PfrParams& p,
                       std::size_t samples, double dt_sample);

/// One implicit-trapezoid step of the ADPFR semi-discretization, in place.
/// Returns the number of Newton iterations used.
int pfr_trapezoid_step(const PfrParams& p, std::vector<double>& C, double t, double h,
                       const std::function<double(double)>& c_in, const std::function<double(double)>& v);

struct FlotationParams {
  double V_p = 24.86;
  double V_f = 5.0;
  double rho_feed = 1.003;
  double rho_p = 1.002;
  double rho_f = 1.20;
  double kappa = 0.02;  // 1/min, R_true = kappa * C_p * V_p
};

struct FlotationInputs {
  MultiFreqSignal C_feed;
  MultiFreqSignal Q_feed;
  MultiFreqSignal Q_t;
  MultiFreqSignal Q_c;
};

using RateFn = std::function<double(double C_p, double C_f)>;

/// dC_p/dt = C_feed rho_feed/rho_p Q_feed/V_p - Q_t/V_p C_p - R/(rho_p V_p)
/// dC_f/dt = -Q_c/V_f C_f + R/(rho_f V_f)
/// Starts from the steady state of the initial inputs unless init is given.
Dataset simulate_flotation(const FlotationInputs& in, const FlotationParams& p, const RateFn& rate,
                           std::size_t samples, double dt_sample, const std::vector<double>& init = {},
                           double tol = 1e-9);

RateFn default_rate(const FlotationParams& p);

}  // namespace dlf::sim
