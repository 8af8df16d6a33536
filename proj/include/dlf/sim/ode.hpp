#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

namespace dlf::sim {

using Rhs = std::function<void(double t, const std::vector<double>& y, std::vector<double>& dydt)>;

struct Dopri5Options {
  double rtol = 1e-9;
  double atol = 1e-9;
  double h_init = 0.0;  // 0 = pick automatically
  double h_min = 1e-14;
  double h_max = 0.0;  // 0 = unbounded
  long max_steps = 10'000'000;
};

struct Dopri5Stats {
  long accepted = 0;
  long rejected = 0;
};

class StepUnderflow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dormand–Prince 5(4) with embedded error control. Integrates y from t0 to t1
/// in place and returns the last accepted step size so that consecutive calls
/// can continue smoothly.
class Dopri5 {
 public:
  explicit Dopri5(Dopri5Options opt = {}) : opt_(opt) {}

  double integrate(const Rhs& f, double t0, double t1, std::vector<double>& y, double h = 0.0);
  const Dopri5Stats& stats() const { return stats_; }

 private:
  Dopri5Options opt_;
  Dopri5Stats stats_;
};

/// Classical fixed-step RK4 from t0 to t1 with n steps.
void rk4(const Rhs& f, double t0, double t1, std::vector<double>& y, long n);

}  // namespace dlf::sim
