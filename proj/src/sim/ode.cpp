#include "dlf/sim/ode.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dlf::sim {

namespace {

// Dormand–Prince coefficients.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// b - b_hat
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

}  // namespace

double Dopri5::integrate(const Rhs& f, double t0, double t1, std::vector<double>& y, double h) {
  if (t1 <= t0) return h;
  const std::size_t n = y.size();
  std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), yt(n), ynew(n);
  f(t0, y, k1);

  auto err_norm = [&](const std::vector<double>& y0, const std::vector<double>& y1, const std::vector<double>& err) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sc = opt_.atol + opt_.rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
      s += (err[i] / sc) * (err[i] / sc);
    }
    return std::sqrt(s / static_cast<double>(std::max<std::size_t>(n, 1)));
  };

  if (h <= 0.0) h = opt_.h_init;
  if (h <= 0.0) {
    // Hairer's starting-step heuristic, simplified.
    double d0 = 0.0, d1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sc = opt_.atol + opt_.rtol * std::abs(y[i]);
      d0 += (y[i] / sc) * (y[i] / sc);
      d1 += (k1[i] / sc) * (k1[i] / sc);
    }
    d0 = std::sqrt(d0 / n);
    d1 = std::sqrt(d1 / n);
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h = std::min(h, t1 - t0);
  }
  if (opt_.h_max > 0.0) h = std::min(h, opt_.h_max);

  double t = t0;
  std::vector<double> err(n);
  long steps = 0;
  double last_h = h;
  while (t < t1) {
    if (++steps > opt_.max_steps) throw StepUnderflow("dopri5: too many steps");
    bool last = false;
    double hs = h;
    if (t + hs >= t1) {
      hs = t1 - t;
      last = true;
    }
    for (std::size_t i = 0; i < n; ++i) yt[i] = y[i] + hs * a21 * k1[i];
    f(t + c2 * hs, yt, k2);
    for (std::size_t i = 0; i < n; ++i) yt[i] = y[i] + hs * (a31 * k1[i] + a32 * k2[i]);
    f(t + c3 * hs, yt, k3);
    for (std::size_t i = 0; i < n; ++i) yt[i] = y[i] + hs * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    f(t + c4 * hs, yt, k4);
    for (std::size_t i = 0; i < n; ++i)
      yt[i] = y[i] + hs * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    f(t + c5 * hs, yt, k5);
    for (std::size_t i = 0; i < n; ++i)
      yt[i] = y[i] + hs * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    f(t + hs, yt, k6);
    for (std::size_t i = 0; i < n; ++i)
      ynew[i] = y[i] + hs * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
    f(t + hs, ynew, k7);
    for (std::size_t i = 0; i < n; ++i)
      err[i] = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
    const double en = err_norm(y, ynew, err);
    if (!std::isfinite(en)) {
      h = 0.25 * hs;
      ++stats_.rejected;
    } else if (en <= 1.0) {
      t = last ? t1 : t + hs;
      y.swap(ynew);
      k1.swap(k7);  // FSAL
      ++stats_.accepted;
      const double fac = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
      if (!last) last_h = hs;
      h = hs * fac;
    } else {
      ++stats_.rejected;
      h = hs * std::max(0.2, 0.9 * std::pow(en, -0.2));
    }
    if (opt_.h_max > 0.0) h = std::min(h, opt_.h_max);
    if (h < opt_.h_min && t < t1) {
      throw StepUnderflow("dopri5: step size underflow at t=" + std::to_string(t));
    }
  }
  return std::max(last_h, h);
}

void rk4(const Rhs& f, double t0, double t1, std::vector<double>& y, long steps) {
  const std::size_t n = y.size();
  const double h = (t1 - t0) / static_cast<double>(steps);
  std::vector<double> k1(n), k2(n), k3(n), k4(n), yt(n);
  for (long s = 0; s < steps; ++s) {
    const double t = t0 + s * h;
    f(t, y, k1);
    for (std::size_t i = 0; i < n; ++i) yt[i] = y[i] + 0.5 * h * k1[i];
    f(t + 0.5 * h, yt, k2);
    for (std::size_t i = 0; i < n; ++i) yt[i] = y[i] + 0.5 * h * k2[i];
    f(t + 0.5 * h, yt, k3);
    for (std::size_t i = 0; i < n; ++i) yt[i] = y[i] + h * k3[i];
    f(t + h, yt, k4);
    for (std::size_t i = 0; i < n; ++i) y[i] += h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  }
}

}  // namespace dlf::sim
